#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "fusemf/error.hpp"

namespace fusemf {

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double stddev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

struct WilcoxonResult {
  std::size_t n = 0;         // non-zero differences
  double w_plus = 0.0;       // rank sum of positive differences
  double p_greater = 1.0;    // one-sided, alternative: after > before
  double p_less = 1.0;       // one-sided, alternative: after < before
};

/// Exact paired signed-rank test on after - before. Zero differences are
/// dropped; ties get midranks and the null distribution is enumerated over
/// those midranks.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> before, std::span<const double> after) {
  if (before.size() != after.size()) throw Error("wilcoxon: samples must be paired");
  std::vector<double> d;
  for (std::size_t i = 0; i < before.size(); ++i)
    if (after[i] - before[i] != 0.0) d.push_back(after[i] - before[i]);
  WilcoxonResult out;
  out.n = d.size();
  if (d.empty()) return out;

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  // doubled midranks keep everything integral
  std::vector<std::int64_t> rank2(d.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const auto r2 = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    i = j + 1;
  }
  std::int64_t observed2 = 0, total2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total2 += rank2[i];
    if (d[i] > 0.0) observed2 += rank2[i];
  }
  std::vector<double> ways(static_cast<std::size_t>(total2 + 1), 0.0);
  ways[0] = 1.0;
  for (auto r : rank2)
    for (std::int64_t s = total2; s >= r; --s) ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r)];
  const double all = std::pow(2.0, static_cast<double>(d.size()));
  double ge = 0.0, le = 0.0;
  for (std::int64_t s = 0; s <= total2; ++s) {
    if (s >= observed2) ge += ways[static_cast<std::size_t>(s)];
    if (s <= observed2) le += ways[static_cast<std::size_t>(s)];
  }
  out.w_plus = static_cast<double>(observed2) / 2.0;
  out.p_greater = ge / all;
  out.p_less = le / all;
  return out;
}

}  // namespace fusemf
