#pragma once

// Block-structured linear algebra over a fusion schema.
//
// The factorizer works block by block. The dense assemblies below mirror the
// full block matrices and are used to cross-check the blockwise code paths.

#include <Eigen/Dense>

#include <algorithm>
#include <compare>
#include <map>
#include <span>
#include <vector>

#include "fusemf/schema.hpp"

namespace fusemf {

/// Ordered (row type, column type) pair naming one off-diagonal block.
struct BlockKey {
  TypeId row;
  TypeId col;
  friend auto operator<=>(const BlockKey&, const BlockKey&) = default;
};

struct BlockLayout {
  std::vector<Index> row_offsets;   // size r+1, prefix sums of n_i
  std::vector<Index> rank_offsets;  // size r+1, prefix sums of k_i

  static BlockLayout make(const FusionSchema& schema, std::span<const Index> ranks) {
    if (ranks.size() != schema.type_count()) throw ValidationError("rank vector length must equal the number of types");
    BlockLayout layout;
    layout.row_offsets.push_back(0);
    layout.rank_offsets.push_back(0);
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      if (ranks[i] < 1) throw ValidationError("ranks must be positive");
      layout.row_offsets.push_back(layout.row_offsets.back() + schema.types()[i].count);
      layout.rank_offsets.push_back(layout.rank_offsets.back() + ranks[i]);
    }
    return layout;
  }

  std::size_t type_count() const { return row_offsets.size() - 1; }
  Index total_rows() const { return row_offsets.back(); }
  Index total_rank() const { return rank_offsets.back(); }
  Index rows(std::size_t i) const { return row_offsets[i + 1] - row_offsets[i]; }
  Index rank(std::size_t i) const { return rank_offsets[i + 1] - rank_offsets[i]; }
};

struct SignSplit {
  Matrix pos;
  Matrix neg;
};

/// X = pos - neg with pos, neg >= 0 and disjoint supports.
inline SignSplit split_pos_neg(const Matrix& x) {
  return SignSplit{x.cwiseMax(0.0), (-x).cwiseMax(0.0)};
}

/// Relation blocks as seen by the factorization: every provided R_ij, plus
/// R_ji^T wherever only the opposite direction was provided. The key set is
/// therefore closed under transposition.
inline std::map<BlockKey, Matrix> relation_blocks(const FusionSchema& schema) {
  std::map<BlockKey, Matrix> blocks;
  for (const auto& rel : schema.relations()) blocks[{rel.source, rel.target}] = rel.values;
  for (const auto& rel : schema.relations())
    if (!blocks.contains({rel.target, rel.source})) blocks[{rel.target, rel.source}] = rel.values.transpose();
  return blocks;
}

/// Per type, the list of constraint matrices in index order.
inline std::vector<std::vector<Matrix>> constraints_by_type(const FusionSchema& schema) {
  std::vector<std::vector<Matrix>> out(schema.type_count());
  for (const auto& c : schema.constraints()) out[c.type.value].push_back(c.values);
  return out;
}

inline Matrix assemble_relation_block(const FusionSchema& schema, const BlockLayout& layout) {
  Matrix R = Matrix::Zero(layout.total_rows(), layout.total_rows());
  for (const auto& [key, block] : relation_blocks(schema)) {
    const auto i = key.row.value, j = key.col.value;
    R.block(layout.row_offsets[i], layout.row_offsets[j], layout.rows(i), layout.rows(j)) = block;
  }
  return R;
}

/// Block-diagonal Theta^(t), t >= 1. Types with fewer than t constraints
/// contribute a zero block.
inline Matrix assemble_constraint_block(const FusionSchema& schema, const BlockLayout& layout, int t) {
  if (t < 1) throw ValidationError("constraint index t must be >= 1");
  Matrix theta = Matrix::Zero(layout.total_rows(), layout.total_rows());
  for (const auto& c : schema.constraints()) {
    if (c.index != t) continue;
    const auto i = c.type.value;
    theta.block(layout.row_offsets[i], layout.row_offsets[i], layout.rows(i), layout.rows(i)) = c.values;
  }
  return theta;
}

inline Matrix assemble_factor_block(const BlockLayout& layout, const std::vector<Matrix>& G) {
  Matrix out = Matrix::Zero(layout.total_rows(), layout.total_rank());
  for (std::size_t i = 0; i < G.size(); ++i)
    out.block(layout.row_offsets[i], layout.rank_offsets[i], G[i].rows(), G[i].cols()) = G[i];
  return out;
}

inline Matrix assemble_core_block(const BlockLayout& layout, const std::map<BlockKey, Matrix>& S) {
  Matrix out = Matrix::Zero(layout.total_rank(), layout.total_rank());
  for (const auto& [key, block] : S)
    out.block(layout.rank_offsets[key.row.value], layout.rank_offsets[key.col.value], block.rows(), block.cols()) =
        block;
  return out;
}

/// Moore-Penrose pseudoinverse of a symmetric positive semi-definite matrix.
/// Eigenvalues below 1e-12 of the largest are treated as zero.
inline Matrix pinv_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const Vector& lambda = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(lambda.cwiseAbs().maxCoeff(), 0.0);
  Vector inv = Vector::Zero(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i)
    if (lambda(i) > cutoff) inv(i) = 1.0 / lambda(i);
  const Matrix& v = eig.eigenvectors();
  return v * inv.asDiagonal() * v.transpose();
}

/// (G^T G)^+ for one factor block.
inline Matrix gram_pinv(const Matrix& g) {
  const Matrix gram = g.transpose() * g;
  return pinv_psd(gram);
}

}  // namespace fusemf
