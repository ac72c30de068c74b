#pragma once

// Fusion graph: object types, inter-type relation matrices and same-type
// constraint matrices. Objects are addressed by their position (0..n-1)
// inside their type.

#include <Eigen/Dense>

#include <algorithm>
#include <compare>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fusemf/error.hpp"

namespace fusemf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct TypeId {
  std::size_t value = 0;
  friend auto operator<=>(const TypeId&, const TypeId&) = default;
};

struct ObjectType {
  TypeId id;
  std::string name;
  Index count = 0;
};

/// Directed relation R_ij between two distinct types. Unobserved cells are
/// stored as 0 and take part in the factorization as zeros; the mask is only
/// consulted by quality metrics and evaluation.
struct RelationMatrix {
  TypeId source;
  TypeId target;
  Matrix values;
  Mask observed;
  bool is_target = false;
};

/// Same-type constraint. Negative entries encode must-link, positive entries
/// cannot-link. `index` is the 1-based position t among the type's constraints.
struct ConstraintMatrix {
  TypeId type;
  int index = 1;
  Matrix values;
};

struct ValidationReport {
  bool connected = false;
  std::vector<std::string> unreachable_types;
  std::size_t target_count = 0;
  std::vector<std::string> dimension_errors;

  bool single_target() const { return target_count == 1; }
  bool ok() const { return connected && single_target() && dimension_errors.empty(); }

  std::string describe() const {
    std::ostringstream os;
    os << "connected: " << (connected ? "yes" : "no");
    if (!unreachable_types.empty()) {
      os << " (unreachable:";
      for (const auto& n : unreachable_types) os << ' ' << n;
      os << ')';
    }
    os << "\ntarget relations: " << target_count << (single_target() ? " (ok)" : " (expected exactly 1)");
    os << "\ndimensions: " << (dimension_errors.empty() ? "ok" : "mismatch");
    for (const auto& e : dimension_errors) os << "\n  " << e;
    os << "\nvalid: " << (ok() ? "yes" : "no") << '\n';
    return os.str();
  }
};

class FusionSchema {
 public:
  TypeId add_object_type(std::string name, Index count) {
    if (count < 1) throw ValidationError("object type '" + name + "': count must be positive");
    if (find_type(name)) throw ValidationError("duplicate object type '" + name + "'");
    TypeId id{types_.size()};
    types_.push_back(ObjectType{id, std::move(name), count});
    return id;
  }

  std::size_t add_relation(TypeId source, TypeId target, Matrix values, Mask observed,
                           bool is_target = false) {
    check_type(source);
    check_type(target);
    const auto& src = types_[source.value];
    const auto& dst = types_[target.value];
    if (source == target)
      throw ValidationError("relation on '" + src.name + "' relates a type to itself; use a constraint");
    if (values.rows() != src.count || values.cols() != dst.count)
      throw ValidationError("relation " + src.name + "->" + dst.name + ": expected " +
                            shape(src.count, dst.count) + ", got " + shape(values.rows(), values.cols()));
    if (observed.rows() != values.rows() || observed.cols() != values.cols())
      throw ValidationError("relation " + src.name + "->" + dst.name + ": mask shape mismatch");
    if (find_relation(source, target))
      throw ValidationError("duplicate relation " + src.name + "->" + dst.name);
    if (is_target) {
      if (target_index()) throw ValidationError("schema already has a target relation");
      for (Index p = 0; p < values.rows(); ++p)
        for (Index q = 0; q < values.cols(); ++q)
          if (observed(p, q) && (values(p, q) < 0.0 || values(p, q) > 1.0))
            throw ValidationError("target relation " + src.name + "->" + dst.name + ": value " +
                                  std::to_string(values(p, q)) + " outside [0,1]");
    }
    relations_.push_back(RelationMatrix{source, target, std::move(values), std::move(observed), is_target});
    return relations_.size() - 1;
  }

  /// Fully observed relation.
  std::size_t add_relation(TypeId source, TypeId target, Matrix values, bool is_target = false) {
    Mask all = Mask::Constant(values.rows(), values.cols(), true);
    return add_relation(source, target, std::move(values), std::move(all), is_target);
  }

  /// Returns the 1-based index t of the new constraint within its type.
  int add_constraint(TypeId type, Matrix values) {
    check_type(type);
    const auto& t = types_[type.value];
    if (values.rows() != t.count || values.cols() != t.count)
      throw ValidationError("constraint on '" + t.name + "': expected " + shape(t.count, t.count) + ", got " +
                            shape(values.rows(), values.cols()));
    const int index = constraint_count(type) + 1;
    constraints_.push_back(ConstraintMatrix{type, index, std::move(values)});
    return index;
  }

  /// Swaps in new data for an existing relation, re-checking its rules.
  void replace_relation_data(std::size_t index, Matrix values, Mask observed) {
    if (index >= relations_.size()) throw ValidationError("unknown relation index");
    RelationMatrix old = std::move(relations_[index]);
    relations_.erase(relations_.begin() + static_cast<std::ptrdiff_t>(index));
    try {
      add_relation(old.source, old.target, std::move(values), std::move(observed), old.is_target);
    } catch (...) {
      relations_.insert(relations_.begin() + static_cast<std::ptrdiff_t>(index), std::move(old));
      throw;
    }
    std::rotate(relations_.begin() + static_cast<std::ptrdiff_t>(index), relations_.end() - 1, relations_.end());
  }

  const std::vector<ObjectType>& types() const { return types_; }
  const std::vector<RelationMatrix>& relations() const { return relations_; }
  const std::vector<ConstraintMatrix>& constraints() const { return constraints_; }

  std::size_t type_count() const { return types_.size(); }
  const ObjectType& type(TypeId id) const {
    check_type(id);
    return types_[id.value];
  }
  Index count(TypeId id) const { return type(id).count; }

  std::optional<TypeId> find_type(std::string_view name) const {
    for (const auto& t : types_)
      if (t.name == name) return t.id;
    return std::nullopt;
  }
  TypeId type_id(std::string_view name) const {
    if (auto id = find_type(name)) return *id;
    throw ValidationError("unknown object type '" + std::string(name) + "'");
  }

  const RelationMatrix* find_relation(TypeId source, TypeId target) const {
    for (const auto& r : relations_)
      if (r.source == source && r.target == target) return &r;
    return nullptr;
  }

  std::optional<std::size_t> target_index() const {
    for (std::size_t i = 0; i < relations_.size(); ++i)
      if (relations_[i].is_target) return i;
    return std::nullopt;
  }
  const RelationMatrix& target() const {
    auto idx = target_index();
    if (!idx) throw ValidationError("schema has no target relation");
    return relations_[*idx];
  }

  /// t_i: number of constraint matrices attached to a type.
  int constraint_count(TypeId type) const {
    return static_cast<int>(std::count_if(constraints_.begin(), constraints_.end(),
                                          [&](const ConstraintMatrix& c) { return c.type == type; }));
  }
  int max_constraint_count() const {
    int m = 0;
    for (const auto& t : types_) m = std::max(m, constraint_count(t.id));
    return m;
  }

  /// Connectivity of the type graph, target uniqueness and matrix shapes.
  /// Pure: depends only on the schema contents.
  ValidationReport validate() const {
    ValidationReport report;
    const std::size_t r = types_.size();
    if (r > 0) {
      const std::size_t root = target_index() ? relations_[*target_index()].source.value : 0;
      std::vector<bool> seen(r, false);
      std::vector<std::size_t> stack{root};
      seen[root] = true;
      while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        for (const auto& rel : relations_) {
          std::size_t other = r;
          if (rel.source.value == cur) other = rel.target.value;
          if (rel.target.value == cur) other = rel.source.value;
          if (other < r && !seen[other]) {
            seen[other] = true;
            stack.push_back(other);
          }
        }
      }
      for (std::size_t i = 0; i < r; ++i)
        if (!seen[i]) report.unreachable_types.push_back(types_[i].name);
      report.connected = report.unreachable_types.empty();
    }
    report.target_count = static_cast<std::size_t>(
        std::count_if(relations_.begin(), relations_.end(), [](const auto& rel) { return rel.is_target; }));
    for (const auto& rel : relations_) {
      const auto& s = types_[rel.source.value];
      const auto& t = types_[rel.target.value];
      if (rel.source == rel.target) report.dimension_errors.push_back("self-relation on " + s.name);
      if (rel.values.rows() != s.count || rel.values.cols() != t.count)
        report.dimension_errors.push_back("relation " + s.name + "->" + t.name + " is " +
                                          shape(rel.values.rows(), rel.values.cols()));
    }
    for (const auto& c : constraints_) {
      const auto& t = types_[c.type.value];
      if (c.values.rows() != t.count || c.values.cols() != t.count)
        report.dimension_errors.push_back("constraint " + std::to_string(c.index) + " on " + t.name + " is " +
                                          shape(c.values.rows(), c.values.cols()));
    }
    return report;
  }

  /// Throws ValidationError carrying the report text unless the schema is usable.
  void require_valid() const {
    auto report = validate();
    if (!report.ok()) throw ValidationError("invalid schema:\n" + report.describe());
  }

 private:
  void check_type(TypeId id) const {
    if (id.value >= types_.size()) throw ValidationError("unknown object type id " + std::to_string(id.value));
  }
  static std::string shape(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

  std::vector<ObjectType> types_;
  std::vector<RelationMatrix> relations_;
  std::vector<ConstraintMatrix> constraints_;
};

}  // namespace fusemf
