#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sjt {

/// A discrete random variable: an opaque id plus its number of states.
/// Identity is the id alone; the cardinality travels with it so tensors
/// can be built without a registry lookup.
struct Variable {
  int id = -1;
  int card = 0;

  friend bool operator==(const Variable& a, const Variable& b) { return a.id == b.id; }
  friend bool operator!=(const Variable& a, const Variable& b) { return a.id != b.id; }
  friend bool operator<(const Variable& a, const Variable& b) { return a.id < b.id; }
};

/// One tensor mode. Modes are labeled by variables; a variable may label
/// several modes of the same tensor, distinguished by a dense occurrence
/// index (0, 1, ... per variable).
struct ModeLabel {
  Variable var;
  int occ = 0;

  friend bool operator==(const ModeLabel& a, const ModeLabel& b) {
    return a.var == b.var && a.occ == b.occ;
  }
};

/// Thrown when a (pseudo-)inversion meets a matricization whose numerical
/// rank falls below the required block size. Carries the singular values
/// so callers can report which anchor set went bad.
class RankDeficiencyError : public std::runtime_error {
 public:
  RankDeficiencyError(const std::string& what, std::vector<double> singular_values, int required)
      : std::runtime_error(what), singular_values(std::move(singular_values)), required_rank(required) {}
  std::vector<double> singular_values;
  int required_rank = 0;
};

/// Dense real tensor whose modes carry variable labels. Values are stored
/// row-major over the label order (last mode fastest). Filled at
/// construction (mutable_values exists for that); every operation below
/// is a pure function returning a new tensor, so tensors can be shared
/// across workers without synchronization.
class LabeledTensor {
 public:
  LabeledTensor() = default;

  /// Order-0 tensor holding a single value.
  static LabeledTensor scalar(double v);

  /// Build from a variable list (duplicates allowed; occurrences are
  /// assigned densely in order of appearance) and row-major values.
  LabeledTensor(const std::vector<Variable>& vars, std::vector<double> values);

  /// Same, but values default to zero.
  explicit LabeledTensor(const std::vector<Variable>& vars);

  int order() const { return static_cast<int>(labels_.size()); }
  const std::vector<ModeLabel>& labels() const { return labels_; }
  const std::vector<int>& dims() const { return dims_; }
  int dim(int mode) const { return dims_[static_cast<size_t>(mode)]; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  double at(const std::vector<int>& idx) const { return values_[offset(idx)]; }
  double& at(const std::vector<int>& idx) { return values_[offset(idx)]; }
  std::size_t offset(const std::vector<int>& idx) const;

  /// Mode positions of a variable, in increasing occurrence order.
  std::vector<int> modes_of(int var_id) const;
  bool has_var(int var_id) const;

  /// Number of occurrences of var_id in the label list.
  int multiplicity(int var_id) const;

  /// Distinct variables in first-appearance order.
  std::vector<Variable> distinct_vars() const;

 private:
  std::vector<ModeLabel> labels_;
  std::vector<int> dims_;
  std::vector<double> values_;
  std::vector<std::size_t> strides_;

  void init_meta(const std::vector<Variable>& vars);
  friend LabeledTensor permute_modes(const LabeledTensor&, const std::vector<int>&);
};

/// Multiset of variable ids to contract along; repeats mean multiplicity.
using ContractionSet = std::vector<int>;

/// Contract a and b along sigma. For each variable the k-th lowest
/// occurrence of a is paired with the k-th lowest of b; surviving modes
/// keep their order, a's first. Entries follow the nested-sum definition
/// of multi-mode tensor multiplication.
LabeledTensor multiply(const LabeledTensor& a, const LabeledTensor& b, const ContractionSet& sigma);

/// Identity tensor over sigma: 2K modes labeled {sigma, sigma}; its
/// block matricization is the identity matrix.
LabeledTensor identity_tensor(const std::vector<Variable>& sigma);

/// Mode-specific inverse: labels of f partition by variable into sigma
/// and omega; returns g with the same labels such that
/// multiply(f, g, omega) is equivalent to identity over the sigma block.
/// Computed as the pseudo-inverse of the (sigma x omega) matricization;
/// requires full row rank at the relative cutoff.
LabeledTensor invert(const LabeledTensor& f, const ContractionSet& omega, double rel_cutoff = 1e-10);

/// Repeat variables across extra modes with delta structure: a variable
/// with multiplicity d occupies d modes, entries are zero off the
/// generalized diagonal. Each key must label base exactly once.
LabeledTensor diag_embed(const LabeledTensor& base, const std::map<int, int>& multiplicities);

/// Slice every occurrence of each assigned variable at the given state.
LabeledTensor fix_index(const LabeledTensor& t, const std::map<int, int>& assignment);

/// Slice a single mode (by position) at the given state.
LabeledTensor fix_mode(const LabeledTensor& t, int mode, int state);

/// Sum over all occurrences of a variable (full marginalization of those
/// modes, each summed independently).
LabeledTensor sum_out(const LabeledTensor& t, int var_id);

/// Label-aligned equality: true iff the label multisets match and some
/// mode permutation aligning labels (duplicated labels of one variable
/// may permute among themselves) makes entries equal within tol.
bool equivalent(const LabeledTensor& a, const LabeledTensor& b, double tol = 1e-9);

/// Top-`rank` left singular vectors of the (row_vars x rest)
/// matricization, returned with labels {row_vars..., projected}.
LabeledTensor svd_projector(const LabeledTensor& t, const ContractionSet& row_vars, int rank,
                            Variable projected);

/// Singular values of the (row_vars x rest) matricization, descending.
std::vector<double> matricization_singular_values(const LabeledTensor& t, const ContractionSet& row_vars);

/// Reorder modes; perm[k] gives the old position of new mode k.
LabeledTensor permute_modes(const LabeledTensor& t, const std::vector<int>& perm);

std::string to_string(const LabeledTensor& t);

}  // namespace sjt
