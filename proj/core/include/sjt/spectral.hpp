#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sjt/junction_tree.hpp"
#include "sjt/labeled_tensor.hpp"
#include "sjt/model.hpp"

namespace sjt {

/// Anchor choices for one node: observed variables inside the node's
/// subtree (theta) and candidate sets outside it (theta_minus), each
/// rich enough to invert the hidden-separator transform.
struct NodePlan {
  std::vector<int> theta;                        // ascending ids; empty at the root
  std::vector<std::vector<int>> theta_minus;     // candidate sets, ascending ids
  long long tau = 1;                             // required rank: #states of the parent separator
  bool theta_ok = true;
  bool minus_ok = true;
  std::string note;                              // infeasibility reason, if any

  bool feasible() const { return theta_ok && minus_ok; }
};

struct ObservedSetPlan {
  std::vector<NodePlan> nodes;  // indexed by tree node

  bool feasible() const {
    for (const NodePlan& n : nodes)
      if (!n.feasible()) return false;
    return true;
  }
};

struct PlanOptions {
  int minus_candidates = 1;  // how many disjoint outside-anchor sets to gather
};

/// Choose anchor sets for every node: nearest observed variables first
/// (breadth-first, ties by variable id), growing each set until both its
/// state count and its structural rank estimate reach the separator's
/// state count. Leaves use their full observed remainder. Infeasible
/// nodes are reported in the plan rather than thrown.
ObservedSetPlan plan_observed_sets(const JunctionTree& tree, const PlanOptions& opts = {});

/// Generic-rank estimate of the map from a node's parent separator into
/// a set of observed variables inside (below) or outside its subtree,
/// computed from separator bottlenecks along the tree.
long long structural_rank_below(const JunctionTree& tree, int node, const std::vector<int>& theta);
long long structural_rank_outside(const JunctionTree& tree, int node, const std::vector<int>& theta);

/// Source of joint distributions over observed variable sets.
class MomentSource {
 public:
  virtual ~MomentSource() = default;
  /// Joint over the given variables (ascending ids), as a tensor labeled
  /// by them. Entries sum to one.
  virtual LabeledTensor moment(const std::vector<int>& var_ids) = 0;
};

/// Normalized co-occurrence counts from a sample set.
class EmpiricalMoments : public MomentSource {
 public:
  explicit EmpiricalMoments(const SampleSet& samples, const JunctionTree& tree);
  LabeledTensor moment(const std::vector<int>& var_ids) override;

 private:
  const SampleSet& samples_;
  const JunctionTree& tree_;
  std::map<int, int> column_of_;
};

/// Exact marginals of a ground-truth model; isolates the algorithm from
/// sampling noise in tests.
class PopulationMoments : public MomentSource {
 public:
  explicit PopulationMoments(const LatentJTModel& model) : model_(model) {}
  LabeledTensor moment(const std::vector<int>& var_ids) override;

 private:
  const LatentJTModel& model_;
  std::map<std::vector<int>, LabeledTensor> cache_;
};

struct LearnOptions {
  double rel_cutoff = 1e-10;            // relative singular-value cutoff for pseudo-inverses
  bool stack_minus_candidates = false;  // solve all outside-anchor candidates jointly
  bool force_projection = false;        // project even when the anchor space is already minimal
  const std::map<int, LabeledTensor>* fixed_projectors = nullptr;  // override per node (tests)
};

/// Learned transformed tensor of one node plus its projector.
struct NodeParams {
  LabeledTensor phat;
  std::optional<LabeledTensor> projector;
  Variable proj{-1, 0};            // synthetic projected mode (valid when projector is set)
  std::vector<int> theta;          // own anchors, ascending (empty at root)
  double residual = 0.0;           // Frobenius residual of the solved linear system

  bool projected() const { return projector.has_value(); }
  /// Variable ids the parent contracts against this node's message.
  ContractionSet interface_ids() const;
};

/// The learned spectral model: per-node transformed tensors and
/// projectors, with enough structure to run inference standalone.
struct ObservableParams {
  JunctionTree tree;
  ObservedSetPlan plan;
  std::vector<NodeParams> nodes;
  double rel_cutoff = 1e-10;
};

/// Run the moment／SVD estimation for every node. Throws
/// RankDeficiencyError (with the offending node and anchors in the
/// message) when an inversion is numerically rank-deficient.
ObservableParams learn(const JunctionTree& tree, const ObservedSetPlan& plan, MomentSource& moments,
                       const LearnOptions& opts = {});

/// One node's estimate from explicitly given outside-anchor candidates,
/// stacked into a joint least-squares system. `params_so_far` must hold
/// the node's children (for their projectors). A single candidate
/// reproduces the plain estimate exactly.
NodeParams estimate_node(const JunctionTree& tree, const ObservedSetPlan& plan, int node,
                         const std::vector<std::vector<int>>& minus_candidates, MomentSource& moments,
                         const std::vector<NodeParams>& params_so_far, const LearnOptions& opts = {});

/// Convenience wrapper returning only the transformed tensor.
LabeledTensor combine_minus_candidates(const JunctionTree& tree, const ObservedSetPlan& plan, int node,
                                       const std::vector<std::vector<int>>& minus_candidates,
                                       MomentSource& moments, const std::vector<NodeParams>& params_so_far,
                                       const LearnOptions& opts = {});

struct InferResult {
  double raw = 0.0;      // may dip slightly negative under sampling noise
  double clamped = 0.0;  // max(raw, 0)
};

/// Joint probability estimate of a full observed assignment under the
/// learned parameters.
InferResult infer(const ObservableParams& params, const std::map<int, int>& observed_assignment);

struct NodeDiagnostics {
  int node = -1;
  long long tau = 0;
  double sigma_tau_pair = 0.0;  // tau-th singular value of the anchor pair matricization
  double sigma_tau_f = 0.0;     // tau-th singular value of the (projected) anchor conditional
  int d = 0;                    // order of the node's embedded tensor
  int e = 0;                    // observed modes among them
};

/// Conditioning summary of a ground-truth model under a plan, plus the
/// value of the sample-size bound for a given accuracy/confidence.
struct Diagnostics {
  std::vector<NodeDiagnostics> nodes;
  double alpha = 0.0;
  double beta = 0.0;
  int d_max = 0;
  int e_max = 0;
  int k_hidden = 1;
  int k_observed = 1;
  int num_cliques = 0;

  double bound(double epsilon, double delta) const;
};

Diagnostics diagnostics(const LatentJTModel& model, const ObservedSetPlan& plan);

}  // namespace sjt
