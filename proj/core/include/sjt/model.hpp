#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "sjt/junction_tree.hpp"
#include "sjt/labeled_tensor.hpp"

namespace sjt {

/// Conditional table P(remainder | separator) of one clique node. Modes
/// follow the clique's variables in ascending id order; for every fixed
/// separator assignment the entries sum over the remainder to one.
struct CliquePotential {
  int node = -1;
  LabeledTensor table;
};

/// A fully parameterized latent junction-tree model: ground truth for
/// sampling and exact inference.
struct LatentJTModel {
  JunctionTree tree;
  std::vector<CliquePotential> potentials;  // one per node, same order

  const LabeledTensor& table(int node) const { return potentials[static_cast<size_t>(node)].table; }
};

/// Observed-variable dataset: ids (ascending) and one row of state
/// indices per sample.
struct SampleSet {
  std::vector<int> var_ids;
  std::vector<std::vector<int>> rows;

  std::size_t size() const { return rows.size(); }
};

/// Deterministic uniform in [0,1) from a 64-bit generator, independent
/// of any library distribution implementation.
double uniform01(std::uint64_t bits);

/// Draw each conditional column from the flat Dirichlet, deterministically
/// from the seed. Duplicated nodes introduced by normalization (empty
/// remainder) get all-ones tables.
LatentJTModel random_model(const JunctionTree& tree, std::uint64_t seed);

/// Ancestral sampling down the rooted tree; returns observed values only.
SampleSet sample(const LatentJTModel& model, std::size_t n, std::uint64_t seed);

/// Structural tensor embedding of one clique: each variable occupies as
/// many modes as it has memberships across the incident separators
/// (parent and children); variables absent from every incident separator
/// are summed out locally.
LabeledTensor embed_clique(const LatentJTModel& model, int node);

/// Per-variable mode counts used by embed_clique (parent separator plus
/// child separators; leaves use their plain CPT so every clique variable
/// counts at least once there).
std::map<int, int> embedding_counts(const JunctionTree& tree, int node);

/// P(assigned = values): clamp any subset of variables (hidden or
/// observed), sum out the rest by tensor message passing.
double clamped_marginal(const LatentJTModel& model, const std::map<int, int>& assignment);

/// P(O = o) by tensor message passing; the assignment must cover every
/// observed variable.
double exact_marginal(const LatentJTModel& model, const std::map<int, int>& observed_assignment);

/// P(O = o) by direct enumeration over the hidden state space; the
/// reference oracle. Guarded: hidden configurations must not exceed 1e7.
double brute_force_joint(const LatentJTModel& model, const std::map<int, int>& observed_assignment);

/// Joint marginal over an arbitrary variable subset, via one
/// clamped_marginal call per assignment of the subset.
LabeledTensor joint_marginal(const LatentJTModel& model, const std::vector<int>& var_ids);

}  // namespace sjt
