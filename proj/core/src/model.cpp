#include "sjt/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sjt {

namespace {

std::vector<Variable> clique_vars(const JunctionTree& tree, int node) {
  std::vector<Variable> vars;
  for (int id : tree.nodes[static_cast<size_t>(node)].clique) vars.push_back(tree.var(id));
  return vars;
}

// Odometer over a dim vector; returns false when wrapped around.
bool advance(std::vector<int>& idx, const std::vector<int>& dims) {
  for (int m = static_cast<int>(idx.size()) - 1; m >= 0; --m) {
    if (++idx[static_cast<size_t>(m)] < dims[static_cast<size_t>(m)]) return true;
    idx[static_cast<size_t>(m)] = 0;
  }
  return false;
}

}  // namespace

double uniform01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

LatentJTModel random_model(const JunctionTree& tree, std::uint64_t seed) {
  if (!tree.rooted()) throw std::invalid_argument("random_model expects a rooted tree");
  std::mt19937_64 rng(seed);
  LatentJTModel model;
  model.tree = tree;
  model.potentials.resize(tree.nodes.size());
  for (size_t v = 0; v < tree.nodes.size(); ++v) {
    const JTNode& node = tree.nodes[v];
    LabeledTensor table(clique_vars(tree, static_cast<int>(v)));
    if (node.remainder.empty()) {
      std::fill(table.mutable_values().begin(), table.mutable_values().end(), 1.0);
    } else {
      // iterate separator assignments; each column is a flat Dirichlet draw
      std::vector<int> sep_dims, rem_dims;
      for (int id : node.separator) sep_dims.push_back(tree.var(id).card);
      for (int id : node.remainder) rem_dims.push_back(tree.var(id).card);
      std::vector<int> sep_idx(sep_dims.size(), 0), rem_idx(rem_dims.size(), 0);
      std::vector<int> full_idx(node.clique.size(), 0);
      auto fill_full = [&]() {
        for (size_t m = 0; m < node.clique.size(); ++m) {
          int id = node.clique[m];
          auto it = std::lower_bound(node.separator.begin(), node.separator.end(), id);
          if (it != node.separator.end() && *it == id)
            full_idx[m] = sep_idx[static_cast<size_t>(it - node.separator.begin())];
          else {
            auto rt = std::lower_bound(node.remainder.begin(), node.remainder.end(), id);
            full_idx[m] = rem_idx[static_cast<size_t>(rt - node.remainder.begin())];
          }
        }
      };
      do {
        std::fill(rem_idx.begin(), rem_idx.end(), 0);
        double total = 0;
        std::vector<double> draws;
        do {
          double u = uniform01(rng());
          double g = -std::log(1.0 - u);  // Exp(1)
          draws.push_back(g);
          total += g;
        } while (advance(rem_idx, rem_dims));
        std::fill(rem_idx.begin(), rem_idx.end(), 0);
        size_t k = 0;
        do {
          fill_full();
          table.at(full_idx) = draws[k++] / total;
        } while (advance(rem_idx, rem_dims));
      } while (advance(sep_idx, sep_dims));
    }
    model.potentials[v] = {static_cast<int>(v), std::move(table)};
  }
  return model;
}

SampleSet sample(const LatentJTModel& model, std::size_t n, std::uint64_t seed) {
  const JunctionTree& tree = model.tree;
  std::mt19937_64 rng(seed);
  SampleSet out;
  out.var_ids = tree.observed_vars();
  out.rows.reserve(n);
  std::vector<int> assignment(tree.variables.size(), -1);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(assignment.begin(), assignment.end(), -1);
    for (int v : tree.topo_order) {
      const JTNode& node = tree.nodes[static_cast<size_t>(v)];
      if (node.remainder.empty()) continue;
      const LabeledTensor& table = model.table(v);
      // condition on the already-drawn separator values
      std::map<int, int> fix;
      for (int id : node.separator) fix[id] = assignment[static_cast<size_t>(id)];
      LabeledTensor cond = fix.empty() ? table : fix_index(table, fix);
      double u = uniform01(rng());
      double acc = 0;
      std::size_t pick = cond.size() - 1;
      for (std::size_t k = 0; k < cond.size(); ++k) {
        acc += cond.values()[k];
        if (u < acc) {
          pick = k;
          break;
        }
      }
      // decode pick into remainder values (cond modes = remainder vars ascending)
      for (int m = static_cast<int>(cond.order()) - 1; m >= 0; --m) {
        int id = cond.labels()[static_cast<size_t>(m)].var.id;
        assignment[static_cast<size_t>(id)] = static_cast<int>(pick % static_cast<std::size_t>(cond.dim(m)));
        pick /= static_cast<std::size_t>(cond.dim(m));
      }
    }
    std::vector<int> row;
    row.reserve(out.var_ids.size());
    for (int id : out.var_ids) row.push_back(assignment[static_cast<size_t>(id)]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::map<int, int> embedding_counts(const JunctionTree& tree, int node) {
  const JTNode& nd = tree.nodes[static_cast<size_t>(node)];
  std::map<int, int> counts;
  if (nd.children.empty()) {
    // leaf tensors are the plain CPT
    for (int id : nd.clique) counts[id] = 1;
    return counts;
  }
  for (int id : nd.clique) counts[id] = 0;
  for (int id : nd.separator) ++counts[id];
  for (int c : nd.children)
    for (int id : tree.nodes[static_cast<size_t>(c)].separator) ++counts[id];
  return counts;
}

LabeledTensor embed_clique(const LatentJTModel& model, int node) {
  const JunctionTree& tree = model.tree;
  const std::map<int, int> counts = embedding_counts(tree, node);
  LabeledTensor table = model.table(node);
  std::map<int, int> dup;
  for (const auto& [id, d] : counts) {
    if (d == 0)
      table = sum_out(table, id);  // absent from every incident separator
    else if (d > 1)
      dup[id] = d;
  }
  if (dup.empty()) return table;
  return diag_embed(table, dup);
}

namespace {

// Message passing with an arbitrary clamp set. Every clique slices its
// clamped variables, then the free variables flow per the separator
// counts: duplicated modes gate child messages elementwise, unmatched
// remainder modes are summed.
double message_passing(const LatentJTModel& model, const std::map<int, int>& assignment) {
  const JunctionTree& tree = model.tree;
  auto clamped = [&](int id) { return assignment.count(id) > 0; };

  std::vector<LabeledTensor> messages(tree.nodes.size());
  for (auto it = tree.topo_order.rbegin(); it != tree.topo_order.rend(); ++it) {
    const int v = *it;
    const JTNode& node = tree.nodes[static_cast<size_t>(v)];
    std::map<int, int> fix;
    for (int id : node.clique)
      if (clamped(id)) fix[id] = assignment.at(id);
    LabeledTensor t = fix.empty() ? model.table(v) : fix_index(model.table(v), fix);

    // counts over the free variables only
    std::map<int, int> counts;
    for (int id : node.clique)
      if (!clamped(id)) counts[id] = 0;
    auto bump = [&](const std::vector<int>& sep) {
      for (int id : sep)
        if (!clamped(id)) ++counts[id];
    };
    bump(node.separator);
    for (int c : node.children) bump(tree.nodes[static_cast<size_t>(c)].separator);

    std::map<int, int> dup;
    for (const auto& [id, d] : counts) {
      if (d == 0)
        t = sum_out(t, id);
      else if (d > 1)
        dup[id] = d;
    }
    if (!dup.empty()) t = diag_embed(t, dup);

    for (int c : node.children) {
      ContractionSet sigma;
      for (int id : tree.nodes[static_cast<size_t>(c)].separator)
        if (!clamped(id)) sigma.push_back(id);
      t = multiply(t, messages[static_cast<size_t>(c)], sigma);
    }
    messages[static_cast<size_t>(v)] = std::move(t);
  }
  const LabeledTensor& rootmsg = messages[static_cast<size_t>(tree.root)];
  if (rootmsg.order() != 0) throw std::logic_error("root message failed to reduce to a scalar");
  return rootmsg.values()[0];
}

}  // namespace

double clamped_marginal(const LatentJTModel& model, const std::map<int, int>& assignment) {
  for (const auto& [id, state] : assignment) {
    if (id < 0 || id >= static_cast<int>(model.tree.variables.size()))
      throw std::invalid_argument("assignment references undeclared variable");
    if (state < 0 || state >= model.tree.variables[static_cast<size_t>(id)].card)
      throw std::out_of_range("assignment state out of range");
  }
  return message_passing(model, assignment);
}

double exact_marginal(const LatentJTModel& model, const std::map<int, int>& observed_assignment) {
  for (int id : model.tree.observed_vars())
    if (!observed_assignment.count(id))
      throw std::invalid_argument("assignment must cover every observed variable (missing " +
                                  model.tree.var_name(id) + ")");
  return clamped_marginal(model, observed_assignment);
}

double brute_force_joint(const LatentJTModel& model, const std::map<int, int>& observed_assignment) {
  const JunctionTree& tree = model.tree;
  std::vector<int> hidden = tree.hidden_vars();
  for (int id : tree.observed_vars())
    if (!observed_assignment.count(id))
      throw std::invalid_argument("assignment must cover every observed variable");
  long long space = tree.states(hidden);
  if (space > 10'000'000LL) throw std::invalid_argument("hidden state space too large to enumerate");

  std::vector<int> assignment(tree.variables.size(), 0);
  for (const auto& [id, s] : observed_assignment) assignment[static_cast<size_t>(id)] = s;

  std::vector<int> dims;
  for (int id : hidden) dims.push_back(tree.var(id).card);
  std::vector<int> idx(hidden.size(), 0);
  double total = 0;
  bool more = true;
  if (hidden.empty()) more = true;
  do {
    for (size_t k = 0; k < hidden.size(); ++k) assignment[static_cast<size_t>(hidden[k])] = idx[k];
    double p = 1;
    for (size_t v = 0; v < tree.nodes.size() && p != 0.0; ++v) {
      const std::vector<int>& clique = tree.nodes[v].clique;
      std::vector<int> local(clique.size());
      for (size_t m = 0; m < clique.size(); ++m) local[m] = assignment[static_cast<size_t>(clique[m])];
      p *= model.table(static_cast<int>(v)).at(local);
    }
    total += p;
    more = !hidden.empty() && advance(idx, dims);
  } while (more);
  return total;
}

LabeledTensor joint_marginal(const LatentJTModel& model, const std::vector<int>& var_ids) {
  std::vector<Variable> vars;
  for (int id : var_ids) vars.push_back(model.tree.var(id));
  LabeledTensor out(vars);
  std::vector<int> dims;
  for (const Variable& v : vars) dims.push_back(v.card);
  std::vector<int> idx(vars.size(), 0);
  if (vars.empty()) {
    out.mutable_values()[0] = 1.0;
    return out;
  }
  do {
    std::map<int, int> assignment;
    for (size_t k = 0; k < var_ids.size(); ++k) assignment[var_ids[k]] = idx[k];
    out.at(idx) = clamped_marginal(model, assignment);
  } while (advance(idx, dims));
  return out;
}

}  // namespace sjt
