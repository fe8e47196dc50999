#pragma once

// Test-only reference implementations, kept independent of the library's
// computation paths: contraction by direct nested summation, joint
// probabilities by exhaustive enumeration. Tests compare library output
// against these.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "sjt/labeled_tensor.hpp"
#include "sjt/model.hpp"

namespace oracle {

inline bool advance(std::vector<int>& idx, const std::vector<int>& dims) {
  for (int m = static_cast<int>(idx.size()) - 1; m >= 0; --m) {
    if (++idx[static_cast<size_t>(m)] < dims[static_cast<size_t>(m)]) return true;
    idx[static_cast<size_t>(m)] = 0;
  }
  return false;
}

// Contraction by direct nested summation over paired modes.
inline sjt::LabeledTensor multiply(const sjt::LabeledTensor& a, const sjt::LabeledTensor& b,
                                   const std::vector<int>& sigma) {
  std::map<int, int> mult;
  for (int id : sigma) ++mult[id];
  std::vector<int> ca, cb;  // contracted positions, paired in var order
  for (const auto& [id, m] : mult) {
    std::vector<int> pa = a.modes_of(id), pb = b.modes_of(id);
    for (int k = 0; k < m; ++k) {
      ca.push_back(pa[static_cast<size_t>(k)]);
      cb.push_back(pb[static_cast<size_t>(k)]);
    }
  }
  std::vector<int> sa, sb;  // survivors in original order
  for (int m = 0; m < a.order(); ++m)
    if (std::find(ca.begin(), ca.end(), m) == ca.end()) sa.push_back(m);
  for (int m = 0; m < b.order(); ++m)
    if (std::find(cb.begin(), cb.end(), m) == cb.end()) sb.push_back(m);

  std::vector<sjt::Variable> out_vars;
  std::vector<int> out_dims;
  for (int m : sa) {
    out_vars.push_back(a.labels()[static_cast<size_t>(m)].var);
    out_dims.push_back(a.dim(m));
  }
  for (int m : sb) {
    out_vars.push_back(b.labels()[static_cast<size_t>(m)].var);
    out_dims.push_back(b.dim(m));
  }
  sjt::LabeledTensor out(out_vars);
  std::vector<int> contracted_dims;
  for (int m : ca) contracted_dims.push_back(a.dim(m));

  std::vector<int> oidx(out_dims.size(), 0);
  std::vector<int> aidx(static_cast<size_t>(a.order()), 0), bidx(static_cast<size_t>(b.order()), 0);
  do {
    for (size_t k = 0; k < sa.size(); ++k) aidx[static_cast<size_t>(sa[k])] = oidx[k];
    for (size_t k = 0; k < sb.size(); ++k) bidx[static_cast<size_t>(sb[k])] = oidx[sa.size() + k];
    double sum = 0;
    std::vector<int> kidx(ca.size(), 0);
    do {
      for (size_t k = 0; k < ca.size(); ++k) {
        aidx[static_cast<size_t>(ca[k])] = kidx[k];
        bidx[static_cast<size_t>(cb[k])] = kidx[k];
      }
      sum += a.at(aidx) * b.at(bidx);
    } while (!kidx.empty() && advance(kidx, contracted_dims));
    out.at(oidx) = sum;
  } while (!oidx.empty() && advance(oidx, out_dims));
  if (oidx.empty()) {
    // scalar result: single accumulation ran once above
  }
  return out;
}

inline sjt::LabeledTensor random_tensor(const std::vector<sjt::Variable>& vars, std::mt19937_64& rng) {
  sjt::LabeledTensor t(vars);
  for (double& v : t.mutable_values()) v = sjt::uniform01(rng());
  return t;
}

// P(observed assignment) by full enumeration of the hidden variables,
// written against the raw clique tables.
inline double joint_by_enumeration(const sjt::LatentJTModel& model, const std::map<int, int>& observed) {
  const sjt::JunctionTree& tree = model.tree;
  std::vector<int> hidden = tree.hidden_vars();
  std::vector<int> dims;
  for (int id : hidden) dims.push_back(tree.var(id).card);
  std::vector<int> assignment(tree.variables.size(), 0);
  for (const auto& [id, s] : observed) assignment[static_cast<size_t>(id)] = s;
  std::vector<int> idx(hidden.size(), 0);
  double total = 0;
  do {
    for (size_t k = 0; k < hidden.size(); ++k) assignment[static_cast<size_t>(hidden[k])] = idx[k];
    double p = 1;
    for (size_t v = 0; v < tree.nodes.size(); ++v) {
      std::vector<int> local;
      for (int id : tree.nodes[v].clique) local.push_back(assignment[static_cast<size_t>(id)]);
      p *= model.table(static_cast<int>(v)).at(local);
    }
    total += p;
  } while (!idx.empty() && advance(idx, dims));
  return total;
}

// All observed assignments of a tree, as id->state maps.
inline std::vector<std::map<int, int>> observed_assignments(const sjt::JunctionTree& tree) {
  std::vector<int> obs = tree.observed_vars();
  std::vector<int> dims;
  for (int id : obs) dims.push_back(tree.var(id).card);
  std::vector<std::map<int, int>> out;
  std::vector<int> idx(obs.size(), 0);
  do {
    std::map<int, int> m;
    for (size_t k = 0; k < obs.size(); ++k) m[obs[k]] = idx[k];
    out.push_back(std::move(m));
  } while (!idx.empty() && advance(idx, dims));
  return out;
}

}  // namespace oracle
