#include "sjt/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <sstream>

namespace sjt {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr long long kCapSat = 1LL << 60;

long long sat_mul(long long a, long long b) {
  if (a > kCapSat / std::max(1LL, b)) return kCapSat;
  return a * b;
}

std::vector<int> sorted_copy(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<int> set_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::string var_list(const JunctionTree& tree, const std::vector<int>& ids) {
  std::ostringstream os;
  os << "{";
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ",";
    os << tree.var_name(ids[i]);
  }
  os << "}";
  return os.str();
}

std::vector<int> tree_neighbors(const JunctionTree& tree, int v) {
  std::vector<int> out = tree.nodes[static_cast<size_t>(v)].children;
  if (tree.nodes[static_cast<size_t>(v)].parent >= 0) out.push_back(tree.nodes[static_cast<size_t>(v)].parent);
  return out;
}

// Capacity of the channel from the separator on edge (u,v) into the
// v-side of the tree, restricted to the given anchor variables. The
// anchors a clique contains are absorbed where first met; deeper ones
// pass through further separators. This matches the generic rank of the
// conditional from the separator to the anchors.
long long branch_capacity(const JunctionTree& tree, int u, int v, std::vector<int> remaining) {
  const long long limit = tree.states(tree.edge_separator(u, v));
  const std::vector<int>& clique = tree.nodes[static_cast<size_t>(v)].clique;
  std::vector<int> here, rest;
  for (int id : remaining) {
    if (std::binary_search(clique.begin(), clique.end(), id))
      here.push_back(id);
    else
      rest.push_back(id);
  }
  long long prod = tree.states(here);
  for (int w : tree_neighbors(tree, v)) {
    if (w == u) continue;
    prod = sat_mul(prod, branch_capacity(tree, v, w, rest));
  }
  return std::min(limit, prod);
}

}  // namespace

long long structural_rank_below(const JunctionTree& tree, int node, const std::vector<int>& theta) {
  long long tau_limit = tree.states(tree.nodes[static_cast<size_t>(node)].separator);
  if (tree.nodes[static_cast<size_t>(node)].parent < 0) tau_limit = kCapSat;
  long long prod = 1;
  for (int c : tree.nodes[static_cast<size_t>(node)].children)
    prod = sat_mul(prod, branch_capacity(tree, node, c, theta));
  return std::min(tau_limit, prod);
}

long long structural_rank_outside(const JunctionTree& tree, int node, const std::vector<int>& theta) {
  const int parent = tree.nodes[static_cast<size_t>(node)].parent;
  if (parent < 0) return 0;
  long long tau_limit = tree.states(tree.nodes[static_cast<size_t>(node)].separator);
  return std::min(tau_limit, branch_capacity(tree, node, parent, theta));
}

namespace {

// Observed variables ordered by tree distance from `start`, ties by id.
// `inside` restricts the walk to the subtree below `start` (excluding
// the start clique itself); otherwise the walk covers the rest of the
// tree through the parent.
std::vector<int> gather_candidates(const JunctionTree& tree, int start, bool inside) {
  std::set<int> banned;  // variables of the excluded region
  std::vector<int> region;
  if (inside) {
    region = tree.nodes[static_cast<size_t>(start)].children;
  } else {
    if (tree.nodes[static_cast<size_t>(start)].parent >= 0)
      region.push_back(tree.nodes[static_cast<size_t>(start)].parent);
    for (int v : tree.subtree(start))
      for (int id : tree.nodes[static_cast<size_t>(v)].clique) banned.insert(id);
  }
  std::vector<std::pair<int, int>> found;  // (depth, id)
  std::set<int> seen_vars;
  std::set<int> seen_nodes{start};
  std::deque<std::pair<int, int>> q;  // (node, depth)
  for (int v : region) q.emplace_back(v, 1);
  for (int v : region) seen_nodes.insert(v);
  while (!q.empty()) {
    auto [v, d] = q.front();
    q.pop_front();
    for (int id : tree.nodes[static_cast<size_t>(v)].clique) {
      if (!tree.observed(id) || seen_vars.count(id) || banned.count(id)) continue;
      seen_vars.insert(id);
      found.emplace_back(d, id);
    }
    for (int w : tree_neighbors(tree, v)) {
      if (seen_nodes.count(w)) continue;
      seen_nodes.insert(w);
      q.emplace_back(w, d + 1);
    }
  }
  std::stable_sort(found.begin(), found.end());
  std::vector<int> out;
  for (auto& [d, id] : found) out.push_back(id);
  return out;
}

}  // namespace

ObservedSetPlan plan_observed_sets(const JunctionTree& tree, const PlanOptions& opts) {
  if (!tree.rooted()) throw std::invalid_argument("plan_observed_sets expects a rooted tree");
  ObservedSetPlan plan;
  plan.nodes.resize(tree.nodes.size());
  for (size_t v = 0; v < tree.nodes.size(); ++v) {
    const JTNode& node = tree.nodes[v];
    NodePlan& np = plan.nodes[v];
    const bool leaf = node.children.empty();
    const bool is_root = node.parent < 0;
    np.tau = is_root ? 1 : tree.states(node.separator);

    if (!leaf) {
      // evidence can only enter through leaf remainders
      for (int id : node.remainder)
        if (tree.observed(id)) {
          np.theta_ok = false;
          np.note = "observed variable " + tree.var_name(id) + " is owned by a non-leaf node";
        }
    }
    if (is_root) continue;

    if (leaf) {
      // evidence is injected by clamping the remainder, so a leaf's
      // anchors are exactly its observed remainder
      for (int id : node.remainder)
        if (tree.observed(id)) np.theta.push_back(id);
      if (tree.states(np.theta) < np.tau) {
        np.theta_ok = false;
        np.note = "leaf anchors " + var_list(tree, np.theta) + " cover " + std::to_string(tree.states(np.theta)) +
                  " states, separator needs " + std::to_string(np.tau);
      }
    } else {
      std::vector<int> candidates = gather_candidates(tree, static_cast<int>(v), true);
      for (int id : candidates) {
        np.theta.push_back(id);
        std::sort(np.theta.begin(), np.theta.end());
        if (tree.states(np.theta) >= np.tau &&
            structural_rank_below(tree, static_cast<int>(v), np.theta) >= np.tau)
          break;
      }
      std::sort(np.theta.begin(), np.theta.end());
      if (tree.states(np.theta) < np.tau ||
          structural_rank_below(tree, static_cast<int>(v), np.theta) < np.tau) {
        np.theta_ok = false;
        np.note = "subtree anchors " + var_list(tree, np.theta) + " cannot reach rank " + std::to_string(np.tau);
      }
    }

    // outside anchors, one or more disjoint candidate sets
    std::vector<int> outside = gather_candidates(tree, static_cast<int>(v), false);
    std::set<int> used;
    for (int c = 0; c < opts.minus_candidates; ++c) {
      std::vector<int> cand;
      bool ok = false;
      for (int id : outside) {
        if (used.count(id)) continue;
        cand.push_back(id);
        std::sort(cand.begin(), cand.end());
        if (tree.states(cand) >= np.tau &&
            structural_rank_outside(tree, static_cast<int>(v), cand) >= np.tau) {
          ok = true;
          break;
        }
      }
      if (ok) {
        for (int id : cand) used.insert(id);
        np.theta_minus.push_back(sorted_copy(cand));
      } else if (c == 0) {
        np.minus_ok = false;
        if (!np.note.empty()) np.note += "; ";
        np.note += "outside anchors " + var_list(tree, cand) + " cannot reach rank " + std::to_string(np.tau);
        if (!cand.empty()) np.theta_minus.push_back(sorted_copy(cand));
        break;
      } else {
        break;  // fewer candidates than requested
      }
    }
  }
  return plan;
}

EmpiricalMoments::EmpiricalMoments(const SampleSet& samples, const JunctionTree& tree)
    : samples_(samples), tree_(tree) {
  if (samples.rows.empty()) throw std::invalid_argument("empty sample set");
  for (size_t c = 0; c < samples.var_ids.size(); ++c) column_of_[samples.var_ids[c]] = static_cast<int>(c);
}

LabeledTensor EmpiricalMoments::moment(const std::vector<int>& var_ids) {
  std::vector<Variable> vars;
  std::vector<int> cols;
  for (int id : var_ids) {
    auto it = column_of_.find(id);
    if (it == column_of_.end())
      throw std::invalid_argument("moment over unobserved variable " + tree_.var_name(id));
    vars.push_back(tree_.var(id));
    cols.push_back(it->second);
  }
  LabeledTensor t(vars);
  const double w = 1.0 / static_cast<double>(samples_.rows.size());
  std::vector<int> idx(var_ids.size());
  for (const std::vector<int>& row : samples_.rows) {
    for (size_t k = 0; k < cols.size(); ++k) idx[k] = row[static_cast<size_t>(cols[k])];
    t.at(idx) += w;
  }
  return t;
}

LabeledTensor PopulationMoments::moment(const std::vector<int>& var_ids) {
  auto it = cache_.find(var_ids);
  if (it != cache_.end()) return it->second;
  for (int id : var_ids)
    if (!model_.tree.observed(id))
      throw std::invalid_argument("moment over unobserved variable " + model_.tree.var_name(id));
  LabeledTensor t = joint_marginal(model_, var_ids);
  cache_.emplace(var_ids, t);
  return t;
}

ContractionSet NodeParams::interface_ids() const {
  if (projected()) return {proj.id};
  ContractionSet out;
  for (int id : theta) out.push_back(id);
  return out;
}

namespace {

// Matricization with the given variables as columns (canonical order on
// both blocks); returns the row mode positions for label bookkeeping.
RowMat matricize_by_cols(const LabeledTensor& t, const std::vector<int>& col_vars,
                         std::vector<int>* row_positions) {
  std::set<int> cols(col_vars.begin(), col_vars.end());
  std::vector<int> row_pos, col_pos;
  for (int m = 0; m < t.order(); ++m) {
    if (cols.count(t.labels()[static_cast<size_t>(m)].var.id))
      col_pos.push_back(m);
    else
      row_pos.push_back(m);
  }
  auto canon = [&](std::vector<int>& pos) {
    std::sort(pos.begin(), pos.end(), [&](int x, int y) {
      const ModeLabel& lx = t.labels()[static_cast<size_t>(x)];
      const ModeLabel& ly = t.labels()[static_cast<size_t>(y)];
      if (lx.var.id != ly.var.id) return lx.var.id < ly.var.id;
      return lx.occ < ly.occ;
    });
  };
  canon(row_pos);
  canon(col_pos);
  std::vector<int> perm = row_pos;
  perm.insert(perm.end(), col_pos.begin(), col_pos.end());
  LabeledTensor p = permute_modes(t, perm);
  std::size_t rows = 1, colsz = 1;
  for (size_t k = 0; k < row_pos.size(); ++k) rows *= static_cast<std::size_t>(p.dim(static_cast<int>(k)));
  for (size_t k = row_pos.size(); k < perm.size(); ++k) colsz *= static_cast<std::size_t>(p.dim(static_cast<int>(k)));
  if (row_positions) *row_positions = row_pos;
  RowMat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(colsz));
  m = Eigen::Map<const RowMat>(p.values().data(), m.rows(), m.cols());
  return m;
}

RowMat pseudo_inverse(const RowMat& m, double rel_cutoff, int required_rank, const std::string& context) {
  Eigen::JacobiSVD<RowMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double cutoff = rel_cutoff * (sv.size() > 0 ? sv(0) : 0.0);
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cutoff) ++rank;
  if (rank < required_rank) {
    std::vector<double> svs(sv.data(), sv.data() + sv.size());
    std::ostringstream os;
    os << context << ": numerical rank " << rank << " below required " << required_rank
       << "; singular values:";
    for (double s : svs) os << " " << s;
    throw RankDeficiencyError(os.str(), std::move(svs), required_rank);
  }
  Eigen::VectorXd inv = sv;
  for (Eigen::Index k = 0; k < inv.size(); ++k) inv(k) = sv(k) > cutoff ? 1.0 / sv(k) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

NodeParams estimate_node(const JunctionTree& tree, const ObservedSetPlan& plan, int node,
                         const std::vector<std::vector<int>>& minus_candidates, MomentSource& moments,
                         const std::vector<NodeParams>& params_so_far, const LearnOptions& opts) {
  const JTNode& nd = tree.nodes[static_cast<size_t>(node)];
  const NodePlan& np = plan.nodes[static_cast<size_t>(node)];
  if (node == tree.root) throw std::invalid_argument("the root has no outside anchors to combine");
  if (minus_candidates.empty()) throw std::invalid_argument("no outside-anchor candidates given");
  if (!np.theta_ok)
    throw std::invalid_argument("node " + std::to_string(node) + " has no feasible anchors: " + np.note);

  const long long tau_ll = np.tau;
  if (tau_ll > 1'000'000) throw std::invalid_argument("separator state space too large");
  const int tau = static_cast<int>(tau_ll);
  const long long theta_states = tree.states(np.theta);
  const std::string ctx = "node " + std::to_string(node) + ", anchors " + var_list(tree, np.theta);
  if (theta_states < tau)
    throw std::invalid_argument(ctx + ": anchor states " + std::to_string(theta_states) +
                                " below separator states " + std::to_string(tau));

  // pair moments, matricized with the outside anchors as columns
  std::vector<RowMat> pair_mats;
  Eigen::Index total_cols = 0;
  for (const std::vector<int>& mc : minus_candidates) {
    LabeledTensor pm = moments.moment(set_union(np.theta, mc));
    pair_mats.push_back(matricize_by_cols(pm, mc, nullptr));
    total_cols += pair_mats.back().cols();
  }
  RowMat pair_stack(static_cast<Eigen::Index>(theta_states), total_cols);
  {
    Eigen::Index at = 0;
    for (const RowMat& m : pair_mats) {
      pair_stack.middleCols(at, m.cols()) = m;
      at += m.cols();
    }
  }

  // projector, unless the anchor space is already minimal
  NodeParams out;
  out.theta = np.theta;
  const bool project = opts.force_projection || theta_states > tau_ll ||
                       (opts.fixed_projectors && opts.fixed_projectors->count(node));
  Variable proj{static_cast<int>(tree.variables.size()) + node, tau};
  RowMat b_stack;
  if (project) {
    if (opts.fixed_projectors && opts.fixed_projectors->count(node)) {
      out.projector = opts.fixed_projectors->at(node);
      proj.card = out.projector->labels().back().var.card;
    } else {
      std::vector<Variable> theta_vars;
      ContractionSet theta_ids;
      for (int id : np.theta) {
        theta_vars.push_back(tree.var(id));
        theta_ids.push_back(id);
      }
      // left singular basis of the stacked pair matricization
      Eigen::JacobiSVD<RowMat> svd(pair_stack, Eigen::ComputeThinU);
      RowMat u = svd.matrixU().leftCols(tau);
      std::vector<double> vals(static_cast<std::size_t>(u.size()));
      Eigen::Map<RowMat>(vals.data(), u.rows(), u.cols()) = u;
      theta_vars.push_back(proj);
      out.projector = LabeledTensor(theta_vars, std::move(vals));
    }
    out.proj = Variable{out.projector->labels().back().var.id, out.projector->labels().back().var.card};
    proj = out.proj;
    RowMat umat = matricize_by_cols(*out.projector, {proj.id}, nullptr);
    b_stack = umat.transpose() * pair_stack;
  } else {
    b_stack = pair_stack;
  }

  RowMat b_pinv = pseudo_inverse(b_stack, opts.rel_cutoff, static_cast<int>(b_stack.rows()), ctx);

  // top side: the moment over the children's anchors (or the node's own
  // for a leaf) against each outside candidate, children projected
  std::vector<RowMat> top_mats;
  std::vector<int> row_positions;
  LabeledTensor top_template;
  for (const std::vector<int>& mc : minus_candidates) {
    LabeledTensor top;
    if (nd.children.empty()) {
      top = moments.moment(set_union(np.theta, mc));
    } else {
      std::vector<int> all = mc;
      for (int c : nd.children) all = set_union(all, plan.nodes[static_cast<size_t>(c)].theta);
      top = moments.moment(sorted_copy(all));
      for (int c : nd.children) {
        const NodeParams& cp = params_so_far[static_cast<size_t>(c)];
        if (cp.projected()) top = multiply(top, *cp.projector, ContractionSet(cp.theta.begin(), cp.theta.end()));
      }
    }
    std::vector<int> rp;
    top_mats.push_back(matricize_by_cols(top, mc, &rp));
    if (row_positions.empty()) {
      row_positions = rp;
      top_template = top;
    }
  }
  RowMat top_stack(top_mats[0].rows(), total_cols);
  {
    Eigen::Index at = 0;
    for (const RowMat& m : top_mats) {
      top_stack.middleCols(at, m.cols()) = m;
      at += m.cols();
    }
  }

  // least-squares solve of X * B = T across the stacked candidates
  RowMat x = top_stack * b_pinv;
  out.residual = (x * b_stack - top_stack).norm();

  std::vector<Variable> out_vars;
  for (int p : row_positions) out_vars.push_back(top_template.labels()[static_cast<size_t>(p)].var);
  if (project) {
    out_vars.push_back(proj);
  } else {
    for (int id : np.theta) out_vars.push_back(tree.var(id));
  }
  std::vector<double> vals(static_cast<std::size_t>(x.size()));
  Eigen::Map<RowMat>(vals.data(), x.rows(), x.cols()) = x;
  out.phat = LabeledTensor(out_vars, std::move(vals));
  return out;
}

LabeledTensor combine_minus_candidates(const JunctionTree& tree, const ObservedSetPlan& plan, int node,
                                       const std::vector<std::vector<int>>& minus_candidates,
                                       MomentSource& moments, const std::vector<NodeParams>& params_so_far,
                                       const LearnOptions& opts) {
  return estimate_node(tree, plan, node, minus_candidates, moments, params_so_far, opts).phat;
}

ObservableParams learn(const JunctionTree& tree, const ObservedSetPlan& plan, MomentSource& moments,
                       const LearnOptions& opts) {
  if (!tree.rooted()) throw std::invalid_argument("learn expects a rooted tree");
  if (plan.nodes.size() != tree.nodes.size()) throw std::invalid_argument("plan does not match the tree");
  if (tree.nodes[static_cast<size_t>(tree.root)].children.empty())
    throw std::invalid_argument("a single-clique tree has no observable representation");

  ObservableParams params;
  params.tree = tree;
  params.plan = plan;
  params.rel_cutoff = opts.rel_cutoff;
  params.nodes.resize(tree.nodes.size());

  for (auto it = tree.topo_order.rbegin(); it != tree.topo_order.rend(); ++it) {
    const int v = *it;
    const JTNode& nd = tree.nodes[static_cast<size_t>(v)];
    const NodePlan& np = plan.nodes[static_cast<size_t>(v)];
    if (v == tree.root) {
      if (!np.theta_ok)
        throw std::invalid_argument("root is infeasible: " + np.note);
      std::vector<int> all;
      for (int c : nd.children) all = set_union(all, plan.nodes[static_cast<size_t>(c)].theta);
      LabeledTensor top = moments.moment(all);
      for (int c : nd.children) {
        const NodeParams& cp = params.nodes[static_cast<size_t>(c)];
        if (cp.projected()) top = multiply(top, *cp.projector, ContractionSet(cp.theta.begin(), cp.theta.end()));
      }
      NodeParams& rp = params.nodes[static_cast<size_t>(v)];
      rp.phat = std::move(top);
      continue;
    }
    if (!np.minus_ok || np.theta_minus.empty())
      throw std::invalid_argument("node " + std::to_string(v) + " lacks outside anchors: " + np.note);
    std::vector<std::vector<int>> candidates;
    if (opts.stack_minus_candidates)
      candidates = np.theta_minus;
    else
      candidates = {np.theta_minus.front()};
    params.nodes[static_cast<size_t>(v)] =
        estimate_node(tree, plan, v, candidates, moments, params.nodes, opts);
  }
  return params;
}

InferResult infer(const ObservableParams& params, const std::map<int, int>& observed_assignment) {
  const JunctionTree& tree = params.tree;
  for (int id : tree.observed_vars())
    if (!observed_assignment.count(id))
      throw std::invalid_argument("assignment must cover every observed variable (missing " +
                                  tree.var_name(id) + ")");
  for (const auto& [id, s] : observed_assignment)
    if (s < 0 || s >= tree.variables[static_cast<size_t>(id)].card)
      throw std::out_of_range("assignment state out of range for " + tree.var_name(id));

  std::vector<LabeledTensor> messages(tree.nodes.size());
  for (auto it = tree.topo_order.rbegin(); it != tree.topo_order.rend(); ++it) {
    const int v = *it;
    const JTNode& nd = tree.nodes[static_cast<size_t>(v)];
    const NodeParams& npar = params.nodes[static_cast<size_t>(v)];
    LabeledTensor t = npar.phat;
    if (nd.children.empty()) {
      // clamp the evidence side: the first occurrence of each anchor
      for (int id : npar.theta) {
        int mode = t.modes_of(id).front();
        t = fix_mode(t, mode, observed_assignment.at(id));
      }
    } else {
      for (int c : nd.children) {
        const NodeParams& cp = params.nodes[static_cast<size_t>(c)];
        t = multiply(t, messages[static_cast<size_t>(c)], cp.interface_ids());
      }
    }
    messages[static_cast<size_t>(v)] = std::move(t);
  }
  const LabeledTensor& rootmsg = messages[static_cast<size_t>(tree.root)];
  if (rootmsg.order() != 0) throw std::logic_error("root message failed to reduce to a scalar");
  InferResult r;
  r.raw = rootmsg.values()[0];
  r.clamped = std::max(0.0, r.raw);
  return r;
}

namespace {

double sigma_at(const std::vector<double>& descending, long long k) {
  if (k <= 0 || k > static_cast<long long>(descending.size())) return 0.0;
  return descending[static_cast<size_t>(k - 1)];
}

}  // namespace

double Diagnostics::bound(double epsilon, double delta) const {
  if (alpha <= 0 || beta <= 0) return std::numeric_limits<double>::infinity();
  const double kh = static_cast<double>(k_hidden);
  const double ko = static_cast<double>(k_observed);
  const double c = static_cast<double>(num_cliques);
  return std::pow(4.0 * kh * kh / (3.0 * beta * beta), d_max) * std::pow(ko, e_max) *
         std::log(c / delta) * c * c / (epsilon * epsilon * std::pow(alpha, 4));
}

Diagnostics diagnostics(const LatentJTModel& model, const ObservedSetPlan& plan) {
  const JunctionTree& tree = model.tree;
  Diagnostics d;
  d.num_cliques = static_cast<int>(tree.nodes.size());
  for (const VariableDecl& v : tree.variables) {
    if (v.observed)
      d.k_observed = std::max(d.k_observed, v.card);
    else
      d.k_hidden = std::max(d.k_hidden, v.card);
  }
  d.alpha = std::numeric_limits<double>::infinity();
  d.beta = std::numeric_limits<double>::infinity();

  for (size_t v = 0; v < tree.nodes.size(); ++v) {
    const JTNode& nd = tree.nodes[v];
    NodeDiagnostics ndg;
    ndg.node = static_cast<int>(v);
    const std::map<int, int> counts = embedding_counts(tree, static_cast<int>(v));
    for (const auto& [id, c] : counts) {
      ndg.d += c;
      if (tree.observed(id)) ndg.e += c;
    }
    d.d_max = std::max(d.d_max, ndg.d);
    d.e_max = std::max(d.e_max, ndg.e);

    if (static_cast<int>(v) != tree.root) {
      const NodePlan& np = plan.nodes[v];
      ndg.tau = np.tau;
      if (!np.theta.empty() && !np.theta_minus.empty()) {
        LabeledTensor pair = joint_marginal(model, set_union(np.theta, np.theta_minus.front()));
        ContractionSet theta_ids(np.theta.begin(), np.theta.end());
        std::vector<double> sv = matricization_singular_values(pair, theta_ids);
        ndg.sigma_tau_pair = sigma_at(sv, np.tau);

        // the anchor conditional, projected the way learning projects it
        LabeledTensor joint_ts = joint_marginal(model, set_union(np.theta, nd.separator));
        LabeledTensor psep = joint_marginal(model, nd.separator);
        LabeledTensor cond = joint_ts;
        {
          // divide by the separator marginal, column by column
          std::vector<int> idx(static_cast<size_t>(cond.order()), 0);
          std::vector<int> sep_pos;
          for (int id : nd.separator) sep_pos.push_back(cond.modes_of(id).front());
          const std::vector<int> dims = cond.dims();
          std::vector<int> sep_idx(nd.separator.size());
          for (std::size_t lin = 0; lin < cond.size(); ++lin) {
            std::size_t rem = lin;
            for (int m = cond.order() - 1; m >= 0; --m) {
              idx[static_cast<size_t>(m)] = static_cast<int>(rem % static_cast<std::size_t>(dims[static_cast<size_t>(m)]));
              rem /= static_cast<std::size_t>(dims[static_cast<size_t>(m)]);
            }
            for (size_t k = 0; k < sep_pos.size(); ++k) sep_idx[k] = idx[static_cast<size_t>(sep_pos[k])];
            double ps = psep.at(sep_idx);
            cond.mutable_values()[lin] = ps > 0 ? cond.values()[lin] / ps : 0.0;
          }
        }
        long long theta_states = tree.states(np.theta);
        LabeledTensor f = cond;
        if (theta_states > np.tau && np.tau <= 1'000'000) {
          Variable proj{static_cast<int>(tree.variables.size()) + static_cast<int>(v),
                        static_cast<int>(np.tau)};
          LabeledTensor u = svd_projector(pair, theta_ids, static_cast<int>(np.tau), proj);
          f = multiply(cond, u, theta_ids);
        }
        ContractionSet sep_ids(nd.separator.begin(), nd.separator.end());
        std::vector<double> fsv = matricization_singular_values(f, sep_ids);
        ndg.sigma_tau_f = sigma_at(fsv, np.tau);

        d.alpha = std::min(d.alpha, ndg.sigma_tau_pair);
        d.beta = std::min(d.beta, ndg.sigma_tau_f);
      } else {
        d.alpha = 0;
        d.beta = 0;
      }
    }
    d.nodes.push_back(ndg);
  }
  if (!std::isfinite(d.alpha)) d.alpha = 0;
  if (!std::isfinite(d.beta)) d.beta = 0;
  return d;
}

}  // namespace sjt
