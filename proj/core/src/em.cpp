#include "sjt/em.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace sjt {

namespace {

// Flat-array inference engine compiled once per (tree, sample layout).
// Messages and beliefs live in preallocated buffers indexed by the
// hidden part of each clique; observed coordinates become a per-sample
// base offset into the CPT. This keeps the per-sample E-step free of
// heap traffic, which dominates EM cost on large N.
struct Engine {
  struct Node {
    std::vector<int> hidden_dims;
    std::size_t hidden_size = 1;
    std::vector<std::size_t> hidden_offset;     // hidden entry -> CPT offset (observed part excluded)
    std::vector<std::pair<int, std::size_t>> obs_cols;  // (sample column, CPT stride)
    std::vector<int> up_index;                  // hidden entry -> parent separator bin
    std::size_t up_size = 1;
    std::vector<std::vector<int>> child_index;  // per child: hidden entry -> child separator bin
    std::vector<int> children;
    // scratch
    std::vector<double> red, up, down, work;
  };

  const JunctionTree* tree = nullptr;
  std::vector<Node> nodes;
  std::vector<int> rev_topo;

  Engine(const JunctionTree& t, const std::vector<int>& sample_vars) : tree(&t) {
    std::map<int, int> col_of;
    for (size_t c = 0; c < sample_vars.size(); ++c) col_of[sample_vars[c]] = static_cast<int>(c);
    nodes.resize(t.nodes.size());
    for (size_t v = 0; v < t.nodes.size(); ++v) {
      const JTNode& jn = t.nodes[v];
      Node& n = nodes[v];
      n.children = jn.children;
      const std::vector<int>& clique = jn.clique;
      // strides of the canonical (ascending-id) CPT layout
      std::vector<std::size_t> stride(clique.size(), 1);
      for (int m = static_cast<int>(clique.size()) - 2; m >= 0; --m)
        stride[static_cast<size_t>(m)] =
            stride[static_cast<size_t>(m) + 1] * static_cast<std::size_t>(t.var(clique[static_cast<size_t>(m) + 1]).card);
      std::vector<int> hidden_pos;
      for (size_t m = 0; m < clique.size(); ++m) {
        if (t.observed(clique[m]))
          n.obs_cols.emplace_back(col_of.at(clique[m]), stride[m]);
        else {
          hidden_pos.push_back(static_cast<int>(m));
          n.hidden_dims.push_back(t.var(clique[m]).card);
        }
      }
      for (int d : n.hidden_dims) n.hidden_size *= static_cast<std::size_t>(d);
      n.hidden_offset.resize(n.hidden_size);
      // hidden separator layouts (ascending ids, consistent everywhere)
      auto hidden_of = [&](const std::vector<int>& ids) {
        std::vector<int> out;
        for (int id : ids)
          if (!t.observed(id)) out.push_back(id);
        return out;
      };
      std::vector<int> sep_h = hidden_of(jn.separator);
      for (int id : sep_h) n.up_size *= static_cast<std::size_t>(t.var(id).card);
      n.up_index.resize(n.hidden_size);
      n.child_index.resize(jn.children.size());
      std::vector<std::vector<int>> child_sep_h;
      for (size_t ci = 0; ci < jn.children.size(); ++ci) {
        child_sep_h.push_back(hidden_of(t.nodes[static_cast<size_t>(jn.children[ci])].separator));
        n.child_index[ci].resize(n.hidden_size);
      }
      // enumerate hidden assignments of the clique
      std::vector<int> idx(hidden_pos.size(), 0);
      for (std::size_t h = 0; h < n.hidden_size; ++h) {
        std::size_t off = 0;
        for (size_t k = 0; k < hidden_pos.size(); ++k)
          off += static_cast<std::size_t>(idx[k]) * stride[static_cast<size_t>(hidden_pos[k])];
        n.hidden_offset[h] = off;
        auto bin_of = [&](const std::vector<int>& ids) {
          int bin = 0;
          for (int id : ids) {
            size_t k = 0;
            while (clique[static_cast<size_t>(hidden_pos[k])] != id) ++k;
            bin = bin * t.var(id).card + idx[k];
          }
          return bin;
        };
        n.up_index[h] = bin_of(sep_h);
        for (size_t ci = 0; ci < jn.children.size(); ++ci) n.child_index[ci][h] = bin_of(child_sep_h[ci]);
        for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
          if (++idx[static_cast<size_t>(k)] < n.hidden_dims[static_cast<size_t>(k)]) break;
          idx[static_cast<size_t>(k)] = 0;
        }
      }
      n.red.resize(n.hidden_size);
      n.work.resize(n.hidden_size);
      n.up.assign(n.up_size, 0.0);
      n.down.assign(n.up_size, 0.0);
    }
    rev_topo.assign(t.topo_order.rbegin(), t.topo_order.rend());
  }

  // Collect pass; returns P(evidence). Leaves n.red and n.work (reduced
  // CPT and reduced CPT times child messages) filled for the sample.
  double upward(const std::vector<const double*>& tables, const std::vector<int>& row) {
    for (int v : rev_topo) {
      Node& n = nodes[static_cast<size_t>(v)];
      std::size_t base = 0;
      for (const auto& [col, stride] : n.obs_cols)
        base += static_cast<std::size_t>(row[static_cast<size_t>(col)]) * stride;
      const double* tab = tables[static_cast<size_t>(v)];
      for (std::size_t h = 0; h < n.hidden_size; ++h) {
        double p = tab[base + n.hidden_offset[h]];
        n.red[h] = p;
        for (size_t ci = 0; ci < n.children.size(); ++ci)
          p *= nodes[static_cast<size_t>(n.children[ci])].up[static_cast<size_t>(n.child_index[ci][h])];
        n.work[h] = p;
      }
      std::fill(n.up.begin(), n.up.end(), 0.0);
      for (std::size_t h = 0; h < n.hidden_size; ++h) n.up[static_cast<size_t>(n.up_index[h])] += n.work[h];
    }
    return nodes[static_cast<size_t>(tree->root)].up[0];
  }

  // Distribute pass + weighted count accumulation. Must follow upward()
  // on the same sample.
  void accumulate(const std::vector<int>& row, double weight, double p_evidence,
                  std::vector<std::vector<double>>& counts) {
    const double inv_p = weight / p_evidence;
    for (int v : tree->topo_order) {
      Node& n = nodes[static_cast<size_t>(v)];
      if (v == tree->root) std::fill(n.down.begin(), n.down.end(), 1.0);
      std::size_t base = 0;
      for (const auto& [col, stride] : n.obs_cols)
        base += static_cast<std::size_t>(row[static_cast<size_t>(col)]) * stride;
      std::vector<double>& cnt = counts[static_cast<size_t>(v)];
      for (std::size_t h = 0; h < n.hidden_size; ++h) {
        const double belief = n.work[h] * n.down[static_cast<size_t>(n.up_index[h])];
        cnt[base + n.hidden_offset[h]] += belief * inv_p;
      }
      // messages to children: product of everything at this node except
      // the child's own upward message
      for (size_t ci = 0; ci < n.children.size(); ++ci) {
        Node& child = nodes[static_cast<size_t>(n.children[ci])];
        std::fill(child.down.begin(), child.down.end(), 0.0);
        for (std::size_t h = 0; h < n.hidden_size; ++h) {
          double p = n.red[h] * n.down[static_cast<size_t>(n.up_index[h])];
          for (size_t cj = 0; cj < n.children.size(); ++cj) {
            if (cj == ci) continue;
            p *= nodes[static_cast<size_t>(n.children[cj])].up[static_cast<size_t>(n.child_index[cj][h])];
          }
          child.down[static_cast<size_t>(n.child_index[ci][h])] += p;
        }
      }
    }
  }
};

std::vector<const double*> table_pointers(const LatentJTModel& m) {
  std::vector<const double*> ptrs;
  for (const CliquePotential& p : m.potentials) ptrs.push_back(p.table.values().data());
  return ptrs;
}

// Expected counts -> conditional tables. Dead columns are floored to
// uniform; cell_floor > 0 additionally smooths every cell (the online
// variant needs it, since early minibatches would otherwise zero out
// configurations that only appear later).
void m_step(const JunctionTree& tree, const std::vector<std::vector<double>>& counts, LatentJTModel& model,
            double cell_floor = 0.0) {
  for (size_t v = 0; v < tree.nodes.size(); ++v) {
    const JTNode& jn = tree.nodes[v];
    LabeledTensor& table = model.potentials[v].table;
    std::vector<double>& vals = table.mutable_values();
    // remainder block is contiguous under a (separator, remainder) walk;
    // iterate columns via odometer over separator values
    std::vector<int> sep_dims, rem_dims;
    std::vector<size_t> sep_pos, rem_pos;
    for (size_t m = 0; m < jn.clique.size(); ++m) {
      int id = jn.clique[m];
      if (std::binary_search(jn.separator.begin(), jn.separator.end(), id)) {
        sep_dims.push_back(tree.var(id).card);
        sep_pos.push_back(m);
      } else {
        rem_dims.push_back(tree.var(id).card);
        rem_pos.push_back(m);
      }
    }
    std::vector<std::size_t> stride(jn.clique.size(), 1);
    for (int m = static_cast<int>(jn.clique.size()) - 2; m >= 0; --m)
      stride[static_cast<size_t>(m)] =
          stride[static_cast<size_t>(m) + 1] * static_cast<std::size_t>(tree.var(jn.clique[static_cast<size_t>(m) + 1]).card);
    std::vector<int> sep_idx(sep_dims.size(), 0);
    std::vector<int> rem_idx(rem_dims.size(), 0);
    bool more_sep = true;
    while (more_sep) {
      std::size_t sep_off = 0;
      for (size_t k = 0; k < sep_pos.size(); ++k) sep_off += static_cast<std::size_t>(sep_idx[k]) * stride[sep_pos[k]];
      double total = 0;
      std::fill(rem_idx.begin(), rem_idx.end(), 0);
      bool more = true;
      while (more) {
        std::size_t off = sep_off;
        for (size_t k = 0; k < rem_pos.size(); ++k) off += static_cast<std::size_t>(rem_idx[k]) * stride[rem_pos[k]];
        total += counts[v][off];
        more = false;
        for (int k = static_cast<int>(rem_idx.size()) - 1; k >= 0; --k) {
          if (++rem_idx[static_cast<size_t>(k)] < rem_dims[static_cast<size_t>(k)]) {
            more = true;
            break;
          }
          rem_idx[static_cast<size_t>(k)] = 0;
        }
      }
      const bool dead = total <= 0;
      const double floor = dead ? 1e-9 : cell_floor;
      std::size_t rem_count = 1;
      for (int d : rem_dims) rem_count *= static_cast<std::size_t>(d);
      const double denom = total + floor * static_cast<double>(rem_count);
      std::fill(rem_idx.begin(), rem_idx.end(), 0);
      more = true;
      while (more) {
        std::size_t off = sep_off;
        for (size_t k = 0; k < rem_pos.size(); ++k) off += static_cast<std::size_t>(rem_idx[k]) * stride[rem_pos[k]];
        vals[off] = (counts[v][off] + floor) / denom;
        more = false;
        for (int k = static_cast<int>(rem_idx.size()) - 1; k >= 0; --k) {
          if (++rem_idx[static_cast<size_t>(k)] < rem_dims[static_cast<size_t>(k)]) {
            more = true;
            break;
          }
          rem_idx[static_cast<size_t>(k)] = 0;
        }
      }
      more_sep = false;
      for (int k = static_cast<int>(sep_idx.size()) - 1; k >= 0; --k) {
        if (++sep_idx[static_cast<size_t>(k)] < sep_dims[static_cast<size_t>(k)]) {
          more_sep = true;
          break;
        }
        sep_idx[static_cast<size_t>(k)] = 0;
      }
    }
  }
}

std::map<std::vector<int>, double> dedupe(const SampleSet& samples) {
  std::map<std::vector<int>, double> uniq;
  for (const auto& row : samples.rows) uniq[row] += 1.0;
  return uniq;
}

}  // namespace

double log_likelihood(const LatentJTModel& model, const SampleSet& samples) {
  Engine eng(model.tree, samples.var_ids);
  auto tables = table_pointers(model);
  double ll = 0;
  for (const auto& [row, w] : dedupe(samples)) {
    double p = eng.upward(tables, row);
    ll += w * std::log(std::max(p, 1e-300));
  }
  return ll;
}

TrainResult em_train(const JunctionTree& tree, const SampleSet& samples, const EMConfig& cfg) {
  if (samples.rows.empty()) throw std::invalid_argument("empty sample set");
  if (cfg.restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  if (cfg.tolerance <= 0) throw std::invalid_argument("tolerance must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  Engine eng(tree, samples.var_ids);
  const auto uniq = dedupe(samples);

  TrainResult best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    LatentJTModel model = random_model(tree, cfg.seed + static_cast<std::uint64_t>(r));
    std::vector<std::vector<double>> counts(tree.nodes.size());
    for (size_t v = 0; v < tree.nodes.size(); ++v) counts[v].assign(model.table(static_cast<int>(v)).size(), 0.0);
    std::vector<double> trace;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      for (auto& c : counts) std::fill(c.begin(), c.end(), 0.0);
      auto tables = table_pointers(model);
      double ll = 0;
      for (const auto& [row, w] : uniq) {
        double p = eng.upward(tables, row);
        ll += w * std::log(std::max(p, 1e-300));
        if (p > 0) eng.accumulate(row, w, p, counts);
      }
      trace.push_back(ll);
      if (it > 0) {
        const double prev = trace[static_cast<size_t>(it) - 1];
        const double denom = 0.5 * (std::abs(ll) + std::abs(prev));
        if (denom == 0 || std::abs(ll - prev) / denom <= cfg.tolerance) break;
      }
      if (it + 1 < cfg.max_iterations) m_step(tree, counts, model);
    }
    if (trace.back() > best_ll) {
      best_ll = trace.back();
      best.model = std::move(model);
      best.log_likelihood = std::move(trace);
      best.selected_restart = r;
    }
  }
  best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

TrainResult online_em_train(const JunctionTree& tree, const SampleSet& samples, const EMConfig& cfg) {
  if (samples.rows.empty()) throw std::invalid_argument("empty sample set");
  if (cfg.stepwise_exponents.empty()) throw std::invalid_argument("empty stepsize-exponent grid");
  const auto t0 = std::chrono::steady_clock::now();
  Engine eng(tree, samples.var_ids);

  TrainResult best;
  std::vector<double> grid_ll;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (size_t gi = 0; gi < cfg.stepwise_exponents.size(); ++gi) {
    const double a = cfg.stepwise_exponents[gi];
    LatentJTModel model = random_model(tree, cfg.seed + 1000 + static_cast<std::uint64_t>(gi));
    std::vector<std::vector<double>> stats(tree.nodes.size()), batch(tree.nodes.size());
    for (size_t v = 0; v < tree.nodes.size(); ++v) {
      stats[v].assign(model.table(static_cast<int>(v)).size(), 0.0);
      batch[v].assign(model.table(static_cast<int>(v)).size(), 0.0);
    }
    const int bs = std::max(1, cfg.minibatch);
    long long t = 0;
    for (int epoch = 0; epoch < std::max(1, cfg.epochs); ++epoch) {
      for (std::size_t at = 0; at < samples.rows.size(); at += static_cast<std::size_t>(bs), ++t) {
        const std::size_t end = std::min(samples.rows.size(), at + static_cast<std::size_t>(bs));
        for (auto& b : batch) std::fill(b.begin(), b.end(), 0.0);
        auto tables = table_pointers(model);
        const double wn = 1.0 / static_cast<double>(end - at);
        for (std::size_t s = at; s < end; ++s) {
          double p = eng.upward(tables, samples.rows[s]);
          if (p > 0) eng.accumulate(samples.rows[s], wn, p, batch);
        }
        const double eta = std::pow(static_cast<double>(t) + 2.0, -a);
        for (size_t v = 0; v < stats.size(); ++v)
          for (std::size_t k = 0; k < stats[v].size(); ++k)
            stats[v][k] = (1.0 - eta) * stats[v][k] + eta * batch[v][k];
        m_step(tree, stats, model, 1e-9);
      }
    }
    const double ll = log_likelihood(model, samples);
    grid_ll.push_back(ll);
    if (ll > best_ll) {
      best_ll = ll;
      best.model = std::move(model);
      best.log_likelihood = {ll};
      best.selected_exponent = a;
      best.selected_restart = static_cast<int>(gi);
    }
  }
  best.grid_log_likelihood = std::move(grid_ll);
  best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

}  // namespace sjt
