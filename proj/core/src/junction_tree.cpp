#include "sjt/junction_tree.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sjt {

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<int> intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<int> subtract(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool is_subset(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

int JunctionTree::find_var(const std::string& name) const {
  for (size_t i = 0; i < variables.size(); ++i)
    if (variables[i].name == name) return static_cast<int>(i);
  return -1;
}

long long JunctionTree::states(const std::vector<int>& ids) const {
  long long n = 1;
  for (int id : ids) n *= variables[static_cast<size_t>(id)].card;
  return n;
}

std::vector<int> JunctionTree::observed_vars() const {
  std::vector<int> out;
  for (size_t i = 0; i < variables.size(); ++i)
    if (variables[i].observed) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> JunctionTree::hidden_vars() const {
  std::vector<int> out;
  for (size_t i = 0; i < variables.size(); ++i)
    if (!variables[i].observed) out.push_back(static_cast<int>(i));
  return out;
}

int JunctionTree::treewidth() const {
  int t = 0;
  for (const JTNode& n : nodes) t = std::max(t, static_cast<int>(n.clique.size()) - 1);
  return t;
}

int JunctionTree::owner(int var_id) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (std::binary_search(nodes[i].remainder.begin(), nodes[i].remainder.end(), var_id))
      return static_cast<int>(i);
  return -1;
}

std::vector<int> JunctionTree::subtree(int node) const {
  std::vector<int> out;
  std::deque<int> q{node};
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    out.push_back(v);
    for (int c : nodes[static_cast<size_t>(v)].children) q.push_back(c);
  }
  return out;
}

std::vector<int> JunctionTree::edge_separator(int a, int b) const {
  return intersect(nodes[static_cast<size_t>(a)].clique, nodes[static_cast<size_t>(b)].clique);
}

namespace {

// Min-fill triangulation with lexicographic tie-breaking. Returns the
// elimination cliques; fill edges are added to adj as we go.
std::vector<std::vector<int>> min_fill_cliques(std::vector<std::set<int>> adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<char> eliminated(static_cast<size_t>(n), 0);
  std::vector<std::vector<int>> cliques;
  for (int step = 0; step < n; ++step) {
    int best = -1;
    long long best_fill = -1;
    for (int v = 0; v < n; ++v) {
      if (eliminated[static_cast<size_t>(v)]) continue;
      long long fill = 0;
      std::vector<int> nbrs(adj[static_cast<size_t>(v)].begin(), adj[static_cast<size_t>(v)].end());
      for (size_t i = 0; i < nbrs.size(); ++i)
        for (size_t j = i + 1; j < nbrs.size(); ++j)
          if (!adj[static_cast<size_t>(nbrs[i])].count(nbrs[j])) ++fill;
      if (best == -1 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    std::vector<int> clique(adj[static_cast<size_t>(best)].begin(), adj[static_cast<size_t>(best)].end());
    clique.push_back(best);
    std::sort(clique.begin(), clique.end());
    cliques.push_back(clique);
    for (size_t i = 0; i + 1 < clique.size(); ++i)
      for (size_t j = i + 1; j < clique.size(); ++j) {
        if (clique[i] == best || clique[j] == best) continue;
        adj[static_cast<size_t>(clique[i])].insert(clique[j]);
        adj[static_cast<size_t>(clique[j])].insert(clique[i]);
      }
    for (int u : std::vector<int>(adj[static_cast<size_t>(best)].begin(), adj[static_cast<size_t>(best)].end()))
      adj[static_cast<size_t>(u)].erase(best);
    adj[static_cast<size_t>(best)].clear();
    eliminated[static_cast<size_t>(best)] = 1;
  }
  // keep only maximal cliques, first occurrence wins
  std::vector<std::vector<int>> maximal;
  for (const auto& c : cliques) {
    bool contained = false;
    for (const auto& m : maximal)
      if (is_subset(c, m)) {
        contained = true;
        break;
      }
    if (!contained) maximal.push_back(c);
  }
  return maximal;
}

}  // namespace

JunctionTree build_junction_tree(const GraphicalModelSpec& spec) {
  const int n = static_cast<int>(spec.variables.size());
  JunctionTree jt;
  jt.variables = spec.variables;

  std::vector<std::vector<int>> cliques;
  if (!spec.cliques.empty()) {
    for (const auto& c : spec.cliques) cliques.push_back(sorted_unique(c));
  } else {
    std::vector<std::set<int>> adj(static_cast<size_t>(n));
    auto add_edge = [&](int a, int b) {
      if (a == b) throw std::invalid_argument("self-loop in model spec");
      if (a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("edge references undeclared variable");
      adj[static_cast<size_t>(a)].insert(b);
      adj[static_cast<size_t>(b)].insert(a);
    };
    for (const auto& [a, b] : spec.edges) add_edge(a, b);
    if (spec.directed()) {
      for (int v = 0; v < n; ++v) {
        const auto& ps = spec.parents[static_cast<size_t>(v)];
        for (int p : ps) add_edge(p, v);
        for (size_t i = 0; i + 1 < ps.size(); ++i)
          for (size_t j = i + 1; j < ps.size(); ++j) add_edge(ps[i], ps[j]);  // moralization
      }
    }
    // connectivity
    if (n > 0) {
      std::vector<char> seen(static_cast<size_t>(n), 0);
      std::deque<int> q{0};
      seen[0] = 1;
      int count = 0;
      while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        ++count;
        for (int u : adj[static_cast<size_t>(v)])
          if (!seen[static_cast<size_t>(u)]) {
            seen[static_cast<size_t>(u)] = 1;
            q.push_back(u);
          }
      }
      if (count != n) throw std::invalid_argument("model graph is disconnected");
    }
    cliques = min_fill_cliques(adj);
  }

  jt.nodes.resize(cliques.size());
  for (size_t i = 0; i < cliques.size(); ++i) jt.nodes[i].clique = cliques[i];

  if (!spec.tree_edges.empty()) {
    jt.edges = spec.tree_edges;
  } else {
    // maximum-weight spanning tree on separator sizes (Kruskal,
    // deterministic tie-break by endpoint indices)
    struct E {
      int w, a, b;
    };
    std::vector<E> es;
    for (size_t i = 0; i + 1 < cliques.size(); ++i)
      for (size_t j = i + 1; j < cliques.size(); ++j) {
        int w = static_cast<int>(intersect(cliques[i], cliques[j]).size());
        es.push_back({w, static_cast<int>(i), static_cast<int>(j)});
      }
    std::sort(es.begin(), es.end(), [](const E& x, const E& y) {
      if (x.w != y.w) return x.w > y.w;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });
    std::vector<int> comp(cliques.size());
    std::iota(comp.begin(), comp.end(), 0);
    std::function<int(int)> find = [&](int x) { return comp[static_cast<size_t>(x)] == x ? x : comp[static_cast<size_t>(x)] = find(comp[static_cast<size_t>(x)]); };
    for (const E& e : es) {
      int ra = find(e.a), rb = find(e.b);
      if (ra == rb) continue;
      comp[static_cast<size_t>(ra)] = rb;
      jt.edges.emplace_back(e.a, e.b);
      if (jt.edges.size() + 1 == cliques.size()) break;
    }
    if (cliques.size() > 1 && jt.edges.size() + 1 != cliques.size())
      throw std::invalid_argument("clique graph is disconnected");
  }

  jt.origin.resize(jt.nodes.size());
  std::iota(jt.origin.begin(), jt.origin.end(), 0);
  return jt;
}

namespace {

// Orient away from the root; no splitting or finalization.
void orient(JunctionTree& jt, int root) {
  const int n = static_cast<int>(jt.nodes.size());
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const auto& [a, b] : jt.edges) {
    adj[static_cast<size_t>(a)].push_back(b);
    adj[static_cast<size_t>(b)].push_back(a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  for (JTNode& node : jt.nodes) {
    node.parent = -1;
    node.children.clear();
  }
  std::vector<int> order;
  std::deque<int> q{root};
  std::vector<char> seen(static_cast<size_t>(n), 0);
  seen[static_cast<size_t>(root)] = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    order.push_back(v);
    for (int u : adj[static_cast<size_t>(v)]) {
      if (seen[static_cast<size_t>(u)]) continue;
      seen[static_cast<size_t>(u)] = 1;
      jt.nodes[static_cast<size_t>(u)].parent = v;
      jt.nodes[static_cast<size_t>(v)].children.push_back(u);
      q.push_back(u);
    }
  }
  if (order.size() != static_cast<size_t>(n)) throw std::invalid_argument("junction tree is disconnected");
  jt.root = root;
}

// Recompute separators, remainders, edges and the topological order from
// the parent links.
void finalize(JunctionTree& jt) {
  jt.edges.clear();
  for (int v = 0; v < static_cast<int>(jt.nodes.size()); ++v) {
    JTNode& node = jt.nodes[static_cast<size_t>(v)];
    if (node.parent >= 0) {
      node.separator = intersect(node.clique, jt.nodes[static_cast<size_t>(node.parent)].clique);
      jt.edges.emplace_back(node.parent, v);
    } else {
      node.separator.clear();
    }
    node.remainder = subtract(node.clique, node.separator);
  }
  jt.topo_order.clear();
  std::deque<int> q{jt.root};
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    jt.topo_order.push_back(v);
    for (int c : jt.nodes[static_cast<size_t>(v)].children) q.push_back(c);
  }
}

}  // namespace

JunctionTree root_tree(const JunctionTree& in, int root) {
  JunctionTree jt = in;
  if (jt.nodes.empty()) throw std::invalid_argument("empty junction tree");
  if (root < 0 || root >= static_cast<int>(jt.nodes.size()))
    throw std::invalid_argument("root id is not a clique node");
  if (jt.origin.empty()) {
    jt.origin.resize(jt.nodes.size());
    std::iota(jt.origin.begin(), jt.origin.end(), 0);
  }
  orient(jt, root);
  finalize(jt);
  return jt;
}

JunctionTree root_and_normalize(const JunctionTree& in, int root_choice) {
  JunctionTree jt = in;
  const int n = static_cast<int>(jt.nodes.size());
  if (n == 0) throw std::invalid_argument("empty junction tree");
  if (root_choice >= n) throw std::invalid_argument("root id is not a clique node");
  if (jt.origin.empty()) {
    jt.origin.resize(jt.nodes.size());
    std::iota(jt.origin.begin(), jt.origin.end(), 0);
  }

  int root = root_choice;
  if (root < 0) {
    int best_obs = -1;
    for (int v = 0; v < n; ++v) {
      int obs = 0;
      for (int id : jt.nodes[static_cast<size_t>(v)].clique)
        if (jt.observed(id)) ++obs;
      if (obs > best_obs) {
        best_obs = obs;
        root = v;
      }
    }
  }
  orient(jt, root);

  // split nodes with too many children (2 for internal nodes, 3 for the
  // root); the duplicate shares the clique and hangs behind a
  // full-clique separator, which leaves the joint untouched
  for (int v = 0; v < static_cast<int>(jt.nodes.size()); ++v) {
    const int cap = v == jt.root ? 3 : 2;
    while (static_cast<int>(jt.nodes[static_cast<size_t>(v)].children.size()) > cap) {
      JTNode dup;
      dup.clique = jt.nodes[static_cast<size_t>(v)].clique;
      dup.parent = v;
      auto& kids = jt.nodes[static_cast<size_t>(v)].children;
      std::vector<int> moved(kids.begin() + (cap - 1), kids.end());
      kids.erase(kids.begin() + (cap - 1), kids.end());
      int dup_id = static_cast<int>(jt.nodes.size());
      for (int m : moved) {
        jt.nodes[static_cast<size_t>(m)].parent = dup_id;
        dup.children.push_back(m);
      }
      kids.push_back(dup_id);
      jt.nodes.push_back(std::move(dup));
      jt.origin.push_back(jt.origin[static_cast<size_t>(v)]);
      // continue: the duplicate may itself still be over cap, handled
      // when the loop reaches it
    }
  }

  finalize(jt);
  return jt;
}

std::vector<Violation> validate(const JunctionTree& jt) {
  std::vector<Violation> out;
  if (!jt.rooted()) throw std::invalid_argument("validate expects a rooted junction tree");
  const int n = static_cast<int>(jt.nodes.size());

  // running intersection: nodes containing each variable form a subtree
  for (int id = 0; id < static_cast<int>(jt.variables.size()); ++id) {
    std::vector<int> holders;
    for (int v = 0; v < n; ++v)
      if (std::binary_search(jt.nodes[static_cast<size_t>(v)].clique.begin(),
                             jt.nodes[static_cast<size_t>(v)].clique.end(), id))
        holders.push_back(v);
    if (holders.empty()) continue;
    std::set<int> hs(holders.begin(), holders.end());
    std::deque<int> q{holders[0]};
    std::set<int> seen{holders[0]};
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      std::vector<int> nbrs = jt.nodes[static_cast<size_t>(v)].children;
      if (jt.nodes[static_cast<size_t>(v)].parent >= 0) nbrs.push_back(jt.nodes[static_cast<size_t>(v)].parent);
      for (int u : nbrs)
        if (hs.count(u) && !seen.count(u)) {
          seen.insert(u);
          q.push_back(u);
        }
    }
    if (seen.size() != hs.size()) {
      std::ostringstream os;
      os << "variable " << jt.var_name(id) << " spans a disconnected set of cliques";
      out.push_back({Violation::Kind::RunningIntersection, holders[0], os.str()});
    }
  }

  for (int v = 0; v < n; ++v) {
    const JTNode& node = jt.nodes[static_cast<size_t>(v)];
    const bool leaf = node.children.empty();
    const int degree = static_cast<int>(node.children.size()) + (node.parent >= 0 ? 1 : 0);
    if (!leaf && degree != 3) {
      std::ostringstream os;
      os << "internal node " << v << " has " << degree << " neighbors";
      out.push_back({Violation::Kind::InternalDegree, v, os.str()});
    }
    if (leaf) {
      for (int id : node.remainder)
        if (!jt.observed(id)) {
          std::ostringstream os;
          os << "leaf node " << v << " owns hidden variable " << jt.var_name(id);
          out.push_back({Violation::Kind::LeafRemainderHidden, v, os.str()});
        }
    }
    if (node.parent >= 0 && node.separator.empty()) {
      std::ostringstream os;
      os << "empty separator between nodes " << node.parent << " and " << v;
      out.push_back({Violation::Kind::EmptySeparator, v, os.str()});
    }
  }
  return out;
}

}  // namespace sjt
