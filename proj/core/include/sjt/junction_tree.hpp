#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sjt/labeled_tensor.hpp"

namespace sjt {

/// Declaration of one model variable; the id of a variable is its index
/// in the declaration list.
struct VariableDecl {
  std::string name;
  int card = 0;
  bool observed = false;
};

/// Input graphical model: variables plus either undirected edges or
/// directed parent listsable to be moralized. Explicit cliques (and an
/// optional explicit tree over them) may be given instead of edges.
struct GraphicalModelSpec {
  std::vector<VariableDecl> variables;
  std::vector<std::pair<int, int>> edges;               // undirected
  std::vector<std::vector<int>> parents;                // parents[v] for directed models (empty = none)
  std::vector<std::vector<int>> cliques;                // optional explicit cliques
  std::vector<std::pair<int, int>> tree_edges;          // optional explicit tree over cliques
  std::optional<int> root;                              // optional root clique index

  bool directed() const { return !parents.empty(); }
};

/// One clique node of a junction tree. parent/children/separator fields
/// are meaningful once the tree is rooted.
struct JTNode {
  std::vector<int> clique;     // variable ids, ascending
  int parent = -1;
  std::vector<int> children;
  std::vector<int> separator;  // clique ∩ parent clique, ascending
  std::vector<int> remainder;  // clique \ separator, ascending
};

/// Junction tree over a variable table. Unrooted right after
/// construction (root < 0, undirected edges only); root_and_normalize
/// orients it, splits high-degree internal nodes and fills in
/// separators, remainders and a topological order.
struct JunctionTree {
  std::vector<VariableDecl> variables;
  std::vector<JTNode> nodes;
  std::vector<std::pair<int, int>> edges;  // undirected connectivity
  int root = -1;
  std::vector<int> topo_order;             // parents precede children
  std::vector<int> origin;                 // node -> index in the pre-normalization tree

  bool rooted() const { return root >= 0; }
  Variable var(int id) const { return Variable{id, variables[static_cast<size_t>(id)].card}; }
  bool observed(int id) const { return variables[static_cast<size_t>(id)].observed; }
  const std::string& var_name(int id) const { return variables[static_cast<size_t>(id)].name; }
  int find_var(const std::string& name) const;

  /// Product of cardinalities of a variable set.
  long long states(const std::vector<int>& ids) const;

  std::vector<int> observed_vars() const;
  std::vector<int> hidden_vars() const;
  int treewidth() const;

  /// Node that owns a variable: the unique node with the variable in its
  /// remainder (requires a rooted tree).
  int owner(int var_id) const;

  /// Nodes of the subtree rooted at `node`, including it.
  std::vector<int> subtree(int node) const;

  /// Separator between two adjacent nodes.
  std::vector<int> edge_separator(int a, int b) const;
};

struct Violation {
  enum class Kind { RunningIntersection, InternalDegree, LeafRemainderHidden, EmptySeparator };
  Kind kind;
  int node;  // offending node (or one endpoint)
  std::string message;
};

/// Moralize (if directed), triangulate by min-fill, extract maximal
/// cliques and join them by a maximum-weight spanning tree on separator
/// sizes. The result is unrooted. Explicit cliques in the input bypass
/// triangulation; an explicit tree bypasses the spanning-tree step.
JunctionTree build_junction_tree(const GraphicalModelSpec& spec);

/// Orient edges away from the given root and fill separators,
/// remainders and the topological order. No structural changes.
JunctionTree root_tree(const JunctionTree& jt, int root);

/// Pick a root (default: clique with the most observed variables, ties
/// to the lowest index), orient edges away from it, and split any node
/// with too many neighbors by duplicating the clique behind a
/// full-clique separator. Fills separators, remainders and topo order.
JunctionTree root_and_normalize(const JunctionTree& jt, int root_choice = -1);

/// Structural diagnostics on a rooted tree; empty result means clean.
std::vector<Violation> validate(const JunctionTree& jt);

}  // namespace sjt
