#pragma once

// Shared test models: the worked nine-variable example (hidden core
// A..E with observed fringe F,G,H,I), a minimal two-leaf mixture, and a
// generator of random rooted models for oracle cross-checks.

#include <random>
#include <string>
#include <vector>

#include "sjt/junction_tree.hpp"
#include "sjt/model.hpp"

namespace fixtures {

// Cliques: {A,C,E} (root), {B,C,D,E}, {B,C,F}, {B,D,G}, {A,C,H}, {A,E,I}.
// fg_card controls the cardinality of F and G; H and I have four states.
inline sjt::JunctionTree fig2_tree(int fg_card = 2, int hidden_card = 2) {
  sjt::GraphicalModelSpec spec;
  auto add = [&](const std::string& n, int card, bool obs) {
    spec.variables.push_back({n, card, obs});
    return static_cast<int>(spec.variables.size()) - 1;
  };
  int A = add("A", hidden_card, false), B = add("B", hidden_card, false), C = add("C", hidden_card, false);
  int D = add("D", hidden_card, false), E = add("E", hidden_card, false);
  int F = add("F", fg_card, true), G = add("G", fg_card, true);
  int H = add("H", 4, true), I = add("I", 4, true);
  spec.cliques = {{A, C, E}, {B, C, D, E}, {B, C, F}, {B, D, G}, {A, C, H}, {A, E, I}};
  spec.tree_edges = {{0, 1}, {1, 2}, {1, 3}, {0, 4}, {0, 5}};
  sjt::JunctionTree jt = sjt::build_junction_tree(spec);
  return sjt::root_tree(jt, 0);
}

// Root {S}, leaves {S,O1} and {S,O2}: the smallest model with an
// observable representation.
inline sjt::JunctionTree mixture_tree(int k_hidden = 2, int k_observed = 2) {
  sjt::GraphicalModelSpec spec;
  spec.variables.push_back({"S", k_hidden, false});
  spec.variables.push_back({"O1", k_observed, true});
  spec.variables.push_back({"O2", k_observed, true});
  spec.cliques = {{0}, {0, 1}, {0, 2}};
  spec.tree_edges = {{0, 1}, {0, 2}};
  sjt::JunctionTree jt = sjt::build_junction_tree(spec);
  return sjt::root_tree(jt, 0);
}

// Connected random graphical model, triangulated and rooted; sizes stay
// small enough for full enumeration.
inline sjt::JunctionTree random_rooted_tree(std::mt19937_64& rng, int max_vars = 8, int max_card = 4) {
  const int n = 3 + static_cast<int>(rng() % static_cast<unsigned>(max_vars - 2));
  sjt::GraphicalModelSpec spec;
  for (int i = 0; i < n; ++i) {
    int card = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_card - 1));
    bool observed = rng() % 2 == 0;
    spec.variables.push_back({"X" + std::to_string(i), card, observed});
  }
  for (int i = 1; i < n; ++i) spec.edges.emplace_back(static_cast<int>(rng() % static_cast<unsigned>(i)), i);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng() % 10 < 3) spec.edges.emplace_back(i, j);
  sjt::JunctionTree jt = sjt::build_junction_tree(spec);
  return sjt::root_and_normalize(jt);
}

}  // namespace fixtures
