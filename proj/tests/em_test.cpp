#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sjt/em.hpp"
#include "sjt/experiments.hpp"

using namespace sjt;

namespace {

// empirical conditional frequencies of a fully observed dataset
LatentJTModel empirical_conditionals(const JunctionTree& tree, const SampleSet& samples) {
  LatentJTModel m = random_model(tree, 0);
  std::map<int, int> col;
  for (size_t k = 0; k < samples.var_ids.size(); ++k) col[samples.var_ids[k]] = static_cast<int>(k);
  for (size_t v = 0; v < tree.nodes.size(); ++v) {
    const JTNode& node = tree.nodes[v];
    LabeledTensor counts(m.table(static_cast<int>(v)).distinct_vars());
    for (const auto& row : samples.rows) {
      std::vector<int> idx;
      for (int id : node.clique) idx.push_back(row[static_cast<size_t>(col.at(id))]);
      counts.at(idx) += 1.0;
    }
    // normalize per separator assignment
    LabeledTensor sep_tot = counts;
    for (int id : node.remainder) sep_tot = sum_out(sep_tot, id);
    LabeledTensor& t = m.potentials[v].table;
    std::vector<int> idx(static_cast<size_t>(counts.order()), 0);
    std::vector<int> sep_pos;
    for (int id : node.separator) sep_pos.push_back(counts.modes_of(id).front());
    std::vector<int> sep_idx(node.separator.size());
    for (std::size_t lin = 0; lin < counts.size(); ++lin) {
      std::size_t rem = lin;
      for (int mm = counts.order() - 1; mm >= 0; --mm) {
        idx[static_cast<size_t>(mm)] = static_cast<int>(rem % static_cast<std::size_t>(counts.dim(mm)));
        rem /= static_cast<std::size_t>(counts.dim(mm));
      }
      for (size_t k = 0; k < sep_pos.size(); ++k) sep_idx[k] = idx[static_cast<size_t>(sep_pos[k])];
      double tot = sep_tot.at(sep_idx);
      t.mutable_values()[lin] = tot > 0 ? counts.values()[lin] / tot : 1.0 / counts.dim(0);
    }
  }
  return m;
}

JunctionTree fully_observed_chain() {
  GraphicalModelSpec spec;
  spec.variables = {{"A", 2, true}, {"B", 3, true}, {"C", 2, true}};
  spec.cliques = {{0, 1}, {1, 2}};
  spec.tree_edges = {{0, 1}};
  return root_tree(build_junction_tree(spec), 0);
}

}  // namespace

TEST_CASE("a fully observed model converges in one step to empirical frequencies") {
  JunctionTree jt = fully_observed_chain();
  LatentJTModel truth = random_model(jt, 5);
  SampleSet data = sample(truth, 400, 6);
  EMConfig cfg;
  cfg.restarts = 1;
  cfg.seed = 9;
  TrainResult r = em_train(jt, data, cfg);
  // the first M-step lands on the optimum; the trailing E-steps only
  // confirm a flat likelihood
  CHECK(r.log_likelihood.size() == 3);
  CHECK(r.log_likelihood[2] == doctest::Approx(r.log_likelihood[1]).epsilon(1e-12));
  LatentJTModel want = empirical_conditionals(jt, data);
  for (size_t v = 0; v < jt.nodes.size(); ++v)
    for (std::size_t i = 0; i < want.table(static_cast<int>(v)).size(); ++i)
      CHECK(r.model.table(static_cast<int>(v)).values()[i] ==
            doctest::Approx(want.table(static_cast<int>(v)).values()[i]).epsilon(1e-12));
}

TEST_CASE("batch EM likelihood traces never decrease") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 6; ++trial) {
    JunctionTree jt = trial % 2 == 0 ? fixtures::mixture_tree(2, 3) : gen_structure("hmm2", 4, 2, 3).tree;
    LatentJTModel truth = random_model(jt, 100 + static_cast<std::uint64_t>(trial));
    SampleSet data = sample(truth, 300, 200 + static_cast<std::uint64_t>(trial));
    EMConfig cfg;
    cfg.restarts = 1;
    cfg.seed = 300 + static_cast<std::uint64_t>(trial);
    cfg.max_iterations = 60;
    TrainResult r = em_train(jt, data, cfg);
    REQUIRE(r.log_likelihood.size() >= 2);
    for (size_t i = 1; i < r.log_likelihood.size(); ++i)
      CHECK(r.log_likelihood[i] >= r.log_likelihood[i - 1] - 1e-9);
  }
}

TEST_CASE("one EM step matches brute-force posterior expectations") {
  JunctionTree jt = fixtures::mixture_tree(2, 3);
  EMConfig cfg;
  cfg.restarts = 1;
  cfg.seed = 31;
  cfg.max_iterations = 2;  // one M-step, then a confirming E-step
  SampleSet data;
  data.var_ids = jt.observed_vars();
  data.rows = {{1, 2}};
  TrainResult r = em_train(jt, data, cfg);

  // oracle: expected clique counts under the initial parameters
  LatentJTModel init = random_model(jt, cfg.seed);
  std::map<int, int> evidence{{1, 1}, {2, 2}};
  double pe = oracle::joint_by_enumeration(init, evidence);
  // posterior over the hidden root state
  std::vector<double> post(2);
  for (int s = 0; s < 2; ++s) {
    double joint = init.table(0).values()[static_cast<size_t>(s)] * init.table(1).at({s, 1}) *
                   init.table(2).at({s, 2});
    post[static_cast<size_t>(s)] = joint / pe;
  }
  // M-step: root table becomes the posterior, leaves put mass on the seen value
  for (int s = 0; s < 2; ++s) {
    CHECK(r.model.table(0).values()[static_cast<size_t>(s)] == doctest::Approx(post[static_cast<size_t>(s)]).epsilon(1e-10));
    CHECK(r.model.table(1).at({s, 1}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.model.table(2).at({s, 2}) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("both trainers are deterministic under a fixed seed") {
  JunctionTree jt = fixtures::mixture_tree(2, 3);
  LatentJTModel truth = random_model(jt, 41);
  SampleSet data = sample(truth, 500, 42);
  EMConfig cfg;
  cfg.restarts = 2;
  cfg.seed = 43;
  cfg.max_iterations = 25;
  TrainResult a = em_train(jt, data, cfg);
  TrainResult b = em_train(jt, data, cfg);
  CHECK(a.log_likelihood == b.log_likelihood);
  for (size_t v = 0; v < jt.nodes.size(); ++v)
    CHECK(a.model.table(static_cast<int>(v)).values() == b.model.table(static_cast<int>(v)).values());
  TrainResult oa = online_em_train(jt, data, cfg);
  TrainResult ob = online_em_train(jt, data, cfg);
  CHECK(oa.grid_log_likelihood == ob.grid_log_likelihood);
  CHECK(oa.selected_exponent == ob.selected_exponent);
}

TEST_CASE("online EM runs the whole exponent grid and keeps the best") {
  JunctionTree jt = fixtures::mixture_tree(2, 3);
  LatentJTModel truth = random_model(jt, 51);
  SampleSet data = sample(truth, 600, 52);
  EMConfig cfg;
  cfg.seed = 53;
  cfg.minibatch = 32;
  TrainResult r = online_em_train(jt, data, cfg);
  CHECK(r.grid_log_likelihood.size() == 5);
  double best = *std::max_element(r.grid_log_likelihood.begin(), r.grid_log_likelihood.end());
  CHECK(r.log_likelihood.front() == doctest::Approx(best));
  for (double ll : r.grid_log_likelihood) CHECK(r.log_likelihood.front() >= ll);
  bool in_grid = false;
  for (double a : cfg.stepwise_exponents)
    if (a == r.selected_exponent) in_grid = true;
  CHECK(in_grid);
}

TEST_CASE("a unit exponent averages sufficient statistics uniformly") {
  // with nothing hidden the per-batch statistics are parameter-free, so
  // the unit-exponent schedule must land exactly on the empirical
  // frequencies, the classical running average
  JunctionTree jt = fully_observed_chain();
  LatentJTModel truth = random_model(jt, 61);
  SampleSet data = sample(truth, 256, 62);
  EMConfig cfg;
  cfg.stepwise_exponents = {1.0};
  cfg.minibatch = 16;
  cfg.seed = 63;
  TrainResult r = online_em_train(jt, data, cfg);
  LatentJTModel want = empirical_conditionals(jt, data);
  for (size_t v = 0; v < jt.nodes.size(); ++v)
    for (std::size_t i = 0; i < want.table(static_cast<int>(v)).size(); ++i)
      CHECK(r.model.table(static_cast<int>(v)).values()[i] ==
            doctest::Approx(want.table(static_cast<int>(v)).values()[i]).epsilon(1e-6));
}

TEST_CASE("EM held-out accuracy improves with more data") {
  StructurePair sp = gen_structure("hmm2", 4, 2, 3);
  LatentJTModel truth = random_model(sp.tree, 71);
  SampleSet test = sample(truth, 200, 72);
  auto mean_err = [&](std::size_t n) {
    SampleSet train = sample(truth, n, 73);
    EMConfig cfg;
    cfg.restarts = 2;
    cfg.seed = 74;
    TrainResult r = em_train(sp.tree, train, cfg);
    double sum = 0;
    int used = 0;
    for (const auto& row : test.rows) {
      std::map<int, int> asg;
      for (size_t k = 0; k < test.var_ids.size(); ++k) asg[test.var_ids[k]] = row[k];
      double want = exact_marginal(truth, asg);
      if (want <= 0) continue;
      sum += relative_error(exact_marginal(r.model, asg), want);
      ++used;
    }
    return sum / used;
  };
  CHECK(mean_err(10000) < mean_err(100));
}

TEST_CASE("empty datasets and bad configs are rejected") {
  JunctionTree jt = fixtures::mixture_tree();
  SampleSet empty;
  empty.var_ids = jt.observed_vars();
  CHECK_THROWS_AS(em_train(jt, empty, {}), std::invalid_argument);
  CHECK_THROWS_AS(online_em_train(jt, empty, {}), std::invalid_argument);
  LatentJTModel truth = random_model(jt, 1);
  SampleSet data = sample(truth, 10, 2);
  EMConfig bad;
  bad.restarts = 0;
  CHECK_THROWS_AS(em_train(jt, data, bad), std::invalid_argument);
}
