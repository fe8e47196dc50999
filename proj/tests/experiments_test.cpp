#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sjt/experiments.hpp"
#include "sjt/io.hpp"

using namespace sjt;

TEST_CASE("benchmark structures match their stated sizes") {
  StructurePair hmm2 = gen_structure("hmm2", 8, 2, 4);
  int hidden = 0, observed = 0;
  for (const VariableDecl& v : hmm2.tree.variables) {
    if (v.observed) {
      ++observed;
      CHECK(v.card == 4);
    } else {
      ++hidden;
      CHECK(v.card == 2);
    }
  }
  CHECK(hidden == 8);
  CHECK(observed == 8);
  CHECK(hmm2.tree.treewidth() == 2);

  StructurePair fact = gen_structure("factorial2", 6, 2, 16);
  for (const VariableDecl& v : fact.tree.variables)
    if (v.observed) CHECK(v.card == 16);
  CHECK(fact.tree.observed_vars().size() == 6);
  CHECK(fact.tree.hidden_vars().size() == 12);
}

TEST_CASE("every emitted benchmark tree validates cleanly and plans feasibly") {
  std::vector<StructurePair> structures;
  for (int len : {3, 4, 5, 8}) structures.push_back(gen_structure("hmm2", len, 2, 4));
  for (int len : {5, 6, 8}) structures.push_back(gen_structure("hmm3", len, 2, 4));
  for (int len : {3, 4, 6}) structures.push_back(gen_structure("factorial2", len, 2, 16));
  structures.push_back(gen_structure("synthetic-jt", 0, 2, 16));
  for (const StructurePair& sp : structures) {
    CHECK(validate(sp.tree).empty());
    ObservedSetPlan plan = plan_observed_sets(sp.tree);
    CHECK(plan.feasible());
  }
  CHECK_THROWS_AS(gen_structure("nope", 4, 2, 4), std::invalid_argument);
}

TEST_CASE("relative error follows its definition") {
  CHECK(relative_error(0.25, 0.25) == doctest::Approx(0));
  CHECK(relative_error(0.02, 0.01) == doctest::Approx(1.0));
  CHECK(relative_error(0.0, 0.3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(relative_error(0.1, 0.0), std::invalid_argument);
}

TEST_CASE("benchmark runs are reproducible and cover the whole grid") {
  BenchmarkConfig cfg;
  cfg.family = "hmm2";
  cfg.length = 4;
  cfg.k_observed = 4;
  cfg.n_grid = {100, 500};
  cfg.test_size = 40;
  cfg.num_parameter_sets = 2;
  cfg.seed = 7;
  cfg.learners = {"spectral", "online-em"};
  cfg.include_timings = false;
  cfg.em.max_iterations = 30;

  BenchmarkResult a = run_benchmark(cfg);
  BenchmarkResult b = run_benchmark(cfg);
  CHECK(benchmark_result_to_json(a) == benchmark_result_to_json(b));
  CHECK(a.trials.size() == 2 * 2 * 2);
  for (const TrialResult& t : a.trials) {
    CHECK_FALSE(t.failed);
    CHECK(static_cast<int>(t.errors.size()) + t.zero_truth_queries == cfg.test_size);
  }
  CHECK(a.series.size() == 2 * 2);
  std::string csv = benchmark_series_to_csv(a);
  CHECK(csv.rfind("N,learner,median_error,mean_time_seconds", 0) == 0);
}

TEST_CASE("learner failures are recorded per trial without stopping the run") {
  BenchmarkConfig cfg;
  cfg.family = "hmm2";
  cfg.length = 4;
  cfg.k_observed = 4;
  cfg.n_grid = {2};  // far too small for the spectral rank conditions
  cfg.test_size = 10;
  cfg.num_parameter_sets = 1;
  cfg.learners = {"spectral"};
  BenchmarkResult r = run_benchmark(cfg);
  REQUIRE(r.trials.size() == 1);
  CHECK(r.trials[0].failed);
  CHECK_FALSE(r.trials[0].failure.empty());
}

TEST_CASE("disjoint emission supports classify perfectly") {
  StructurePair sp = gen_structure("hmm2", 4, 2, 4);
  auto make_class = [&](int lo, std::uint64_t seed) {
    LatentJTModel m = random_model(sp.tree, seed);
    for (size_t v = 0; v < sp.tree.nodes.size(); ++v) {
      const JTNode& node = sp.tree.nodes[v];
      if (node.children.empty()) {
        // leaf emission: restrict support to {lo, lo+1}
        LabeledTensor& t = m.potentials[v].table;
        for (int h = 0; h < 2; ++h) {
          double kept = 0;
          for (int o = 0; o < 4; ++o) kept += (o == lo || o == lo + 1) ? t.at({h, o}) : 0.0;
          for (int o = 0; o < 4; ++o)
            t.at({h, o}) = (o == lo || o == lo + 1) ? t.at({h, o}) / kept : 0.0;
        }
      }
    }
    return m;
  };
  LatentJTModel c0 = make_class(0, 11), c1 = make_class(2, 12);
  std::vector<SampleSet> train{sample(c0, 800, 13), sample(c1, 800, 14)};
  SampleSet test;
  test.var_ids = train[0].var_ids;
  std::vector<int> labels;
  SampleSet t0 = sample(c0, 30, 15), t1 = sample(c1, 30, 16);
  for (const auto& row : t0.rows) {
    test.rows.push_back(row);
    labels.push_back(0);
  }
  for (const auto& row : t1.rows) {
    test.rows.push_back(row);
    labels.push_back(1);
  }
  ClassifyResult r = classify_sequences(train, test, labels, "spectral", 2, EMConfig{}, 99);
  CHECK(r.accuracy == doctest::Approx(1.0));
}

TEST_CASE("a single training class labels everything with it") {
  StructurePair sp = gen_structure("hmm2", 3, 2, 3);
  LatentJTModel m = random_model(sp.tree, 21);
  std::vector<SampleSet> train{sample(m, 300, 22)};
  SampleSet test = sample(m, 20, 23);
  ClassifyResult r = classify_sequences(train, test, {}, "spectral", 2, EMConfig{}, 1);
  for (int l : r.labels) CHECK(l == 0);
  CHECK(r.accuracy == doctest::Approx(-1.0));
}

TEST_CASE("classification rejects mismatched sequence lengths") {
  StructurePair a = gen_structure("hmm2", 3, 2, 3);
  StructurePair b = gen_structure("hmm2", 4, 2, 3);
  LatentJTModel ma = random_model(a.tree, 1);
  LatentJTModel mb = random_model(b.tree, 2);
  std::vector<SampleSet> train{sample(ma, 50, 3), sample(mb, 50, 4)};
  SampleSet test = sample(ma, 5, 5);
  CHECK_THROWS_AS(classify_sequences(train, test, {}, "spectral", 2, EMConfig{}, 1), std::invalid_argument);
}

TEST_CASE("splice-format records parse into four-letter state indices") {
  const std::string path = std::filesystem::temp_directory_path() / "sjt_splice_test.txt";
  {
    std::ofstream out(path);
    out << "EI,seq1," << std::string(30, 'A') + std::string(30, 'C') << "\n";
    out << "IE,seq2," << std::string(30, 'G') + std::string(30, 'T') << "\n";
    out << "N,seq3," << std::string(60, 'a') << "\n";
    out << "EI,seq4," << std::string(60, 'T') << "\n";
  }
  SpliceFile sf = read_splice(path);
  std::remove(path.c_str());
  REQUIRE(sf.rows.size() == 4);
  CHECK(sf.rows[0].size() == 60);
  CHECK(sf.rows[0][0] == 0);
  CHECK(sf.rows[0][59] == 1);
  CHECK(sf.rows[1][0] == 2);
  CHECK(sf.rows[1][59] == 3);
  CHECK(sf.class_names == std::vector<std::string>{"EI", "IE", "N"});
  CHECK(sf.labels == std::vector<int>{0, 1, 2, 0});
}
