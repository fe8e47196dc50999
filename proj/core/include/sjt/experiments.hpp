#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sjt/em.hpp"
#include "sjt/model.hpp"
#include "sjt/spectral.hpp"

namespace sjt {

/// Synthetic evaluation setup: a structure family, sizes, the training
/// grid and which learners to run.
struct BenchmarkConfig {
  std::string family = "hmm2";  // hmm2 | hmm3 | factorial2 | synthetic-jt
  int length = 8;               // chain length / time steps (ignored by synthetic-jt)
  int k_hidden = 2;
  int k_observed = 4;
  std::vector<long long> n_grid = {100, 1000, 10000, 100000};
  int test_size = 1000;
  int num_parameter_sets = 10;
  std::uint64_t seed = 1;
  std::vector<std::string> learners = {"spectral", "em", "online-em"};
  bool include_timings = true;
  EMConfig em;
};

struct TrialResult {
  std::string learner;
  int param_set = 0;
  long long n = 0;
  std::vector<double> errors;  // relative errors on test queries with positive truth
  int zero_truth_queries = 0;
  double mean_error = 0.0;
  double median_error = 0.0;
  double train_seconds = 0.0;
  bool failed = false;
  std::string failure;
};

struct SeriesPoint {
  long long n = 0;
  std::string learner;
  double median_error = 0.0;  // median over parameter sets of each trial's mean error
  double mean_time_seconds = 0.0;
};

struct BenchmarkResult {
  BenchmarkConfig config;
  std::vector<TrialResult> trials;
  std::vector<SeriesPoint> series;
};

struct StructurePair {
  GraphicalModelSpec spec;
  JunctionTree tree;  // rooted, every internal node with three neighbors
};

/// Hand-shaped junction trees for the benchmark families. Every emitted
/// tree validates cleanly and keeps observed variables in leaf
/// remainders.
StructurePair gen_structure(const std::string& family, int length, int k_hidden, int k_observed);

/// |estimate - truth| / truth; truth must be positive.
double relative_error(double estimate, double truth);

/// Full protocol: per parameter set and per N, draw train/test data,
/// run each learner, score against the generating model's exact
/// marginals, and time training.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

struct ClassifyResult {
  std::vector<int> labels;
  double accuracy = -1.0;  // -1 when the test set carries no labels
};

/// One sequence model per class; test sequences get the argmax-likelihood
/// class (clamped estimates for the spectral learner, ties to the lower
/// class index).
ClassifyResult classify_sequences(const std::vector<SampleSet>& train_per_class, const SampleSet& test,
                                  const std::vector<int>& test_labels, const std::string& learner,
                                  int k_hidden, const EMConfig& emcfg, std::uint64_t seed);

/// Worker-pool width: SJT_THREADS if set, else hardware concurrency.
int thread_count();

}  // namespace sjt
