#pragma once

#include <cstdint>
#include <vector>

#include "sjt/model.hpp"

namespace sjt {

struct EMConfig {
  int restarts = 5;
  double tolerance = 1e-4;       // relative log-likelihood change
  int max_iterations = 500;
  std::vector<double> stepwise_exponents = {0.6, 0.7, 0.8, 0.9, 1.0};
  int minibatch = 128;
  int epochs = 1;
  std::uint64_t seed = 0;
};

struct TrainResult {
  LatentJTModel model;
  std::vector<double> log_likelihood;  // batch EM: one entry per E-step of the winning restart
  std::vector<double> grid_log_likelihood;  // online EM: final likelihood per exponent
  double seconds = 0.0;
  int selected_restart = -1;
  double selected_exponent = 0.0;
};

/// Batch junction-tree EM with random restarts. Each E-step conditions
/// the full message passing on every sample (two passes, collect and
/// distribute), the M-step renormalizes expected clique counts.
TrainResult em_train(const JunctionTree& tree, const SampleSet& samples, const EMConfig& cfg = {});

/// Stepwise online EM: sufficient statistics are interpolated with
/// stepsize (t+2)^(-a) per minibatch, one run per exponent in the grid,
/// best final likelihood wins.
TrainResult online_em_train(const JunctionTree& tree, const SampleSet& samples, const EMConfig& cfg = {});

/// Total log-likelihood of a sample set under a model.
double log_likelihood(const LatentJTModel& model, const SampleSet& samples);

}  // namespace sjt
