#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "sjt/em.hpp"
#include "sjt/experiments.hpp"
#include "sjt/spectral.hpp"

using namespace sjt;

namespace {

LabeledTensor random_tensor(const std::vector<Variable>& vars, std::mt19937_64& rng) {
  LabeledTensor t(vars);
  for (double& v : t.mutable_values()) v = uniform01(rng());
  return t;
}

void BM_TensorMultiply(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int k = static_cast<int>(state.range(0));
  const Variable A{0, k}, B{1, k}, C{2, k}, D{3, k};
  LabeledTensor lhs = random_tensor({A, B, C}, rng);
  LabeledTensor rhs = random_tensor({B, C, D}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(multiply(lhs, rhs, {B.id, C.id}));
  }
}
BENCHMARK(BM_TensorMultiply)->Arg(2)->Arg(4)->Arg(8);

void BM_DiagEmbed(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Variable A{0, 4}, B{1, 4};
  LabeledTensor base = random_tensor({A, B}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diag_embed(base, {{A.id, 2}, {B.id, 2}}));
  }
}
BENCHMARK(BM_DiagEmbed);

void BM_ExactMarginal(benchmark::State& state) {
  StructurePair sp = gen_structure("hmm2", static_cast<int>(state.range(0)), 2, 4);
  LatentJTModel model = random_model(sp.tree, 3);
  SampleSet q = sample(model, 1, 4);
  std::map<int, int> asg;
  for (size_t k = 0; k < q.var_ids.size(); ++k) asg[q.var_ids[k]] = q.rows[0][k];
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_marginal(model, asg));
  }
}
BENCHMARK(BM_ExactMarginal)->Arg(5)->Arg(8)->Arg(12);

void BM_SpectralLearn(benchmark::State& state) {
  StructurePair sp = gen_structure("hmm2", 8, 2, 4);
  LatentJTModel model = random_model(sp.tree, 5);
  SampleSet train = sample(model, static_cast<std::size_t>(state.range(0)), 6);
  ObservedSetPlan plan = plan_observed_sets(sp.tree);
  for (auto _ : state) {
    EmpiricalMoments moments(train, sp.tree);
    benchmark::DoNotOptimize(learn(sp.tree, plan, moments));
  }
}
BENCHMARK(BM_SpectralLearn)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_SpectralInfer(benchmark::State& state) {
  StructurePair sp = gen_structure("hmm2", 8, 2, 4);
  LatentJTModel model = random_model(sp.tree, 7);
  SampleSet train = sample(model, 20000, 8);
  EmpiricalMoments moments(train, sp.tree);
  ObservableParams params = learn(sp.tree, plan_observed_sets(sp.tree), moments);
  SampleSet q = sample(model, 1, 9);
  std::map<int, int> asg;
  for (size_t k = 0; k < q.var_ids.size(); ++k) asg[q.var_ids[k]] = q.rows[0][k];
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer(params, asg));
  }
}
BENCHMARK(BM_SpectralInfer);

void BM_EMTrain(benchmark::State& state) {
  StructurePair sp = gen_structure("hmm2", 8, 2, 4);
  LatentJTModel model = random_model(sp.tree, 10);
  SampleSet train = sample(model, static_cast<std::size_t>(state.range(0)), 11);
  EMConfig cfg;
  cfg.restarts = 1;
  cfg.max_iterations = 5;
  cfg.seed = 12;
  for (auto _ : state) {
    benchmark::DoNotOptimize(em_train(sp.tree, train, cfg));
  }
}
BENCHMARK(BM_EMTrain)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Sampling(benchmark::State& state) {
  StructurePair sp = gen_structure("hmm2", 8, 2, 4);
  LatentJTModel model = random_model(sp.tree, 13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample(model, static_cast<std::size_t>(state.range(0)), 14));
  }
}
BENCHMARK(BM_Sampling)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
