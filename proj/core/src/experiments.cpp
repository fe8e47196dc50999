#include "sjt/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sjt {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9e3779b97f4a7c15ULL + b;
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

struct TreeBuilder {
  std::vector<VariableDecl> variables;
  std::vector<std::vector<int>> cliques;
  std::vector<std::pair<int, int>> edges;

  int add_var(const std::string& name, int card, bool observed) {
    variables.push_back({name, card, observed});
    return static_cast<int>(variables.size()) - 1;
  }
  int add_clique(std::vector<int> vars) {
    std::sort(vars.begin(), vars.end());
    cliques.push_back(std::move(vars));
    return static_cast<int>(cliques.size()) - 1;
  }
  void connect(int parent, int child) { edges.emplace_back(parent, child); }

  StructurePair finish(int root) {
    JunctionTree jt;
    jt.variables = variables;
    jt.nodes.resize(cliques.size());
    for (size_t i = 0; i < cliques.size(); ++i) jt.nodes[i].clique = cliques[i];
    jt.edges = edges;
    StructurePair out;
    out.tree = root_tree(jt, root);
    out.spec.variables = variables;
    std::set<std::pair<int, int>> es;
    for (const auto& c : cliques)
      for (size_t i = 0; i + 1 < c.size(); ++i)
        for (size_t j = i + 1; j < c.size(); ++j) es.emplace(c[i], c[j]);
    out.spec.edges.assign(es.begin(), es.end());
    out.spec.cliques = cliques;
    out.spec.tree_edges = edges;
    out.spec.root = root;
    return out;
  }
};

StructurePair gen_hmm2(int T, int kh, int ko) {
  if (T < 3) throw std::invalid_argument("hmm2 needs length >= 3");
  TreeBuilder b;
  std::vector<int> H(static_cast<size_t>(T)), O(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) H[static_cast<size_t>(t)] = b.add_var("H" + std::to_string(t + 1), kh, false);
  for (int t = 0; t < T; ++t) O[static_cast<size_t>(t)] = b.add_var("O" + std::to_string(t + 1), ko, true);
  std::vector<int> K, E;
  for (int t = 0; t + 2 < T; ++t)
    K.push_back(b.add_clique({H[static_cast<size_t>(t)], H[static_cast<size_t>(t) + 1], H[static_cast<size_t>(t) + 2]}));
  for (int t = 0; t < T; ++t) E.push_back(b.add_clique({H[static_cast<size_t>(t)], O[static_cast<size_t>(t)]}));
  const int last = static_cast<int>(K.size()) - 1;
  b.connect(K[0], E[0]);
  b.connect(K[0], E[1]);
  if (last == 0) {
    b.connect(K[0], E[2]);
  } else {
    for (int t = 0; t < last; ++t) {
      b.connect(K[static_cast<size_t>(t)], K[static_cast<size_t>(t) + 1]);
      if (t > 0) b.connect(K[static_cast<size_t>(t)], E[static_cast<size_t>(t) + 1]);
    }
    b.connect(K[static_cast<size_t>(last)], E[static_cast<size_t>(last) + 1]);
    b.connect(K[static_cast<size_t>(last)], E[static_cast<size_t>(last) + 2]);
  }
  return b.finish(K[0]);
}

StructurePair gen_hmm3(int T, int kh, int ko) {
  if (T < 5) throw std::invalid_argument("hmm3 needs length >= 5");
  TreeBuilder b;
  std::vector<int> H(static_cast<size_t>(T)), O(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) H[static_cast<size_t>(t)] = b.add_var("H" + std::to_string(t + 1), kh, false);
  for (int t = 0; t < T; ++t) O[static_cast<size_t>(t)] = b.add_var("O" + std::to_string(t + 1), ko, true);
  // Every interior separator spans three hidden steps, so each side of a
  // cut needs three independent observation channels. The ends provide
  // them by pairing the two outermost observations into one leaf and
  // widening the root to the first five steps.
  const int root = b.add_clique({H[0], H[1], H[2], H[3], H[4]});
  const int L = b.add_clique({H[0], H[1], O[0], O[1]});
  const int R = b.add_clique({H[static_cast<size_t>(T) - 2], H[static_cast<size_t>(T) - 1],
                              O[static_cast<size_t>(T) - 2], O[static_cast<size_t>(T) - 1]});
  std::vector<int> E;  // singleton emission cliques for steps 3..T-2 (1-based)
  for (int j = 2; j + 2 < T; ++j)
    E.push_back(b.add_clique({H[static_cast<size_t>(j)], O[static_cast<size_t>(j)]}));
  std::vector<int> K;  // four-step chain cliques, 1-based t = 3..T-3
  for (int t = 3; t + 3 <= T; ++t)
    K.push_back(b.add_clique({H[static_cast<size_t>(t) - 1], H[static_cast<size_t>(t)],
                              H[static_cast<size_t>(t) + 1], H[static_cast<size_t>(t) + 2]}));

  b.connect(root, L);
  b.connect(root, E[0]);  // E_3
  if (K.empty()) {
    b.connect(root, R);  // T == 5
  } else {
    b.connect(root, K[0]);
    for (size_t k = 0; k < K.size(); ++k) {
      if (k + 1 < K.size()) {
        b.connect(K[k], E[k + 1]);  // K_t hosts E_{t+1}
        b.connect(K[k], K[k + 1]);
      } else {
        b.connect(K[k], E[k + 1]);  // E_{T-2}
        b.connect(K[k], R);
      }
    }
  }
  return b.finish(root);
}

StructurePair gen_factorial2(int T, int kh, int ko) {
  if (T < 3) throw std::invalid_argument("factorial2 needs length >= 3");
  TreeBuilder b;
  std::vector<int> A(static_cast<size_t>(T)), B(static_cast<size_t>(T)), O(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) A[static_cast<size_t>(t)] = b.add_var("A" + std::to_string(t + 1), kh, false);
  for (int t = 0; t < T; ++t) B[static_cast<size_t>(t)] = b.add_var("B" + std::to_string(t + 1), kh, false);
  for (int t = 0; t < T; ++t) O[static_cast<size_t>(t)] = b.add_var("O" + std::to_string(t + 1), ko, true);
  // root spans the first three steps so the leaf count matches a
  // three-neighbor interior exactly
  const int root = b.add_clique({A[0], B[0], A[1], B[1], A[2], B[2]});
  std::vector<int> M(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t)
    M[static_cast<size_t>(t)] = b.add_clique({A[static_cast<size_t>(t)], B[static_cast<size_t>(t)], O[static_cast<size_t>(t)]});
  std::vector<int> Q;  // quad cliques from step 3 on (0-based t = 2..T-2)
  for (int t = 2; t + 1 < T; ++t)
    Q.push_back(b.add_clique({A[static_cast<size_t>(t)], B[static_cast<size_t>(t)], A[static_cast<size_t>(t) + 1],
                              B[static_cast<size_t>(t) + 1]}));
  b.connect(root, M[0]);
  b.connect(root, M[1]);
  if (Q.empty()) {
    b.connect(root, M[2]);
  } else {
    b.connect(root, Q[0]);
    for (size_t qi = 0; qi < Q.size(); ++qi) {
      if (qi + 1 < Q.size()) {
        b.connect(Q[qi], M[qi + 2]);
        b.connect(Q[qi], Q[qi + 1]);
      } else {
        b.connect(Q[qi], M[qi + 2]);
        b.connect(Q[qi], M[qi + 3]);
      }
    }
  }
  return b.finish(root);
}

StructurePair gen_synthetic_jt(int kh, int ko) {
  TreeBuilder b;
  // three-level binary hierarchy of hidden pairs, one observation per
  // level-member plus an extra one at the top
  auto pair_vars = [&](const std::string& tag) {
    int a = b.add_var("a_" + tag, kh, false);
    int bb = b.add_var("b_" + tag, kh, false);
    return std::make_pair(a, bb);
  };
  auto [ar, br] = pair_vars("r");
  auto [ac1, bc1] = pair_vars("c1");
  auto [ac2, bc2] = pair_vars("c2");
  auto [ag1, bg1] = pair_vars("g1");
  auto [ag2, bg2] = pair_vars("g2");
  auto [ag3, bg3] = pair_vars("g3");
  auto [ag4, bg4] = pair_vars("g4");
  int Or1 = b.add_var("O_r1", ko, true);
  int Or2 = b.add_var("O_r2", ko, true);
  int Oc1 = b.add_var("O_c1", ko, true);
  int Oc2 = b.add_var("O_c2", ko, true);
  int Og1 = b.add_var("O_g1", ko, true);
  int Og2 = b.add_var("O_g2", ko, true);
  int Og3 = b.add_var("O_g3", ko, true);
  int Og4 = b.add_var("O_g4", ko, true);

  int Qc1 = b.add_clique({ar, br, ac1, bc1});
  int Qc2 = b.add_clique({ar, br, ac2, bc2});
  int Qg1 = b.add_clique({ac1, bc1, ag1, bg1});
  int Qg2 = b.add_clique({ac1, bc1, ag2, bg2});
  int Qg3 = b.add_clique({ac2, bc2, ag3, bg3});
  int Qg4 = b.add_clique({ac2, bc2, ag4, bg4});
  int Mr = b.add_clique({ar, br, Or1});
  int Mr2 = b.add_clique({ar, br, Or2});
  int Mc1 = b.add_clique({ac1, bc1, Oc1});
  int Mc2 = b.add_clique({ac2, bc2, Oc2});
  int Mg1 = b.add_clique({ag1, bg1, Og1});
  int Mg2 = b.add_clique({ag2, bg2, Og2});
  int Mg3 = b.add_clique({ag3, bg3, Og3});
  int Mg4 = b.add_clique({ag4, bg4, Og4});

  b.connect(Qc1, Mr);
  b.connect(Qc1, Qc2);
  b.connect(Qc1, Qg1);
  b.connect(Qc2, Mr2);
  b.connect(Qc2, Qg3);
  b.connect(Qg1, Mg1);
  b.connect(Qg1, Qg2);
  b.connect(Qg2, Mg2);
  b.connect(Qg2, Mc1);
  b.connect(Qg3, Mg3);
  b.connect(Qg3, Qg4);
  b.connect(Qg4, Mg4);
  b.connect(Qg4, Mc2);
  return b.finish(Qc1);
}

}  // namespace

StructurePair gen_structure(const std::string& family, int length, int k_hidden, int k_observed) {
  if (family == "hmm2") return gen_hmm2(length, k_hidden, k_observed);
  if (family == "hmm3") return gen_hmm3(length, k_hidden, k_observed);
  if (family == "factorial2") return gen_factorial2(length, k_hidden, k_observed);
  if (family == "synthetic-jt") return gen_synthetic_jt(k_hidden, k_observed);
  throw std::invalid_argument("unknown structure family: " + family);
}

double relative_error(double estimate, double truth) {
  if (truth <= 0) throw std::invalid_argument("relative_error needs positive truth");
  return std::abs(estimate - truth) / truth;
}

int thread_count() {
  if (const char* env = std::getenv("SJT_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace {

void summarize(TrialResult& t) {
  if (t.errors.empty()) {
    t.mean_error = 0;
    t.median_error = 0;
    return;
  }
  std::vector<double> e = t.errors;
  std::sort(e.begin(), e.end());
  t.median_error = e[e.size() / 2];
  t.mean_error = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  BenchmarkResult result;
  result.config = config;
  StructurePair sp = gen_structure(config.family, config.length, config.k_hidden, config.k_observed);
  const JunctionTree& tree = sp.tree;
  ObservedSetPlan plan = plan_observed_sets(tree);

  struct Job {
    int param_set;
    long long n;
    std::string learner;
  };
  std::vector<Job> jobs;
  for (int ps = 0; ps < config.num_parameter_sets; ++ps)
    for (long long n : config.n_grid)
      for (const std::string& learner : config.learners) jobs.push_back({ps, n, learner});
  result.trials.resize(jobs.size());

  // per parameter set: model, test queries and their ground truth
  std::vector<LatentJTModel> models;
  std::vector<SampleSet> tests;
  std::vector<std::vector<double>> truths;
  for (int ps = 0; ps < config.num_parameter_sets; ++ps) {
    LatentJTModel model = random_model(tree, mix(config.seed, 0x10000u + static_cast<unsigned>(ps)));
    SampleSet test = sample(model, static_cast<std::size_t>(config.test_size),
                            mix(config.seed, 0x20000u + static_cast<unsigned>(ps)));
    std::vector<double> truth(test.rows.size());
    for (size_t q = 0; q < test.rows.size(); ++q) {
      std::map<int, int> asg;
      for (size_t k = 0; k < test.var_ids.size(); ++k) asg[test.var_ids[k]] = test.rows[q][k];
      truth[q] = exact_marginal(model, asg);
    }
    models.push_back(std::move(model));
    tests.push_back(std::move(test));
    truths.push_back(std::move(truth));
  }

  auto run_job = [&](const Job& job, TrialResult& out) {
    out.learner = job.learner;
    out.param_set = job.param_set;
    out.n = job.n;
    const LatentJTModel& model = models[static_cast<size_t>(job.param_set)];
    const SampleSet& test = tests[static_cast<size_t>(job.param_set)];
    const std::vector<double>& truth = truths[static_cast<size_t>(job.param_set)];
    SampleSet train = sample(model, static_cast<std::size_t>(job.n),
                             mix(config.seed, mix(0x30000u + static_cast<unsigned>(job.param_set),
                                                  static_cast<std::uint64_t>(job.n))));
    try {
      std::vector<double> estimates(test.rows.size());
      if (job.learner == "spectral") {
        EmpiricalMoments moments(train, tree);
        const auto t0 = std::chrono::steady_clock::now();
        ObservableParams params = learn(tree, plan, moments);
        out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (size_t q = 0; q < test.rows.size(); ++q) {
          std::map<int, int> asg;
          for (size_t k = 0; k < test.var_ids.size(); ++k) asg[test.var_ids[k]] = test.rows[q][k];
          estimates[q] = infer(params, asg).clamped;
        }
      } else if (job.learner == "em" || job.learner == "online-em") {
        EMConfig emcfg = config.em;
        emcfg.seed = mix(config.seed, 0x40000u + static_cast<unsigned>(job.param_set));
        TrainResult tr = job.learner == "em" ? em_train(tree, train, emcfg) : online_em_train(tree, train, emcfg);
        out.train_seconds = tr.seconds;
        for (size_t q = 0; q < test.rows.size(); ++q) {
          std::map<int, int> asg;
          for (size_t k = 0; k < test.var_ids.size(); ++k) asg[test.var_ids[k]] = test.rows[q][k];
          estimates[q] = exact_marginal(tr.model, asg);
        }
      } else {
        throw std::invalid_argument("unknown learner: " + job.learner);
      }
      for (size_t q = 0; q < estimates.size(); ++q) {
        if (truth[q] > 0)
          out.errors.push_back(relative_error(estimates[q], truth[q]));
        else
          ++out.zero_truth_queries;
      }
      summarize(out);
    } catch (const std::exception& e) {
      out.failed = true;
      out.failure = e.what();
    }
  };

  const int workers = std::min<int>(thread_count(), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (size_t j = 0; j < jobs.size(); ++j) run_job(jobs[j], result.trials[j]);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (;;) {
          size_t j = next.fetch_add(1);
          if (j >= jobs.size()) return;
          run_job(jobs[j], result.trials[j]);
        }
      });
    for (auto& th : pool) th.join();
  }

  for (long long n : config.n_grid)
    for (const std::string& learner : config.learners) {
      std::vector<double> means, times;
      for (const TrialResult& t : result.trials)
        if (t.n == n && t.learner == learner && !t.failed) {
          means.push_back(t.mean_error);
          times.push_back(t.train_seconds);
        }
      SeriesPoint pt;
      pt.n = n;
      pt.learner = learner;
      pt.median_error = median(means);
      pt.mean_time_seconds =
          times.empty() ? 0 : std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
      result.series.push_back(pt);
    }
  return result;
}

ClassifyResult classify_sequences(const std::vector<SampleSet>& train_per_class, const SampleSet& test,
                                  const std::vector<int>& test_labels, const std::string& learner,
                                  int k_hidden, const EMConfig& emcfg, std::uint64_t seed) {
  if (train_per_class.size() < 1) throw std::invalid_argument("at least one training class required");
  const size_t T = train_per_class.front().var_ids.size();
  for (const SampleSet& s : train_per_class)
    if (s.var_ids.size() != T) throw std::invalid_argument("training classes disagree on sequence length");
  if (test.var_ids.size() != T) throw std::invalid_argument("test sequence length mismatch");

  int ko = 2;
  auto scan = [&](const SampleSet& s) {
    for (const auto& row : s.rows)
      for (int v : row) ko = std::max(ko, v + 1);
  };
  for (const SampleSet& s : train_per_class) scan(s);
  scan(test);

  StructurePair sp = gen_structure("hmm2", static_cast<int>(T), k_hidden, ko);
  const JunctionTree& tree = sp.tree;
  const std::vector<int> obs = tree.observed_vars();

  auto remap = [&](const SampleSet& s) {
    SampleSet out;
    out.var_ids = obs;
    out.rows = s.rows;
    return out;
  };

  struct ClassModel {
    bool spectral = false;
    bool ok = true;
    ObservableParams params;
    LatentJTModel model;
  };
  std::vector<ClassModel> trained(train_per_class.size());
  ObservedSetPlan plan = plan_observed_sets(tree);
  for (size_t c = 0; c < train_per_class.size(); ++c) {
    SampleSet train = remap(train_per_class[c]);
    ClassModel& cm = trained[c];
    try {
      if (learner == "spectral") {
        cm.spectral = true;
        EmpiricalMoments moments(train, tree);
        cm.params = learn(tree, plan, moments);
      } else if (learner == "em" || learner == "online-em") {
        EMConfig cfg = emcfg;
        cfg.seed = mix(seed, static_cast<std::uint64_t>(c));
        TrainResult tr = learner == "em" ? em_train(tree, train, cfg) : online_em_train(tree, train, cfg);
        cm.model = std::move(tr.model);
      } else {
        throw std::invalid_argument("unknown learner: " + learner);
      }
    } catch (const std::exception&) {
      cm.ok = false;
    }
  }

  ClassifyResult result;
  result.labels.reserve(test.rows.size());
  int correct = 0;
  for (size_t q = 0; q < test.rows.size(); ++q) {
    std::map<int, int> asg;
    for (size_t k = 0; k < obs.size(); ++k) asg[obs[k]] = test.rows[q][k];
    int best = 0;
    double best_p = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < trained.size(); ++c) {
      double p = -std::numeric_limits<double>::infinity();
      if (trained[c].ok)
        p = trained[c].spectral ? infer(trained[c].params, asg).clamped : exact_marginal(trained[c].model, asg);
      if (p > best_p) {
        best_p = p;
        best = static_cast<int>(c);
      }
    }
    result.labels.push_back(best);
    if (!test_labels.empty() && test_labels[q] == best) ++correct;
  }
  if (!test_labels.empty())
    result.accuracy = static_cast<double>(correct) / static_cast<double>(test.rows.size());
  return result;
}

}  // namespace sjt
