// Command-line front end: structure/model generation, sampling, training
// (spectral, EM, online EM), inference, the synthetic benchmark protocol,
// sequence classification and model diagnostics.

#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "sjt/em.hpp"
#include "sjt/experiments.hpp"
#include "sjt/io.hpp"
#include "sjt/spectral.hpp"

using namespace sjt;

namespace {

SampleSet load_samples(const std::string& path, const JunctionTree& tree) {
  SampleFile file = read_samples_csv(path);
  return bind_samples(file, tree);
}

void write_or_print(const std::string& out, const std::string& content) {
  if (out.empty())
    std::cout << content;
  else
    write_text_file(out, content);
}

int run_gen(const std::string& family, int length, int kh, int ko, std::uint64_t seed,
            const std::string& from_spec, bool structure_only, const std::string& out) {
  JunctionTree tree;
  if (!from_spec.empty()) {
    ModelDocument doc = read_model_json(from_spec);
    tree = doc.tree;
  } else {
    tree = gen_structure(family, length, kh, ko).tree;
  }
  for (const Violation& v : validate(tree)) std::cerr << "warning: " << v.message << "\n";
  if (structure_only) {
    write_or_print(out, tree_to_json(tree));
  } else {
    LatentJTModel model = random_model(tree, seed);
    write_or_print(out, model_to_json(model));
  }
  return 0;
}

int run_sample(const std::string& model_path, std::size_t n, std::uint64_t seed, const std::string& out) {
  ModelDocument doc = read_model_json(model_path);
  if (!doc.has_potentials) throw std::runtime_error("sampling needs a model with potentials");
  SampleSet s = sample(doc.model, n, seed);
  if (out.empty()) {
    std::ostringstream os;
    for (size_t k = 0; k < s.var_ids.size(); ++k) os << (k ? "," : "") << doc.tree.var_name(s.var_ids[k]);
    os << "\n";
    for (const auto& row : s.rows) {
      for (size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
      os << "\n";
    }
    std::cout << os.str();
  } else {
    write_samples_csv(out, s, doc.tree);
  }
  return 0;
}

int run_train(const std::string& model_path, const std::string& samples_path, const std::string& learner,
              const std::string& out, double cutoff, bool stack, int minus_candidates, const EMConfig& emcfg) {
  ModelDocument doc = read_model_json(model_path);
  const JunctionTree& tree = doc.tree;
  SampleSet samples = load_samples(samples_path, tree);
  if (learner == "spectral") {
    PlanOptions popts;
    popts.minus_candidates = minus_candidates;
    ObservedSetPlan plan = plan_observed_sets(tree, popts);
    for (size_t v = 0; v < plan.nodes.size(); ++v)
      if (!plan.nodes[v].feasible())
        std::cerr << "warning: node " << v << ": " << plan.nodes[v].note << "\n";
    EmpiricalMoments moments(samples, tree);
    LearnOptions lopts;
    lopts.rel_cutoff = cutoff;
    lopts.stack_minus_candidates = stack;
    ObservableParams params = learn(tree, plan, moments, lopts);
    write_or_print(out, params_to_json(params));
  } else if (learner == "em" || learner == "online-em") {
    TrainResult r = learner == "em" ? em_train(tree, samples, emcfg) : online_em_train(tree, samples, emcfg);
    std::cerr << "trained in " << r.seconds << " s";
    if (learner == "em")
      std::cerr << ", restart " << r.selected_restart << ", " << r.log_likelihood.size() << " iterations";
    else
      std::cerr << ", exponent " << r.selected_exponent;
    std::cerr << ", final log-likelihood " << (r.log_likelihood.empty() ? 0.0 : r.log_likelihood.back()) << "\n";
    write_or_print(out, model_to_json(r.model));
  } else {
    throw std::runtime_error("unknown learner: " + learner);
  }
  return 0;
}

int run_infer(const std::string& params_path, const std::string& model_path, const std::string& queries_path,
              const std::string& out) {
  std::optional<ObservableParams> params;
  std::optional<LatentJTModel> model;
  const JunctionTree* tree = nullptr;
  if (!params_path.empty()) {
    params = read_params_json(params_path);
    tree = &params->tree;
  } else if (!model_path.empty()) {
    ModelDocument doc = read_model_json(model_path);
    if (!doc.has_potentials) throw std::runtime_error("inference needs potentials");
    model = doc.model;
    tree = &model->tree;
  } else {
    throw std::runtime_error("provide --params or --model");
  }
  SampleSet queries = load_samples(queries_path, *tree);
  std::ostringstream os;
  for (size_t k = 0; k < queries.var_ids.size(); ++k) os << tree->var_name(queries.var_ids[k]) << ",";
  os << (params ? "estimate,raw" : "probability") << "\n";
  for (const auto& row : queries.rows) {
    std::map<int, int> asg;
    for (size_t k = 0; k < queries.var_ids.size(); ++k) asg[queries.var_ids[k]] = row[k];
    for (int v : row) os << v << ",";
    if (params) {
      InferResult r = infer(*params, asg);
      os << r.clamped << "," << r.raw << "\n";
    } else {
      os << exact_marginal(*model, asg) << "\n";
    }
  }
  write_or_print(out, os.str());
  return 0;
}

int run_benchmark_cmd(const std::string& config_path, const std::string& out_dir) {
  BenchmarkConfig cfg = read_benchmark_config(config_path);
  BenchmarkResult result = run_benchmark(cfg);
  write_benchmark_outputs(out_dir, result);
  int failures = 0;
  for (const TrialResult& t : result.trials)
    if (t.failed) ++failures;
  std::cerr << result.trials.size() << " trials, " << failures << " failed; results in " << out_dir << "\n";
  for (const SeriesPoint& p : result.series)
    std::cout << p.learner << " N=" << p.n << " median_error=" << p.median_error
              << " mean_time=" << p.mean_time_seconds << "s\n";
  return 0;
}

int run_classify(const std::vector<std::string>& train_paths, const std::string& test_path, bool splice,
                 const std::string& learner, int kh, const EMConfig& emcfg, std::uint64_t seed,
                 const std::string& out) {
  std::vector<SampleSet> train;
  SampleSet test;
  std::vector<int> test_labels;
  std::vector<std::string> class_names;
  if (splice) {
    if (train_paths.size() != 1) throw std::runtime_error("splice mode takes one training file");
    SpliceFile tf = read_splice(train_paths[0]);
    class_names = tf.class_names;
    train.resize(tf.class_names.size());
    const size_t T = tf.rows.front().size();
    for (auto& s : train) {
      s.var_ids.resize(T);
      for (size_t k = 0; k < T; ++k) s.var_ids[k] = static_cast<int>(k);
    }
    for (size_t r = 0; r < tf.rows.size(); ++r) train[static_cast<size_t>(tf.labels[r])].rows.push_back(tf.rows[r]);
    SpliceFile sf = read_splice(test_path);
    test.var_ids = train[0].var_ids;
    test.rows = sf.rows;
    for (int l : sf.labels) {
      // align test class names with training ones
      int mapped = -1;
      for (size_t k = 0; k < class_names.size(); ++k)
        if (class_names[k] == sf.class_names[static_cast<size_t>(l)]) mapped = static_cast<int>(k);
      test_labels.push_back(mapped);
    }
  } else {
    for (const std::string& p : train_paths) {
      SampleFile f = read_samples_csv(p);
      train.push_back(f.samples);
      class_names.push_back(p);
    }
    SampleFile f = read_samples_csv(test_path);
    test = f.samples;
    test_labels = f.labels;
  }
  ClassifyResult r = classify_sequences(train, test, test_labels, learner, kh, emcfg, seed);
  std::ostringstream os;
  os << "label\n";
  for (int l : r.labels) os << l << "\n";
  write_or_print(out, os.str());
  if (r.accuracy >= 0)
    std::cout << "accuracy " << r.accuracy << " over " << test.rows.size() << " sequences\n";
  return 0;
}

int run_diagnostics(const std::string& model_path, double epsilon, double delta, const std::string& out) {
  ModelDocument doc = read_model_json(model_path);
  if (!doc.has_potentials) throw std::runtime_error("diagnostics needs a model with potentials");
  ObservedSetPlan plan = plan_observed_sets(doc.tree);
  Diagnostics d = diagnostics(doc.model, plan);
  std::ostringstream os;
  os << "node  tau  sigma_tau(pair)  sigma_tau(F)  order  observed_modes\n";
  for (const NodeDiagnostics& n : d.nodes) {
    os << n.node << "  " << n.tau << "  " << n.sigma_tau_pair << "  " << n.sigma_tau_f << "  " << n.d
       << "  " << n.e << "\n";
  }
  os << "alpha " << d.alpha << "\n";
  os << "beta " << d.beta << "\n";
  os << "d_max " << d.d_max << "\n";
  os << "e_max " << d.e_max << "\n";
  os << "cliques " << d.num_cliques << "\n";
  os << "sample bound (epsilon=" << epsilon << ", delta=" << delta << "): " << d.bound(epsilon, delta)
     << "\n";
  write_or_print(out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral learning of latent junction trees"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "emit a structure family or compile a model spec");
  std::string gen_family = "hmm2", gen_from, gen_out;
  int gen_length = 8, gen_kh = 2, gen_ko = 4;
  std::uint64_t gen_seed = 1;
  bool gen_structure_only = false;
  gen->add_option("--family", gen_family, "hmm2 | hmm3 | factorial2 | synthetic-jt");
  gen->add_option("--length", gen_length, "chain length / time steps");
  gen->add_option("--k-hidden", gen_kh, "hidden-state count");
  gen->add_option("--k-observed", gen_ko, "observed-state count");
  gen->add_option("--seed", gen_seed, "seed for the random potentials");
  gen->add_option("--from-spec", gen_from, "build the junction tree of a model spec file instead");
  gen->add_flag("--structure-only", gen_structure_only, "emit the tree without potentials");
  gen->add_option("--out", gen_out, "output path (stdout if omitted)");

  // sample
  auto* smp = app.add_subcommand("sample", "draw observed samples from a model");
  std::string smp_model, smp_out;
  std::size_t smp_n = 1000;
  std::uint64_t smp_seed = 1;
  smp->add_option("--model", smp_model, "model file with potentials")->required();
  smp->add_option("--n", smp_n, "number of samples");
  smp->add_option("--seed", smp_seed, "sampling seed");
  smp->add_option("--out", smp_out, "output CSV (stdout if omitted)");

  // train
  auto* trn = app.add_subcommand("train", "fit parameters from samples");
  std::string trn_model, trn_samples, trn_learner = "spectral", trn_out;
  double trn_cutoff = 1e-10;
  bool trn_stack = false;
  int trn_minus = 1;
  EMConfig emcfg;
  std::string trn_exponents;
  trn->add_option("--model", trn_model, "model/structure file")->required();
  trn->add_option("--samples", trn_samples, "training CSV")->required();
  trn->add_option("--learner", trn_learner, "spectral | em | online-em");
  trn->add_option("--out", trn_out, "output path (stdout if omitted)");
  trn->add_option("--cutoff", trn_cutoff, "relative singular-value cutoff");
  trn->add_flag("--stack-candidates", trn_stack, "combine all outside-anchor candidates");
  trn->add_option("--minus-candidates", trn_minus, "outside-anchor candidates to plan");
  trn->add_option("--restarts", emcfg.restarts, "EM restarts");
  trn->add_option("--tolerance", emcfg.tolerance, "EM convergence tolerance");
  trn->add_option("--max-iterations", emcfg.max_iterations, "EM iteration cap");
  trn->add_option("--minibatch", emcfg.minibatch, "online EM minibatch size");
  trn->add_option("--epochs", emcfg.epochs, "online EM passes over the data");
  trn->add_option("--em-seed", emcfg.seed, "EM initialization seed");
  trn->add_option("--exponents", trn_exponents, "online EM stepsize exponents, comma separated");

  // infer
  auto* inf = app.add_subcommand("infer", "joint probabilities of observed assignments");
  std::string inf_params, inf_model, inf_queries, inf_out;
  inf->add_option("--params", inf_params, "learned spectral parameters");
  inf->add_option("--model", inf_model, "model with potentials (exact inference)");
  inf->add_option("--queries", inf_queries, "CSV of observed assignments")->required();
  inf->add_option("--out", inf_out, "output CSV (stdout if omitted)");

  // benchmark
  auto* bch = app.add_subcommand("benchmark", "run the synthetic evaluation protocol");
  std::string bch_config, bch_out = "benchmark-results";
  bch->add_option("--config", bch_config, "benchmark config JSON")->required();
  bch->add_option("--out-dir", bch_out, "output directory");

  // classify
  auto* cls = app.add_subcommand("classify", "per-class sequence models, argmax label");
  std::vector<std::string> cls_train;
  std::string cls_test, cls_learner = "spectral", cls_out;
  bool cls_splice = false;
  int cls_kh = 2;
  std::uint64_t cls_seed = 1;
  cls->add_option("--train", cls_train, "training CSV per class (repeat), or one splice file")->required();
  cls->add_option("--test", cls_test, "test file")->required();
  cls->add_flag("--splice", cls_splice, "files are CLASS,name,SEQUENCE records");
  cls->add_option("--learner", cls_learner, "spectral | em | online-em");
  cls->add_option("--k-hidden", cls_kh, "hidden-state count of the per-class models");
  cls->add_option("--seed", cls_seed, "training seed");
  cls->add_option("--out", cls_out, "labels output (stdout if omitted)");

  // diagnostics
  auto* dgn = app.add_subcommand("diagnostics", "conditioning summary and sample bound");
  std::string dgn_model, dgn_out;
  double dgn_eps = 0.1, dgn_delta = 0.05;
  dgn->add_option("--model", dgn_model, "model with potentials")->required();
  dgn->add_option("--epsilon", dgn_eps, "target accuracy");
  dgn->add_option("--delta", dgn_delta, "failure probability");
  dgn->add_option("--out", dgn_out, "output path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!trn_exponents.empty()) {
      emcfg.stepwise_exponents.clear();
      std::stringstream ss(trn_exponents);
      std::string tok;
      while (std::getline(ss, tok, ',')) emcfg.stepwise_exponents.push_back(std::stod(tok));
    }
    if (gen->parsed())
      return run_gen(gen_family, gen_length, gen_kh, gen_ko, gen_seed, gen_from, gen_structure_only, gen_out);
    if (smp->parsed()) return run_sample(smp_model, smp_n, smp_seed, smp_out);
    if (trn->parsed())
      return run_train(trn_model, trn_samples, trn_learner, trn_out, trn_cutoff, trn_stack, trn_minus, emcfg);
    if (inf->parsed()) return run_infer(inf_params, inf_model, inf_queries, inf_out);
    if (bch->parsed()) return run_benchmark_cmd(bch_config, bch_out);
    if (cls->parsed())
      return run_classify(cls_train, cls_test, cls_splice, cls_learner, cls_kh, emcfg, cls_seed, cls_out);
    if (dgn->parsed()) return run_diagnostics(dgn_model, dgn_eps, dgn_delta, dgn_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
