#include "sjt/io.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace sjt {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

namespace {

json tensor_to_json(const LabeledTensor& t, const JunctionTree& tree,
                    const std::map<int, std::string>& extra_names) {
  json labels = json::array();
  for (const ModeLabel& l : t.labels()) {
    std::string name;
    if (l.var.id < static_cast<int>(tree.variables.size()))
      name = tree.var_name(l.var.id);
    else
      name = extra_names.at(l.var.id);
    labels.push_back({{"name", name}, {"occurrence", l.occ}, {"cardinality", l.var.card}});
  }
  return {{"labels", labels}, {"dims", t.dims()}, {"values", t.values()}};
}

LabeledTensor tensor_from_json(const json& j, const JunctionTree& tree,
                               std::map<std::string, Variable>& extra_vars, int* next_extra_id) {
  std::vector<Variable> vars;
  for (const json& l : j.at("labels")) {
    const std::string name = l.at("name").get<std::string>();
    const int card = l.at("cardinality").get<int>();
    int id = tree.find_var(name);
    if (id >= 0) {
      vars.push_back(tree.var(id));
    } else {
      auto it = extra_vars.find(name);
      if (it == extra_vars.end())
        it = extra_vars.emplace(name, Variable{(*next_extra_id)++, card}).first;
      vars.push_back(it->second);
    }
  }
  std::vector<double> values = j.at("values").get<std::vector<double>>();
  return LabeledTensor(vars, std::move(values));
}

json tree_json(const JunctionTree& tree) {
  json doc;
  json vars = json::array();
  for (const VariableDecl& v : tree.variables)
    vars.push_back({{"name", v.name}, {"cardinality", v.card}, {"observed", v.observed}});
  doc["variables"] = vars;
  json cliques = json::array();
  for (const JTNode& n : tree.nodes) {
    json c = json::array();
    for (int id : n.clique) c.push_back(tree.var_name(id));
    cliques.push_back(c);
  }
  doc["cliques"] = cliques;
  json edges = json::array();
  for (const auto& [a, b] : tree.edges) edges.push_back({a, b});
  doc["tree_edges"] = edges;
  doc["root"] = tree.root;
  return doc;
}

JunctionTree tree_from_spec(const GraphicalModelSpec& spec) {
  JunctionTree jt = build_junction_tree(spec);
  if (!spec.tree_edges.empty() && spec.root.has_value()) return root_tree(jt, *spec.root);
  if (spec.root.has_value()) return root_and_normalize(jt, *spec.root);
  return root_and_normalize(jt);
}

}  // namespace

ModelDocument read_model_json(const std::string& path) {
  json doc = json::parse(read_text_file(path));
  ModelDocument out;
  GraphicalModelSpec& spec = out.spec;
  for (const json& v : doc.at("variables"))
    spec.variables.push_back({v.at("name").get<std::string>(), v.at("cardinality").get<int>(),
                              v.at("observed").get<bool>()});
  auto var_id = [&](const std::string& name) {
    for (size_t i = 0; i < spec.variables.size(); ++i)
      if (spec.variables[i].name == name) return static_cast<int>(i);
    throw std::runtime_error("unknown variable name: " + name);
  };
  if (doc.contains("edges"))
    for (const json& e : doc["edges"])
      spec.edges.emplace_back(var_id(e.at(0).get<std::string>()), var_id(e.at(1).get<std::string>()));
  if (doc.contains("parents")) {
    spec.parents.resize(spec.variables.size());
    for (auto it = doc["parents"].begin(); it != doc["parents"].end(); ++it) {
      int child = var_id(it.key());
      for (const json& p : it.value()) spec.parents[static_cast<size_t>(child)].push_back(var_id(p.get<std::string>()));
    }
  }
  if (doc.contains("cliques"))
    for (const json& c : doc["cliques"]) {
      std::vector<int> ids;
      for (const json& n : c) ids.push_back(var_id(n.get<std::string>()));
      spec.cliques.push_back(ids);
    }
  if (doc.contains("tree_edges"))
    for (const json& e : doc["tree_edges"])
      spec.tree_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  if (doc.contains("root")) spec.root = doc["root"].get<int>();

  out.tree = tree_from_spec(spec);

  if (doc.contains("potentials")) {
    out.has_potentials = true;
    out.model.tree = out.tree;
    out.model.potentials.resize(out.tree.nodes.size());
    for (const json& p : doc["potentials"]) {
      const int node = p.at("node").get<int>();
      if (node < 0 || node >= static_cast<int>(out.tree.nodes.size()))
        throw std::runtime_error("potential references unknown node");
      std::vector<Variable> vars;
      for (const json& n : p.at("variables")) vars.push_back(out.tree.var(var_id(n.get<std::string>())));
      std::vector<double> values = p.at("values").get<std::vector<double>>();
      LabeledTensor t(vars, std::move(values));
      // reorder to the canonical ascending-id layout
      std::vector<int> perm(static_cast<size_t>(t.order()));
      std::iota(perm.begin(), perm.end(), 0);
      std::sort(perm.begin(), perm.end(), [&](int a, int b) {
        return t.labels()[static_cast<size_t>(a)].var.id < t.labels()[static_cast<size_t>(b)].var.id;
      });
      out.model.potentials[static_cast<size_t>(node)] = {node, permute_modes(t, perm)};
    }
    for (size_t v = 0; v < out.tree.nodes.size(); ++v)
      if (out.model.potentials[v].table.size() == 0 && !out.tree.nodes[v].clique.empty())
        throw std::runtime_error("missing potential for node " + std::to_string(v));
  }
  return out;
}

std::string tree_to_json(const JunctionTree& tree) { return tree_json(tree).dump(2) + "\n"; }

std::string model_to_json(const LatentJTModel& model) {
  json doc = tree_json(model.tree);
  json pots = json::array();
  for (size_t v = 0; v < model.potentials.size(); ++v) {
    const LabeledTensor& t = model.potentials[v].table;
    json names = json::array();
    for (const ModeLabel& l : t.labels()) names.push_back(model.tree.var_name(l.var.id));
    pots.push_back({{"node", static_cast<int>(v)}, {"variables", names}, {"values", t.values()}});
  }
  doc["potentials"] = pots;
  return doc.dump(2) + "\n";
}

void write_model_json(const std::string& path, const LatentJTModel& model) {
  write_text_file(path, model_to_json(model));
}

void write_tree_json(const std::string& path, const JunctionTree& tree) {
  write_text_file(path, tree_to_json(tree));
}

SampleFile read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  SampleFile out;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty sample file: " + path);
  std::stringstream hs(line);
  std::string cell;
  int label_col = -1;
  int col = 0;
  while (std::getline(hs, cell, ',')) {
    if (cell == "label")
      label_col = col;
    else
      out.names.push_back(cell);
    ++col;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<int> row;
    int c = 0;
    int label = -1;
    while (std::getline(ls, cell, ',')) {
      int v = std::stoi(cell);
      if (c == label_col)
        label = v;
      else
        row.push_back(v);
      ++c;
    }
    if (row.size() != out.names.size()) throw std::runtime_error("ragged sample row in " + path);
    out.samples.rows.push_back(std::move(row));
    if (label_col >= 0) out.labels.push_back(label);
  }
  out.samples.var_ids.resize(out.names.size());
  std::iota(out.samples.var_ids.begin(), out.samples.var_ids.end(), 0);
  return out;
}

void write_samples_csv(const std::string& path, const SampleSet& samples, const JunctionTree& tree) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (size_t k = 0; k < samples.var_ids.size(); ++k) {
    if (k) out << ",";
    out << tree.var_name(samples.var_ids[k]);
  }
  out << "\n";
  for (const auto& row : samples.rows) {
    for (size_t k = 0; k < row.size(); ++k) {
      if (k) out << ",";
      out << row[k];
    }
    out << "\n";
  }
}

SampleSet bind_samples(const SampleFile& file, const JunctionTree& tree) {
  SampleSet out;
  out.rows = file.samples.rows;
  std::vector<int> obs = tree.observed_vars();
  bool by_name = file.names.size() == obs.size();
  if (by_name)
    for (const std::string& n : file.names)
      if (tree.find_var(n) < 0) by_name = false;
  if (by_name) {
    for (const std::string& n : file.names) {
      int id = tree.find_var(n);
      if (!tree.observed(id)) throw std::runtime_error("sample column " + n + " is not observed in the model");
      out.var_ids.push_back(id);
    }
  } else {
    if (file.names.size() != obs.size())
      throw std::runtime_error("sample file has " + std::to_string(file.names.size()) +
                               " columns but the model has " + std::to_string(obs.size()) +
                               " observed variables");
    out.var_ids = obs;
  }
  return out;
}

SpliceFile read_splice(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  SpliceFile out;
  std::string line;
  auto letter = [](char c) {
    switch (c) {
      case 'A': case 'a': return 0;
      case 'C': case 'c': return 1;
      case 'G': case 'g': return 2;
      case 'T': case 't': return 3;
      default: return -1;
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cls, name, seq;
    if (!std::getline(ls, cls, ',') || !std::getline(ls, name, ',') || !std::getline(ls, seq))
      throw std::runtime_error("malformed splice record: " + line);
    auto strip = [](std::string s) {
      s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; }),
              s.end());
      return s;
    };
    cls = strip(cls);
    seq = strip(seq);
    std::vector<int> row;
    for (char c : seq) {
      int v = letter(c);
      if (v < 0) throw std::runtime_error("non-ACGT symbol in sequence: " + line);
      row.push_back(v);
    }
    if (!out.rows.empty() && row.size() != out.rows.front().size())
      throw std::runtime_error("sequence length mismatch in " + path);
    int label = -1;
    for (size_t k = 0; k < out.class_names.size(); ++k)
      if (out.class_names[k] == cls) label = static_cast<int>(k);
    if (label < 0) {
      label = static_cast<int>(out.class_names.size());
      out.class_names.push_back(cls);
    }
    out.rows.push_back(std::move(row));
    out.labels.push_back(label);
  }
  return out;
}

std::string params_to_json(const ObservableParams& params) {
  const JunctionTree& tree = params.tree;
  json doc = tree_json(tree);
  doc["rel_cutoff"] = params.rel_cutoff;
  std::map<int, std::string> extra_names;
  for (size_t v = 0; v < params.nodes.size(); ++v)
    if (params.nodes[v].projected())
      extra_names[params.nodes[v].proj.id] = "__proj" + std::to_string(v);
  json plan = json::array();
  for (size_t v = 0; v < params.plan.nodes.size(); ++v) {
    const NodePlan& np = params.plan.nodes[v];
    json theta = json::array();
    for (int id : np.theta) theta.push_back(tree.var_name(id));
    json minus = json::array();
    for (const auto& cand : np.theta_minus) {
      json c = json::array();
      for (int id : cand) c.push_back(tree.var_name(id));
      minus.push_back(c);
    }
    plan.push_back({{"node", static_cast<int>(v)},
                    {"theta", theta},
                    {"theta_minus", minus},
                    {"tau", np.tau},
                    {"feasible", np.feasible()}});
  }
  doc["plan"] = plan;
  json nodes = json::array();
  for (size_t v = 0; v < params.nodes.size(); ++v) {
    const NodeParams& np = params.nodes[v];
    json n;
    n["node"] = static_cast<int>(v);
    n["projected"] = np.projected();
    json theta = json::array();
    for (int id : np.theta) theta.push_back(tree.var_name(id));
    n["theta"] = theta;
    n["phat"] = tensor_to_json(np.phat, tree, extra_names);
    if (np.projected()) n["projector"] = tensor_to_json(*np.projector, tree, extra_names);
    nodes.push_back(n);
  }
  doc["nodes"] = nodes;
  return doc.dump(2) + "\n";
}

void write_params_json(const std::string& path, const ObservableParams& params) {
  write_text_file(path, params_to_json(params));
}

ObservableParams read_params_json(const std::string& path) {
  json doc = json::parse(read_text_file(path));
  ObservableParams params;
  // tree section mirrors the model document
  {
    GraphicalModelSpec spec;
    for (const json& v : doc.at("variables"))
      spec.variables.push_back({v.at("name").get<std::string>(), v.at("cardinality").get<int>(),
                                v.at("observed").get<bool>()});
    auto var_id = [&](const std::string& name) {
      for (size_t i = 0; i < spec.variables.size(); ++i)
        if (spec.variables[i].name == name) return static_cast<int>(i);
      throw std::runtime_error("unknown variable name: " + name);
    };
    for (const json& c : doc.at("cliques")) {
      std::vector<int> ids;
      for (const json& n : c) ids.push_back(var_id(n.get<std::string>()));
      spec.cliques.push_back(ids);
    }
    for (const json& e : doc.at("tree_edges")) spec.tree_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    spec.root = doc.at("root").get<int>();
    JunctionTree jt = build_junction_tree(spec);
    params.tree = root_tree(jt, *spec.root);
  }
  params.rel_cutoff = doc.value("rel_cutoff", 1e-10);
  auto vid = [&](const std::string& name) {
    int id = params.tree.find_var(name);
    if (id < 0) throw std::runtime_error("unknown variable name: " + name);
    return id;
  };
  params.plan.nodes.resize(params.tree.nodes.size());
  for (const json& p : doc.at("plan")) {
    NodePlan& np = params.plan.nodes[static_cast<size_t>(p.at("node").get<int>())];
    for (const json& n : p.at("theta")) np.theta.push_back(vid(n.get<std::string>()));
    for (const json& cand : p.at("theta_minus")) {
      std::vector<int> ids;
      for (const json& n : cand) ids.push_back(vid(n.get<std::string>()));
      np.theta_minus.push_back(ids);
    }
    np.tau = p.at("tau").get<long long>();
  }
  params.nodes.resize(params.tree.nodes.size());
  std::map<std::string, Variable> extra_vars;
  int next_extra = static_cast<int>(params.tree.variables.size());
  for (const json& n : doc.at("nodes")) {
    NodeParams& np = params.nodes[static_cast<size_t>(n.at("node").get<int>())];
    for (const json& t : n.at("theta")) np.theta.push_back(vid(t.get<std::string>()));
    np.phat = tensor_from_json(n.at("phat"), params.tree, extra_vars, &next_extra);
    if (n.at("projected").get<bool>()) {
      np.projector = tensor_from_json(n.at("projector"), params.tree, extra_vars, &next_extra);
      np.proj = np.projector->labels().back().var;
    }
  }
  return params;
}

BenchmarkConfig read_benchmark_config(const std::string& path) {
  json doc = json::parse(read_text_file(path));
  BenchmarkConfig cfg;
  cfg.family = doc.value("family", cfg.family);
  cfg.length = doc.value("length", cfg.length);
  cfg.k_hidden = doc.value("k_hidden", cfg.k_hidden);
  cfg.k_observed = doc.value("k_observed", cfg.k_observed);
  if (doc.contains("n_grid")) cfg.n_grid = doc["n_grid"].get<std::vector<long long>>();
  cfg.test_size = doc.value("test_size", cfg.test_size);
  cfg.num_parameter_sets = doc.value("num_parameter_sets", cfg.num_parameter_sets);
  cfg.seed = doc.value("seed", cfg.seed);
  if (doc.contains("learners")) cfg.learners = doc["learners"].get<std::vector<std::string>>();
  cfg.include_timings = doc.value("include_timings", cfg.include_timings);
  if (doc.contains("em")) {
    const json& em = doc["em"];
    cfg.em.restarts = em.value("restarts", cfg.em.restarts);
    cfg.em.tolerance = em.value("tolerance", cfg.em.tolerance);
    cfg.em.max_iterations = em.value("max_iterations", cfg.em.max_iterations);
    if (em.contains("stepwise_exponents"))
      cfg.em.stepwise_exponents = em["stepwise_exponents"].get<std::vector<double>>();
    cfg.em.minibatch = em.value("minibatch", cfg.em.minibatch);
    cfg.em.epochs = em.value("epochs", cfg.em.epochs);
  }
  return cfg;
}

std::string benchmark_result_to_json(const BenchmarkResult& result) {
  const BenchmarkConfig& cfg = result.config;
  json doc;
  doc["config"] = {{"family", cfg.family},
                   {"length", cfg.length},
                   {"k_hidden", cfg.k_hidden},
                   {"k_observed", cfg.k_observed},
                   {"n_grid", cfg.n_grid},
                   {"test_size", cfg.test_size},
                   {"num_parameter_sets", cfg.num_parameter_sets},
                   {"seed", cfg.seed},
                   {"learners", cfg.learners}};
  json trials = json::array();
  for (const TrialResult& t : result.trials) {
    json jt = {{"learner", t.learner}, {"param_set", t.param_set},   {"n", t.n},
               {"mean_error", t.mean_error}, {"median_error", t.median_error},
               {"zero_truth_queries", t.zero_truth_queries}, {"errors", t.errors}};
    if (t.failed) jt["failure"] = t.failure;
    if (cfg.include_timings) jt["train_seconds"] = t.train_seconds;
    trials.push_back(jt);
  }
  doc["trials"] = trials;
  json series = json::array();
  for (const SeriesPoint& p : result.series) {
    json jp = {{"n", p.n}, {"learner", p.learner}, {"median_error", p.median_error}};
    if (cfg.include_timings) jp["mean_time_seconds"] = p.mean_time_seconds;
    series.push_back(jp);
  }
  doc["series"] = series;
  return doc.dump(2) + "\n";
}

std::string benchmark_series_to_csv(const BenchmarkResult& result) {
  std::ostringstream os;
  os << "N,learner,median_error,mean_time_seconds\n";
  for (const SeriesPoint& p : result.series) {
    os << p.n << "," << p.learner << "," << p.median_error << ",";
    if (result.config.include_timings) os << p.mean_time_seconds;
    os << "\n";
  }
  return os.str();
}

void write_benchmark_outputs(const std::string& out_dir, const BenchmarkResult& result) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/results.json", benchmark_result_to_json(result));
  write_text_file(out_dir + "/series.csv", benchmark_series_to_csv(result));
}

}  // namespace sjt
