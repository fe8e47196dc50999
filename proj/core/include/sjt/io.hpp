#pragma once

#include <string>
#include <vector>

#include "sjt/experiments.hpp"
#include "sjt/model.hpp"
#include "sjt/spectral.hpp"

namespace sjt {

/// Model document: variables plus structure (edges, parents or explicit
/// cliques with an optional tree and root) and optional potentials.
/// Parsed/emitted as UTF-8 JSON; key names are part of the format.
struct ModelDocument {
  GraphicalModelSpec spec;
  bool has_potentials = false;
  LatentJTModel model;  // valid when has_potentials (tree included)
  JunctionTree tree;    // rooted tree (always valid after load)
};

ModelDocument read_model_json(const std::string& path);
std::string model_to_json(const LatentJTModel& model);
std::string tree_to_json(const JunctionTree& tree);
void write_model_json(const std::string& path, const LatentJTModel& model);
void write_tree_json(const std::string& path, const JunctionTree& tree);

/// Sample files: header row of observed-variable names, then one
/// comma-separated record of state indices per sample. A column named
/// "label" carries per-row class labels and is split off on read.
struct SampleFile {
  SampleSet samples;            // var_ids resolved against a tree when names match
  std::vector<std::string> names;
  std::vector<int> labels;      // empty unless a label column was present
};

SampleFile read_samples_csv(const std::string& path);
void write_samples_csv(const std::string& path, const SampleSet& samples, const JunctionTree& tree);

/// Re-key a sample file's columns to a tree's observed variables (by
/// name when the header matches, else by position).
SampleSet bind_samples(const SampleFile& file, const JunctionTree& tree);

/// Splice-style sequence file: one "CLASS,name,SEQUENCE" record per
/// line, sequences over the ACGT alphabet; returns 0-based class labels
/// in file order of first appearance.
struct SpliceFile {
  std::vector<std::vector<int>> rows;
  std::vector<int> labels;
  std::vector<std::string> class_names;
};
SpliceFile read_splice(const std::string& path);

/// Learned spectral parameters, serialized as structured text (labels,
/// dims, row-major values per tensor).
std::string params_to_json(const ObservableParams& params);
ObservableParams read_params_json(const std::string& path);
void write_params_json(const std::string& path, const ObservableParams& params);

BenchmarkConfig read_benchmark_config(const std::string& path);
std::string benchmark_result_to_json(const BenchmarkResult& result);
std::string benchmark_series_to_csv(const BenchmarkResult& result);
void write_benchmark_outputs(const std::string& out_dir, const BenchmarkResult& result);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sjt
