#pragma once

// Experiment configuration: where the data comes from, the model, the
// optimizer, the initialization and where outputs go. Serialized as a
// TOML-style file with [data], [model], [optimizer], [init], [output] and
// an optional [sweep] section.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "minimalist/dataset.hpp"
#include "minimalist/nonlinear.hpp"
#include "minimalist/optimize.hpp"

namespace minimalist {

enum class DataKind { csv, eos_demo, minimal, gaussian };

std::string to_string(DataKind k);
DataKind parse_data_kind(std::string_view text);

struct DataSpec {
  DataKind kind = DataKind::eos_demo;
  // csv
  std::string path;
  std::vector<std::string> columns;  // empty: every column except the label
  std::string label;                 // empty: last column
  bool standardize = false;
  // minimal: the two-sample precision-experiment generator
  std::size_t dim = 100;
  double common = 5.477;
  double signal = 0.233;
  double alpha = 0.3;
  double beta = 1.414;
  // gaussian
  std::size_t samples = 16;
  std::size_t features = 8;
  LabelMode labels = LabelMode::gaussian;
  std::uint64_t seed = 0;

  Dataset load() const;
  bool operator==(const DataSpec&) const = default;
};

/// Parses the --data flag: "eos-demo", "minimal", "gaussian:N:d[:balanced]",
/// anything else is a CSV path.
DataSpec parse_data_source(const std::string& text);

/// Lists of values; a sweep runs the cartesian product of the non-empty ones.
struct SweepGrid {
  std::vector<double> lr;
  std::vector<std::size_t> batch;
  std::vector<int> depth;
  std::vector<std::size_t> samples;  // overrides data.samples (gaussian data)
  std::vector<Precision> precision;
  std::size_t threads = 0;           // 0: hardware concurrency

  bool empty() const { return lr.empty() && batch.empty() && depth.empty() && samples.empty() && precision.empty(); }
  bool operator==(const SweepGrid&) const = default;
};

struct ExperimentConfig {
  DataSpec data;
  int depth = 2;
  Activation activation = Activation::identity;
  OptimizerConfig optimizer;
  InitScheme init;
  std::string out = "run";
  bool plots = true;
  SweepGrid sweep;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

std::string serialize(const ExperimentConfig& cfg);
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The edge-of-stability preset: the embedded 2x2 data, GD with eta = 2/50,
/// theta_0 = ((0.01, 0.01), 0.01), every step recorded.
ExperimentConfig eos_demo_config();

}  // namespace minimalist
