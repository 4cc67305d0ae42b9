#pragma once

// Library side of the command-line tool. Every command is a plain function
// so the CLI, the python module and the tests share one implementation.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "minimalist/experiment.hpp"
#include "minimalist/quantities.hpp"

namespace minimalist {

/// N, d, r, sigma_1, Q, C-tilde, sum d_i², the y⊥ offset and Ŝ_D for D = 2..5.
nlohmann::json difficulty_report(const Dataset& ds);

/// Every applicable bound: the minimizer bound for `depth` (two-layer form at
/// the given imbalance, default 0, or the balanced deep form), plus the
/// initialization and convergence bounds when alpha and beta are given.
std::vector<BoundsReport> bounds_reports(const Dataset& ds, int depth, std::optional<double> imbalance,
                                         std::optional<double> alpha, std::optional<double> beta);

/// Initial full-space parameters for `cfg` (seeded from cfg.optimizer.seed).
Params<double> initial_params(const ExperimentConfig& cfg, const Dataset& ds);

/// Loads the data, builds the initialization and runs the configured engine.
/// Nonlinear activations use the two-layer full-space engine in binary64.
RunResult run_experiment(const ExperimentConfig& cfg);
RunResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds);

nlohmann::json final_state_json(const ExperimentConfig& cfg, const Dataset& ds, const RunResult& run);

/// Writes trajectory.csv, final.json, config.toml and (if cfg.plots) loss.svg
/// and sharpness.svg under cfg.out. Engine failures end up in final.json.
RunResult train(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Edge-of-stability diagnostics

struct EosSummary {
  double threshold = 0.0;  // 2 / eta
  std::optional<std::uint64_t> first_crossing;
  std::size_t recorded_after = 0;  // sharpness values recorded after the crossing
  std::size_t in_band = 0;         // ... of which lie within band * threshold of it
  std::uint64_t loss_increases = 0;
  double max_sharpness = 0.0;

  double band_fraction() const { return recorded_after ? static_cast<double>(in_band) / recorded_after : 0.0; }
};

EosSummary summarize_eos(const RunResult& run, double eta, double band = 0.1);

/// First step at or after `from` where both runs recorded sharpness and the
/// values differ by more than `threshold`.
std::optional<std::uint64_t> divergence_step(const RunResult& a, const RunResult& b, double threshold,
                                             std::uint64_t from = 0);

/// Largest |S_a - S_b| over steps at or after `from` recorded by both runs.
double max_sharpness_gap(const RunResult& a, const RunResult& b, std::uint64_t from = 0);

// ---------------------------------------------------------------------------
// Plots

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> guide;  // horizontal reference line
  bool log_y = false;
};

std::string render_svg(const Chart& chart);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::size_t index = 0;
  double lr = 0.0;
  std::size_t batch = 0;
  int depth = 0;
  std::size_t samples = 0;
  Precision precision = Precision::binary64;
  std::uint64_t seed = 0;
  std::string status;
  std::string message;
  std::uint64_t steps = 0;
  double final_loss = 0.0;
  std::optional<double> final_sharpness;
  std::optional<double> final_imbalance;
  std::optional<std::uint64_t> divergence_step;  // vs. the first precision at the same grid point
};

/// Expands the cartesian product of cfg.sweep, runs every point (in parallel),
/// writes <out>/run_<k>/trajectory.csv per run and <out>/summary.csv.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, std::ostream* log = nullptr);

void write_summary_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace minimalist
