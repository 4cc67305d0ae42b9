#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "minimalist/dataset.hpp"
#include "minimalist/quantities.hpp"
#include "minimalist/reparam.hpp"
#include "minimalist/rng.hpp"

namespace minimalist {

enum class OptimizerKind { gf, gd, sgd };
enum class Sampling { uniform, reshuffle };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view text);
std::string to_string(Sampling s);
Sampling parse_sampling(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::gd;
  double eta = 0.01;
  std::size_t batch = 1;
  Sampling sampling = Sampling::uniform;
  /// Gradient flow: fixed step if set, else h = gf_step_scale / S re-measured
  /// every gf_remeasure_every RK4 steps.
  std::optional<double> gf_step;
  double gf_step_scale = 1.0;
  std::size_t gf_remeasure_every = 50;
  std::size_t record_every = 10;
  /// GD/SGD only; gradient flow measures at every checkpoint.
  std::size_t sharpness_every = 10;
  std::size_t max_steps = 100000;
  /// Stop once the loss above its irreducible floor drops below this.
  double loss_stop = 1e-7;
  std::uint64_t seed = 0;
  Precision precision = Precision::binary64;
  bool record_terms = true;

  void validate(std::size_t samples) const;
  bool operator==(const OptimizerConfig&) const = default;
};

struct BatchMask {
  std::vector<std::size_t> indices;
};

/// Uniform over all B-subsets of [0, N) (partial Fisher-Yates).
BatchMask sample_mask(std::size_t samples, std::size_t batch, Rng& rng);

/// A random permutation of [0, N) cut into floor(N/B) masks; any remainder is dropped.
std::vector<BatchMask> reshuffle_epoch(std::size_t samples, std::size_t batch, Rng& rng);

/// Classical RK4 on the reduced gradient-flow ODE.
template <class T>
ReparamState<T> rk4_step(const ReparamState<T>& s, const SpectralData<T>& sd, T h) {
  if (!(h > T(0))) throw InvalidInput("rk4_step: h must be positive");
  const T half = h / T(2);
  const Tangent<T> k1 = gf_rhs_reparam(s, sd);
  const Tangent<T> k2 = gf_rhs_reparam(apply(s, k1, half), sd);
  const Tangent<T> k3 = gf_rhs_reparam(apply(s, k2, half), sd);
  const Tangent<T> k4 = gf_rhs_reparam(apply(s, k3, h), sd);
  ReparamState<T> out = s;
  const T sixth = h / T(6);
  for (std::size_t i = 0; i < out.o.size(); ++i)
    out.o[i] += sixth * (k1.o[i] + T(2) * k2.o[i] + T(2) * k3.o[i] + k4.o[i]);
  for (std::size_t j = 0; j < out.v.size(); ++j)
    out.v[j] += sixth * (k1.v[j] + T(2) * k2.v[j] + T(2) * k3.v[j] + k4.v[j]);
  if (!linalg::all_finite<T>(out.o) || !linalg::all_finite<T>(out.v))
    throw DivergenceError("rk4_step: state became non-finite");
  return out;
}

struct TrajectoryRecord {
  std::uint64_t step = 0;
  std::optional<double> time;
  double loss = 0.0;
  std::optional<double> sharpness;
  std::optional<double> imbalance;    // depth 2
  std::optional<double> balance_dev;  // any depth
  double grad_norm = 0.0;
  std::optional<ImbalanceTerms> terms;
  std::vector<double> v_magnitudes;
};

enum class RunStatus { converged, max_steps, diverged };
std::string to_string(RunStatus s);

struct RunResult {
  std::vector<TrajectoryRecord> records;
  RunStatus status = RunStatus::max_steps;
  std::string message;
  std::uint64_t steps = 0;
  double time = 0.0;
  std::uint64_t loss_increases = 0;
  /// Last finite state, in binary64.
  ReparamState<double> final_state;
  double final_loss = 0.0;
  std::optional<double> final_sharpness;
};

inline constexpr double kDivergenceLoss = 1e30;

namespace detail {

template <class T>
bool finite_state(const ReparamState<T>& s) {
  return linalg::all_finite<T>(s.o) && linalg::all_finite<T>(s.v);
}

template <class T>
TrajectoryRecord make_record(const ReparamState<T>& s, const SpectralData<T>& sd, std::uint64_t step,
                             std::optional<double> time, bool with_sharpness, bool with_terms) {
  using std::abs;
  TrajectoryRecord rec;
  rec.step = step;
  rec.time = time;
  rec.loss = to_double(loss(s, sd));
  rec.grad_norm = to_double(grad_norm(s, sd));
  if (with_sharpness) rec.sharpness = to_double(sharpness(s, sd));
  if (s.v.size() == 1) rec.imbalance = to_double(layer_imbalance(s));
  rec.balance_dev = to_double(balance_check(s));
  if (with_terms && s.v.size() == 1) rec.terms = imbalance_terms(s, sd);
  for (const T& x : s.v) rec.v_magnitudes.push_back(to_double(T(abs(x))));
  return rec;
}

}  // namespace detail

/// Runs the configured engine from `init` until the excess loss drops below
/// cfg.loss_stop, cfg.max_steps is reached, or the state diverges.
template <class T>
RunResult run(const OptimizerConfig& cfg, const ReparamState<T>& init, const SpectralData<T>& sd) {
  cfg.validate(sd.samples);
  check_state(init, sd, "run");
  const bool is_gf = cfg.kind == OptimizerKind::gf;
  const T eta = scalar_cast<T>(cfg.eta);
  const T stop = scalar_cast<T>(cfg.loss_stop);
  Rng rng(cfg.seed);
  std::vector<BatchMask> epoch;
  std::size_t epoch_pos = 0;

  RunResult result;
  ReparamState<T> s = init;
  T excess = excess_loss(s, sd);
  double time = 0.0;

  auto measure_step = [&]() -> T {
    const T sharp = sharpness(s, sd);
    if (!(sharp > T(0)) || !is_finite(sharp)) return T(1e-3);
    return scalar_cast<T>(cfg.gf_step_scale) / sharp;
  };
  T h = is_gf ? (cfg.gf_step ? scalar_cast<T>(*cfg.gf_step) : measure_step()) : T(0);

  auto record = [&](std::uint64_t step) {
    const bool with_s = is_gf || step % cfg.sharpness_every == 0;
    result.records.push_back(detail::make_record(s, sd, step, is_gf ? std::optional<double>(time) : std::nullopt,
                                                 with_s, cfg.record_terms));
  };

  record(0);
  std::uint64_t step = 0;
  bool recorded_last = true;
  result.status = RunStatus::max_steps;
  if (excess < stop) result.status = RunStatus::converged;

  while (result.status != RunStatus::converged && step < cfg.max_steps) {
    ReparamState<T> next;
    try {
      switch (cfg.kind) {
        case OptimizerKind::gf:
          if (!cfg.gf_step && step > 0 && step % cfg.gf_remeasure_every == 0) h = measure_step();
          next = rk4_step(s, sd, h);
          break;
        case OptimizerKind::gd:
          next = gd_step_reparam(s, sd, eta);
          break;
        case OptimizerKind::sgd:
          if (cfg.batch == sd.samples) {
            next = gd_step_reparam(s, sd, eta);
          } else if (cfg.sampling == Sampling::uniform) {
            next = sgd_step_reparam<T>(s, sd, eta, sample_mask(sd.samples, cfg.batch, rng).indices);
          } else {
            if (epoch_pos == epoch.size()) {
              epoch = reshuffle_epoch(sd.samples, cfg.batch, rng);
              epoch_pos = 0;
            }
            next = sgd_step_reparam<T>(s, sd, eta, epoch[epoch_pos++].indices);
          }
          break;
      }
    } catch (const DivergenceError& e) {
      result.status = RunStatus::diverged;
      result.message = e.what();
      break;
    }
    const T next_excess = detail::finite_state(next) ? excess_loss(next, sd) : std::numeric_limits<T>::quiet_NaN();
    if (!detail::finite_state(next) || !is_finite(next_excess) || to_double(next_excess) > kDivergenceLoss) {
      result.status = RunStatus::diverged;
      result.message = "state diverged at step " + std::to_string(step + 1);
      break;
    }
    if (next_excess > excess) ++result.loss_increases;
    s = std::move(next);
    excess = next_excess;
    ++step;
    if (is_gf) time += to_double(h);
    recorded_last = false;
    if (excess < stop) result.status = RunStatus::converged;
    if (step % cfg.record_every == 0 || result.status == RunStatus::converged) {
      record(step);
      recorded_last = true;
    }
  }
  if (!recorded_last) record(step);
  if (!result.records.back().sharpness) {
    result.records.back().sharpness = to_double(sharpness(s, sd));
  }
  result.steps = step;
  result.time = time;
  result.final_state = s.template cast<double>();
  result.final_loss = result.records.back().loss;
  result.final_sharpness = result.records.back().sharpness;
  return result;
}

// ---------------------------------------------------------------------------
// Initialization

enum class InitKind { balanced, alpha_beta, uniform_fan_in, explicit_values };

struct InitScheme {
  InitKind kind = InitKind::uniform_fan_in;
  double c = 1.0;  // balanced
  double alpha = 1.0;
  double beta = 1.0;
  Params<double> values;  // explicit

  bool operator==(const InitScheme&) const = default;
};

std::string to_string(InitKind k);
InitKind parse_init(std::string_view text);

/// Full-space initial parameters for a depth-D model.
Params<double> init_params(const InitScheme& scheme, std::size_t features, int depth,
                           const SpectralData<double>& sd, Rng& rng);

// ---------------------------------------------------------------------------
// Precision dispatch and output

/// Decomposes `ds` and runs the engine at cfg.precision.
RunResult run_at_precision(const OptimizerConfig& cfg, const Dataset& ds, const Params<double>& init);

/// Writes the trajectory CSV (fixed column order, empty cells for absent values).
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records);

/// Shortest decimal string that round-trips the double.
std::string format_number(double x);

}  // namespace minimalist
