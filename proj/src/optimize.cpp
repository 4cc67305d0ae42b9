#include "minimalist/optimize.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace minimalist {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gf: return "gf";
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::sgd: return "sgd";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "gf") return OptimizerKind::gf;
  if (text == "gd") return OptimizerKind::gd;
  if (text == "sgd") return OptimizerKind::sgd;
  throw InvalidInput("unknown optimizer '" + std::string(text) + "' (expected gf, gd or sgd)");
}

std::string to_string(Sampling s) { return s == Sampling::uniform ? "uniform" : "reshuffle"; }

Sampling parse_sampling(std::string_view text) {
  if (text == "uniform") return Sampling::uniform;
  if (text == "reshuffle") return Sampling::reshuffle;
  throw InvalidInput("unknown sampling '" + std::string(text) + "' (expected uniform or reshuffle)");
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_steps: return "max_steps";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

void OptimizerConfig::validate(std::size_t samples) const {
  if (kind != OptimizerKind::gf && !(eta > 0.0 && std::isfinite(eta))) throw InvalidInput("eta must be positive");
  if (kind == OptimizerKind::sgd && (batch < 1 || batch > samples)) {
    throw InvalidInput("batch " + std::to_string(batch) + " outside [1, " + std::to_string(samples) + "]");
  }
  if (gf_step && !(*gf_step > 0.0)) throw InvalidInput("gf_step must be positive");
  if (!(gf_step_scale > 0.0)) throw InvalidInput("gf_step_scale must be positive");
  if (gf_remeasure_every == 0 || record_every == 0 || sharpness_every == 0)
    throw InvalidInput("cadences must be >= 1");
  if (!(loss_stop >= 0.0)) throw InvalidInput("loss_stop must be >= 0");
}

BatchMask sample_mask(std::size_t samples, std::size_t batch, Rng& rng) {
  if (batch < 1 || batch > samples) throw InvalidInput("sample_mask: B must be in [1, N]");
  std::vector<std::size_t> pool(samples);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t k = 0; k < batch; ++k) {
    const std::size_t j = k + rng.below(samples - k);
    std::swap(pool[k], pool[j]);
  }
  pool.resize(batch);
  return {std::move(pool)};
}

std::vector<BatchMask> reshuffle_epoch(std::size_t samples, std::size_t batch, Rng& rng) {
  if (batch < 1 || batch > samples) throw InvalidInput("reshuffle_epoch: B must be in [1, N]");
  const BatchMask perm = sample_mask(samples, samples, rng);
  std::vector<BatchMask> out;
  for (std::size_t start = 0; start + batch <= samples; start += batch)
    out.push_back({std::vector<std::size_t>(perm.indices.begin() + start, perm.indices.begin() + start + batch)});
  return out;
}

std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::balanced: return "balanced";
    case InitKind::alpha_beta: return "alpha_beta";
    case InitKind::uniform_fan_in: return "uniform_fan_in";
    case InitKind::explicit_values: return "explicit";
  }
  return "unknown";
}

InitKind parse_init(std::string_view text) {
  if (text == "balanced") return InitKind::balanced;
  if (text == "alpha_beta" || text == "alpha-beta") return InitKind::alpha_beta;
  if (text == "uniform_fan_in" || text == "uniform" || text == "default") return InitKind::uniform_fan_in;
  if (text == "explicit") return InitKind::explicit_values;
  throw InvalidInput("unknown init scheme '" + std::string(text) +
                     "' (expected balanced, alpha_beta, uniform_fan_in or explicit)");
}

Params<double> init_params(const InitScheme& scheme, std::size_t features, int depth, const SpectralData<double>& sd,
                           Rng& rng) {
  if (depth < 2) throw InvalidInput("init_params: depth must be >= 2");
  if (features == 0) throw InvalidInput("init_params: need at least one feature");
  const std::size_t m = static_cast<std::size_t>(depth - 1);
  Params<double> theta{std::vector<double>(features, 0.0), std::vector<double>(m, 0.0)};
  switch (scheme.kind) {
    case InitKind::balanced: {
      if (!(scheme.c >= 0.0)) throw InvalidInput("balanced init: c must be >= 0");
      if (sd.rank() == 0) throw UndefinedQuantity("balanced init: rank-0 data");
      std::vector<double> dir(sd.rank());
      double nrm = 0.0;
      while (!(nrm > 1e-12)) {
        for (auto& x : dir) x = rng.normal();
        nrm = linalg::norm<double>(dir);
      }
      for (std::size_t i = 0; i < sd.rank(); ++i)
        for (std::size_t j = 0; j < features; ++j) theta.u[j] += scheme.c * dir[i] / nrm * sd.svd.right(j, i);
      for (auto& v : theta.v) v = scheme.c;
      break;
    }
    case InitKind::alpha_beta:
      if (!(scheme.alpha > 0.0) || !(scheme.beta > 0.0)) throw InvalidInput("alpha_beta init: alpha, beta > 0");
      for (auto& x : theta.u) x = scheme.alpha * rng.normal();
      for (auto& v : theta.v) v = scheme.beta * rng.normal();
      break;
    case InitKind::uniform_fan_in: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(features));
      for (auto& x : theta.u) x = rng.uniform(-bound, bound);
      for (auto& v : theta.v) v = rng.uniform(-1.0, 1.0);
      break;
    }
    case InitKind::explicit_values:
      if (scheme.values.u.size() != features || scheme.values.v.size() != m)
        throw InvalidInput("explicit init: expected " + std::to_string(features) + " u entries and " +
                           std::to_string(m) + " v entries");
      theta = scheme.values;
      break;
  }
  return theta;
}

namespace {

template <class T>
RunResult run_typed(const OptimizerConfig& cfg, const Dataset& ds, const Params<double>& init) {
  const SpectralData<T> sd = decompose<T>(ds);
  if (sd.rank() == 0) throw UndefinedQuantity("run: rank-0 data (X = 0)");
  return run<T>(cfg, to_reparam(init.cast<T>(), sd), sd);
}

}  // namespace

RunResult run_at_precision(const OptimizerConfig& cfg, const Dataset& ds, const Params<double>& init) {
  switch (cfg.precision) {
    case Precision::binary32: return run_typed<float>(cfg, ds, init);
    case Precision::binary64: return run_typed<double>(cfg, ds, init);
    case Precision::extended: return run_typed<DoubleDouble>(cfg, ds, init);
  }
  throw InvalidInput("unknown precision");
}

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
  out << "step,time,loss,sharpness,imbalance,balance_dev,grad_norm,psi1,psi2,omega1,omega2,t1,t2\n";
  auto opt = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string{}; };
  for (const auto& r : records) {
    out << r.step << ',' << opt(r.time) << ',' << format_number(r.loss) << ',' << opt(r.sharpness) << ','
        << opt(r.imbalance) << ',' << opt(r.balance_dev) << ',' << format_number(r.grad_norm);
    if (r.terms) {
      out << ',' << format_number(r.terms->psi1) << ',' << format_number(r.terms->psi2) << ','
          << format_number(r.terms->omega1) << ',' << format_number(r.terms->omega2) << ',' << opt(r.terms->t1)
          << ',' << opt(r.terms->t2);
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
}

}  // namespace minimalist
