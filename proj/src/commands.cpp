#include "minimalist/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace minimalist {

namespace {

nlohmann::json optional_json(const std::optional<double>& x) {
  return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

template <class F>
nlohmann::json guarded(F f) {
  try {
    return nlohmann::json(f());
  } catch (const UndefinedQuantity&) {
    return nlohmann::json(nullptr);
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << text;
}

}  // namespace

nlohmann::json difficulty_report(const Dataset& ds) {
  const auto sd = decompose<double>(ds);
  nlohmann::json j;
  j["N"] = ds.samples();
  j["d"] = ds.features();
  j["r"] = sd.rank();
  j["sigma"] = sd.sigma();
  j["sigma1"] = sd.rank() ? nlohmann::json(sd.sigma()[0]) : nlohmann::json(nullptr);
  j["d_coeffs"] = sd.d_coeffs;
  j["Q"] = sd.rank() ? nlohmann::json(difficulty(sd)) : nlohmann::json(nullptr);
  j["C_tilde"] = guarded([&] { return c_tilde(sd); });
  j["sum_d_sq"] = sd.sum_d_sq;
  j["y_perp_norm"] = sd.y_perp_norm;
  j["loss_floor"] = sd.loss_floor();
  nlohmann::json pred = nlohmann::json::object();
  for (int depth = 2; depth <= 5; ++depth) {
    pred[std::to_string(depth)] =
        sd.rank() ? guarded([&] { return predicted_sharpness(sd, depth, ds.samples()); }) : nlohmann::json(nullptr);
  }
  j["predicted_sharpness"] = pred;
  return j;
}

std::vector<BoundsReport> bounds_reports(const Dataset& ds, int depth, std::optional<double> imbalance,
                                         std::optional<double> alpha, std::optional<double> beta) {
  if (depth < 2) throw InvalidInput("bounds: depth must be >= 2");
  if (alpha.has_value() != beta.has_value()) throw InvalidInput("bounds: give both --alpha and --beta or neither");
  const auto sd = decompose<double>(ds);
  std::vector<BoundsReport> out;
  if (depth == 2) {
    out.push_back(minimizer_bounds_2layer(sd, imbalance.value_or(0.0)));
  } else {
    if (imbalance && *imbalance != 0.0) {
      throw InvalidInput("bounds: a nonzero imbalance applies to depth 2 only (deep bounds assume balance)");
    }
    out.push_back(minimizer_bounds_deep(sd, depth));
  }
  if (alpha) {
    if (depth != 2) throw InvalidInput("bounds: alpha-beta bounds are defined for depth 2 only");
    out.push_back(init_sharpness_bounds(sd, *alpha, *beta));
    out.push_back(convergence_sharpness_bounds(sd, *alpha, *beta));
  }
  return out;
}

Params<double> initial_params(const ExperimentConfig& cfg, const Dataset& ds) {
  const auto sd = decompose<double>(ds);
  Rng rng = Rng(cfg.optimizer.seed).split(1);
  return init_params(cfg.init, ds.features(), cfg.depth, sd, rng);
}

namespace {

RunResult run_nonlinear(const ExperimentConfig& cfg, const Dataset& ds, const Params<double>& init) {
  const OptimizerConfig& oc = cfg.optimizer;
  oc.validate(ds.samples());
  const Samples<double> data = cast_dataset<double>(ds);
  const auto sd = decompose<double>(ds);
  std::optional<SpectralData<double>> orth;
  try {
    orth = orthogonal_decompose(ds);
  } catch (const InvalidInput&) {
    // the generalized imbalance is only defined for orthogonal data
  }
  const bool is_gf = oc.kind == OptimizerKind::gf;
  const double h = oc.gf_step.value_or(1e-3);
  Rng rng(oc.seed);
  std::vector<BatchMask> epoch;
  std::size_t epoch_pos = 0;

  NonlinearParams theta{init.u, init.v.at(0), cfg.activation};
  RunResult result;
  double time = 0.0;
  auto record = [&](std::uint64_t step, double loss_value) {
    TrajectoryRecord rec;
    rec.step = step;
    if (is_gf) rec.time = time;
    rec.loss = loss_value;
    rec.grad_norm = linalg::norm<double>(nl_gradient(data, theta));
    if (orth) rec.imbalance = nl_layer_imbalance(theta, *orth);
    rec.v_magnitudes = {std::abs(theta.v1)};
    result.records.push_back(std::move(rec));
  };
  auto batch_samples = [&](const std::vector<std::size_t>& idx) {
    Samples<double> sub{linalg::Matrix<double>(idx.size(), ds.features()), std::vector<double>(idx.size())};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      for (std::size_t j = 0; j < ds.features(); ++j) sub.X(k, j) = data.X(idx[k], j);
      sub.y[k] = data.y[idx[k]];
    }
    return sub;
  };

  double loss_value = nl_residual(data, theta).loss;
  record(0, loss_value);
  std::uint64_t step = 0;
  result.status = loss_value < oc.loss_stop ? RunStatus::converged : RunStatus::max_steps;
  bool recorded_last = true;
  while (result.status != RunStatus::converged && step < oc.max_steps) {
    NonlinearParams next = theta;
    try {
      if (is_gf) {
        next = nl_rk4_step(data, theta, h);
      } else {
        std::vector<double> g;
        if (oc.kind == OptimizerKind::gd || oc.batch == ds.samples()) {
          g = nl_gradient(data, theta);
        } else if (oc.sampling == Sampling::uniform) {
          g = nl_gradient(batch_samples(sample_mask(ds.samples(), oc.batch, rng).indices), theta);
        } else {
          if (epoch_pos == epoch.size()) {
            epoch = reshuffle_epoch(ds.samples(), oc.batch, rng);
            epoch_pos = 0;
          }
          g = nl_gradient(batch_samples(epoch[epoch_pos++].indices), theta);
        }
        for (std::size_t j = 0; j < theta.u.size(); ++j) next.u[j] -= oc.eta * g[j];
        next.v1 -= oc.eta * g.back();
      }
    } catch (const DivergenceError& e) {
      result.status = RunStatus::diverged;
      result.message = e.what();
      break;
    }
    const double next_loss = nl_residual(data, next).loss;
    if (!std::isfinite(next_loss) || next_loss > kDivergenceLoss || !linalg::all_finite<double>(next.u) ||
        !std::isfinite(next.v1)) {
      result.status = RunStatus::diverged;
      result.message = "state diverged at step " + std::to_string(step + 1);
      break;
    }
    if (next_loss > loss_value) ++result.loss_increases;
    theta = std::move(next);
    loss_value = next_loss;
    ++step;
    if (is_gf) time += h;
    recorded_last = false;
    if (loss_value < oc.loss_stop) result.status = RunStatus::converged;
    if (step % oc.record_every == 0 || result.status == RunStatus::converged) {
      record(step, loss_value);
      recorded_last = true;
    }
  }
  if (!recorded_last) record(step, loss_value);
  result.steps = step;
  result.time = time;
  result.final_state = to_reparam(Params<double>{theta.u, {theta.v1}}, sd);
  result.final_loss = result.records.back().loss;
  return result;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
  cfg.validate();
  const Params<double> init = initial_params(cfg, ds);
  if (cfg.activation != Activation::identity) return run_nonlinear(cfg, ds, init);
  return run_at_precision(cfg.optimizer, ds, init);
}

RunResult run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, cfg.data.load()); }

nlohmann::json final_state_json(const ExperimentConfig& cfg, const Dataset& ds, const RunResult& run) {
  const auto sd = decompose<double>(ds);
  nlohmann::json j;
  j["status"] = to_string(run.status);
  j["message"] = run.message;
  j["steps"] = run.steps;
  j["time"] = run.time;
  j["loss_increases"] = run.loss_increases;
  j["loss"] = run.final_loss;
  j["sharpness"] = optional_json(run.final_sharpness);
  j["imbalance"] = optional_json(run.records.empty() ? std::nullopt : run.records.back().imbalance);
  j["balance_dev"] = optional_json(run.records.empty() ? std::nullopt : run.records.back().balance_dev);
  j["precision"] = to_string(cfg.optimizer.precision);
  j["seed"] = cfg.optimizer.seed;
  j["o"] = run.final_state.o;
  j["v"] = run.final_state.v;
  if (run.final_state.o.size() == sd.rank() && run.final_state.u_perp.size() == sd.features) {
    j["u"] = from_reparam(run.final_state, sd).u;
  }
  return j;
}

RunResult train(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset ds = cfg.data.load();
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  write_text(dir / "config.toml", serialize(cfg));

  const RunResult run = run_experiment(cfg, ds);
  {
    std::ofstream csv(dir / "trajectory.csv");
    write_trajectory_csv(csv, run.records);
  }
  write_text(dir / "final.json", final_state_json(cfg, ds, run).dump(2) + "\n");

  if (cfg.plots) {
    Series loss{"loss", {}, {}};
    Series sharp{"sharpness", {}, {}};
    for (const auto& r : run.records) {
      const double x = r.time ? *r.time : static_cast<double>(r.step);
      loss.x.push_back(x);
      loss.y.push_back(r.loss);
      if (r.sharpness) {
        sharp.x.push_back(x);
        sharp.y.push_back(*r.sharpness);
      }
    }
    const bool gf = cfg.optimizer.kind == OptimizerKind::gf;
    const std::string x_label = gf ? "time" : "step";
    write_text(dir / "loss.svg", render_svg(Chart{"Loss", x_label, "loss", {loss}, std::nullopt, true}));
    if (!sharp.x.empty()) {
      const std::optional<double> guide = gf ? std::nullopt : std::optional<double>(2.0 / cfg.optimizer.eta);
      write_text(dir / "sharpness.svg", render_svg(Chart{"Sharpness", x_label, "sharpness", {sharp}, guide, false}));
    }
  }
  return run;
}

// ---------------------------------------------------------------------------

EosSummary summarize_eos(const RunResult& run, double eta, double band) {
  EosSummary s;
  s.threshold = 2.0 / eta;
  s.loss_increases = run.loss_increases;
  for (const auto& r : run.records) {
    if (!r.sharpness) continue;
    const double v = *r.sharpness;
    s.max_sharpness = std::max(s.max_sharpness, v);
    if (!s.first_crossing && v >= s.threshold) s.first_crossing = r.step;
    if (s.first_crossing) {
      ++s.recorded_after;
      if (std::abs(v - s.threshold) <= band * s.threshold) ++s.in_band;
    }
  }
  return s;
}

namespace {

std::map<std::uint64_t, double> sharpness_by_step(const RunResult& run) {
  std::map<std::uint64_t, double> m;
  for (const auto& r : run.records)
    if (r.sharpness) m[r.step] = *r.sharpness;
  return m;
}

}  // namespace

std::optional<std::uint64_t> divergence_step(const RunResult& a, const RunResult& b, double threshold,
                                             std::uint64_t from) {
  const auto mb = sharpness_by_step(b);
  for (const auto& r : a.records) {
    if (!r.sharpness || r.step < from) continue;
    const auto it = mb.find(r.step);
    if (it != mb.end() && std::abs(*r.sharpness - it->second) > threshold) return r.step;
  }
  return std::nullopt;
}

double max_sharpness_gap(const RunResult& a, const RunResult& b, std::uint64_t from) {
  const auto mb = sharpness_by_step(b);
  double gap = 0.0;
  for (const auto& r : a.records) {
    if (!r.sharpness || r.step < from) continue;
    const auto it = mb.find(r.step);
    if (it != mb.end()) gap = std::max(gap, std::abs(*r.sharpness - it->second));
  }
  return gap;
}

// ---------------------------------------------------------------------------

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

}  // namespace

std::string render_svg(const Chart& chart) {
  constexpr double width = 720;
  constexpr double height = 420;
  constexpr double left = 80;
  constexpr double right = 20;
  constexpr double top = 40;
  constexpr double bottom = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  auto ty = [&](double y) { return chart.log_y ? std::log10(y) : y; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (chart.log_y && !(s.y[i] > 0))) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (chart.guide && (!chart.log_y || *chart.guide > 0)) {
    y0 = std::min(y0, ty(*chart.guide));
    y1 = std::max(y1, ty(*chart.guide));
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double pw = width - left - right;
  const double ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(chart.title)
    << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = left + pw * k / 4.0;
    const double sy = top + ph * (1.0 - k / 4.0);
    o << "<text x=\"" << sx << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << tick_label(fx)
      << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
      << tick_label(chart.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
    << xml_escape(chart.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
    << ")\">" << xml_escape(chart.y_label) << (chart.log_y ? " (log)" : "") << "</text>\n";
  if (chart.guide && (!chart.log_y || *chart.guide > 0)) {
    o << "<line x1=\"" << left << "\" y1=\"" << py(*chart.guide) << "\" x2=\"" << left + pw << "\" y2=\""
      << py(*chart.guide) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    o << "<polyline fill=\"none\" stroke=\"" << colors[k % 5] << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (chart.log_y && !(s.y[i] > 0))) continue;
      o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    o << "\"/>\n";
    if (chart.series.size() > 1) {
      o << "<text x=\"" << left + pw - 4 << "\" y=\"" << top + 14 + 14 * k << "\" text-anchor=\"end\" fill=\""
        << colors[k % 5] << "\">" << xml_escape(s.name) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------

void write_summary_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  auto opt = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string{}; };
  auto quoted = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  out << "index,lr,batch,depth,samples,precision,seed,status,steps,final_loss,final_sharpness,final_imbalance,"
         "divergence_step,message\n";
  for (const auto& r : rows) {
    out << r.index << ',' << format_number(r.lr) << ',' << r.batch << ',' << r.depth << ',' << r.samples << ','
        << to_string(r.precision) << ',' << r.seed << ',' << r.status << ',' << r.steps << ','
        << format_number(r.final_loss) << ',' << opt(r.final_sharpness) << ',' << opt(r.final_imbalance) << ','
        << (r.divergence_step ? std::to_string(*r.divergence_step) : std::string{}) << ',' << quoted(r.message)
        << '\n';
  }
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const auto& g = cfg.sweep;
  const std::vector<double> lrs = g.lr.empty() ? std::vector<double>{cfg.optimizer.eta} : g.lr;
  const std::vector<std::size_t> batches = g.batch.empty() ? std::vector<std::size_t>{cfg.optimizer.batch} : g.batch;
  const std::vector<int> depths = g.depth.empty() ? std::vector<int>{cfg.depth} : g.depth;
  const std::vector<std::size_t> samples = g.samples.empty() ? std::vector<std::size_t>{cfg.data.samples} : g.samples;
  const std::vector<Precision> precisions =
      g.precision.empty() ? std::vector<Precision>{cfg.optimizer.precision} : g.precision;
  if (!g.samples.empty() && cfg.data.kind != DataKind::gaussian) {
    throw InvalidInput("sweep: a samples grid needs gaussian data");
  }

  struct Job {
    SweepRow row;
    ExperimentConfig cfg;
    std::size_t point;  // grid point without the precision axis
  };
  std::vector<Job> jobs;
  std::size_t point = 0;
  for (int depth : depths)
    for (std::size_t n : samples)
      for (std::size_t b : batches)
        for (double lr : lrs) {
          const std::uint64_t seed = Rng(cfg.optimizer.seed).split(point).seed();
          for (Precision p : precisions) {
            Job job;
            job.cfg = cfg;
            job.cfg.sweep = {};
            job.cfg.depth = depth;
            job.cfg.data.samples = n;
            job.cfg.optimizer.batch = b;
            job.cfg.optimizer.eta = lr;
            job.cfg.optimizer.precision = p;
            job.cfg.optimizer.seed = seed;
            job.point = point;
            const std::size_t k = jobs.size();
            std::ostringstream name;
            name << "run_" << std::setw(4) << std::setfill('0') << k;
            job.cfg.out = (std::filesystem::path(cfg.out) / name.str()).string();
            job.row.index = k;
            job.row.lr = lr;
            job.row.batch = b;
            job.row.depth = depth;
            job.row.samples = cfg.data.kind == DataKind::gaussian ? n : 0;
            job.row.precision = p;
            job.row.seed = seed;
            jobs.push_back(std::move(job));
          }
          ++point;
        }

  std::filesystem::create_directories(cfg.out);
  std::vector<std::optional<RunResult>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      Job& job = jobs[k];
      try {
        RunResult r = train(job.cfg);
        job.row.status = to_string(r.status);
        job.row.message = r.message;
        job.row.steps = r.steps;
        job.row.final_loss = r.final_loss;
        job.row.final_sharpness = r.final_sharpness;
        if (!r.records.empty()) job.row.final_imbalance = r.records.back().imbalance;
        if (job.row.samples == 0) job.row.samples = job.cfg.data.load().samples();
        results[k] = std::move(r);
      } catch (const std::exception& e) {
        job.row.status = "error";
        job.row.message = e.what();
      }
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << job.cfg.out << ": " << job.row.status << (job.row.message.empty() ? "" : " (" + job.row.message + ")")
             << '\n';
      }
    }
  };
  std::size_t threads = g.threads ? g.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  // Precision divergence against the first precision at the same grid point.
  const bool gradient_descent = cfg.optimizer.kind != OptimizerKind::gf;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const std::size_t ref = k - (k % precisions.size());
    if (ref == k || !results[k] || !results[ref]) continue;
    std::uint64_t from = 0;
    if (gradient_descent) {
      const auto eos = summarize_eos(*results[ref], jobs[ref].cfg.optimizer.eta);
      if (eos.first_crossing) from = *eos.first_crossing;
    }
    jobs[k].row.divergence_step = divergence_step(*results[ref], *results[k], 1.0, from);
  }

  std::vector<SweepRow> rows;
  for (const auto& job : jobs) rows.push_back(job.row);
  std::ofstream summary(std::filesystem::path(cfg.out) / "summary.csv");
  write_summary_csv(summary, rows);
  return rows;
}

}  // namespace minimalist
