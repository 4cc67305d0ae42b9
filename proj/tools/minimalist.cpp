// minimalist: command-line front end.
//
// Precedence for run settings: built-in defaults, then --config, then any
// flag given explicitly on the command line.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "minimalist/commands.hpp"
#include "minimalist/experiment.hpp"
#include "minimalist/verify.hpp"

using namespace minimalist;

namespace {

struct RunFlags {
  std::string config;
  std::string data;
  int depth = 2;
  std::string activation;
  std::string optimizer;
  double lr = 0.0;
  std::size_t batch = 0;
  std::string sampling;
  std::string init;
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::string precision;
  std::size_t record_every = 0;
  double loss_stop = 0.0;
  std::size_t max_steps = 0;
  std::string out;

  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  f.opts["config"] = app->add_option("--config", f.config, "TOML-style experiment file");
  f.opts["data"] = app->add_option("--data", f.data, "CSV path, eos-demo, minimal or gaussian:N:d[:balanced]");
  f.opts["depth"] = app->add_option("--depth", f.depth, "number of layers D >= 2");
  f.opts["activation"] = app->add_option("--activation", f.activation, "identity, tanh or sigmoid");
  f.opts["optimizer"] = app->add_option("--optimizer", f.optimizer, "gf, gd or sgd");
  f.opts["lr"] = app->add_option("--lr", f.lr, "learning rate");
  f.opts["batch"] = app->add_option("--batch", f.batch, "SGD batch size");
  f.opts["sampling"] = app->add_option("--sampling", f.sampling, "uniform or reshuffle");
  f.opts["init"] = app->add_option("--init", f.init, "balanced, alpha_beta or uniform_fan_in");
  f.opts["alpha"] = app->add_option("--alpha", f.alpha, "alpha for alpha_beta init");
  f.opts["beta"] = app->add_option("--beta", f.beta, "beta for alpha_beta init");
  f.opts["seed"] = app->add_option("--seed", f.seed, "seed for initialization, sampling and synthetic data");
  f.opts["precision"] = app->add_option("--precision", f.precision, "binary32, binary64 or extended");
  f.opts["record-every"] = app->add_option("--record-every", f.record_every, "trajectory record cadence");
  f.opts["loss-stop"] = app->add_option("--loss-stop", f.loss_stop, "stop once the excess loss is below this");
  f.opts["max-steps"] = app->add_option("--max-steps", f.max_steps, "step cap");
  f.opts["out"] = app->add_option("--out", f.out, "output directory");
}

ExperimentConfig resolve(const RunFlags& f, ExperimentConfig base) {
  ExperimentConfig c = f.given("config") ? load_config(f.config) : std::move(base);
  if (f.given("data")) c.data = parse_data_source(f.data);
  if (f.given("depth")) c.depth = f.depth;
  if (f.given("activation")) c.activation = parse_activation(f.activation);
  if (f.given("optimizer")) c.optimizer.kind = parse_optimizer(f.optimizer);
  if (f.given("lr")) c.optimizer.eta = f.lr;
  if (f.given("batch")) c.optimizer.batch = f.batch;
  if (f.given("sampling")) c.optimizer.sampling = parse_sampling(f.sampling);
  if (f.given("init")) c.init.kind = parse_init(f.init);
  if (f.given("alpha")) c.init.alpha = f.alpha;
  if (f.given("beta")) c.init.beta = f.beta;
  if (f.given("seed")) {
    c.optimizer.seed = f.seed;
    c.data.seed = f.seed;
  }
  if (f.given("precision")) c.optimizer.precision = parse_precision(f.precision);
  if (f.given("record-every")) c.optimizer.record_every = f.record_every;
  if (f.given("loss-stop")) c.optimizer.loss_stop = f.loss_stop;
  if (f.given("max-steps")) c.optimizer.max_steps = f.max_steps;
  if (f.given("out")) c.out = f.out;
  c.validate();
  return c;
}

void emit(const nlohmann::json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  const std::filesystem::path p(out);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << text;
  std::cerr << "wrote " << p.string() << "\n";
}

void print_run(const ExperimentConfig& cfg, const RunResult& run) {
  std::cout << "status: " << to_string(run.status);
  if (!run.message.empty()) std::cout << " (" << run.message << ")";
  std::cout << "\n";
  if (!run.records.empty()) {
    const auto& last = run.records.back();
    std::cout << "steps: " << last.step << "\nloss: " << std::setprecision(10) << last.loss << "\n";
    if (last.sharpness) std::cout << "sharpness: " << *last.sharpness << "\n";
    if (last.imbalance) std::cout << "imbalance: " << *last.imbalance << "\n";
  }
  std::cout << "outputs: " << cfg.out << "/\n";
}

void print_eos(const EosSummary& s) {
  std::cout << "threshold 2/eta: " << s.threshold << "\n";
  if (s.first_crossing)
    std::cout << "first crossing: step " << *s.first_crossing << "\n";
  else
    std::cout << "first crossing: none\n";
  std::cout << "values within 10% of 2/eta after the crossing: " << s.in_band << "/" << s.recorded_after << " ("
            << std::fixed << std::setprecision(1) << 100.0 * s.band_fraction() << "%)\n"
            << std::defaultfloat << std::setprecision(6) << "loss increases: " << s.loss_increases
            << "\nmax sharpness: " << s.max_sharpness << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharpness, layer imbalance and dataset difficulty for the minimalist deep linear model"};
  app.require_subcommand(1);

  // difficulty
  auto* difficulty = app.add_subcommand("difficulty", "Report N, d, r, sigma_1, Q, C-tilde and predicted sharpness");
  std::string d_data;
  std::string d_out;
  difficulty->add_option("--data", d_data, "data source")->required();
  difficulty->add_option("--out", d_out, "write JSON here instead of stdout");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Emit sharpness bound reports as JSON");
  std::string b_data;
  std::string b_out;
  int b_depth = 2;
  std::optional<double> b_imbalance;
  std::optional<double> b_alpha;
  std::optional<double> b_beta;
  bounds->add_option("--data", b_data, "data source")->required();
  bounds->add_option("--depth", b_depth, "number of layers D >= 2");
  bounds->add_option("--imbalance", b_imbalance, "layer imbalance C at the minimizer (D = 2)");
  bounds->add_option("--alpha", b_alpha, "alpha of the alpha-beta initialization");
  bounds->add_option("--beta", b_beta, "beta of the alpha-beta initialization");
  bounds->add_option("--out", b_out, "write JSON here instead of stdout");

  // train
  auto* train_cmd = app.add_subcommand("train", "Run one training trajectory");
  RunFlags t_flags;
  add_run_flags(train_cmd, t_flags);

  // eos-demo
  auto* eos = app.add_subcommand("eos-demo", "Edge-of-stability preset on the embedded 2x2 data");
  RunFlags e_flags;
  add_run_flags(eos, e_flags);
  bool e_compare = false;
  eos->add_flag("--compare-precision", e_compare, "also run binary32 and report where the runs diverge");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the cartesian grid from a config [sweep] section");
  RunFlags s_flags;
  add_run_flags(sweep_cmd, s_flags);
  s_flags.opts["config"]->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset as CSV");
  std::string y_data;
  std::string y_out;
  std::uint64_t y_seed = 0;
  synth->add_option("--data", y_data, "minimal, eos-demo or gaussian:N:d[:balanced]")->required();
  synth->add_option("--seed", y_seed, "generator seed");
  synth->add_option("--out", y_out, "CSV path")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Run the property suites; exit code 1 on any failure");
  std::string v_suite = "all";
  VerifyOptions v_opt;
  verify->add_option("suite", v_suite, "all or one of: " + [] {
    std::string s;
    for (const auto& n : verify_suite_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  verify->add_option("--seed", v_opt.seed, "seed for the random instances");
  verify->add_option("--tolerance-scale", v_opt.tolerance_scale, "multiply every tolerance (testing the tests)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (difficulty->parsed()) {
      emit(difficulty_report(parse_data_source(d_data).load()), d_out);
    } else if (bounds->parsed()) {
      const Dataset ds = parse_data_source(b_data).load();
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : bounds_reports(ds, b_depth, b_imbalance, b_alpha, b_beta)) arr.push_back(to_json(r));
      emit(arr, b_out);
    } else if (train_cmd->parsed()) {
      const ExperimentConfig cfg = resolve(t_flags, ExperimentConfig{});
      print_run(cfg, train(cfg));
    } else if (eos->parsed()) {
      ExperimentConfig cfg = resolve(e_flags, eos_demo_config());
      if (!e_compare) {
        const RunResult run = train(cfg);
        print_run(cfg, run);
        print_eos(summarize_eos(run, cfg.optimizer.eta));
      } else {
        const std::string root = cfg.out;
        ExperimentConfig c64 = cfg;
        c64.optimizer.precision = Precision::binary64;
        c64.out = root + "/binary64";
        ExperimentConfig c32 = cfg;
        c32.optimizer.precision = Precision::binary32;
        c32.out = root + "/binary32";
        const RunResult r64 = train(c64);
        const RunResult r32 = train(c32);
        const EosSummary s64 = summarize_eos(r64, cfg.optimizer.eta);
        std::cout << "[binary64]\n";
        print_run(c64, r64);
        print_eos(s64);
        std::cout << "[binary32]\n";
        print_run(c32, r32);
        print_eos(summarize_eos(r32, cfg.optimizer.eta));
        const std::uint64_t from = s64.first_crossing.value_or(0);
        const auto div = divergence_step(r32, r64, 1.0, from);
        std::cout << std::setprecision(6) << "max sharpness gap after the crossing: " << max_sharpness_gap(r32, r64, from) << "\n"
                  << "divergence step (|S32 - S64| > 1): " << (div ? std::to_string(*div) : "none") << "\n";
      }
    } else if (sweep_cmd->parsed()) {
      const ExperimentConfig cfg = resolve(s_flags, ExperimentConfig{});
      const auto rows = sweep(cfg, &std::cerr);
      write_summary_csv(std::cout, rows);
    } else if (synth->parsed()) {
      DataSpec spec = parse_data_source(y_data);
      if (spec.kind == DataKind::csv) throw InvalidInput("synth: --data must name a generator");
      spec.seed = y_seed;
      const std::filesystem::path p(y_out);
      if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
      write_csv(spec.load(), p);
      std::cerr << "wrote " << p.string() << "\n";
    } else if (verify->parsed()) {
      const auto results = run_verify(v_suite, v_opt);
      bool ok = true;
      for (const auto& r : results) {
        ok = ok && r.passed();
        std::cout << (r.passed() ? "PASS " : "FAIL ") << std::left << std::setw(10) << r.name << std::right
                  << " cases=" << r.cases << " failures=" << r.failures << " max_error=" << std::scientific
                  << std::setprecision(3) << r.max_error << " tol=" << r.tolerance << std::defaultfloat << " ("
                  << std::fixed << std::setprecision(2) << r.seconds << "s)" << std::defaultfloat;
        if (!r.detail.empty()) std::cout << "  " << r.detail;
        std::cout << "\n";
      }
      return ok ? 0 : 1;
    }
  } catch (const IngestionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
