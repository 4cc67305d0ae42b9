#include "minimalist/experiment.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "CLI11.hpp"

namespace minimalist {

std::string to_string(DataKind k) {
  switch (k) {
    case DataKind::csv: return "csv";
    case DataKind::eos_demo: return "eos-demo";
    case DataKind::minimal: return "minimal";
    case DataKind::gaussian: return "gaussian";
  }
  return "unknown";
}

DataKind parse_data_kind(std::string_view text) {
  if (text == "csv") return DataKind::csv;
  if (text == "eos-demo" || text == "eos_demo") return DataKind::eos_demo;
  if (text == "minimal") return DataKind::minimal;
  if (text == "gaussian") return DataKind::gaussian;
  throw InvalidInput("unknown data source '" + std::string(text) + "' (expected csv, eos-demo, minimal or gaussian)");
}

namespace {

std::string to_string(LabelMode m) { return m == LabelMode::gaussian ? "gaussian" : "balanced_sign"; }

LabelMode parse_label_mode(std::string_view text) {
  if (text == "gaussian") return LabelMode::gaussian;
  if (text == "balanced_sign" || text == "balanced" || text == "sign") return LabelMode::balanced_sign;
  throw InvalidInput("unknown label mode '" + std::string(text) + "' (expected gaussian or balanced_sign)");
}

template <class T>
T parse_number(const std::string& text, const std::string& key) {
  T value{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw InvalidInput("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InvalidInput("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

template <class T, class F>
std::string list(const std::vector<T>& xs, F fmt) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
  return out + "]";
}

std::string num(double x) { return format_number(x); }

}  // namespace

Dataset DataSpec::load() const {
  switch (kind) {
    case DataKind::csv:
      if (path.empty()) throw InvalidInput("data: csv source needs a path");
      return load_csv(path, columns, label, standardize);
    case DataKind::eos_demo: return eos_demo_dataset();
    case DataKind::minimal:
      return synth_minimal_data(dim, common, signal, alpha, beta, static_cast<std::uint32_t>(seed));
    case DataKind::gaussian: return synth_gaussian(samples, features, labels, seed);
  }
  throw InvalidInput("data: unknown source");
}

DataSpec parse_data_source(const std::string& text) {
  DataSpec spec;
  if (text == "eos-demo" || text == "eos_demo") {
    spec.kind = DataKind::eos_demo;
  } else if (text == "minimal") {
    spec.kind = DataKind::minimal;
  } else if (text.rfind("gaussian:", 0) == 0) {
    spec.kind = DataKind::gaussian;
    std::vector<std::string> parts;
    std::stringstream ss(text.substr(9));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3) {
      throw InvalidInput("--data gaussian:N:d[:balanced] expected, got '" + text + "'");
    }
    spec.samples = parse_number<std::size_t>(parts[0], "data");
    spec.features = parse_number<std::size_t>(parts[1], "data");
    if (parts.size() == 3) spec.labels = parse_label_mode(parts[2]);
  } else {
    spec.kind = DataKind::csv;
    spec.path = text;
  }
  return spec;
}

void ExperimentConfig::validate() const {
  if (depth < 2) throw InvalidInput("depth must be >= 2");
  if (activation != Activation::identity && depth != 2) {
    throw InvalidInput("nonlinear activations are supported for depth 2 only");
  }
  if (activation != Activation::identity && optimizer.precision != Precision::binary64) {
    throw InvalidInput("nonlinear activations run at binary64 only");
  }
  if (out.empty()) throw InvalidInput("output path must not be empty");
  for (int d : sweep.depth)
    if (d < 2) throw InvalidInput("sweep depth must be >= 2");
}

std::string serialize(const ExperimentConfig& c) {
  std::ostringstream o;
  const auto& d = c.data;
  o << "[data]\n";
  o << "source = " << quote(to_string(d.kind)) << '\n';
  if (d.kind == DataKind::csv) {
    o << "path = " << quote(d.path) << '\n';
    o << "columns = " << list(d.columns, quote) << '\n';
    o << "label = " << quote(d.label) << '\n';
    o << "standardize = " << (d.standardize ? "true" : "false") << '\n';
  }
  o << "dim = " << d.dim << '\n';
  o << "common = " << num(d.common) << '\n';
  o << "signal = " << num(d.signal) << '\n';
  o << "alpha = " << num(d.alpha) << '\n';
  o << "beta = " << num(d.beta) << '\n';
  o << "samples = " << d.samples << '\n';
  o << "features = " << d.features << '\n';
  o << "labels = " << quote(to_string(d.labels)) << '\n';
  o << "seed = " << d.seed << "\n\n";

  o << "[model]\n";
  o << "depth = " << c.depth << '\n';
  o << "activation = " << quote(to_string(c.activation)) << "\n\n";

  const auto& p = c.optimizer;
  o << "[optimizer]\n";
  o << "kind = " << quote(to_string(p.kind)) << '\n';
  o << "lr = " << num(p.eta) << '\n';
  o << "batch = " << p.batch << '\n';
  o << "sampling = " << quote(to_string(p.sampling)) << '\n';
  if (p.gf_step) o << "gf_step = " << num(*p.gf_step) << '\n';
  o << "gf_step_scale = " << num(p.gf_step_scale) << '\n';
  o << "gf_remeasure_every = " << p.gf_remeasure_every << '\n';
  o << "record_every = " << p.record_every << '\n';
  o << "sharpness_every = " << p.sharpness_every << '\n';
  o << "max_steps = " << p.max_steps << '\n';
  o << "loss_stop = " << num(p.loss_stop) << '\n';
  o << "seed = " << p.seed << '\n';
  o << "precision = " << quote(to_string(p.precision)) << '\n';
  o << "record_terms = " << (p.record_terms ? "true" : "false") << "\n\n";

  o << "[init]\n";
  o << "scheme = " << quote(to_string(c.init.kind)) << '\n';
  o << "c = " << num(c.init.c) << '\n';
  o << "alpha = " << num(c.init.alpha) << '\n';
  o << "beta = " << num(c.init.beta) << '\n';
  if (c.init.kind == InitKind::explicit_values) {
    o << "u = " << list(c.init.values.u, num) << '\n';
    o << "v = " << list(c.init.values.v, num) << '\n';
  }
  o << '\n';

  o << "[output]\n";
  o << "out = " << quote(c.out) << '\n';
  o << "plots = " << (c.plots ? "true" : "false") << '\n';

  if (!c.sweep.empty()) {
    const auto& s = c.sweep;
    o << "\n[sweep]\n";
    if (!s.lr.empty()) o << "lr = " << list(s.lr, num) << '\n';
    if (!s.batch.empty()) o << "batch = " << list(s.batch, [](std::size_t x) { return std::to_string(x); }) << '\n';
    if (!s.depth.empty()) o << "depth = " << list(s.depth, [](int x) { return std::to_string(x); }) << '\n';
    if (!s.samples.empty()) o << "samples = " << list(s.samples, [](std::size_t x) { return std::to_string(x); }) << '\n';
    if (!s.precision.empty()) {
      o << "precision = " << list(s.precision, [](Precision x) { return quote(to_string(x)); }) << '\n';
    }
    o << "threads = " << s.threads << '\n';
  }
  return o.str();
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }

  using Values = std::vector<std::string>;
  using Setter = std::function<void(const Values&, const std::string&)>;
  auto one = [](const Values& v, const std::string& key) -> const std::string& {
    if (v.size() != 1) throw InvalidInput("config key '" + key + "' expects a single value");
    return v.front();
  };
  auto real = [&](double& dst) {
    return Setter([&dst, &one](const Values& v, const std::string& k) { dst = parse_number<double>(one(v, k), k); });
  };
  auto size = [&](std::size_t& dst) {
    return Setter(
        [&dst, &one](const Values& v, const std::string& k) { dst = parse_number<std::size_t>(one(v, k), k); });
  };
  auto u64 = [&](std::uint64_t& dst) {
    return Setter(
        [&dst, &one](const Values& v, const std::string& k) { dst = parse_number<std::uint64_t>(one(v, k), k); });
  };
  auto flag = [&](bool& dst) {
    return Setter([&dst, &one](const Values& v, const std::string& k) { dst = parse_bool(one(v, k), k); });
  };
  auto text = [&](std::string& dst) {
    return Setter([&dst, &one](const Values& v, const std::string& k) { dst = one(v, k); });
  };
  auto reals = [](std::vector<double>& dst) {
    return Setter([&dst](const Values& v, const std::string& k) {
      dst.clear();
      for (const auto& x : v)
        if (!x.empty()) dst.push_back(parse_number<double>(x, k));
    });
  };
  auto sizes = [](std::vector<std::size_t>& dst) {
    return Setter([&dst](const Values& v, const std::string& k) {
      dst.clear();
      for (const auto& x : v)
        if (!x.empty()) dst.push_back(parse_number<std::size_t>(x, k));
    });
  };

  std::map<std::string, Setter> table{
      {"data.source", [&](const Values& v, const std::string& k) { c.data.kind = parse_data_kind(one(v, k)); }},
      {"data.path", text(c.data.path)},
      {"data.columns",
       [&](const Values& v, const std::string&) {
         c.data.columns.clear();
         for (const auto& x : v)
           if (!x.empty()) c.data.columns.push_back(x);
       }},
      {"data.label", text(c.data.label)},
      {"data.standardize", flag(c.data.standardize)},
      {"data.dim", size(c.data.dim)},
      {"data.common", real(c.data.common)},
      {"data.signal", real(c.data.signal)},
      {"data.alpha", real(c.data.alpha)},
      {"data.beta", real(c.data.beta)},
      {"data.samples", size(c.data.samples)},
      {"data.features", size(c.data.features)},
      {"data.labels", [&](const Values& v, const std::string& k) { c.data.labels = parse_label_mode(one(v, k)); }},
      {"data.seed", u64(c.data.seed)},
      {"model.depth", [&](const Values& v, const std::string& k) { c.depth = parse_number<int>(one(v, k), k); }},
      {"model.activation",
       [&](const Values& v, const std::string& k) { c.activation = parse_activation(one(v, k)); }},
      {"optimizer.kind",
       [&](const Values& v, const std::string& k) { c.optimizer.kind = parse_optimizer(one(v, k)); }},
      {"optimizer.lr", real(c.optimizer.eta)},
      {"optimizer.batch", size(c.optimizer.batch)},
      {"optimizer.sampling",
       [&](const Values& v, const std::string& k) { c.optimizer.sampling = parse_sampling(one(v, k)); }},
      {"optimizer.gf_step",
       [&](const Values& v, const std::string& k) { c.optimizer.gf_step = parse_number<double>(one(v, k), k); }},
      {"optimizer.gf_step_scale", real(c.optimizer.gf_step_scale)},
      {"optimizer.gf_remeasure_every", size(c.optimizer.gf_remeasure_every)},
      {"optimizer.record_every", size(c.optimizer.record_every)},
      {"optimizer.sharpness_every", size(c.optimizer.sharpness_every)},
      {"optimizer.max_steps", size(c.optimizer.max_steps)},
      {"optimizer.loss_stop", real(c.optimizer.loss_stop)},
      {"optimizer.seed", u64(c.optimizer.seed)},
      {"optimizer.precision",
       [&](const Values& v, const std::string& k) { c.optimizer.precision = parse_precision(one(v, k)); }},
      {"optimizer.record_terms", flag(c.optimizer.record_terms)},
      {"init.scheme", [&](const Values& v, const std::string& k) { c.init.kind = parse_init(one(v, k)); }},
      {"init.c", real(c.init.c)},
      {"init.alpha", real(c.init.alpha)},
      {"init.beta", real(c.init.beta)},
      {"init.u", reals(c.init.values.u)},
      {"init.v", reals(c.init.values.v)},
      {"output.out", text(c.out)},
      {"output.plots", flag(c.plots)},
      {"sweep.lr", reals(c.sweep.lr)},
      {"sweep.batch", sizes(c.sweep.batch)},
      {"sweep.depth",
       [&](const Values& v, const std::string& k) {
         c.sweep.depth.clear();
         for (const auto& x : v)
           if (!x.empty()) c.sweep.depth.push_back(parse_number<int>(x, k));
       }},
      {"sweep.samples", sizes(c.sweep.samples)},
      {"sweep.precision",
       [&](const Values& v, const std::string&) {
         c.sweep.precision.clear();
         for (const auto& x : v)
           if (!x.empty()) c.sweep.precision.push_back(parse_precision(x));
       }},
      {"sweep.threads", size(c.sweep.threads)},
  };

  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string key = item.fullname();
    const auto it = table.find(key);
    if (it == table.end()) throw InvalidInput("config: unknown key '" + key + "'");
    it->second(item.inputs, key);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config file " + path.string());
  try {
    return parse_config(in);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

ExperimentConfig eos_demo_config() {
  ExperimentConfig c;
  c.data.kind = DataKind::eos_demo;
  c.depth = 2;
  c.optimizer.kind = OptimizerKind::gd;
  c.optimizer.eta = 2.0 / 50.0;
  c.optimizer.record_every = 1;
  c.optimizer.sharpness_every = 1;
  c.optimizer.max_steps = 20000;
  c.optimizer.loss_stop = 1e-7;
  c.init.kind = InitKind::explicit_values;
  c.init.values = Params<double>{{0.01, 0.01}, {0.01}};
  c.out = "eos_demo";
  return c;
}

}  // namespace minimalist
