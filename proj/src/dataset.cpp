#include "minimalist/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "minimalist/rng.hpp"

namespace minimalist {

void Dataset::validate() const {
  if (X.rows() == 0 || X.cols() == 0) throw InvalidInput("dataset: X must have at least one row and one column");
  if (y.size() != X.rows()) {
    throw InvalidInput("dataset: label count " + std::to_string(y.size()) + " != sample count " +
                       std::to_string(X.rows()));
  }
  if (!linalg::all_finite(X.entries()) || !linalg::all_finite<double>(y))
    throw InvalidInput("dataset: non-finite entries");
  if (std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; }))
    throw InvalidInput("dataset: label vector is zero");
}

SpectralData<double> orthogonal_decompose(const Dataset& ds, double tol) {
  ds.validate();
  const std::size_t n = ds.samples();
  const std::size_t d = ds.features();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = linalg::norm<double>(ds.X.row(i));
  const double scale = *std::max_element(norms.begin(), norms.end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(linalg::dot<double>(ds.X.row(i), ds.X.row(j))) > tol * std::max(scale * scale, 1e-300))
        throw InvalidInput("orthogonal_decompose: XXᵀ is not diagonal");

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (norms[i] > 0.0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

  linalg::ThinSVD<double> svd;
  svd.rank = order.size();
  svd.singular_values.resize(svd.rank);
  svd.left = linalg::Matrix<double>(n, svd.rank);
  svd.right = linalg::Matrix<double>(d, svd.rank);
  for (std::size_t k = 0; k < svd.rank; ++k) {
    const std::size_t i = order[k];
    svd.singular_values[k] = norms[i];
    svd.left(i, k) = 1.0;
    for (std::size_t j = 0; j < d; ++j) svd.right(j, k) = ds.X(i, j) / norms[i];
  }
  return spectral_from_svd<double>(std::move(svd), ds.y);
}

double predicted_sharpness(const SpectralData<double>& sd, int depth, std::size_t samples) {
  if (depth < 2) throw InvalidInput("predicted_sharpness: depth must be >= 2");
  const double q = difficulty(sd);
  if (!(q > 0.0)) throw UndefinedQuantity("predicted_sharpness: Q <= 0");
  const double s1 = sd.sigma()[0];
  return s1 * s1 * std::pow(q, static_cast<double>(depth - 1) / depth) / static_cast<double>(samples);
}

Dataset project_labels(const Dataset& ds, const SpectralData<double>& sd) {
  Dataset out{ds.X, y_parallel(sd)};
  return out;
}

namespace {

/// numpy's legacy random_sample: 53 random bits from two MT19937 outputs.
double numpy_random_sample(std::mt19937& gen) {
  const std::uint32_t a = gen() >> 5;
  const std::uint32_t b = gen() >> 6;
  return (a * 67108864.0 + b) / 9007199254740992.0;
}

}  // namespace

Dataset synth_minimal_data(std::size_t dim, double common_size, double signal_size, double alpha, double beta,
                           std::uint32_t seed) {
  if (dim < 2) throw InvalidInput("synth_minimal_data: dimension must be >= 2");
  std::mt19937 gen(seed);
  std::vector<double> common(dim), opposite(dim);
  for (auto& c : common) c = numpy_random_sample(gen);
  for (auto& o : opposite) o = numpy_random_sample(gen);

  const double cn = linalg::norm<double>(common);
  for (auto& c : common) c /= cn;
  const double proj = linalg::dot<double>(opposite, common);
  for (std::size_t j = 0; j < dim; ++j) opposite[j] -= common[j] * proj;
  const double on = linalg::norm<double>(opposite);
  for (auto& o : opposite) o /= on;

  Dataset ds;
  ds.X = linalg::Matrix<double>(2, dim);
  for (std::size_t j = 0; j < dim; ++j) {
    ds.X(0, j) = common_size * common[j] + signal_size * opposite[j];
    ds.X(1, j) = common_size * common[j] - signal_size * opposite[j];
  }

  const auto eig = linalg::sym_eig_jacobi(linalg::gram(ds.X.transposed()));
  // eig is sorted descending; column 1 is the small eigenvector.
  auto signed_col = [&](std::size_t k) {
    std::vector<double> v = eig.vectors.col(k);
    const double last = std::abs(v[1]) > 1e-12 ? v[1] : v[0];
    if (last < 0.0)
      for (auto& x : v) x = -x;
    return v;
  };
  const auto small = signed_col(1);
  const auto large = signed_col(0);
  ds.y = {small[0] * alpha + large[0] * beta, small[1] * alpha + large[1] * beta};
  return ds;
}

Dataset synth_gaussian(std::size_t samples, std::size_t features, LabelMode mode, std::uint64_t seed) {
  if (samples == 0 || features == 0) throw InvalidInput("synth_gaussian: N and d must be >= 1");
  Rng rng(seed);
  Dataset ds;
  ds.X = linalg::Matrix<double>(samples, features);
  for (auto& x : ds.X.entries()) x = rng.normal();
  ds.y.resize(samples);
  if (mode == LabelMode::gaussian) {
    for (auto& v : ds.y) v = rng.normal();
  } else {
    for (std::size_t i = 0; i < samples; ++i) ds.y[i] = i < samples / 2 ? 1.0 : -1.0;
    std::shuffle(ds.y.begin(), ds.y.end(), rng.engine());
  }
  ds.validate();
  return ds;
}

Dataset eos_demo_dataset() {
  Dataset ds;
  ds.X = linalg::Matrix<double>(2, 2, {1.54099607, -0.2934289, -2.17878938, 0.56843126});
  ds.y = {-1.08452237, -1.39859545};
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& feature_columns,
                 const std::string& label_column, bool standardize) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path.string() + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path.string() + ": empty file (header row required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IngestionError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label = label_column.empty() ? header.size() - 1 : find_col(label_column);
  std::vector<std::size_t> features;
  if (feature_columns.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (j != label) features.push_back(j);
  } else {
    for (const auto& name : feature_columns) features.push_back(find_col(name));
  }
  if (features.empty()) throw IngestionError(path.string() + ": no feature columns");

  std::vector<double> xs, ys;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IngestionError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(header.size()));
    }
    auto parse = [&](std::size_t j) {
      const std::string& c = cells[j];
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || res.ec != std::errc{} || res.ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw IngestionError(path.string() + ": row " + std::to_string(row) + ", column '" + header[j] +
                             "': not a finite number: '" + c + "'");
      }
      return v;
    };
    for (std::size_t j : features) xs.push_back(parse(j));
    ys.push_back(parse(label));
  }
  if (ys.empty()) throw IngestionError(path.string() + ": no data rows");

  Dataset ds{linalg::Matrix<double>(ys.size(), features.size(), std::move(xs)), std::move(ys)};
  if (standardize) standardize_features(ds);
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  for (std::size_t j = 0; j < ds.features(); ++j) out << 'f' << j << ',';
  out << "y\n";
  for (std::size_t i = 0; i < ds.samples(); ++i) {
    for (std::size_t j = 0; j < ds.features(); ++j) out << format_double(ds.X(i, j)) << ',';
    out << format_double(ds.y[i]) << '\n';
  }
}

void standardize_features(Dataset& ds) {
  const std::size_t n = ds.samples();
  for (std::size_t j = 0; j < ds.features(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += ds.X(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (ds.X(i, j) - mean) * (ds.X(i, j) - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(n)), 1e-12);
    for (std::size_t i = 0; i < n; ++i) ds.X(i, j) = (ds.X(i, j) - mean) / sd;
  }
}

}  // namespace minimalist
