#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "minimalist/linalg.hpp"

namespace minimalist {

/// Training data (X, y). Stored at binary64; runs cast to their own scalar.
struct Dataset {
  linalg::Matrix<double> X;  // N x d
  std::vector<double> y;     // N

  std::size_t samples() const { return X.rows(); }
  std::size_t features() const { return X.cols(); }

  /// Throws InvalidInput unless shapes agree, entries are finite and y != 0.
  void validate() const;
};

/// Thin SVD of X plus everything derived from projecting y onto col(X).
template <class T>
struct SpectralData {
  linalg::ThinSVD<T> svd;
  linalg::Vector<T> d_coeffs;  // d_i = e_iᵀ y
  T y_perp_norm{0};            // ||y - sum d_i e_i||
  T sum_d_sq{0};
  T difficulty{0};  // Q, guarded; meaningless when rank == 0
  std::size_t samples = 0;
  std::size_t features = 0;

  std::size_t rank() const { return svd.rank; }
  const linalg::Vector<T>& sigma() const { return svd.singular_values; }
  /// Irreducible part of the loss, ||y_perp||² / (2N).
  T loss_floor() const { return y_perp_norm * y_perp_norm / (T(2) * T(static_cast<double>(samples))); }
};

inline constexpr double kDifficultyGuard = 1e-9;

template <class T>
T guarded_difficulty(std::span<const T> sigma, std::span<const T> d) {
  T q(0);
  for (std::size_t i = 0; i < sigma.size(); ++i) q += d[i] * d[i] / std::max(sigma[i] * sigma[i], T(kDifficultyGuard));
  return q;
}

template <class T>
SpectralData<T> spectral_from_svd(linalg::ThinSVD<T> svd, std::span<const T> y) {
  using std::sqrt;
  SpectralData<T> sd;
  sd.samples = svd.left.rows();
  sd.features = svd.right.rows();
  const std::size_t r = svd.rank;
  sd.d_coeffs.resize(r);
  linalg::Vector<T> resid(y.begin(), y.end());
  for (std::size_t i = 0; i < r; ++i) {
    T di(0);
    for (std::size_t n = 0; n < sd.samples; ++n) di += svd.left(n, i) * y[n];
    sd.d_coeffs[i] = di;
    sd.sum_d_sq += di * di;
  }
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t n = 0; n < sd.samples; ++n) resid[n] -= sd.d_coeffs[i] * svd.left(n, i);
  sd.y_perp_norm = linalg::norm<T>(resid);
  sd.difficulty = guarded_difficulty<T>(svd.singular_values, sd.d_coeffs);
  sd.svd = std::move(svd);
  return sd;
}

/// Spectral decomposition of a dataset at scalar T.
template <class T>
SpectralData<T> decompose(const Dataset& ds, T rank_tol = linalg::default_rank_tol<T>()) {
  ds.validate();
  const linalg::Matrix<T> x = ds.X.cast<T>();
  const linalg::Vector<T> y = linalg::cast_vector<T, double>(ds.y);
  return spectral_from_svd<T>(linalg::thin_svd(x, rank_tol), y);
}

/// Decomposition for data with XXᵀ diagonal: e_i are the +standard basis
/// vectors of the nonzero rows (sorted by row norm), w_i = x_i/||x_i||.
SpectralData<double> orthogonal_decompose(const Dataset& ds, double tol = 1e-10);

/// Q = sum d_i² / max(sigma_i², 1e-9). Throws UndefinedQuantity at rank 0.
template <class T>
T difficulty(const SpectralData<T>& sd) {
  if (sd.rank() == 0) throw UndefinedQuantity("difficulty: rank-0 data (X = 0), Q undefined");
  return sd.difficulty;
}

/// Imbalance threshold below which the minimizer bounds decrease in C.
template <class T>
T c_tilde(const SpectralData<T>& sd) {
  using std::sqrt;
  if (sd.rank() == 0) throw UndefinedQuantity("c_tilde: rank-0 data");
  if (!(sd.sum_d_sq > T(0))) throw UndefinedQuantity("c_tilde: y is orthogonal to col(X)");
  const T s1 = sd.sigma()[0];
  const T root = sqrt(sd.sum_d_sq);
  return s1 * difficulty(sd) / root - root / s1;
}

/// sigma_1² Q^{(D-1)/D} / N
double predicted_sharpness(const SpectralData<double>& sd, int depth, std::size_t samples);

/// y projected onto col(X).
template <class T>
linalg::Vector<T> y_parallel(const SpectralData<T>& sd) {
  linalg::Vector<T> out(sd.samples, T(0));
  for (std::size_t i = 0; i < sd.rank(); ++i)
    for (std::size_t n = 0; n < sd.samples; ++n) out[n] += sd.d_coeffs[i] * sd.svd.left(n, i);
  return out;
}

/// Same X with labels replaced by y∥ (what the optimizers actually fit).
Dataset project_labels(const Dataset& ds, const SpectralData<double>& sd);

// ---------------------------------------------------------------------------
// Generators and ingestion

/// Two-sample dataset of the precision experiments: a "common" direction of
/// length common_size plus/minus a "signal" direction of length signal_size,
/// labels alpha * (small eigvec of XXᵀ) + beta * (large eigvec).
///
/// Directions come from MT19937(seed) with numpy's random_sample
/// construction, so seed 0 reproduces `np.random.seed(0)`. Eigenvectors are
/// signed with a nonnegative last entry.
Dataset synth_minimal_data(std::size_t dim, double common_size, double signal_size, double alpha, double beta,
                           std::uint32_t seed = 0);

enum class LabelMode { gaussian, balanced_sign };

/// i.i.d. N(0,1) features; labels N(0,1) or a shuffled balanced ±1 vector.
Dataset synth_gaussian(std::size_t samples, std::size_t features, LabelMode mode, std::uint64_t seed);

/// The 2x2 instance used for the edge-of-stability demonstration.
Dataset eos_demo_dataset();

/// Header row required. Empty `feature_columns` means every column except
/// the label; empty `label_column` means the last column.
Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& feature_columns = {},
                 const std::string& label_column = {}, bool standardize = false);

/// Writes "f0,...,f{d-1},y" with shortest round-trip decimal formatting.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

/// Per-feature standardization (population std, divisor max(std, 1e-12)).
void standardize_features(Dataset& ds);

}  // namespace minimalist
