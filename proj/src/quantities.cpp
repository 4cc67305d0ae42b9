#include "minimalist/quantities.hpp"

#include <cmath>

namespace minimalist {

nlohmann::json to_json(const BoundsReport& report) {
  nlohmann::json j;
  j["source"] = report.source;
  j["lower"] = report.lower;
  j["upper"] = report.upper;
  j["inputs"] = report.inputs;
  j["v1_star_sq"] = report.v1_star_sq ? nlohmann::json(*report.v1_star_sq) : nlohmann::json(nullptr);
  j["degenerate"] = report.degenerate;
  return j;
}

namespace {

struct Summary {
  double n;
  double s1;
  double d1_sq;
  double sum_d_sq;
  double q;
  double r;
};

Summary summarize(const SpectralData<double>& sd, bool need_positive_q) {
  if (sd.rank() == 0) throw UndefinedQuantity("bounds: rank-0 data (X = 0)");
  const double q = difficulty(sd);
  if (need_positive_q && !(q > 0.0)) {
    throw UndefinedQuantity("bounds: Q = " + std::to_string(q) +
                            " (y is orthogonal to col(X)); no nonzero global minimizer exists");
  }
  return {static_cast<double>(sd.samples), sd.sigma()[0], sd.d_coeffs[0] * sd.d_coeffs[0], sd.sum_d_sq, q,
          static_cast<double>(sd.rank())};
}

void echo(BoundsReport& rep, const Summary& s) {
  rep.inputs["N"] = s.n;
  rep.inputs["r"] = s.r;
  rep.inputs["Q"] = s.q;
  rep.inputs["sigma1"] = s.s1;
  rep.inputs["d1"] = std::sqrt(s.d1_sq);
  rep.inputs["sum_d_sq"] = s.sum_d_sq;
}

void require_positive(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw InvalidInput("bounds: alpha and beta must be positive");
}

}  // namespace

double v1_star_sq(double q, double c_star) {
  if (!(q > 0.0)) throw UndefinedQuantity("v1_star_sq: Q must be positive");
  // Rationalized form avoids cancellation when C* >> 0.
  const double root = std::sqrt(c_star * c_star + 4.0 * q);
  return c_star >= 0.0 ? 2.0 * q / (root + c_star) : (root - c_star) / 2.0;
}

BoundsReport minimizer_bounds_2layer(const SpectralData<double>& sd, double c_star) {
  const Summary s = summarize(sd, true);
  const double v2 = v1_star_sq(s.q, c_star);
  BoundsReport rep;
  rep.source = "minimizer_two_layer";
  rep.lower = (s.s1 * s.s1 * v2 + s.d1_sq / v2) / s.n;
  rep.upper = (s.s1 * s.s1 * v2 + s.sum_d_sq / v2) / s.n;
  rep.v1_star_sq = v2;
  echo(rep, s);
  rep.inputs["C"] = c_star;
  rep.inputs["D"] = 2;
  return rep;
}

BoundsReport minimizer_bounds_2layer_reparam(const SpectralData<double>& sd, double c_star) {
  const Summary s = summarize(sd, true);
  const double root = std::sqrt(c_star * c_star + 4.0 * s.q);
  auto form = [&](double a) {
    return ((s.s1 * s.s1 + a / s.q) * root + (a / s.q - s.s1 * s.s1) * c_star) / (2.0 * s.n);
  };
  BoundsReport rep;
  rep.source = "minimizer_two_layer_reduced";
  rep.lower = form(s.d1_sq);
  rep.upper = form(s.sum_d_sq);
  rep.v1_star_sq = v1_star_sq(s.q, c_star);
  echo(rep, s);
  rep.inputs["C"] = c_star;
  rep.inputs["D"] = 2;
  return rep;
}

BoundsReport minimizer_bounds_deep(const SpectralData<double>& sd, int depth) {
  if (depth < 2) throw InvalidInput("minimizer_bounds_deep: depth must be >= 2");
  const Summary s = summarize(sd, true);
  const double dd = depth;
  const double lead = s.s1 * s.s1 * std::pow(s.q, (dd - 1.0) / dd);
  const double tail = (dd - 1.0) * std::pow(s.q, -1.0 / dd);
  BoundsReport rep;
  rep.source = "minimizer_balanced_deep";
  rep.lower = (lead + tail * s.d1_sq) / s.n;
  rep.upper = (lead + tail * s.sum_d_sq) / s.n;
  rep.v1_star_sq = std::pow(s.q, 1.0 / dd);
  echo(rep, s);
  rep.inputs["D"] = dd;
  return rep;
}

BoundsReport init_sharpness_bounds(const SpectralData<double>& sd, double alpha, double beta) {
  require_positive(alpha, beta);
  const Summary s = summarize(sd, false);
  const double a2 = alpha * alpha;
  const double b2 = beta * beta;
  double sum_sigma_sq = 0.0;
  double under_root = 0.0;
  for (std::size_t i = 0; i < sd.rank(); ++i) {
    const double sg2 = sd.sigma()[i] * sd.sigma()[i];
    sum_sigma_sq += sg2;
    under_root += sg2 * (a2 * b2 * sg2 + sd.d_coeffs[i] * sd.d_coeffs[i]);
  }
  BoundsReport rep;
  rep.source = "init_alpha_beta";
  rep.lower = s.s1 * s.s1 * (a2 + b2) / s.n;
  rep.upper = (a2 * sum_sigma_sq + b2 * s.s1 * s.s1 + std::sqrt(under_root)) / s.n;
  echo(rep, s);
  rep.inputs["alpha"] = alpha;
  rep.inputs["beta"] = beta;
  rep.inputs["D"] = 2;
  return rep;
}

BoundsReport convergence_sharpness_bounds(const SpectralData<double>& sd, double alpha, double beta) {
  require_positive(alpha, beta);
  const Summary s = summarize(sd, true);
  const double a2 = alpha * alpha;
  const double b2 = beta * beta;
  const double ec = s.r * a2 - b2;
  const double s1sq = s.s1 * s.s1;
  BoundsReport rep;
  rep.source = "convergence_alpha_beta";
  rep.lower =
      ((s1sq + s.d1_sq / s.q) * std::sqrt(ec * ec + 4.0 * s.q) + (s.d1_sq / s.q - s1sq) * ec) / (2.0 * s.n);
  rep.upper = ((s1sq + s.sum_d_sq / s.q) * std::sqrt(ec * ec + 2.0 * s.r * a2 * a2 + 2.0 * b2 * b2 + 4.0 * s.q) +
               (s.sum_d_sq / s.q - s1sq) * ec) /
              (2.0 * s.n);
  echo(rep, s);
  rep.inputs["alpha"] = alpha;
  rep.inputs["beta"] = beta;
  rep.inputs["expected_C"] = ec;
  rep.inputs["D"] = 2;
  return rep;
}

BoundsReport arbitrary_theta_bounds(const SpectralData<double>& sd, const ReparamState<double>& st) {
  if (st.v.size() != 1) throw InvalidInput("arbitrary_theta_bounds: defined for depth 2 only");
  check_state(st, sd, "arbitrary_theta_bounds");
  const Summary s = summarize(sd, false);
  const double v = st.v[0];
  const double o1 = st.o[0];
  const double s1 = s.s1;
  const double d1 = sd.d_coeffs[0];
  BoundsReport rep;
  rep.source = "arbitrary_state";
  const double den = v * v * s1 * s1 + s1 * s1 * o1 * o1;
  if (den < 1e-12) {
    rep.lower = 0.0;
    rep.degenerate = true;
  } else {
    rep.lower = (s1 * s1 * v * v + s1 * s1 * o1 * o1 + 2.0 * s1 * s1 * s1 * s1 * o1 * o1 * v * v / den -
                 2.0 * s1 * s1 * s1 * d1 * o1 * v / den) /
                s.n;
  }
  double so2 = 0.0;
  double resid = 0.0;
  for (std::size_t i = 0; i < sd.rank(); ++i) {
    const double sg = sd.sigma()[i];
    so2 += sg * sg * st.o[i] * st.o[i];
    const double t = sg * (sg * st.o[i] * v - sd.d_coeffs[i]);
    resid += t * t;
  }
  rep.upper = (s1 * s1 * v * v + so2 + std::sqrt(resid)) / s.n;
  echo(rep, s);
  rep.inputs["v1"] = v;
  rep.inputs["o1"] = o1;
  rep.inputs["C"] = layer_imbalance(st);
  rep.inputs["D"] = 2;
  return rep;
}

linalg::Matrix<double> mask_second_moment(std::size_t samples, std::size_t batch) {
  if (batch < 1 || batch > samples) throw InvalidInput("mask_second_moment: B must be in [1, N]");
  const double n = samples;
  const double b = batch;
  linalg::Matrix<double> m(samples, samples);
  if (samples == 1) {
    m(0, 0) = 1.0;
    return m;
  }
  // One correctly rounded division per entry: P(i in batch) = B/N and
  // P(i, j in batch) = B(B-1)/(N(N-1)).
  const double on = b / n;
  const double off = (b * (b - 1.0)) / (n * (n - 1.0));
  for (std::size_t i = 0; i < samples; ++i)
    for (std::size_t j = 0; j < samples; ++j) m(i, j) = i == j ? on : off;
  return m;
}

}  // namespace minimalist
