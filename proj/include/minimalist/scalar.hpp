#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>

namespace minimalist {

/// Arithmetic used end-to-end in one run.
enum class Precision { binary32, binary64, extended };

std::string to_string(Precision p);
Precision parse_precision(std::string_view text);

/// Unevaluated sum hi + lo of two doubles, |lo| <= ulp(hi)/2.
///
/// Gives roughly 106 significand bits. Only the operations the solvers
/// need are provided: the four basic operations, sqrt, abs and ordering.
/// Everything relies on IEEE binary64 round-to-nearest and a correctly
/// rounded std::fma, so do not build this translation unit with
/// -ffast-math.
class DoubleDouble {
 public:
  constexpr DoubleDouble() = default;
  constexpr DoubleDouble(double x) : hi_(x), lo_(0.0) {}  // NOLINT(implicit)
  constexpr DoubleDouble(double hi, double lo) : hi_(hi), lo_(lo) {}
  explicit DoubleDouble(int x) : hi_(x), lo_(0.0) {}
  explicit DoubleDouble(std::size_t x) : hi_(static_cast<double>(x)), lo_(0.0) {}

  constexpr double hi() const { return hi_; }
  constexpr double lo() const { return lo_; }
  explicit operator double() const { return hi_ + lo_; }
  explicit operator float() const { return static_cast<float>(hi_ + lo_); }

  friend DoubleDouble operator-(DoubleDouble a) { return {-a.hi_, -a.lo_}; }

  friend DoubleDouble operator+(DoubleDouble a, DoubleDouble b) {
    auto [s, e] = two_sum(a.hi_, b.hi_);
    auto [t, f] = two_sum(a.lo_, b.lo_);
    e += t;
    const auto q = quick_two_sum(s, e);
    const auto [h, l] = quick_two_sum(q.first, q.second + f);
    return {h, l};
  }
  friend DoubleDouble operator-(DoubleDouble a, DoubleDouble b) { return a + (-b); }

  friend DoubleDouble operator*(DoubleDouble a, DoubleDouble b) {
    auto [p, e] = two_prod(a.hi_, b.hi_);
    e += a.hi_ * b.lo_ + a.lo_ * b.hi_;
    auto [h, l] = quick_two_sum(p, e);
    return {h, l};
  }

  friend DoubleDouble operator/(DoubleDouble a, DoubleDouble b) {
    const double q1 = a.hi_ / b.hi_;
    DoubleDouble r = a - b * DoubleDouble(q1);
    const double q2 = r.hi_ / b.hi_;
    r = r - b * DoubleDouble(q2);
    const double q3 = r.hi_ / b.hi_;
    auto [h, l] = quick_two_sum(q1, q2);
    return DoubleDouble(h, l) + DoubleDouble(q3);
  }

  DoubleDouble& operator+=(DoubleDouble b) { return *this = *this + b; }
  DoubleDouble& operator-=(DoubleDouble b) { return *this = *this - b; }
  DoubleDouble& operator*=(DoubleDouble b) { return *this = *this * b; }
  DoubleDouble& operator/=(DoubleDouble b) { return *this = *this / b; }

  friend bool operator==(DoubleDouble a, DoubleDouble b) { return a.hi_ == b.hi_ && a.lo_ == b.lo_; }
  friend bool operator!=(DoubleDouble a, DoubleDouble b) { return !(a == b); }
  friend bool operator<(DoubleDouble a, DoubleDouble b) {
    return a.hi_ < b.hi_ || (a.hi_ == b.hi_ && a.lo_ < b.lo_);
  }
  friend bool operator>(DoubleDouble a, DoubleDouble b) { return b < a; }
  friend bool operator<=(DoubleDouble a, DoubleDouble b) { return !(b < a); }
  friend bool operator>=(DoubleDouble a, DoubleDouble b) { return !(a < b); }

  friend DoubleDouble abs(DoubleDouble a) { return a.hi_ < 0.0 ? -a : a; }
  friend DoubleDouble fabs(DoubleDouble a) { return abs(a); }
  friend bool isfinite(DoubleDouble a) { return std::isfinite(a.hi_) && std::isfinite(a.lo_); }
  friend bool isnan(DoubleDouble a) { return std::isnan(a.hi_) || std::isnan(a.lo_); }

  friend DoubleDouble sqrt(DoubleDouble a) {
    if (a.hi_ <= 0.0) return DoubleDouble(std::sqrt(a.hi_));
    // One Newton step from the binary64 root doubles the correct bits.
    const double x = std::sqrt(a.hi_);
    auto [sq, sq_err] = two_prod(x, x);
    const DoubleDouble resid = a - DoubleDouble(sq, sq_err);
    return DoubleDouble(x) + DoubleDouble(resid.hi_ / (2.0 * x));
  }

  friend std::ostream& operator<<(std::ostream& os, DoubleDouble a);

 private:
  struct Pair {
    double first;
    double second;
  };
  static Pair two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
  }
  static Pair quick_two_sum(double a, double b) {
    const double s = a + b;
    return {s, b - (s - a)};
  }
  static Pair two_prod(double a, double b) {
    const double p = a * b;
    return {p, std::fma(a, b, -p)};
  }

  double hi_ = 0.0;
  double lo_ = 0.0;
};

/// Widening/narrowing conversion used at run boundaries (I/O, reporting).
template <class To, class From>
To scalar_cast(From x) {
  if constexpr (std::is_same_v<To, From>) {
    return x;
  } else if constexpr (std::is_same_v<To, DoubleDouble>) {
    return DoubleDouble(static_cast<double>(x));
  } else {
    return static_cast<To>(x);
  }
}

template <class T>
bool is_finite(T x) {
  using std::isfinite;
  return isfinite(x);
}

template <class T>
double to_double(T x) {
  return static_cast<double>(x);
}

}  // namespace minimalist

template <>
class std::numeric_limits<minimalist::DoubleDouble> {
 public:
  using DD = minimalist::DoubleDouble;
  static constexpr bool is_specialized = true;
  static constexpr bool is_signed = true;
  static constexpr bool has_infinity = true;
  static constexpr bool has_quiet_NaN = true;
  static constexpr int digits = 106;
  static constexpr DD epsilon() { return DD(4.93038065763132e-32); }  // 2^-104
  static constexpr DD min() { return DD(std::numeric_limits<double>::min()); }
  static constexpr DD max() { return DD(std::numeric_limits<double>::max()); }
  static constexpr DD lowest() { return DD(std::numeric_limits<double>::lowest()); }
  static constexpr DD infinity() { return DD(std::numeric_limits<double>::infinity()); }
  static constexpr DD quiet_NaN() { return DD(std::numeric_limits<double>::quiet_NaN()); }
};
