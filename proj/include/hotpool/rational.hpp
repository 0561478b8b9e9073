#pragma once

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hotpool {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact arbitrary-precision rational number.
using Rational = mpq_class;

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
  if (den == 0) throw Error("zero denominator");
  Rational r(mpz_class(std::to_string(num)), mpz_class(std::to_string(den)));
  r.canonicalize();
  return r;
}

/// Parses "n" or "p/q" (optionally signed) into a canonical rational.
inline Rational parse_rational(std::string_view text) {
  std::string s(text);
  if (s.empty()) throw Error("empty rational");
  auto valid_int = [](std::string_view part, bool allow_sign) {
    if (part.empty()) return false;
    std::size_t i = 0;
    if (allow_sign && (part[0] == '-' || part[0] == '+')) i = 1;
    if (i == part.size()) return false;
    for (; i < part.size(); ++i)
      if (part[i] < '0' || part[i] > '9') return false;
    return true;
  };
  auto slash = s.find('/');
  std::string num = s.substr(0, slash);
  std::string den = slash == std::string::npos ? "1" : s.substr(slash + 1);
  if (!valid_int(num, true) || !valid_int(den, false)) throw Error("malformed rational '" + s + "'");
  if (num[0] == '+') num.erase(0, 1);
  mpz_class d(den);
  if (d == 0) throw Error("zero denominator in '" + s + "'");
  Rational r(mpz_class(num), d);
  r.canonicalize();
  return r;
}

inline mpz_class floor_of(const Rational& q) {
  mpz_class out;
  mpz_fdiv_q(out.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return out;
}

inline mpz_class ceil_of(const Rational& q) {
  mpz_class out;
  mpz_cdiv_q(out.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return out;
}

inline bool is_integer(const Rational& q) { return q.get_den() == 1; }

/// Renders with a fixed number of fractional digits, rounding half to even.
inline std::string to_decimal(const Rational& q, int digits = 6) {
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(digits));
  Rational scaled = q * scale;
  mpz_class lo = floor_of(scaled);
  Rational frac = scaled - lo;
  int cmp_half = cmp(frac, Rational(1, 2));
  if (cmp_half > 0 || (cmp_half == 0 && mpz_odd_p(lo.get_mpz_t()) != 0)) lo += 1;

  bool negative = lo < 0;
  mpz_class mag = negative ? mpz_class(-lo) : lo;
  std::string body = mag.get_str();
  if (digits > 0) {
    if (body.size() <= static_cast<std::size_t>(digits))
      body.insert(0, static_cast<std::size_t>(digits) + 1 - body.size(), '0');
    body.insert(body.size() - static_cast<std::size_t>(digits), ".");
  }
  return negative ? "-" + body : body;
}

inline std::string to_fraction(const Rational& q) { return q.get_str(); }

namespace detail {

/// Shared machinery for non-negative rational quantities.
template <class Derived>
class NonNegative {
 public:
  NonNegative() = default;
  explicit NonNegative(Rational v) : value_(std::move(v)) {
    value_.canonicalize();
    if (value_ < 0) throw Error("negative " + std::string(Derived::kind) + " " + value_.get_str());
  }
  explicit NonNegative(std::int64_t v) : NonNegative(make_rational(v)) {}

  const Rational& value() const { return value_; }

  friend bool operator==(const Derived& a, const Derived& b) { return a.value_ == b.value_; }
  friend std::strong_ordering operator<=>(const Derived& a, const Derived& b) {
    int c = cmp(a.value_, b.value_);
    return c < 0 ? std::strong_ordering::less : c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal;
  }
  friend std::ostream& operator<<(std::ostream& os, const Derived& d) { return os << d.value_.get_str(); }

 private:
  Rational value_{0};
};

}  // namespace detail

/// Non-negative length of model time, in time-interval units.
class Duration : public detail::NonNegative<Duration> {
 public:
  static constexpr const char* kind = "duration";
  using NonNegative::NonNegative;
};

/// A point on the global simulation clock.
class Time : public detail::NonNegative<Time> {
 public:
  static constexpr const char* kind = "time";
  using NonNegative::NonNegative;

  friend Time operator+(const Time& t, const Duration& d) { return Time(t.value() + d.value()); }
  /// Signed difference; negative when `b` is later than `a`.
  friend Rational operator-(const Time& a, const Time& b) { return a.value() - b.value(); }
};

}  // namespace hotpool
