#pragma once

#include <gmpxx.h>

#include <climits>
#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rmc {

using Integer = mpz_class;

/// Exact rational, always canonical. Values whose numerator and denominator
/// fit in 64 bits are held inline; anything larger moves to GMP.
class Rational {
 public:
  Rational() = default;
  Rational(int n) : num_(n) {}                 // NOLINT: implicit by design
  Rational(long n) : num_(n) {}                // NOLINT
  Rational(long long n) : num_(n) {}           // NOLINT
  Rational(unsigned n) : num_(n) {}            // NOLINT
  Rational(unsigned long n) { set_wide(static_cast<Wide>(n), 1); }       // NOLINT
  Rational(unsigned long long n) { set_wide(static_cast<Wide>(n), 1); }  // NOLINT
  Rational(std::int64_t n, std::int64_t d) {
    if (d == 0) throw std::domain_error("zero denominator");
    set_wide(n, d);
  }
  explicit Rational(const mpq_class& q) { set_big(q); }
  explicit Rational(const mpz_class& z) { set_big(mpq_class(z)); }

  bool is_small() const noexcept { return !big_; }

  mpq_class to_mpq() const {
    if (big_) return *big_;
    mpq_class q;
    set_mpz(q.get_num(), num_);
    set_mpz(q.get_den(), den_);
    return q;
  }
  Integer numerator() const { return to_mpq().get_num(); }
  Integer denominator() const { return to_mpq().get_den(); }
  int sign() const noexcept { return big_ ? sgn(*big_) : (num_ > 0) - (num_ < 0); }

  std::string get_str() const {
    if (big_) return big_->get_str();
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    if (a.big_ || b.big_) return Rational(a.to_mpq() + b.to_mpq());
    if (a.den_ == 1 && b.den_ == 1) return from_wide(Wide(a.num_) + b.num_, 1);
    return from_wide(Wide(a.num_) * b.den_ + Wide(b.num_) * a.den_, Wide(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    if (a.big_ || b.big_) return Rational(a.to_mpq() - b.to_mpq());
    if (a.den_ == 1 && b.den_ == 1) return from_wide(Wide(a.num_) - b.num_, 1);
    return from_wide(Wide(a.num_) * b.den_ - Wide(b.num_) * a.den_, Wide(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    if (a.big_ || b.big_) return Rational(a.to_mpq() * b.to_mpq());
    if (a.num_ == 0 || b.num_ == 0) return Rational();
    if (a.den_ == 1 && b.den_ == 1) return from_wide(Wide(a.num_) * b.num_, 1);
    return from_wide(Wide(a.num_) * b.num_, Wide(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b == 0) throw std::domain_error("division by zero");
    if (a.big_ || b.big_) return Rational(a.to_mpq() / b.to_mpq());
    return from_wide(Wide(a.num_) * b.den_, Wide(a.den_) * b.num_);
  }
  Rational operator-() const {
    if (big_) return Rational(-*big_);
    return from_wide(-Wide(num_), den_);
  }
  Rational& operator+=(const Rational& b) { return *this = *this + b; }
  Rational& operator-=(const Rational& b) { return *this = *this - b; }
  Rational& operator*=(const Rational& b) { return *this = *this * b; }
  Rational& operator/=(const Rational& b) { return *this = *this / b; }

  friend bool operator==(const Rational& a, const Rational& b) {
    // canonical small values never hold a big part, so mixed cases differ
    if (!a.big_ && !b.big_) return a.num_ == b.num_ && a.den_ == b.den_;
    if (a.big_ && b.big_) return *a.big_ == *b.big_;
    return false;
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    if (a.big_ || b.big_) return a.to_mpq() < b.to_mpq();
    return Wide(a.num_) * b.den_ < Wide(b.num_) * a.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
  friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

  friend Rational abs(const Rational& r) { return r.sign() < 0 ? -r : r; }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.get_str(); }

 private:
  using Wide = __int128;

  static Wide gcd(Wide a, Wide b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    if (a <= Wide(UINT64_MAX) && b <= Wide(UINT64_MAX)) {
      std::uint64_t x = static_cast<std::uint64_t>(a), y = static_cast<std::uint64_t>(b);
      while (y != 0) {
        const std::uint64_t t = x % y;
        x = y;
        y = t;
      }
      return x;
    }
    while (b != 0) {
      const Wide t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static void set_mpz(mpz_class& z, std::int64_t v) {
    // mpz_set_si takes long, which is 64 bits on the supported platforms
    static_assert(sizeof(long) == 8, "64-bit long expected");
    z = static_cast<long>(v);
  }

  static mpz_class wide_to_mpz(Wide v) {
    const bool neg = v < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
    mpz_class hi = static_cast<unsigned long>(u >> 64);
    mpz_class lo = static_cast<unsigned long>(u & ~0UL);
    mpz_class out = (hi << 64) + lo;
    return neg ? mpz_class(-out) : out;
  }

  static Rational from_wide(Wide n, Wide d) {
    Rational r;
    r.set_wide(n, d);
    return r;
  }

  void set_wide(Wide n, Wide d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    if (n == 0) {
      num_ = 0;
      den_ = 1;
      big_.reset();
      return;
    }
    if (d != 1) {
      const Wide g = gcd(n, d);
      n /= g;
      d /= g;
    }
    constexpr Wide lo = INT64_MIN + Wide(1), hi = INT64_MAX;
    if (n >= lo && n <= hi && d <= hi) {
      num_ = static_cast<std::int64_t>(n);
      den_ = static_cast<std::int64_t>(d);
      big_.reset();
      return;
    }
    mpq_class q(wide_to_mpz(n), wide_to_mpz(d));
    q.canonicalize();
    set_big(q);
  }

  void set_big(mpq_class q) {
    q.canonicalize();
    if (q.get_num().fits_slong_p() && q.get_den().fits_slong_p() && q.get_num() != LONG_MIN) {
      num_ = q.get_num().get_si();
      den_ = q.get_den().get_si();
      big_.reset();
    } else {
      num_ = 0;
      den_ = 1;
      big_ = std::make_shared<const mpq_class>(std::move(q));
    }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
  std::shared_ptr<const mpq_class> big_;
};

inline Rational parse_rational(std::string_view text) {
  std::string s;
  for (char ch : text) {
    if (ch != ' ' && ch != '\t') s.push_back(ch);
  }
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  if (s.front() == '+') s.erase(s.begin());
  mpq_class r;
  if (r.set_str(s, 10) != 0) {
    throw std::invalid_argument("malformed rational literal '" + std::string(text) + "'");
  }
  if (r.get_den() == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
  return Rational(r);
}

/// n/d in canonical form.
inline Rational frac(long n, long d) { return Rational(static_cast<std::int64_t>(n), static_cast<std::int64_t>(d)); }

inline std::string to_string(const Rational& r) { return r.get_str(); }

inline Integer factorial(std::int64_t n) {
  Integer out = 1;
  for (std::int64_t i = 2; i <= n; ++i) out *= static_cast<long>(i);
  return out;
}

/// Generalized binomial coefficient top(top-1)...(top-k+1)/k! for any integer
/// top; zero when k < 0.
inline Rational binomial(std::int64_t top, std::int64_t k) {
  if (k < 0) return 0;
  // each partial product is itself a binomial coefficient, hence an integer
  Rational out = 1;
  for (std::int64_t t = 0; t < k; ++t) out = out * Rational(top - t) / Rational(t + 1);
  return out;
}

inline Rational power(const Rational& base, int exponent) {
  if (exponent < 0) {
    if (base == 0) throw std::domain_error("zero raised to a negative power");
    return power(1 / base, -exponent);
  }
  Rational out = 1;
  for (int i = 0; i < exponent; ++i) out *= base;
  return out;
}

}  // namespace rmc
