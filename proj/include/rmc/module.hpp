#pragma once

// Finite-rank H-modules: D(i) acts by a matrix for i up to a bound.

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmc/rational.hpp"
#include "rmc/series.hpp"

namespace rmc {

/// Column j holds the image of basis vector j.
using Matrix = std::vector<std::vector<Rational>>;

inline Matrix identity_matrix(std::size_t n) {
  Matrix m(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1;
  return m;
}

inline Matrix zero_matrix(std::size_t n) { return Matrix(n, std::vector<Rational>(n, Rational(0))); }

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size();
  Matrix out = zero_matrix(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (a[i][k] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i][j] += a[i][k] * b[k][j];
    }
  return out;
}

class ModuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HModule {
 public:
  /// `action[i]` is the matrix of D(i); beyond the last one D(i) is zero when
  /// `nilpotent_beyond` is set, and unknown otherwise.
  HModule(std::string id, std::vector<std::string> basis, std::vector<Matrix> action, bool nilpotent_beyond = true)
      : id_(std::move(id)), basis_(std::move(basis)), action_(std::move(action)), nilpotent_(nilpotent_beyond) {
    validate();
    zero_ = zero_matrix(rank());
  }

  /// H acts through the counit: D(0) = 1, D(i) = 0 otherwise.
  static HModule trivial(std::string id, std::vector<std::string> basis) {
    const std::size_t n = basis.size();
    return HModule(std::move(id), std::move(basis), {identity_matrix(n)}, true);
  }

  const std::string& id() const noexcept { return id_; }
  const std::vector<std::string>& basis() const noexcept { return basis_; }
  std::size_t rank() const noexcept { return basis_.size(); }
  std::size_t bound() const noexcept { return action_.size() - 1; }
  bool nilpotent_beyond_bound() const noexcept { return nilpotent_; }
  ModuleRef ref() const { return {id_, rank()}; }

  std::size_t basis_index(const std::string& name) const {
    for (std::size_t i = 0; i < basis_.size(); ++i) {
      if (basis_[i] == name || id_ + "." + basis_[i] == name) return i;
    }
    throw ModuleError("module " + id_ + " has no basis vector '" + name + "'");
  }

  bool knows(std::size_t i) const { return i <= bound() || nilpotent_; }

  const Matrix& action(std::size_t i) const {
    if (i <= bound()) return action_[i];
    if (!nilpotent_) throw ModuleError("module " + id_ + ": D(" + std::to_string(i) + ") beyond the declared bound");
    return zero_;
  }

  /// Image of basis vector j under D(i), as coefficients.
  std::vector<Rational> image(std::size_t i, std::size_t j) const {
    const Matrix& m = action(i);
    std::vector<Rational> out(rank());
    for (std::size_t r = 0; r < rank(); ++r) out[r] = m[r][j];
    return out;
  }

 private:
  void validate() const {
    const std::size_t n = rank();
    if (action_.empty()) throw ModuleError("module " + id_ + ": no action matrices");
    for (const auto& m : action_) {
      if (m.size() != n) throw ModuleError("module " + id_ + ": action matrix has wrong size");
      for (const auto& row : m) {
        if (row.size() != n) throw ModuleError("module " + id_ + ": action matrix has wrong size");
      }
    }
    if (action_[0] != identity_matrix(n)) throw ModuleError("module " + id_ + ": D(0) must act as the identity");
    const std::size_t b = bound();
    for (std::size_t i = 1; i <= b; ++i) {
      for (std::size_t j = 1; i + j <= 2 * b; ++j) {
        if (j > b) break;
        Matrix want;
        if (i + j <= b) {
          want = action_[i + j];
          const Rational c = binomial(static_cast<std::int64_t>(i + j), static_cast<std::int64_t>(i));
          for (auto& row : want)
            for (auto& x : row) x *= c;
        } else if (nilpotent_) {
          want = zero_matrix(n);
        } else {
          continue;
        }
        if (mat_mul(action_[i], action_[j]) != want) {
          throw ModuleError("module " + id_ + ": D(" + std::to_string(i) + ")D(" + std::to_string(j) +
                            ") violates the divided-power product rule");
        }
      }
    }
  }

  std::string id_;
  std::vector<std::string> basis_;
  std::vector<Matrix> action_;
  bool nilpotent_;
  Matrix zero_;
};

using ModulePtr = std::shared_ptr<const HModule>;

/// The span of u^0..u^(n-1) in Q[u] with D(i) u^m = binom(m,i) u^(m-i).
/// It is a submodule; the quotient Q[u]/(u^n) would not be.
inline ModulePtr truncated_polynomials(const std::string& id, std::size_t n) {
  std::vector<std::string> basis;
  for (std::size_t m = 0; m < n; ++m) basis.push_back("u^" + std::to_string(m));
  std::vector<Matrix> action;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix a = zero_matrix(n);
    for (std::size_t m = i; m < n; ++m) {
      a[m - i][m] = binomial(static_cast<std::int64_t>(m), static_cast<std::int64_t>(i));
    }
    action.push_back(std::move(a));
  }
  return std::make_shared<const HModule>(id, std::move(basis), std::move(action), true);
}

/// Q[u] in degrees <= d, one shared instance per d.
inline ModulePtr polynomials_up_to(std::size_t d) {
  static std::mutex mu;
  static std::map<std::size_t, ModulePtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it == cache.end()) it = cache.emplace(d, truncated_polynomials("Q[u]<=" + std::to_string(d), d + 1)).first;
  return it->second;
}

inline ModulePtr scalars_module() { return std::make_shared<const HModule>(HModule::trivial("R", {"1"})); }

/// Applies D(i) of the coefficient module to the basis part of a series.
inline SingularSeries act_on_values(const HModule& m, std::size_t i, const SingularSeries& s) {
  if (s.module().id != m.id()) throw ModuleError("series is not valued in module " + m.id());
  SingularSeries out(s.variables(), s.module(), s.window());
  out.reliability() = s.reliability();
  const Matrix& a = m.action(i);
  for (const auto& [k, c] : s.terms()) {
    for (std::size_t r = 0; r < m.rank(); ++r) {
      if (a[r][k.basis] == 0) continue;
      TermKey kk = k;
      kk.basis = r;
      out.add_key(kk, c * a[r][k.basis]);
    }
  }
  return out;
}

}  // namespace rmc
