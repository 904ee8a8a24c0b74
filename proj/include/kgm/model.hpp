#pragma once

// Physical constants, the nonlinearity family and the admissibility checks
// that decide which existence route (Nehari minimization or mountain pass)
// applies to a given model.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "kgm/errors.hpp"

namespace kgm {

struct PhysParams {
  double m = 1.0;
  double omega = 0.5;
  double q = 0.5;
  int ell = 1;
  double mu = 1.0;

  double mass_gap() const { return m * m - omega * omega; }
};

/// Throws ConfigError unless 0 < omega^2 < m^2 and ell != 0.
inline void validate(const PhysParams& p) {
  if (!(p.m > 0.0) || !std::isfinite(p.m))
    throw ConfigError("phys.m must be a positive finite number");
  if (!std::isfinite(p.omega) || !std::isfinite(p.q) || !std::isfinite(p.mu))
    throw ConfigError("physical parameters must be finite");
  if (!(p.omega * p.omega > 0.0 && p.omega * p.omega < p.m * p.m))
    throw ConfigError("standing assumption 0<omega^2<m^2 violated (omega=" +
                      std::to_string(p.omega) + ", m=" + std::to_string(p.m) + ")");
  if (p.ell == 0) throw ConfigError("vortex winding ell must be a nonzero integer");
  if (p.q < 0.0) throw ConfigError("coupling q must be nonnegative");
}

/// f(s) = sum_k c_k |s|^(p_k - 2) s, F(s) = sum_k c_k |s|^p_k / p_k.
class Nonlinearity {
 public:
  struct Term {
    double coeff;
    double exponent;
  };

  Nonlinearity() = default;

  static Nonlinearity pure_power(double p) { return Nonlinearity({{1.0, p}}); }

  /// sigma defaults to the smallest exponent, which is where (sigma-1) f s <= f' s^2 is tight.
  explicit Nonlinearity(std::vector<Term> terms, double sigma = 0.0) : terms_(std::move(terms)) {
    if (terms_.empty()) throw ConfigError("nonlinearity needs at least one term");
    bool any_positive = false;
    for (const auto& t : terms_) {
      if (!(t.exponent > 2.0 && t.exponent < 6.0))
        throw ConfigError("nonlinearity exponents must lie in (2,6)");
      if (t.coeff < 0.0) throw ConfigError("nonlinearity coefficients must be nonnegative");
      any_positive = any_positive || t.coeff > 0.0;
    }
    if (!any_positive) throw ConfigError("nonlinearity needs a positive coefficient");
    sigma_ = sigma > 0.0 ? sigma : min_exponent();
    if (!(sigma_ > 2.0)) throw ConfigError("declared sigma must exceed 2");
  }

  const std::vector<Term>& terms() const { return terms_; }
  double sigma() const { return sigma_; }

  double min_exponent() const {
    double p = std::numeric_limits<double>::infinity();
    for (const auto& t : terms_)
      if (t.coeff > 0.0) p = std::min(p, t.exponent);
    return p;
  }
  double max_exponent() const {
    double p = 0.0;
    for (const auto& t : terms_)
      if (t.coeff > 0.0) p = std::max(p, t.exponent);
    return p;
  }
  bool is_pure_power() const { return terms_.size() == 1; }

  double f(double s) const {
    const double a = std::abs(s);
    double out = 0.0;
    for (const auto& t : terms_) out += t.coeff * std::pow(a, t.exponent - 2.0) * s;
    return out;
  }
  double F(double s) const {
    const double a = std::abs(s);
    double out = 0.0;
    for (const auto& t : terms_) out += t.coeff * std::pow(a, t.exponent) / t.exponent;
    return out;
  }
  double df(double s) const {
    const double a = std::abs(s);
    double out = 0.0;
    for (const auto& t : terms_) out += t.coeff * (t.exponent - 1.0) * std::pow(a, t.exponent - 2.0);
    return out;
  }

 private:
  std::vector<Term> terms_{{1.0, 3.0}};
  double sigma_ = 3.0;
};

inline double f_eval(const Nonlinearity& n, double s) { return n.f(s); }
inline double F_eval(const Nonlinearity& n, double s) { return n.F(s); }
inline double dsf_eval(const Nonlinearity& n, double s) { return n.df(s); }

enum class Route { NehariMinimization, MountainPass, None };

inline std::string route_name(Route r) {
  switch (r) {
    case Route::NehariMinimization: return "theorem1-nehari";
    case Route::MountainPass: return "theorem2-mountain-pass";
    case Route::None: return "none";
  }
  return "none";
}

struct HypothesisCheck {
  bool pass = false;
  double violation = 0.0;  // worst sampled violation, 0 when pass
};

struct AssumptionReport {
  HypothesisCheck growth;        // F1
  HypothesisCheck superlinear;   // F2
  HypothesisCheck positivity;    // F3
  HypothesisCheck sigma_mono;    // F4
  HypothesisCheck cubic_mono;    // F5
  double admissibility_value = 0.0;  // left side of the (m, omega, sigma) condition
  bool admissible = false;
  double nehari_certificate = 0.0;   // second-derivative coefficient
  double bound_certificate = 0.0;    // lower-bound coefficient
  bool nehari_route_ok = false;
  bool mountain_pass_route_ok = false;
  Route route = Route::None;
};

/// Lower-bound coefficients of the Nehari second-derivative estimate and of
/// the energy bound on the Nehari set. Both must be positive for the
/// minimization route.
inline std::pair<double, double> energy_coefficient_certificates(const PhysParams& p, double sigma) {
  const double m2 = p.m * p.m, w2 = p.omega * p.omega;
  if (sigma >= 4.0) {
    const double c = (sigma - 2.0) * (m2 - w2);
    return {c, c};
  }
  const double nehari = (sigma - 2.0) * m2 - (sigma * sigma - 4.0 * sigma + 8.0) / 4.0 * w2;
  const double bound = (sigma - 2.0) * m2 - sigma * sigma / 8.0 * w2;
  return {nehari, bound};
}

/// Left side of the admissibility condition; for sigma >= 4 the condition is m > omega.
inline double admissibility_value(const PhysParams& p, double sigma) {
  if (sigma >= 4.0) return p.m - std::abs(p.omega);
  return (sigma - 2.0) * p.m * p.m - (sigma * sigma - 4.0 * sigma + 8.0) / 4.0 * p.omega * p.omega;
}

/// 61 log-spaced magnitudes in [1e-6, 1e3], both signs.
inline std::vector<double> hypothesis_samples() {
  std::vector<double> s;
  constexpr int n = 61;
  for (int k = 0; k < n; ++k) s.push_back(std::pow(10.0, -6.0 + 9.0 * k / (n - 1)));
  return s;
}

inline AssumptionReport check_assumptions(const Nonlinearity& n, const PhysParams& p) {
  AssumptionReport rep;
  const auto mags = hypothesis_samples();
  const double sigma = n.sigma();
  const double pmax = n.max_exponent();
  double acoef = 0.0;
  for (const auto& t : n.terms()) acoef += t.coeff;

  auto worst = [](HypothesisCheck& h, double v) { h.violation = std::max(h.violation, v); };
  constexpr double rel = 1e-12;

  for (double sign : {1.0, -1.0}) {
    double prev_ratio_small = -1.0;
    double prev_cubic = 0.0;
    bool first = true;
    for (double a : mags) {
      const double s = sign * a;
      const double fs = n.f(s), Fs = n.F(s), dfs = n.df(s);
      // F1: |f(s)| <= a (1 + |s|^{p-1})
      const double bound = acoef * (1.0 + std::pow(a, pmax - 1.0));
      worst(rep.growth, (std::abs(fs) - bound) / bound - rel);
      // F2: |f(s)/s| must shrink as |s| -> 0 (samples are increasing in |s|)
      const double ratio = std::abs(fs / s);
      if (a <= 1e-2) {
        if (prev_ratio_small >= 0.0) worst(rep.superlinear, (prev_ratio_small - ratio) / std::max(ratio, 1e-300) - rel);
        prev_ratio_small = ratio;
      }
      // F3
      if (!(Fs > 0.0)) worst(rep.positivity, Fs <= 0.0 ? 1.0 : 0.0);
      // F4: (sigma-1) f s <= f' s^2
      const double lhs = (sigma - 1.0) * fs * s, rhs = dfs * s * s;
      worst(rep.sigma_mono, (lhs - rhs) / std::max(std::abs(rhs), 1e-300) - rel);
      // F5: f(s)/|s|^3 nondecreasing on each half line (sign-aware ordering)
      const double cubic = fs / (a * a * a);
      if (!first) {
        // moving away from 0 on the positive half line means s increases;
        // on the negative half line s decreases, so the ratio must not increase.
        const double drop = sign > 0 ? prev_cubic - cubic : cubic - prev_cubic;
        worst(rep.cubic_mono, drop / std::max(std::abs(cubic), 1e-300) - rel);
      }
      prev_cubic = cubic;
      first = false;
    }
  }
  auto settle = [](HypothesisCheck& h) {
    h.violation = std::max(0.0, h.violation);
    h.pass = h.violation == 0.0;
  };
  settle(rep.growth);
  settle(rep.superlinear);
  settle(rep.positivity);
  settle(rep.sigma_mono);
  settle(rep.cubic_mono);
  rep.superlinear.pass = rep.superlinear.pass && n.min_exponent() > 2.0;

  rep.admissibility_value = admissibility_value(p, sigma);
  rep.admissible = rep.admissibility_value > 0.0 && sigma > 2.0;
  const auto [cn, cb] = energy_coefficient_certificates(p, sigma);
  rep.nehari_certificate = cn;
  rep.bound_certificate = cb;

  const bool base = rep.growth.pass && rep.superlinear.pass && rep.positivity.pass;
  rep.nehari_route_ok = base && rep.sigma_mono.pass && rep.admissible && cn > 0.0 && cb > 0.0;
  rep.mountain_pass_route_ok = base && rep.cubic_mono.pass;
  if (rep.nehari_route_ok)
    rep.route = Route::NehariMinimization;
  else if (rep.mountain_pass_route_ok)
    rep.route = Route::MountainPass;
  return rep;
}

}  // namespace kgm
