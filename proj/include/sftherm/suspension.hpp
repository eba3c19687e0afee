/**
 * @file suspension.hpp
 * @brief Suspension flows over Sigma_A: roofs, the flow s_t, flow potentials
 *        polynomial in the height, integrated potentials, the coboundary k
 *        and Monte-Carlo cross-checks of flow averages.
 *
 * A suspension point [x, u] has 0 <= u < R(x), with (x, R(x)) ~ (sigma x, 0).
 * Flow potentials are tables of polynomials in the height: on the fiber over
 * x, phi([x, u]) = sum_k c_k(x) u^k with each c_k a finite-range potential.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "sftherm/error.hpp"
#include "sftherm/parallel.hpp"
#include "sftherm/potential.hpp"
#include "sftherm/sft_core.hpp"
#include "sftherm/transfer.hpp"

namespace sftherm {

class RoofFunction {
 public:
  explicit RoofFunction(FiniteRangePotential r) : r_(std::move(r)) {
    if (!(r_.min_value() > 0.0)) throw Error(ErrorCode::non_positive_roof, "roof function must be strictly positive");
  }

  const FiniteRangePotential& potential() const noexcept { return r_; }
  const TransitionMatrix& matrix() const noexcept { return r_.matrix(); }
  double min_value() const { return r_.min_value(); }
  double max_value() const { return r_.max_value(); }
  double operator()(const PeriodicPoint& x) const { return r_.at(x); }

 private:
  FiniteRangePotential r_;
};

struct SuspensionPoint {
  PeriodicPoint base;
  double height = 0.0;
};

struct FlowStep {
  SuspensionPoint point;
  int laps = 0;  // signed number of roof crossings
};

/// s_t(p), also reporting how many times the orbit crossed the base.
inline FlowStep flow_with_laps(const RoofFunction& roof, const SuspensionPoint& p, double t) {
  PeriodicPoint x = p.base;
  double u = p.height + t;
  int laps = 0;
  for (double r = roof(x); u >= r; r = roof(x)) {
    u -= r;
    x = x.shifted(1);
    ++laps;
  }
  while (u < 0.0) {
    x = x.shifted(-1);
    u += roof(x);
    --laps;
  }
  return FlowStep{SuspensionPoint{std::move(x), u}, laps};
}

inline SuspensionPoint flow(const RoofFunction& roof, const SuspensionPoint& p, double t) {
  return flow_with_laps(roof, p, t).point;
}

/// The normalized representative of [x, u] for any real u.
inline SuspensionPoint make_suspension_point(const RoofFunction& roof, const PeriodicPoint& x, double u) {
  return flow(roof, SuspensionPoint{x, 0.0}, u);
}

class FlowPotential {
 public:
  /// coefficients[k] multiplies u^k; all share one window.
  explicit FlowPotential(std::vector<FiniteRangePotential> coefficients) : c_(std::move(coefficients)) {
    if (c_.empty()) throw Error(ErrorCode::invalid_argument, "flow potential needs at least one coefficient");
    Window w = c_.front().window();
    for (const auto& c : c_) {
      if (!(c.matrix() == c_.front().matrix())) throw Error(ErrorCode::alphabet_mismatch, "coefficients disagree");
      w = w.united(c.window());
    }
    for (auto& c : c_) c = c.widened(w);
  }

  static FlowPotential height_constant(FiniteRangePotential v) { return FlowPotential({std::move(v)}); }

  const TransitionMatrix& matrix() const noexcept { return c_.front().matrix(); }
  Window window() const noexcept { return c_.front().window(); }
  int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }
  const std::vector<FiniteRangePotential>& coefficients() const noexcept { return c_; }

  /// Value on the fiber over x at height u.
  double operator()(const PeriodicPoint& x, double u) const {
    double v = 0.0;
    for (int k = degree(); k >= 0; --k) v = v * u + c_[static_cast<std::size_t>(k)].at(x);
    return v;
  }

  /// int_a^b of the fiber polynomial over x (no wrapping).
  double fiber_integral(const PeriodicPoint& x, double a, double b) const {
    return fiber_integral(std::span<const Symbol>(x.window(window().first, window().last).symbols), a, b);
  }
  double fiber_integral(std::span<const Symbol> word, double a, double b) const {
    double pa = 0.0;
    double pb = 0.0;
    for (int k = degree(); k >= 0; --k) {
      const double c = c_[static_cast<std::size_t>(k)](word) / (k + 1);
      pa = pa * a + c;
      pb = pb * b + c;
    }
    return pb * b - pa * a;
  }

  friend FlowPotential operator+(const FlowPotential& f, const FlowPotential& g) {
    std::vector<FiniteRangePotential> out;
    const std::size_t n = std::max(f.c_.size(), g.c_.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (k < f.c_.size() && k < g.c_.size()) out.push_back(f.c_[k] + g.c_[k]);
      else out.push_back(k < f.c_.size() ? f.c_[k] : g.c_[k]);
    }
    return FlowPotential(std::move(out));
  }

  FlowPotential scaled(double a) const {
    std::vector<FiniteRangePotential> out;
    for (const auto& c : c_) out.push_back(c.scaled(a));
    return FlowPotential(std::move(out));
  }

 private:
  std::vector<FiniteRangePotential> c_;
};

/// phi~(x) = int_0^{R(x)} phi([x, u]) du, exact; window is the union of the
/// flow potential's and the roof's.
inline FiniteRangePotential integrate_flow_potential(const FlowPotential& phi, const RoofFunction& roof) {
  if (!(phi.matrix() == roof.matrix())) throw Error(ErrorCode::alphabet_mismatch, "roof and potential disagree");
  const Window w = phi.window().united(roof.potential().window());
  return FiniteRangePotential::tabulate(phi.matrix(), w, [&](std::span<const Symbol> word) {
    const Word x{w.first, std::vector<Symbol>(word.begin(), word.end())};
    return phi.fiber_integral(x.slice(phi.window().first, phi.window().last), 0.0, roof.potential().at(x));
  });
}

/// Oriented int_0^t phi(s_tau p) d tau, exact lap by lap.
inline double flow_integral(const FlowPotential& phi, const RoofFunction& roof, const SuspensionPoint& p, double t) {
  if (t < 0.0) {
    const SuspensionPoint q = flow(roof, p, t);
    return -flow_integral(phi, roof, q, -t);
  }
  PeriodicPoint x = p.base;
  double u = p.height;
  double left = t;
  double total = 0.0;
  while (left > 0.0) {
    const double r = roof(x);
    const double step = std::min(left, r - u);
    total += phi.fiber_integral(x, u, u + step);
    left -= step;
    if (left > 0.0 || u + step >= r) {
      x = x.shifted(1);
      u = 0.0;
    } else {
      u += step;
    }
  }
  return total;
}

/// Time-one potential phi^1(p) = int_0^1 phi(s_t p) dt.
inline double time_one_potential(const FlowPotential& phi, const RoofFunction& roof, const SuspensionPoint& p) {
  return flow_integral(phi, roof, p, 1.0);
}

/// Data of the identity psi~ - phi~ = k - k o sigma, where v = v^+ is the
/// transfer function of the roof's one-sided reduction R^+ = R + v - v o sigma,
///   k(z)    = int_{-v(z)}^0 phi([z, u]) du,
///   psi~(z) = int_{-v(z)}^{R^+(z) - v(z)} phi([z, u]) du,
/// heights outside [0, R(z)) being read along the flow orbit of [z, 0].
struct FlowCoboundary {
  FiniteRangePotential v_plus;
  FiniteRangePotential roof_plus;
  FiniteRangePotential phi_tilde;
  FiniteRangePotential psi_tilde;
  FiniteRangePotential k;
};

inline FlowCoboundary coboundary_k(const FlowPotential& phi, const RoofFunction& roof) {
  const TransitionMatrix& a = phi.matrix();
  const CoboundaryCertificate red = sinai_reduce(roof.potential(), Side::plus);
  FlowCoboundary out{red.transfer, red.plus_side, integrate_flow_potential(phi, roof), {}, {}};
  const double rmin = roof.min_value();
  const double vmax = std::max(std::abs(out.v_plus.min_value()), std::abs(out.v_plus.max_value()));
  const double span_max = std::max(std::abs(out.roof_plus.max_value()), std::abs(out.roof_plus.min_value())) + vmax;
  const int back = static_cast<int>(std::ceil(vmax / rmin)) + 1;
  const int fwd = static_cast<int>(std::ceil(span_max / rmin)) + 1;
  const Window base = phi.window().united(roof.potential().window());
  const Window kw = out.v_plus.window().united(base.shifted(-back)).united(base);
  const Window pw = kw.united(out.roof_plus.window()).united(base.shifted(fwd));

  auto integral_from_zero = [&](const Word& block, double t) {
    const PeriodicPoint z = PeriodicPoint::from_block(a, block);
    return flow_integral(phi, roof, SuspensionPoint{z, 0.0}, t);
  };
  out.k = FiniteRangePotential::tabulate(a, kw, [&](std::span<const Symbol> w) {
    const Word block{kw.first, std::vector<Symbol>(w.begin(), w.end())};
    return -integral_from_zero(block, -out.v_plus.at(block));
  });
  out.psi_tilde = FiniteRangePotential::tabulate(a, pw, [&](std::span<const Symbol> w) {
    const Word block{pw.first, std::vector<Symbol>(w.begin(), w.end())};
    const double v = out.v_plus.at(block);
    return integral_from_zero(block, out.roof_plus.at(block) - v) - integral_from_zero(block, -v);
  });
  return out;
}

/// max |psi~ - phi~ - k + k o sigma| over periodic points of period <= max_period.
inline double coboundary_residual(const FlowCoboundary& c, int max_period) {
  double r = 0.0;
  for_each_periodic_point(c.k.matrix(), max_period, [&](const PeriodicPoint& x) {
    r = std::max(r, std::abs(c.psi_tilde.at(x) - c.phi_tilde.at(x) - c.k.at(x) + c.k.at(x, 1)));
  });
  return r;
}

struct BirkhoffResult {
  double flow_average = 0.0;
  double reference = 0.0;  // int phi~ dmu / int R dmu
  double defect = 0.0;
  double standard_error = 0.0;
  std::vector<double> orbit_averages;
};

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Time averages of phi over n_orbits flow orbits of length `horizon`, started
/// at height 0 over mu-distributed base points; orbit i draws from the
/// generator seeded with derive_seed(seed, i).
inline BirkhoffResult birkhoff_cross_check(const FlowPotential& phi, const RoofFunction& roof, const GibbsMeasure& mu,
                                           double horizon, int n_orbits, std::uint64_t seed, unsigned threads = 1) {
  if (horizon < roof.max_value()) {
    throw Error(ErrorCode::invalid_argument, "horizon shorter than the largest roof value");
  }
  if (n_orbits < 2) throw Error(ErrorCode::invalid_argument, "need at least two orbits");
  const TransitionMatrix& a = mu.matrix();
  const Window base = phi.window().united(roof.potential().window());
  const int s = mu.block_length();
  const int lo = std::min(base.first, 0);
  const int init_len = std::max(1 - lo, s);
  const int steps = static_cast<int>(std::ceil(horizon / roof.min_value())) + std::max(base.last, 0) + 2;

  std::vector<std::vector<Symbol>> starts;
  std::vector<double> cdf;
  double acc = 0.0;
  for_each_word(a, init_len, [&](std::span<const Symbol> w) {
    acc += mu.cylinder_mass(w);
    starts.emplace_back(w.begin(), w.end());
    cdf.push_back(acc);
  });
  // forward conditionals given the last s symbols
  std::map<std::vector<Symbol>, std::vector<std::pair<Symbol, double>>> forward;
  for_each_word(a, s, [&](std::span<const Symbol> w) {
    const double mw = mu.cylinder_mass(w);
    auto& row = forward[std::vector<Symbol>(w.begin(), w.end())];
    std::vector<Symbol> ext(w.begin(), w.end());
    ext.push_back(0);
    double c = 0.0;
    for (Symbol b : a.successors(w.back())) {
      ext.back() = b;
      c += mu.cylinder_mass(ext) / mw;
      row.emplace_back(b, c);
    }
  });

  BirkhoffResult out;
  out.orbit_averages.resize(static_cast<std::size_t>(n_orbits));
  parallel_for(static_cast<std::size_t>(n_orbits), threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    const double r0 = detail::unit_uniform(rng) * acc;
    const auto pos = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r0) - cdf.begin()), starts.size() - 1);
    std::vector<Symbol> word = starts[pos];
    for (int k = 0; k < steps; ++k) {
      const auto& row = forward.at(std::vector<Symbol>(word.end() - s, word.end()));
      const double r = detail::unit_uniform(rng) * row.back().second;
      auto it = std::find_if(row.begin(), row.end(), [&](const auto& e) { return r < e.second; });
      if (it == row.end()) --it;
      word.push_back(it->first);
    }
    const PeriodicPoint x = PeriodicPoint::from_block(a, Word{1 - init_len, std::move(word)});
    out.orbit_averages[i] = flow_integral(phi, roof, SuspensionPoint{x, 0.0}, horizon) / horizon;
  });

  double mean = 0.0;
  for (double v : out.orbit_averages) mean += v;
  mean /= n_orbits;
  double var = 0.0;
  for (double v : out.orbit_averages) var += (v - mean) * (v - mean);
  var /= (n_orbits - 1);
  out.flow_average = mean;
  out.standard_error = std::sqrt(var / n_orbits);
  out.reference = mu.integral(integrate_flow_potential(phi, roof)) / mu.integral(roof.potential());
  out.defect = std::abs(out.flow_average - out.reference);
  return out;
}

}  // namespace sftherm
