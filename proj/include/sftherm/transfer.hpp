/**
 * @file transfer.hpp
 * @brief Ruelle-Perron-Frobenius operator of a one-sided finite-range
 *        potential, its leading eigendata, the normalized potential and the
 *        resulting equilibrium state as an exact block-Markov measure.
 *
 * One-sided potentials read coordinates >= 1. A potential reading x_1..x_K
 * acts on functions of the first s = max(K-1, 1) coordinates, so the operator
 * is a square matrix over admissible s-blocks:
 *
 *   (L f)(u) = sum_{a : a u admissible} e^{phi(a u_1 .. u_{K-1})} f(a u_1 .. u_{s-1}).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "sftherm/error.hpp"
#include "sftherm/potential.hpp"
#include "sftherm/sft_core.hpp"

namespace sftherm {

struct BlockOperator {
  TransitionMatrix matrix;
  int block_length = 1;
  Window potential_window{1, 1};
  std::vector<std::vector<Symbol>> blocks;
  std::map<std::vector<Symbol>, int> index;
  std::vector<double> weights;  // row-major, weights[u * n + w]

  int size() const noexcept { return static_cast<int>(blocks.size()); }
  double operator()(int u, int w) const { return weights[static_cast<std::size_t>(u) * blocks.size() + w]; }

  int block_index(std::span<const Symbol> block) const {
    const auto it = index.find(std::vector<Symbol>(block.begin(), block.end()));
    return it == index.end() ? -1 : it->second;
  }

  std::vector<double> apply(const std::vector<double>& f) const {
    const std::size_t n = blocks.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      double s = 0.0;
      for (std::size_t w = 0; w < n; ++w) s += weights[u * n + w] * f[w];
      out[u] = s;
    }
    return out;
  }

  std::vector<double> apply_adjoint(const std::vector<double>& m) const {
    const std::size_t n = blocks.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t w = 0; w < n; ++w) out[w] += m[u] * weights[u * n + w];
    return out;
  }
};

inline BlockOperator build_operator(const FiniteRangePotential& phi_plus) {
  const Window pw = phi_plus.window();
  if (pw.first < 1) {
    throw Error(ErrorCode::invalid_argument, "build_operator needs a one-sided potential (window first >= 1)");
  }
  const TransitionMatrix& a = phi_plus.matrix();
  BlockOperator op;
  op.matrix = a;
  op.potential_window = Window{1, std::max(pw.last, 1)};
  const FiniteRangePotential phi = phi_plus.widened(op.potential_window);
  const int k = op.potential_window.last;
  const int s = std::max(k - 1, 1);
  op.block_length = s;
  op.blocks = admissible_words(a, s);
  if (op.blocks.empty()) throw Error(ErrorCode::invalid_argument, "empty block space");
  for (int i = 0; i < op.size(); ++i) op.index.emplace(op.blocks[i], i);
  const std::size_t n = op.blocks.size();
  op.weights.assign(n * n, 0.0);
  std::vector<Symbol> word(static_cast<std::size_t>(s) + 1);
  for (std::size_t u = 0; u < n; ++u) {
    const auto& ub = op.blocks[u];
    for (Symbol sym : a.predecessors(ub.front())) {
      word[0] = sym;
      std::copy(ub.begin(), ub.end(), word.begin() + 1);
      const int w = op.block_index(std::span<const Symbol>(word).first(static_cast<std::size_t>(s)));
      const double value = phi(std::span<const Symbol>(word).first(static_cast<std::size_t>(k)));
      op.weights[u * n + static_cast<std::size_t>(w)] += std::exp(value);
    }
  }
  return op;
}

struct SpectralData {
  double lambda = 0.0;
  double pressure = 0.0;
  int block_length = 1;
  std::vector<std::vector<Symbol>> blocks;
  std::vector<double> eigenfunction;  // L h = lambda h, <eigenmeasure, h> = 1
  std::vector<double> eigenmeasure;   // L* m = lambda m, sums to 1
  double gap = 0.0;                   // |lambda_2| / lambda, estimated by deflation
  double right_residual = 0.0;        // ||L h - lambda h||_inf / (lambda ||h||_inf)
  double left_residual = 0.0;         // ||L* m - lambda m||_1 / lambda
  long iterations = 0;
};

namespace detail {

struct PowerResult {
  double lambda = 0.0;
  std::vector<double> vector;
  long iterations = 0;
};

/// Power iteration from the all-ones vector, stopped by the Collatz-Wielandt
/// bracket min_i (Mv)_i/v_i <= lambda <= max_i (Mv)_i/v_i.
template <class Apply>
PowerResult power_iterate(std::size_t n, Apply apply, double tol, long max_iter) {
  std::vector<double> v(n, 1.0);
  for (long it = 1; it <= max_iter; ++it) {
    std::vector<double> y = apply(v);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(y[i] > 0.0)) throw Error(ErrorCode::non_convergence, "operator is not primitive");
      const double r = y[i] / v[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const double top = *std::max_element(y.begin(), y.end());
    for (double& x : y) x /= top;
    v = std::move(y);
    if (hi - lo <= tol * hi) return PowerResult{0.5 * (lo + hi), std::move(v), it};
  }
  throw Error(ErrorCode::non_convergence, "power iteration did not converge; input is probably not primitive");
}

}  // namespace detail

inline SpectralData leading_eigendata(const BlockOperator& op, double tol = 1e-13, long max_iter = 1'000'000) {
  const std::size_t n = static_cast<std::size_t>(op.size());
  const auto right = detail::power_iterate(n, [&](const std::vector<double>& v) { return op.apply(v); }, tol, max_iter);
  const auto left =
      detail::power_iterate(n, [&](const std::vector<double>& v) { return op.apply_adjoint(v); }, tol, max_iter);

  SpectralData sd;
  sd.lambda = right.lambda;
  sd.pressure = std::log(sd.lambda);
  sd.block_length = op.block_length;
  sd.blocks = op.blocks;
  sd.iterations = right.iterations + left.iterations;
  sd.eigenmeasure = left.vector;
  const double msum = std::accumulate(sd.eigenmeasure.begin(), sd.eigenmeasure.end(), 0.0);
  for (double& x : sd.eigenmeasure) x /= msum;
  sd.eigenfunction = right.vector;
  double pairing = 0.0;
  for (std::size_t i = 0; i < n; ++i) pairing += sd.eigenmeasure[i] * sd.eigenfunction[i];
  for (double& x : sd.eigenfunction) x /= pairing;

  const auto lh = op.apply(sd.eigenfunction);
  // <m, L h> / <m, h> with both vectors converged
  double rq = 0.0;
  for (std::size_t i = 0; i < n; ++i) rq += sd.eigenmeasure[i] * lh[i];
  sd.lambda = rq;
  sd.pressure = std::log(sd.lambda);
  const double hmax = *std::max_element(sd.eigenfunction.begin(), sd.eigenfunction.end());
  for (std::size_t i = 0; i < n; ++i)
    sd.right_residual = std::max(sd.right_residual, std::abs(lh[i] - sd.lambda * sd.eigenfunction[i]));
  sd.right_residual /= sd.lambda * hmax;
  const auto lm = op.apply_adjoint(sd.eigenmeasure);
  for (std::size_t i = 0; i < n; ++i) sd.left_residual += std::abs(lm[i] - sd.lambda * sd.eigenmeasure[i]);
  sd.left_residual /= sd.lambda;

  // Second eigenvalue modulus from the deflated operator L/lambda - h m^T.
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + static_cast<double>(i);
  auto deflate = [&](std::vector<double>& v) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += sd.eigenmeasure[i] * v[i];
    for (std::size_t i = 0; i < n; ++i) v[i] -= c * sd.eigenfunction[i];
  };
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s = std::max(s, std::abs(e));
    return s;
  };
  deflate(x);
  double log_growth = 0.0;
  int steps = 0;
  double current = norm(x);
  if (current > 0.0) {
    const double start = current;
    for (; steps < 400; ++steps) {
      x = op.apply(x);
      for (double& e : x) e /= sd.lambda;
      deflate(x);
      const double next = norm(x);
      if (next <= 1e-15 * start * std::exp(log_growth)) {
        log_growth = -std::numeric_limits<double>::infinity();
        ++steps;
        break;
      }
      log_growth += std::log(next / current);
      for (double& e : x) e /= next;
      current = 1.0;
    }
  }
  sd.gap = steps == 0 ? 0.0 : std::exp(log_growth / steps);
  return sd;
}

/// psi = phi^+ + log h - log h o sigma - log lambda, so that
/// sum_{sigma y = x} e^{psi(y)} = 1. Window [1, s+1].
inline FiniteRangePotential normalize(const FiniteRangePotential& phi_plus, const SpectralData& sd) {
  const TransitionMatrix& a = phi_plus.matrix();
  const int s = sd.block_length;
  const Window w{1, s + 1};
  std::map<std::vector<Symbol>, int> index;
  for (std::size_t i = 0; i < sd.blocks.size(); ++i) index.emplace(sd.blocks[i], static_cast<int>(i));
  auto h = [&](std::span<const Symbol> block) {
    return sd.eigenfunction[static_cast<std::size_t>(index.at(std::vector<Symbol>(block.begin(), block.end())))];
  };
  const double log_lambda = std::log(sd.lambda);
  const FiniteRangePotential phi = phi_plus.widened(phi_plus.window().united(w));
  return FiniteRangePotential::tabulate(a, phi.window(), [&](std::span<const Symbol> word) {
    const Word x{phi.window().first, std::vector<Symbol>(word.begin(), word.end())};
    return phi.at(x) + std::log(h(x.slice(1, s))) - std::log(h(x.slice(2, s + 1))) - log_lambda;
  });
}

/// Equilibrium state of a (possibly two-sided) finite-range potential.
///
/// The potential is reduced to phi^+ (coordinates >= 1), the block operator of
/// phi^+ supplies lambda = e^P, h and m, and the invariant measure is
/// mu[u] = m(u) h(u) on s-blocks with mu[a w] = e^{psi(a w)} mu[w] for words
/// of length >= s. transfer_function() is g = gamma + log h, so that
/// psi = phi - P + g - g o sigma.
class GibbsMeasure {
 public:
  explicit GibbsMeasure(const FiniteRangePotential& phi, double tol = 1e-13)
      : phi_(phi), reduction_(sinai_reduce(phi, Side::plus)) {
    if (!mixing_exponent(phi.matrix())) {
      throw Error(ErrorCode::not_mixing, "equilibrium states are built for mixing matrices only");
    }
    op_ = build_operator(reduction_.plus_side);
    spectral_ = leading_eigendata(op_, tol);
    psi_ = normalize(reduction_.plus_side, spectral_);
    const int s = spectral_.block_length;
    log_h_ = FiniteRangePotential::tabulate(phi.matrix(), Window{1, s}, [&](std::span<const Symbol> b) {
      return std::log(spectral_.eigenfunction[static_cast<std::size_t>(op_.block_index(b))]);
    });
    transfer_ = reduction_.transfer + log_h_;
    weights_.resize(spectral_.blocks.size());
    for (std::size_t i = 0; i < weights_.size(); ++i)
      weights_[i] = spectral_.eigenmeasure[i] * spectral_.eigenfunction[i];
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (double& w : weights_) w /= total;
  }

  const TransitionMatrix& matrix() const noexcept { return phi_.matrix(); }
  const FiniteRangePotential& potential() const noexcept { return phi_; }
  const CoboundaryCertificate& reduction() const noexcept { return reduction_; }
  const BlockOperator& op() const noexcept { return op_; }
  const SpectralData& spectral() const noexcept { return spectral_; }
  const FiniteRangePotential& normalized_potential() const noexcept { return psi_; }
  const FiniteRangePotential& log_eigenfunction() const noexcept { return log_h_; }
  const FiniteRangePotential& transfer_function() const noexcept { return transfer_; }
  double pressure() const noexcept { return spectral_.pressure; }
  int block_length() const noexcept { return spectral_.block_length; }
  double block_weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }

  /// mu(C(w)_j), independent of j by shift invariance; 0 for inadmissible words.
  double cylinder_mass(std::span<const Symbol> w) const {
    const TransitionMatrix& a = matrix();
    if (!a.admissible(w)) return 0.0;
    const int n = static_cast<int>(w.size());
    const int s = block_length();
    if (n == 0) return 1.0;
    if (n < s) {
      double total = 0.0;
      for_each_extension(a, std::vector<Symbol>(w.begin(), w.end()), s, [&](std::span<const Symbol> ext) {
        total += weights_[static_cast<std::size_t>(op_.block_index(ext))];
      });
      return total;
    }
    double mass = weights_[static_cast<std::size_t>(op_.block_index(w.subspan(static_cast<std::size_t>(n - s))))];
    double log_factor = 0.0;
    for (int i = 0; i + s < n; ++i) log_factor += psi_(w.subspan(static_cast<std::size_t>(i), static_cast<std::size_t>(s) + 1));
    return mass * std::exp(log_factor);
  }

  double cylinder_mass(const Cylinder& c) const { return cylinder_mass(c.word.symbols); }

  /// Exact integral of a finite-range function: sum over window words.
  double integral(const FiniteRangePotential& f) const {
    double s = 0.0;
    f.for_each([&](std::span<const Symbol> w, double v) { s += v * cylinder_mass(w); });
    return s;
  }

  /// Entropy of the stationary block chain, -sum_u mu[u] sum_a p(a|u) log p(a|u)
  /// with p(a|u) = e^{psi(a u)}.
  double entropy() const {
    const TransitionMatrix& a = matrix();
    const int s = block_length();
    double h = 0.0;
    std::vector<Symbol> word(static_cast<std::size_t>(s) + 1);
    for (int u = 0; u < op_.size(); ++u) {
      const auto& ub = op_.blocks[static_cast<std::size_t>(u)];
      for (Symbol sym : a.predecessors(ub.front())) {
        word[0] = sym;
        std::copy(ub.begin(), ub.end(), word.begin() + 1);
        const double lp = psi_(word);
        h -= weights_[static_cast<std::size_t>(u)] * std::exp(lp) * lp;
      }
    }
    return h;
  }

  /// K >= 1 with 1/K <= mu(C(x_1..x_n)) / exp(S_n psi(x)) <= K for every
  /// cylinder and every x in it.
  double gibbs_constant() const {
    const double pi_min = *std::min_element(weights_.begin(), weights_.end());
    return std::max(1.0 / pi_min, std::exp(-block_length() * psi_.min_value()));
  }

 private:
  FiniteRangePotential phi_;
  CoboundaryCertificate reduction_;
  BlockOperator op_;
  SpectralData spectral_;
  FiniteRangePotential psi_;
  FiniteRangePotential log_h_;
  FiniteRangePotential transfer_;
  std::vector<double> weights_;
};

struct VariationalCheck {
  double entropy = 0.0;
  double integral = 0.0;  // integral of the supplied potential
  double defect = 0.0;    // |P - h - integral|
};

inline VariationalCheck entropy_and_variational_check(const GibbsMeasure& g) {
  VariationalCheck out;
  out.entropy = g.entropy();
  out.integral = g.integral(g.potential());
  out.defect = std::abs(g.pressure() - out.entropy - out.integral);
  return out;
}

}  // namespace sftherm
