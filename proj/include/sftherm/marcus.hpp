/**
 * @file marcus.hpp
 * @brief Marcus operators R_n, Theta measures, convergence diagnostics,
 *        conditional expectations E_n and the rigidity experiment.
 *
 * R_n h(x) = nu_x(W^u_loc(x))^{-1} int h o sigma^n d nu_x. Because the
 * normalized leaf measures form a Markov chain on past states of Lc symbols,
 * R_n h(x) depends on x only through the state x_{-Ls+1} .. x_0 with
 * Ls = max(Lc, |window(h)|, 1 - first(h)); every sup and inf below is an exact
 * maximum over these finitely many states.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sftherm/error.hpp"
#include "sftherm/leafwise.hpp"
#include "sftherm/parallel.hpp"
#include "sftherm/potential.hpp"
#include "sftherm/sft_core.hpp"

namespace sftherm {

class MarcusOperator {
 public:
  MarcusOperator(const LeafwiseFamily& family, const FiniteRangePotential& h) : h_(h) {
    if (!(h.matrix() == family.matrix())) throw Error(ErrorCode::alphabet_mismatch, "observable over another shift");
    const Window hw = h.window();
    lc_ = family.past_dependence();
    ls_ = std::max({lc_, hw.length(), 1 - hw.first});
    const TransitionMatrix& a = family.matrix();
    states_ = admissible_words(a, ls_);
    for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i], static_cast<int>(i));

    std::map<std::vector<Symbol>, std::vector<double>> by_suffix;
    next_.resize(states_.size());
    prob_.resize(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
      const auto& s = states_[i];
      const std::vector<Symbol> suffix(s.end() - lc_, s.end());
      auto it = by_suffix.find(suffix);
      if (it == by_suffix.end()) {
        const PeriodicPoint z = PeriodicPoint::from_block(a, Word{1 - lc_, suffix});
        std::vector<double> p;
        const double tot = family.total(z);
        for (Symbol c : a.successors(s.back())) p.push_back(family.mass(z, Word{1, {c}}) / tot);
        it = by_suffix.emplace(suffix, std::move(p)).first;
      }
      prob_[i] = it->second;
      std::vector<Symbol> nxt(s.begin() + 1, s.end());
      nxt.push_back(0);
      for (Symbol c : a.successors(s.back())) {
        nxt.back() = c;
        next_[i].push_back(index_.at(nxt));
      }
    }
  }

  int state_length() const noexcept { return ls_; }
  const std::vector<std::vector<Symbol>>& states() const noexcept { return states_; }
  const FiniteRangePotential& observable() const noexcept { return h_; }

  int state_index(std::span<const Symbol> state) const {
    const auto it = index_.find(std::vector<Symbol>(state.begin(), state.end()));
    if (it == index_.end()) throw Error(ErrorCode::inadmissible_word, "not an admissible past state");
    return it->second;
  }
  int state_index(const PeriodicPoint& x) const { return state_index(x.window(1 - ls_, 0).symbols); }

  /// Calls f(n, values) for n = 0, 1, ..., n_max with values[i] = R_n h on
  /// state i; stops early when f returns false.
  template <class F>
  void sweep(int n_max, F&& f, unsigned threads = 1) const {
    const Window hw = h_.window();
    const std::size_t ns = states_.size();
    std::vector<double> g(ns);
    for (std::size_t i = 0; i < ns; ++i) g[i] = h_(std::span<const Symbol>(states_[i]).last(hw.length()));
    int j = 0;  // g = G_j
    for (int n = 0; n <= n_max; ++n) {
      const int target = n + hw.last;
      std::vector<double> values(ns);
      if (target < 0) {
        for (std::size_t i = 0; i < ns; ++i) {
          const auto sub = std::span<const Symbol>(states_[i]).subspan(
              static_cast<std::size_t>(n + hw.first + ls_ - 1), static_cast<std::size_t>(hw.length()));
          values[i] = h_(sub);
        }
      } else {
        while (j < target) {
          std::vector<double> next(ns);
          parallel_for(ns, threads, [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t k = 0; k < next_[i].size(); ++k) s += prob_[i][k] * g[static_cast<std::size_t>(next_[i][k])];
            next[i] = s;
          });
          g = std::move(next);
          ++j;
        }
        values = g;
      }
      if (!f(n, static_cast<const std::vector<double>&>(values))) return;
    }
  }

  std::vector<double> values(int n) const {
    std::vector<double> out;
    sweep(n, [&](int k, const std::vector<double>& v) {
      if (k == n) out = v;
      return true;
    });
    return out;
  }

  double apply(int n, const PeriodicPoint& x) const {
    return values(n)[static_cast<std::size_t>(state_index(x))];
  }

  /// Max over classes of states agreeing on their last k symbols of the
  /// spread of `values` within the class.
  double oscillation(const std::vector<double>& values, int k) const {
    if (k >= ls_) return 0.0;
    std::map<std::vector<Symbol>, std::pair<double, double>> range;
    for (std::size_t i = 0; i < states_.size(); ++i) {
      std::vector<Symbol> key(states_[i].end() - k, states_[i].end());
      auto [it, fresh] = range.try_emplace(std::move(key), values[i], values[i]);
      if (!fresh) {
        it->second.first = std::min(it->second.first, values[i]);
        it->second.second = std::max(it->second.second, values[i]);
      }
    }
    double osc = 0.0;
    for (const auto& [key, mm] : range) osc = std::max(osc, mm.second - mm.first);
    return osc;
  }

 private:
  FiniteRangePotential h_;
  int lc_ = 1;
  int ls_ = 1;
  std::vector<std::vector<Symbol>> states_;
  std::map<std::vector<Symbol>, int> index_;
  std::vector<std::vector<int>> next_;
  std::vector<std::vector<double>> prob_;
};

inline double apply_Rn(const LeafwiseFamily& family, const FiniteRangePotential& h, int n, const PeriodicPoint& x) {
  if (n < 0) throw Error(ErrorCode::invalid_argument, "R_n needs n >= 0");
  return MarcusOperator(family, h).apply(n, x);
}

/// Theta^m_{n,x}: atoms y^i of sigma^m(W^u_loc(x)) with weights
/// nu_{sigma^m x}(W^u_loc(y^i)) / nu_{sigma^m x}(sigma^m W^u_loc(x)).
struct ThetaMeasure {
  PeriodicPoint base;
  int n = 0;
  int m = 1;
  std::vector<PeriodicPoint> support;
  std::vector<Word> futures;
  std::vector<double> weights;
};

inline ThetaMeasure theta_measure(const LeafwiseFamily& family, const PeriodicPoint& x, int n, int m) {
  if (n < 0) throw Error(ErrorCode::invalid_argument, "theta_measure needs n >= 0");
  ThetaMeasure out{x, n, m, {}, {}, {}};
  const auto pieces = sigma_m_unstable_decomposition(family.matrix(), x, m);
  double total = 0.0;
  for (const auto& piece : pieces) {
    out.support.push_back(piece.representative);
    out.futures.push_back(piece.future);
    out.weights.push_back(family.extended_mass(x, m, piece.future));
    total += out.weights.back();
  }
  for (double& w : out.weights) w /= total;
  return out;
}

/// Theta(U) for U = C(a_0 .. a_l)_0: the weight of the atoms whose leaf meets U.
inline double theta_mass(const ThetaMeasure& theta, const Cylinder& u) {
  if (u.word.start != 0 || u.word.empty()) {
    throw Error(ErrorCode::invalid_argument, "U must be a cylinder C(a_0..a_l)_0");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < theta.support.size(); ++i)
    if (theta.support[i][0] == u.word.symbols.front()) s += theta.weights[i];
  return s;
}

struct AdaptednessReport {
  double inf_weight = 0.0;
  double c_u = 0.0;   // combinatorial hit bound
  double k_nu = 0.0;  // comparability constant of the leaf measures
  double bound = 0.0; // c_u / k_nu^2
};

inline AdaptednessReport adaptedness_check(const LeafwiseFamily& family, const std::vector<ThetaMeasure>& thetas,
                                           const Cylinder& u) {
  if (thetas.empty()) throw Error(ErrorCode::invalid_argument, "adaptedness_check needs at least one Theta measure");
  const auto mix = mixing_exponent(family.matrix());
  if (!mix) throw Error(ErrorCode::not_mixing, "adaptedness needs a mixing matrix");
  AdaptednessReport r;
  r.inf_weight = std::numeric_limits<double>::infinity();
  for (const auto& t : thetas) r.inf_weight = std::min(r.inf_weight, theta_mass(t, u));
  const PeriodicPoint& x = thetas.front().base;
  r.c_u = cylinder_hit_fraction(family.matrix(), x, *mix + 1, u).bound;
  r.k_nu = family.comparability_constant(*mix);
  r.bound = r.c_u / (r.k_nu * r.k_nu);
  return r;
}

struct ConvergenceRow {
  int n = 0;
  double inf = 0.0;
  double sup = 0.0;
  double gap = 0.0;
  double c_n = 0.0;
};

struct ObservableReport {
  std::string id;
  std::vector<ConvergenceRow> rows;
  double limit = 0.0;      // midpoint of the last [inf, sup]
  double reference = 0.0;  // integral of h against the equilibrium state
  double defect = 0.0;     // |limit - reference|
  std::optional<int> converged_at;
};

inline ObservableReport converge(const LeafwiseFamily& family, const FiniteRangePotential& h, double tol, int n_max,
                                 std::string id = {}, unsigned threads = 1) {
  if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be positive");
  if (n_max < 0) throw Error(ErrorCode::invalid_argument, "n_max must be nonnegative");
  ObservableReport rep;
  rep.id = std::move(id);
  const MarcusOperator op(family, h);
  op.sweep(
      n_max,
      [&](int n, const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        rep.rows.push_back(ConvergenceRow{n, *lo, *hi, *hi - *lo, *lo});
        if (*hi - *lo < tol) {
          rep.converged_at = n;
          return false;
        }
        return true;
      },
      threads);
  const auto& last = rep.rows.back();
  rep.limit = 0.5 * (last.inf + last.sup);
  rep.reference = family.gibbs().integral(h);
  rep.defect = std::abs(rep.limit - rep.reference);
  return rep;
}

/// int E_n h dm = sum over past states s at coordinates -n-Ls+1 .. -n of
/// m(s) R_n h(s).
inline double expectation_En(const GluedMeasure& m, const FiniteRangePotential& h, int n) {
  if (n < 0) throw Error(ErrorCode::invalid_argument, "E_n needs n >= 0");
  const MarcusOperator op(m.family(), h);
  const auto values = op.values(n);
  double s = 0.0;
  for (const auto& [state, p] : m.past().window(n, op.state_length()))
    s += p * values[static_cast<std::size_t>(op.state_index(state))];
  return s;
}

struct NamedMarginal {
  std::string id;
  PastMarginal marginal;
};

struct NamedObservable {
  std::string id;
  FiniteRangePotential h;
};

struct RigidityRow {
  std::string marginal;
  std::string observable;
  int n = 0;
  double value = 0.0;
  double reference = 0.0;
  double defect = 0.0;
  bool converged = false;
  bool pass = false;
};

struct RigidityReport {
  std::vector<ObservableReport> observables;
  std::vector<RigidityRow> rows;
  bool all_pass = true;
};

/// For every (marginal, observable) pair: |int E_n h dm - int h dmu| at
/// n = converged_at of the observable (n_max when it did not converge).
inline RigidityReport rigidity_experiment(const LeafwiseFamily& family, const std::vector<NamedMarginal>& marginals,
                                          const std::vector<NamedObservable>& observables, double tol, int n_max,
                                          unsigned threads = 1) {
  RigidityReport rep;
  rep.observables.resize(observables.size());
  parallel_for(observables.size(), threads, [&](std::size_t i) {
    rep.observables[i] = converge(family, observables[i].h, tol, n_max, observables[i].id);
  });
  const std::size_t no = observables.size();
  rep.rows.resize(marginals.size() * no);
  parallel_for(rep.rows.size(), threads, [&](std::size_t k) {
    const auto& mg = marginals[k / no];
    const auto& ob = observables[k % no];
    const auto& orep = rep.observables[k % no];
    const int n = orep.converged_at.value_or(n_max);
    const GluedMeasure m(mg.marginal, family, std::max(1, n + ob.h.window().last));
    RigidityRow row;
    row.marginal = mg.id;
    row.observable = ob.id;
    row.n = n;
    row.value = expectation_En(m, ob.h, n);
    row.reference = orep.reference;
    row.defect = std::abs(row.value - row.reference);
    row.converged = orep.converged_at.has_value();
    row.pass = row.converged && row.defect < tol;
    rep.rows[k] = std::move(row);
  });
  for (const auto& r : rep.rows) rep.all_pass = rep.all_pass && r.pass;
  return rep;
}

}  // namespace sftherm
