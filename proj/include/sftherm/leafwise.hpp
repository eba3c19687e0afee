/**
 * @file leafwise.hpp
 * @brief Leafwise measures nu^u_z on local unstable sets, their
 *        quasi-invariance, past marginals, and glued test measures.
 *
 * For a potential phi with window [f, l] put
 *
 *   Q(w) = sum_{k=1}^{l-1} phi(sigma^{-k} w),     F = Q - g,
 *
 * where g is the composite transfer function of the equilibrium state
 * (psi = phi - P + g - g o sigma). The Delta-modified leaf measure on
 * W^u_loc(z) gives the future cylinder [b] (coordinates 1..n) the mass
 *
 *   nu_z[b] = e^{-Q(z)} sum_{b' extends b} e^{F(z_{<=0} b')} mu[b'],
 *
 * the sum running over extensions long enough for F to be read. The factor
 * e^{-Q(z)} is the documented normalization: it makes nu_z depend on z only
 * through finitely many coordinates and turns the pushforward under sigma
 * into multiplication by e^{phi(z) - P}.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sftherm/error.hpp"
#include "sftherm/potential.hpp"
#include "sftherm/sft_core.hpp"
#include "sftherm/transfer.hpp"

namespace sftherm {

/// Masses of nu_z on every future word of length 1..depth.
struct LeafMeasure {
  PeriodicPoint base;
  int depth = 0;
  double total = 0.0;
  std::map<std::vector<Symbol>, double> masses;

  double mass(const std::vector<Symbol>& future) const {
    if (future.empty()) return total;
    const auto it = masses.find(future);
    return it == masses.end() ? 0.0 : it->second;
  }
};

class LeafwiseFamily {
 public:
  explicit LeafwiseFamily(const FiniteRangePotential& phi, double tol = 1e-13)
      : LeafwiseFamily(std::make_shared<const GibbsMeasure>(phi, tol)) {}

  explicit LeafwiseFamily(std::shared_ptr<const GibbsMeasure> gibbs)
      : gibbs_(std::move(gibbs)), memo_(std::make_shared<Memo>()) {
    const FiniteRangePotential& phi = gibbs_->potential();
    const Window w = phi.window();
    const TransitionMatrix& a = phi.matrix();
    if (w.last <= 1) {
      q_ = FiniteRangePotential::constant(a, 0.0, Window{0, 0});
    } else {
      const Window qw{w.first - (w.last - 1), w.last - 1};
      q_ = FiniteRangePotential::tabulate(a, qw, [&](std::span<const Symbol> s) {
        const Word x{qw.first, std::vector<Symbol>(s.begin(), s.end())};
        double v = 0.0;
        for (int k = 1; k <= w.last - 1; ++k) v += phi.at(x, -k);
        return v;
      });
    }
    f_ = q_ - gibbs_->transfer_function();
    past_dependence_ = std::max(1, 1 - f_.window().first);
    future_depth_ = std::max(1, f_.window().last);
  }

  const GibbsMeasure& gibbs() const noexcept { return *gibbs_; }
  std::shared_ptr<const GibbsMeasure> gibbs_ptr() const noexcept { return gibbs_; }
  const TransitionMatrix& matrix() const noexcept { return gibbs_->matrix(); }
  const FiniteRangePotential& potential() const noexcept { return gibbs_->potential(); }
  double pressure() const noexcept { return gibbs_->pressure(); }

  /// Q, the log of the Delta normalizer.
  const FiniteRangePotential& past_interaction() const noexcept { return q_; }
  /// F = Q - g, the leaf density against mu.
  const FiniteRangePotential& leaf_density() const noexcept { return f_; }
  /// Number Lc of past symbols (coordinates -Lc+1..0) the normalized leaf
  /// measure depends on.
  int past_dependence() const noexcept { return past_dependence_; }
  /// Future coordinates read by the leaf density.
  int future_depth() const noexcept { return future_depth_; }

  /// Delta_{x,y}(y') = prod_{k>=1} e^{phi(sigma^-k x.y') - phi(sigma^-k x.y)};
  /// futures start at coordinate 1 and are continued by reference cycles.
  double delta_ratio(const PeriodicPoint& x_past, const Word& y, const Word& y_prime) const {
    const TransitionMatrix& a = matrix();
    check_future(x_past, y);
    check_future(x_past, y_prime);
    const PeriodicPoint py = x_past.splice_future(a, 0, y.symbols);
    const PeriodicPoint pq = x_past.splice_future(a, 0, y_prime.symbols);
    const FiniteRangePotential& phi = potential();
    double log_ratio = 0.0;
    for (int k = 1; k <= phi.window().last - 1; ++k) log_ratio += phi.at(pq, -k) - phi.at(py, -k);
    return std::exp(log_ratio);
  }

  /// nu_z of the sub-cylinder of W^u_loc(z) fixed by `future` on 1..n.
  double mass(const PeriodicPoint& z, const Word& future) const {
    check_future(z, future);
    const int lo = std::min(f_.window().first, 0);
    const int n = future.size();
    const int ext = std::max(n, future_depth_);
    std::vector<Symbol> block = z.window(lo, 0).symbols;
    block.insert(block.end(), future.symbols.begin(), future.symbols.end());
    const std::size_t past_len = static_cast<std::size_t>(1 - lo);
    double sum = 0.0;
    for_each_extension(matrix(), block, 1 - lo + ext, [&](std::span<const Symbol> w) {
      const Word full{lo, std::vector<Symbol>(w.begin(), w.end())};
      sum += std::exp(f_.at(full)) * gibbs_->cylinder_mass(w.subspan(past_len));
    });
    return std::exp(-q_.at(z)) * sum;
  }

  double total(const PeriodicPoint& z) const {
    double t = 0.0;
    for (Symbol s : matrix().successors(z[0])) t += mass(z, Word{1, {s}});
    return t;
  }

  /// nu_z[b] / nu_z(W^u_loc(z)), the conditional of the equilibrium state.
  double conditional(const PeriodicPoint& z, const Word& future) const {
    return mass(z, future) / total(z);
  }

  /// e^{phi(z) - P}: sigma_* nu_z = multiplier(z) nu_{sigma z} on W^u_loc(sigma z).
  double multiplier(const PeriodicPoint& z) const { return std::exp(potential().at(z) - pressure()); }

  /// nu_{sigma^m z}(sigma^m [future]) for the extension of nu_{sigma^m z} to
  /// sigma^m(W^u_loc(z)), i.e. e^{-S_m (phi - P)(z)} nu_z[future].
  double extended_mass(const PeriodicPoint& z, int m, const Word& future) const {
    if (m < 0) throw Error(ErrorCode::invalid_argument, "extended_mass needs m >= 0");
    const double s = potential().birkhoff_sum(z, m) - m * pressure();
    return std::exp(-s) * mass(z, future);
  }

  /// nu_z on all future words of length <= depth, memoized on the
  /// coordinates of z the family actually reads.
  LeafMeasure materialize(const PeriodicPoint& z, int depth) const {
    if (depth < 1) throw Error(ErrorCode::invalid_argument, "materialize needs depth >= 1");
    const int lo = std::min(f_.window().first, q_.window().first);
    const int hi = std::max(0, q_.window().last);
    std::vector<Symbol> key = z.window(std::min(lo, 0), hi).symbols;
    key.push_back(-1);
    key.push_back(depth);
    {
      std::lock_guard lock(memo_->mutex);
      const auto it = memo_->table.find(key);
      if (it != memo_->table.end()) {
        LeafMeasure out = it->second;
        out.base = z;
        return out;
      }
    }
    LeafMeasure out{z, depth, 0.0, {}};
    const int lo_f = std::min(f_.window().first, 0);
    const int ext = std::max(depth, future_depth_);
    const std::vector<Symbol> past = z.window(lo_f, 0).symbols;
    const std::size_t past_len = past.size();
    const double norm = std::exp(-q_.at(z));
    for_each_extension(matrix(), past, static_cast<int>(past_len) + ext, [&](std::span<const Symbol> w) {
      const Word full{lo_f, std::vector<Symbol>(w.begin(), w.end())};
      const double v = norm * std::exp(f_.at(full)) * gibbs_->cylinder_mass(w.subspan(past_len));
      const auto fut = w.subspan(past_len);
      for (int n = 1; n <= depth; ++n) out.masses[std::vector<Symbol>(fut.begin(), fut.begin() + n)] += v;
      out.total += v;
    });
    std::lock_guard lock(memo_->mutex);
    memo_->table.try_emplace(std::move(key), out);
    return out;
  }

  /// max/min of nu_z(W^u_loc(z)) over all z.
  double total_mass_ratio() const {
    const int lo = std::min({f_.window().first, q_.window().first, 0});
    const int hi = std::max(0, q_.window().last);
    double tmin = std::numeric_limits<double>::infinity();
    double tmax = 0.0;
    for_each_word(matrix(), hi - lo + 1, [&](std::span<const Symbol> w) {
      const PeriodicPoint z = PeriodicPoint::from_block(matrix(), Word{lo, {w.begin(), w.end()}});
      const double t = total(z);
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    });
    return tmax / tmin;
  }

  /// Largest ratio between normalized masses of two future words of length
  /// `length` on one leaf, over all leaves.
  double cylinder_mass_ratio(int length) const {
    if (length < 1) throw Error(ErrorCode::invalid_argument, "cylinder_mass_ratio needs length >= 1");
    double worst = 1.0;
    for_each_word(matrix(), past_dependence_, [&](std::span<const Symbol> w) {
      const PeriodicPoint z =
          PeriodicPoint::from_block(matrix(), Word{1 - past_dependence_, {w.begin(), w.end()}});
      const LeafMeasure leaf = materialize(z, length);
      double mn = std::numeric_limits<double>::infinity();
      double mx = 0.0;
      for (const auto& [word, v] : leaf.masses) {
        if (static_cast<int>(word.size()) != length) continue;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      worst = std::max(worst, mx / mn);
    });
    return worst;
  }

  /// K_nu = max(total_mass_ratio, cylinder_mass_ratio(length)).
  double comparability_constant(int length) const {
    return std::max(total_mass_ratio(), cylinder_mass_ratio(length));
  }

 private:
  struct Memo {
    std::mutex mutex;
    std::map<std::vector<Symbol>, LeafMeasure> table;
  };

  void check_future(const PeriodicPoint& z, const Word& future) const {
    if (future.start != 1) throw Error(ErrorCode::invalid_argument, "leaf futures start at coordinate 1");
    if (!future.empty() && (!matrix().admissible(future.symbols) || !matrix().allowed(z[0], future.symbols.front()))) {
      throw Error(ErrorCode::inadmissible_word, "future does not continue the base point admissibly");
    }
  }

  std::shared_ptr<const GibbsMeasure> gibbs_;
  std::shared_ptr<Memo> memo_;
  FiniteRangePotential q_;
  FiniteRangePotential f_;
  int past_dependence_ = 1;
  int future_depth_ = 1;
};

/// Max relative defect of nu_z[z_1 b] = multiplier(z) nu_{sigma z}[b] over all
/// admissible b of length 0..depth.
inline double quasi_invariance_check(const LeafwiseFamily& family, const PeriodicPoint& z, int depth) {
  const TransitionMatrix& a = family.matrix();
  const PeriodicPoint sz = z.shifted(1);
  const double factor = family.multiplier(z);
  double defect = 0.0;
  auto compare = [&](std::span<const Symbol> b) {
    Word lhs{1, {z[1]}};
    lhs.symbols.insert(lhs.symbols.end(), b.begin(), b.end());
    const double left = family.mass(z, lhs);
    const double right =
        factor * (b.empty() ? family.total(sz) : family.mass(sz, Word{1, {b.begin(), b.end()}}));
    defect = std::max(defect, std::abs(left - right) / std::max(std::abs(left), std::abs(right)));
  };
  for (int n = 0; n <= depth; ++n) for_each_continuation(a, z[1], n, compare);
  return defect;
}

/// Law of the past coordinates of a (not necessarily invariant) measure.
/// window(offset, length) is the law of x_{-offset-length+1} .. x_{-offset},
/// listed lexicographically with zero-probability words omitted.
class PastMarginal {
 public:
  using Distribution = std::vector<std::pair<std::vector<Symbol>, double>>;

  static PastMarginal gibbs(std::shared_ptr<const GibbsMeasure> g) {
    if (!g) throw Error(ErrorCode::invalid_argument, "null equilibrium state");
    const TransitionMatrix a = g->matrix();
    return PastMarginal(a, GibbsPast{std::move(g)});
  }

  static PastMarginal point(const PeriodicPoint& z, const TransitionMatrix& a) {
    if (z.alphabet_size() != a.size()) throw Error(ErrorCode::alphabet_mismatch, "point over another alphabet");
    return PastMarginal(a, PointPast{z});
  }

  /// initial: law of x_0; backward[a][b] = P(x_{j-1} = b | x_j = a), supported
  /// on admissible transitions b -> a.
  static PastMarginal markov(const TransitionMatrix& a, std::vector<double> initial,
                             std::vector<std::vector<double>> backward) {
    const int d = a.size();
    if (static_cast<int>(initial.size()) != d || static_cast<int>(backward.size()) != d) {
      throw Error(ErrorCode::alphabet_mismatch, "markov marginal has the wrong alphabet size");
    }
    check_probability(initial, "initial law");
    for (int s = 0; s < d; ++s) {
      if (static_cast<int>(backward[s].size()) != d) {
        throw Error(ErrorCode::alphabet_mismatch, "markov kernel row has the wrong size");
      }
      for (int b = 0; b < d; ++b) {
        if (backward[s][b] > 0.0 && !a.allowed(b, s)) {
          throw Error(ErrorCode::inadmissible_word, "markov kernel charges an inadmissible transition");
        }
      }
      check_probability(backward[s], "kernel row");
    }
    return PastMarginal(a, MarkovPast{std::move(initial), std::move(backward)});
  }

  /// Seeded random Markov marginal; generically far from invariant.
  static PastMarginal random_markov(const TransitionMatrix& a, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    const int d = a.size();
    std::vector<double> init(static_cast<std::size_t>(d));
    for (double& v : init) v = u(rng);
    normalize_in_place(init);
    std::vector<std::vector<double>> k(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int s = 0; s < d; ++s) {
      for (Symbol b : a.predecessors(s)) k[s][b] = u(rng);
      normalize_in_place(k[s]);
    }
    return markov(a, std::move(init), std::move(k));
  }

  /// Explicit laws of the last D_k past symbols for increasing depths D_k;
  /// consecutive tables must be consistent under marginalization.
  static PastMarginal table(const TransitionMatrix& a, std::vector<std::map<std::vector<Symbol>, double>> tables) {
    if (tables.empty()) throw Error(ErrorCode::invalid_argument, "table marginal needs at least one table");
    for (const auto& t : tables)
      if (t.empty()) throw Error(ErrorCode::invalid_argument, "empty marginal table");
    std::sort(tables.begin(), tables.end(),
              [](const auto& x, const auto& y) { return x.begin()->first.size() < y.begin()->first.size(); });
    for (const auto& t : tables) {
      const std::size_t len = t.begin()->first.size();
      double sum = 0.0;
      for (const auto& [w, p] : t) {
        if (w.size() != len || len == 0) throw Error(ErrorCode::schema, "marginal table mixes word lengths");
        if (!a.admissible(w)) throw Error(ErrorCode::inadmissible_word, "marginal table charges an inadmissible word");
        if (!(p >= 0.0)) throw Error(ErrorCode::invalid_argument, "marginal probabilities must be nonnegative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::invalid_argument, "marginal table does not sum to 1");
    }
    for (std::size_t k = 1; k < tables.size(); ++k) {
      const std::size_t shorter = tables[k - 1].begin()->first.size();
      const auto coarse = marginalize(tables[k], shorter);
      for (const auto& [w, p] : tables[k - 1]) {
        const auto it = coarse.find(w);
        const double q = it == coarse.end() ? 0.0 : it->second;
        if (std::abs(p - q) > 1e-12) {
          throw Error(ErrorCode::non_additive_marginal, "marginal tables disagree under refinement");
        }
      }
      for (const auto& [w, q] : coarse) {
        if (q > 1e-12 && !tables[k - 1].contains(w)) {
          throw Error(ErrorCode::non_additive_marginal, "marginal tables disagree under refinement");
        }
      }
    }
    return PastMarginal(a, TablePast{std::move(tables)});
  }

  const TransitionMatrix& matrix() const noexcept { return a_; }

  std::string kind() const {
    switch (rep_.index()) {
      case 0: return "gibbs";
      case 1: return "point";
      case 2: return "markov";
      default: return "table";
    }
  }

  /// Deepest past coordinate count available; absent means unbounded.
  std::optional<int> depth() const {
    if (const auto* t = std::get_if<TablePast>(&rep_)) {
      return static_cast<int>(t->tables.back().begin()->first.size());
    }
    return std::nullopt;
  }

  Distribution window(int offset, int length) const {
    if (offset < 0 || length < 1) throw Error(ErrorCode::invalid_argument, "bad marginal window");
    Distribution out;
    if (const auto* g = std::get_if<GibbsPast>(&rep_)) {
      for_each_word(a_, length, [&](std::span<const Symbol> w) {
        const double p = g->measure->cylinder_mass(w);
        if (p > 0.0) out.emplace_back(std::vector<Symbol>(w.begin(), w.end()), p);
      });
    } else if (const auto* pt = std::get_if<PointPast>(&rep_)) {
      out.emplace_back(pt->point.window(-offset - length + 1, -offset).symbols, 1.0);
    } else if (const auto* mk = std::get_if<MarkovPast>(&rep_)) {
      std::vector<double> law = mk->initial;
      const int d = a_.size();
      for (int t = 0; t < offset; ++t) {
        std::vector<double> next(static_cast<std::size_t>(d), 0.0);
        for (int s = 0; s < d; ++s)
          for (int b = 0; b < d; ++b) next[b] += law[s] * mk->backward[s][b];
        law = std::move(next);
      }
      // words are grown leftwards from x_{-offset}
      std::map<std::vector<Symbol>, double> acc;
      std::vector<Symbol> rev;
      auto grow = [&](auto&& self, double p) -> void {
        if (static_cast<int>(rev.size()) == length) {
          acc.emplace(std::vector<Symbol>(rev.rbegin(), rev.rend()), p);
          return;
        }
        const Symbol cur = rev.back();
        for (Symbol b : a_.predecessors(cur)) {
          const double q = p * mk->backward[cur][b];
          if (q <= 0.0) continue;
          rev.push_back(b);
          self(self, q);
          rev.pop_back();
        }
      };
      for (int s = 0; s < d; ++s) {
        if (law[s] <= 0.0) continue;
        rev.assign(1, s);
        grow(grow, law[s]);
      }
      out.assign(acc.begin(), acc.end());
    } else {
      const auto& t = std::get<TablePast>(rep_);
      const int deepest = static_cast<int>(t.tables.back().begin()->first.size());
      if (offset + length > deepest) {
        throw Error(ErrorCode::insufficient_depth, "marginal known to depth " + std::to_string(deepest) +
                                                       ", requested " + std::to_string(offset + length));
      }
      std::map<std::vector<Symbol>, double> acc;
      for (const auto& [w, p] : t.tables.back()) {
        const auto first = w.end() - offset - length;
        acc[std::vector<Symbol>(first, first + length)] += p;
      }
      for (const auto& [w, p] : acc)
        if (p > 0.0) out.emplace_back(w, p);
    }
    return out;
  }

 private:
  struct GibbsPast {
    std::shared_ptr<const GibbsMeasure> measure;
  };
  struct PointPast {
    PeriodicPoint point;
  };
  struct MarkovPast {
    std::vector<double> initial;
    std::vector<std::vector<double>> backward;
  };
  struct TablePast {
    std::vector<std::map<std::vector<Symbol>, double>> tables;
  };
  using Rep = std::variant<GibbsPast, PointPast, MarkovPast, TablePast>;

  PastMarginal(const TransitionMatrix& a, Rep rep) : a_(a), rep_(std::move(rep)) {}

  static void check_probability(const std::vector<double>& p, const char* what) {
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw Error(ErrorCode::invalid_argument, std::string(what) + " has a negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::invalid_argument, std::string(what) + " does not sum to 1");
  }

  static void normalize_in_place(std::vector<double>& p) {
    double sum = 0.0;
    for (double v : p) sum += v;
    for (double& v : p) v /= sum;
  }

  /// Law of the last `length` symbols (those nearest coordinate 0).
  static std::map<std::vector<Symbol>, double> marginalize(const std::map<std::vector<Symbol>, double>& t,
                                                           std::size_t length) {
    std::map<std::vector<Symbol>, double> out;
    for (const auto& [w, p] : t) out[std::vector<Symbol>(w.end() - static_cast<long>(length), w.end())] += p;
    return out;
  }

  TransitionMatrix a_;
  Rep rep_;
};

/// m = (past marginal) x (normalized leaf measures): the measure whose law on
/// coordinates <= 0 is the marginal and whose conditional on every fiber
/// W^u_loc(z) is nu_z / nu_z(W^u_loc(z)).
class GluedMeasure {
 public:
  GluedMeasure(PastMarginal past, LeafwiseFamily family, int depth)
      : past_(std::move(past)), family_(std::move(family)), depth_(depth) {
    if (!(past_.matrix() == family_.matrix())) {
      throw Error(ErrorCode::alphabet_mismatch, "marginal and leaf family live on different shifts");
    }
    if (depth_ < 1) throw Error(ErrorCode::invalid_argument, "glue depth must be positive");
    if (const auto d = past_.depth(); d && *d < family_.past_dependence()) {
      throw Error(ErrorCode::insufficient_depth, "marginal shallower than the leaf measures' past dependence");
    }
  }

  const PastMarginal& past() const noexcept { return past_; }
  const LeafwiseFamily& family() const noexcept { return family_; }
  int depth() const noexcept { return depth_; }

  /// Normalized leaf mass of `future` (coordinates 1..n, may contain free
  /// symbols marked -1) given the past block ending at coordinate 0.
  double fiber_conditional(const std::vector<Symbol>& past_block, const std::vector<Symbol>& future) const {
    const TransitionMatrix& a = family_.matrix();
    const int lp = static_cast<int>(past_block.size());
    const PeriodicPoint z = PeriodicPoint::from_block(a, Word{1 - lp, past_block});
    if (future.empty()) return 1.0;
    const bool has_free = std::find(future.begin(), future.end(), -1) != future.end();
    if (!has_free) {
      if (!a.admissible(future) || !a.allowed(past_block.back(), future.front())) return 0.0;
      return family_.conditional(z, Word{1, future});
    }
    double sum = 0.0;
    const double tot = family_.total(z);
    for_each_continuation(a, past_block.back(), static_cast<int>(future.size()), [&](std::span<const Symbol> w) {
      for (std::size_t i = 0; i < future.size(); ++i)
        if (future[i] != -1 && future[i] != w[i]) return;
      sum += family_.mass(z, Word{1, {w.begin(), w.end()}});
    });
    return sum / tot;
  }

  /// m(C(w)) for a cylinder at any position.
  double cylinder_mass(const Word& w) const {
    if (w.empty()) return 1.0;
    if (!family_.matrix().admissible(w.symbols)) return 0.0;
    const int lp = std::max(family_.past_dependence(), 1 - w.start);
    std::vector<Symbol> future;
    for (int i = 1; i <= w.last(); ++i) future.push_back(i >= w.start ? w.at(i) : -1);
    double m = 0.0;
    for (const auto& [block, p] : past_.window(0, lp)) {
      bool consistent = true;
      for (int i = std::max(w.start, 1 - lp); i <= std::min(w.last(), 0) && consistent; ++i)
        consistent = block[static_cast<std::size_t>(i - (1 - lp))] == w.at(i);
      if (!consistent) continue;
      m += p * fiber_conditional(block, future);
    }
    return m;
  }

  /// Largest |m(C(past b)) / m(C(past)) - nu-conditional| over past states of
  /// positive mass and future words of length 1..future_length.
  double fiber_defect(int future_length) const {
    const TransitionMatrix& a = family_.matrix();
    const int lp = family_.past_dependence();
    double defect = 0.0;
    for (const auto& [block, p] : past_.window(0, lp)) {
      const Word past_word{1 - lp, block};
      const double base = cylinder_mass(past_word);
      for (int n = 1; n <= future_length; ++n) {
        for_each_continuation(a, block.back(), n, [&](std::span<const Symbol> b) {
          Word joint = past_word;
          joint.symbols.insert(joint.symbols.end(), b.begin(), b.end());
          const double ratio = cylinder_mass(joint) / base;
          const double expected =
              family_.conditional(PeriodicPoint::from_block(a, past_word), Word{1, {b.begin(), b.end()}});
          defect = std::max(defect, std::abs(ratio - expected));
        });
      }
    }
    return defect;
  }

 private:
  PastMarginal past_;
  LeafwiseFamily family_;
  int depth_;
};

inline GluedMeasure glue(PastMarginal past, const LeafwiseFamily& family, int depth) {
  return GluedMeasure(std::move(past), family, depth);
}

}  // namespace sftherm
