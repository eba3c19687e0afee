/**
 * @file potential.hpp
 * @brief Finite-range potentials on Sigma_A, their variations, and the
 *        reduction of a two-sided potential to a cohomologous one-sided one.
 *
 * A potential with window [first, last] is a table over the admissible words
 * occupying coordinates first..last; phi(x) reads x_first .. x_last. The
 * two-sided convention "(p, q)" of the config files is the window [-p, q].
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sftherm/error.hpp"
#include "sftherm/sft_core.hpp"

namespace sftherm {

struct Window {
  int first = 0;
  int last = 0;

  static Window from_pq(int p, int q) { return Window{-p, q}; }

  int length() const noexcept { return last - first + 1; }
  bool contains(const Window& w) const noexcept { return w.first >= first && w.last <= last; }
  Window united(const Window& w) const noexcept {
    return Window{std::min(first, w.first), std::max(last, w.last)};
  }
  Window shifted(int k) const noexcept { return Window{first + k, last + k}; }
  bool operator==(const Window&) const = default;
};

class FiniteRangePotential {
 public:
  FiniteRangePotential() = default;

  /// Tabulates f over every admissible word of the window.
  template <class F>
  static FiniteRangePotential tabulate(const TransitionMatrix& a, Window window, F&& f) {
    FiniteRangePotential out(a, window);
    for_each_word(a, window.length(), [&](std::span<const Symbol> w) { out.values_[out.code(w)] = f(w); });
    return out;
  }

  static FiniteRangePotential constant(const TransitionMatrix& a, double c, Window window = {0, 0}) {
    return tabulate(a, window, [c](std::span<const Symbol>) { return c; });
  }

  /// Every admissible window word must be present; inadmissible keys are rejected.
  static FiniteRangePotential from_table(const TransitionMatrix& a, Window window,
                                         const std::map<std::vector<Symbol>, double>& table) {
    if (window.length() < 1) throw Error(ErrorCode::schema, "potential window is empty");
    for (const auto& [word, value] : table) {
      if (static_cast<int>(word.size()) != window.length() || !a.admissible(word)) {
        throw Error(ErrorCode::inadmissible_potential_entry,
                    "table entry is not an admissible word of length " + std::to_string(window.length()));
      }
      if (!std::isfinite(value)) throw Error(ErrorCode::schema, "potential values must be finite");
    }
    return tabulate(a, window, [&](std::span<const Symbol> w) {
      const auto it = table.find(std::vector<Symbol>(w.begin(), w.end()));
      if (it == table.end()) {
        std::string key;
        for (Symbol s : w) key += std::to_string(s) + (a.size() > 10 ? "," : "");
        throw Error(ErrorCode::missing_potential_entry, "no value for admissible word " + key);
      }
      return it->second;
    });
  }

  const TransitionMatrix& matrix() const noexcept { return a_; }
  Window window() const noexcept { return window_; }

  /// Value on a window word (coordinates window.first .. window.last).
  double operator()(std::span<const Symbol> word) const {
    if (static_cast<int>(word.size()) != window_.length()) {
      throw Error(ErrorCode::invalid_argument, "word length does not match potential window");
    }
    const double v = values_[code(word)];
    if (std::isnan(v)) throw Error(ErrorCode::inadmissible_word, "potential evaluated on an inadmissible word");
    return v;
  }

  /// phi(sigma^shift y) for a point y known on the coordinates of `block`.
  double at(const Word& block, int shift = 0) const {
    return (*this)(block.slice(window_.first + shift, window_.last + shift));
  }

  double at(const PeriodicPoint& x, int shift = 0) const {
    return (*this)(x.window(window_.first + shift, window_.last + shift).symbols);
  }

  /// Birkhoff sum sum_{j<n} phi(sigma^j x).
  double birkhoff_sum(const PeriodicPoint& x, int n) const {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += at(x, j);
    return s;
  }

  /// Visits (word, value) for every admissible window word, lexicographically.
  template <class F>
  void for_each(F&& f) const {
    for_each_word(a_, window_.length(), [&](std::span<const Symbol> w) { f(w, values_[code(w)]); });
  }

  /// The same function re-tabulated on a larger window.
  FiniteRangePotential widened(Window w) const {
    if (!w.contains(window_)) throw Error(ErrorCode::invalid_argument, "widened window must contain the old one");
    const int off = window_.first - w.first;
    return tabulate(a_, w, [&](std::span<const Symbol> word) {
      return (*this)(word.subspan(static_cast<std::size_t>(off), static_cast<std::size_t>(window_.length())));
    });
  }

  /// psi = phi o sigma^k.
  FiniteRangePotential shifted(int k) const {
    FiniteRangePotential out = *this;
    out.window_ = window_.shifted(k);
    return out;
  }

  double min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for_each([&](std::span<const Symbol>, double v) { m = std::min(m, v); });
    return m;
  }
  double max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for_each([&](std::span<const Symbol>, double v) { m = std::max(m, v); });
    return m;
  }
  double sup_norm() const { return std::max(std::abs(min_value()), std::abs(max_value())); }

  /// Pointwise combination on the union of the two windows.
  template <class Op>
  friend FiniteRangePotential combine(const FiniteRangePotential& f, const FiniteRangePotential& g, Op op) {
    if (!(f.a_ == g.a_)) throw Error(ErrorCode::alphabet_mismatch, "potentials over different shifts");
    const Window w = f.window_.united(g.window_);
    return tabulate(f.a_, w, [&](std::span<const Symbol> word) {
      const Word block{w.first, std::vector<Symbol>(word.begin(), word.end())};
      return op(f.at(block), g.at(block));
    });
  }

  friend FiniteRangePotential operator+(const FiniteRangePotential& f, const FiniteRangePotential& g) {
    return combine(f, g, std::plus<>{});
  }
  friend FiniteRangePotential operator-(const FiniteRangePotential& f, const FiniteRangePotential& g) {
    return combine(f, g, std::minus<>{});
  }
  FiniteRangePotential scaled(double c) const {
    FiniteRangePotential out = *this;
    for (double& v : out.values_) v *= c;
    return out;
  }
  FiniteRangePotential plus_constant(double c) const {
    FiniteRangePotential out = *this;
    for (double& v : out.values_) v += c;
    return out;
  }

 private:
  FiniteRangePotential(const TransitionMatrix& a, Window window) : a_(a), window_(window) {
    if (window.length() < 1) throw Error(ErrorCode::invalid_argument, "potential window is empty");
    const double cells = std::pow(static_cast<double>(a.size()), window.length());
    if (cells > static_cast<double>(1 << 24)) {
      throw Error(ErrorCode::invalid_argument, "potential window too long for dense tabulation");
    }
    values_.assign(static_cast<std::size_t>(cells), std::numeric_limits<double>::quiet_NaN());
  }

  std::size_t code(std::span<const Symbol> w) const {
    std::size_t c = 0;
    for (Symbol s : w) c = c * static_cast<std::size_t>(a_.size()) + static_cast<std::size_t>(s);
    return c;
  }

  TransitionMatrix a_;
  Window window_{0, 0};
  std::vector<double> values_;
};

/// var_n(phi): sup |phi(x) - phi(y)| over points agreeing on |k| <= n.
inline double variation(const FiniteRangePotential& phi, int n) {
  if (n < 0) throw Error(ErrorCode::invalid_argument, "variation order must be nonnegative");
  const Window w = phi.window();
  if (n >= -w.first && n >= w.last) return 0.0;
  const Window u = w.united(Window{-n, n});
  std::map<std::vector<Symbol>, std::pair<double, double>> range;
  for_each_word(phi.matrix(), u.length(), [&](std::span<const Symbol> word) {
    const Word block{u.first, std::vector<Symbol>(word.begin(), word.end())};
    const auto key = block.slice(-n, n);
    const double v = phi.at(block);
    auto [it, fresh] = range.try_emplace(std::vector<Symbol>(key.begin(), key.end()), v, v);
    if (!fresh) {
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  });
  double var = 0.0;
  for (const auto& [key, mm] : range) var = std::max(var, mm.second - mm.first);
  return var;
}

enum class Side { plus, minus };

/// phi^side - phi = transfer - transfer o sigma, checked on every word of the
/// combined window; `residual` is the largest pointwise defect found.
struct CoboundaryCertificate {
  FiniteRangePotential plus_side;
  FiniteRangePotential transfer;
  double residual = 0.0;
};

namespace detail {

/// Block equal to `known` and continued by the reference cycle of its first
/// symbol down to coordinate `down_to`.
inline Word with_reference_past(const TransitionMatrix& a, const Word& known, int down_to) {
  return PeriodicPoint::from_block(a, known).window(std::min(down_to, known.start), known.last());
}

inline Word with_reference_future(const TransitionMatrix& a, const Word& known, int up_to) {
  return PeriodicPoint::from_block(a, known).window(known.start, std::max(up_to, known.last()));
}

}  // namespace detail

/// Cohomologous one-sided version of a finite-range potential.
///
/// plus:  r(x) keeps x_{>=1} and writes the reference past of x_1 on the
///        coordinates <= 0; transfer(x) = sum_{j>=0} [phi(s^j r x) - phi(s^j x)],
///        and phi^+ = phi + transfer - transfer o s depends on x_{>=1} only.
/// minus: r(x) keeps x_{<=-1} and writes the reference future of x_{-1} on the
///        coordinates >= 0; transfer(x) = sum_{j>=1} [phi(s^-j x) - phi(s^-j r x)],
///        and phi^- depends on x_{<=0} only.
/// The sums are finite because phi reads a bounded window.
inline CoboundaryCertificate sinai_reduce(const FiniteRangePotential& phi, Side side) {
  const TransitionMatrix& a = phi.matrix();
  const Window f = phi.window();

  Window g_window{};
  std::function<double(const Word&)> transfer_fn;
  if (side == Side::plus) {
    const int terms = -f.first;  // j = 0 .. terms
    if (terms < 0) {
      return CoboundaryCertificate{phi, FiniteRangePotential::constant(a, 0.0, Window{1, 1}), 0.0};
    }
    g_window = Window{f.first, std::max(f.last - f.first, 1)};
    transfer_fn = [&, terms](const Word& x) {
      const auto future = x.slice(1, x.last());
      const Word r = detail::with_reference_past(a, Word{1, {future.begin(), future.end()}}, x.start);
      double s = 0.0;
      for (int j = 0; j <= terms; ++j) s += phi.at(r, j) - phi.at(x, j);
      return s;
    };
  } else {
    const int terms = f.last;  // j = 1 .. terms
    if (terms < 1) {
      return CoboundaryCertificate{phi, FiniteRangePotential::constant(a, 0.0, Window{0, 0}), 0.0};
    }
    g_window = Window{std::min(f.first - f.last, -1), std::max(f.last - 1, -1)};
    transfer_fn = [&, terms](const Word& x) {
      const auto past = x.slice(x.start, -1);
      const Word r = detail::with_reference_future(a, Word{x.start, {past.begin(), past.end()}}, x.last());
      double s = 0.0;
      for (int j = 1; j <= terms; ++j) s += phi.at(x, -j) - phi.at(r, -j);
      return s;
    };
  }

  const FiniteRangePotential transfer = FiniteRangePotential::tabulate(a, g_window, [&](std::span<const Symbol> w) {
    return transfer_fn(Word{g_window.first, std::vector<Symbol>(w.begin(), w.end())});
  });

  const Window u = f.united(g_window).united(g_window.shifted(1));
  auto combined = [&](const Word& x) { return phi.at(x) + transfer.at(x) - transfer.at(x, 1); };

  const Window reduced = side == Side::plus ? Window{1, std::max(u.last, 1)} : Window{std::min(u.first, 0), 0};
  const Window all = u.united(reduced);
  std::map<std::vector<Symbol>, double> table;
  for_each_word(a, all.length(), [&](std::span<const Symbol> w) {
    const Word x{all.first, std::vector<Symbol>(w.begin(), w.end())};
    const auto key = x.slice(reduced.first, reduced.last);
    table.try_emplace(std::vector<Symbol>(key.begin(), key.end()), combined(x));
  });
  FiniteRangePotential reduced_phi = FiniteRangePotential::from_table(a, reduced, table);

  double residual = 0.0;
  for_each_word(a, all.length(), [&](std::span<const Symbol> w) {
    const Word x{all.first, std::vector<Symbol>(w.begin(), w.end())};
    residual = std::max(residual, std::abs(reduced_phi.at(x) - combined(x)));
  });
  return CoboundaryCertificate{std::move(reduced_phi), transfer, residual};
}

}  // namespace sftherm
