/**
 * @file sft_core.hpp
 * @brief Subshifts of finite type: transition matrices, words, cylinders,
 *        eventually periodic points, the symmetric-rectangle metric and the
 *        decomposition of images of local unstable sets.
 *
 * Symbols are 0..d-1. A point x of Sigma_A is a two-sided sequence; the local
 * unstable set W^u_loc(x) is the set of points agreeing with x on every
 * coordinate <= 0, so a sub-cylinder of it is named by a future word placed at
 * coordinates 1..n.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sftherm/error.hpp"

namespace sftherm {

using Symbol = int;

class TransitionMatrix {
 public:
  TransitionMatrix() = default;

  explicit TransitionMatrix(const std::vector<std::vector<int>>& rows) {
    d_ = static_cast<int>(rows.size());
    if (d_ == 0) throw Error(ErrorCode::non_square_matrix, "transition matrix is empty");
    bits_.assign(static_cast<std::size_t>(d_) * d_, 0);
    for (int a = 0; a < d_; ++a) {
      if (static_cast<int>(rows[a].size()) != d_) {
        throw Error(ErrorCode::non_square_matrix,
                    "row " + std::to_string(a) + " has " + std::to_string(rows[a].size()) +
                        " entries, expected " + std::to_string(d_));
      }
      for (int b = 0; b < d_; ++b) {
        const int v = rows[a][b];
        if (v != 0 && v != 1) {
          throw Error(ErrorCode::invalid_argument, "transition matrix entries must be 0 or 1");
        }
        bits_[static_cast<std::size_t>(a) * d_ + b] = static_cast<unsigned char>(v);
      }
    }
    succ_.assign(d_, {});
    pred_.assign(d_, {});
    for (int a = 0; a < d_; ++a) {
      for (int b = 0; b < d_; ++b) {
        if (allowed(a, b)) {
          succ_[a].push_back(b);
          pred_[b].push_back(a);
        }
      }
    }
    for (int a = 0; a < d_; ++a) {
      if (succ_[a].empty()) throw Error(ErrorCode::dead_symbol, "row " + std::to_string(a) + " is all zero");
      if (pred_[a].empty()) throw Error(ErrorCode::dead_symbol, "column " + std::to_string(a) + " is all zero");
    }
  }

  /// Full shift on d symbols.
  static TransitionMatrix full(int d) {
    return TransitionMatrix(std::vector<std::vector<int>>(d, std::vector<int>(d, 1)));
  }

  int size() const noexcept { return d_; }
  bool allowed(Symbol a, Symbol b) const { return bits_[static_cast<std::size_t>(a) * d_ + b] != 0; }
  const std::vector<Symbol>& successors(Symbol a) const { return succ_[a]; }
  const std::vector<Symbol>& predecessors(Symbol b) const { return pred_[b]; }
  int out_degree(Symbol a) const { return static_cast<int>(succ_[a].size()); }

  bool valid_symbol(Symbol a) const noexcept { return a >= 0 && a < d_; }

  bool admissible(std::span<const Symbol> word) const {
    for (Symbol s : word) {
      if (!valid_symbol(s)) return false;
    }
    for (std::size_t i = 1; i < word.size(); ++i) {
      if (!allowed(word[i - 1], word[i])) return false;
    }
    return true;
  }

  std::vector<std::vector<int>> rows() const {
    std::vector<std::vector<int>> out(d_, std::vector<int>(d_, 0));
    for (int a = 0; a < d_; ++a)
      for (int b = 0; b < d_; ++b) out[a][b] = allowed(a, b) ? 1 : 0;
    return out;
  }

  /// Path counts (A^m)[a][b]; exact while the counts stay below 2^53.
  std::vector<std::vector<double>> power_counts(int m) const {
    std::vector<std::vector<double>> p(d_, std::vector<double>(d_, 0.0));
    for (int a = 0; a < d_; ++a) p[a][a] = 1.0;
    for (int step = 0; step < m; ++step) {
      std::vector<std::vector<double>> next(d_, std::vector<double>(d_, 0.0));
      for (int a = 0; a < d_; ++a)
        for (int c = 0; c < d_; ++c)
          if (p[a][c] != 0.0)
            for (Symbol b : succ_[c]) next[a][b] += p[a][c];
      p = std::move(next);
    }
    return p;
  }

  bool operator==(const TransitionMatrix& other) const { return d_ == other.d_ && bits_ == other.bits_; }

 private:
  int d_ = 0;
  std::vector<unsigned char> bits_;
  std::vector<std::vector<Symbol>> succ_;
  std::vector<std::vector<Symbol>> pred_;
};

/// Least M >= 1 with A^M strictly positive, searched up to Wielandt's bound
/// d^2 - 2d + 2. Absent means A is not primitive (not mixing).
inline std::optional<int> mixing_exponent(const TransitionMatrix& a) {
  const int d = a.size();
  const int bound = std::max(1, d * d - 2 * d + 2);
  std::vector<unsigned char> p(static_cast<std::size_t>(d) * d, 0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) p[static_cast<std::size_t>(i) * d + j] = a.allowed(i, j) ? 1 : 0;
  for (int m = 1; m <= bound; ++m) {
    if (std::all_of(p.begin(), p.end(), [](unsigned char v) { return v != 0; })) return m;
    std::vector<unsigned char> next(p.size(), 0);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k)
        if (p[static_cast<std::size_t>(i) * d + k])
          for (Symbol j : a.successors(k)) next[static_cast<std::size_t>(i) * d + j] = 1;
    p = std::move(next);
  }
  return std::nullopt;
}

/// A finite block of symbols occupying coordinates start .. start+size-1.
struct Word {
  int start = 0;
  std::vector<Symbol> symbols;

  int size() const noexcept { return static_cast<int>(symbols.size()); }
  bool empty() const noexcept { return symbols.empty(); }
  int last() const noexcept { return start + size() - 1; }
  bool covers(int first_index, int last_index) const noexcept {
    return first_index >= start && last_index <= last();
  }
  Symbol at(int index) const { return symbols.at(static_cast<std::size_t>(index - start)); }

  /// Symbols on coordinates [first_index, last_index].
  std::span<const Symbol> slice(int first_index, int last_index) const {
    if (!covers(first_index, last_index)) {
      throw Error(ErrorCode::insufficient_depth, "word on [" + std::to_string(start) + "," +
                                                     std::to_string(last()) + "] does not cover [" +
                                                     std::to_string(first_index) + "," +
                                                     std::to_string(last_index) + "]");
    }
    return std::span<const Symbol>(symbols).subspan(static_cast<std::size_t>(first_index - start),
                                                    static_cast<std::size_t>(last_index - first_index + 1));
  }

  bool operator==(const Word&) const = default;
};

struct Cylinder {
  Word word;
  bool operator==(const Cylinder&) const = default;
};

enum class Direction { future, past };

/// Calls f(span) for every admissible word of `length` symbols extending
/// `prefix` on the right, in lexicographic order.
template <class F>
void for_each_extension(const TransitionMatrix& a, std::vector<Symbol> prefix, int length, F&& f) {
  if (static_cast<int>(prefix.size()) >= length) {
    if (a.admissible(prefix)) f(std::span<const Symbol>(prefix));
    return;
  }
  if (!a.admissible(prefix)) return;
  const std::size_t base = prefix.size();
  prefix.resize(static_cast<std::size_t>(length));
  // explicit stack of successor cursors keeps the recursion flat
  std::vector<std::size_t> cursor(static_cast<std::size_t>(length), 0);
  std::size_t pos = base;
  while (true) {
    const std::vector<Symbol>* choices = nullptr;
    std::vector<Symbol> all;
    if (pos == 0) {
      all.resize(static_cast<std::size_t>(a.size()));
      std::iota(all.begin(), all.end(), 0);
      choices = &all;
    } else {
      choices = &a.successors(prefix[pos - 1]);
    }
    if (cursor[pos] < choices->size()) {
      prefix[pos] = (*choices)[cursor[pos]];
      ++cursor[pos];
      if (pos + 1 == static_cast<std::size_t>(length)) {
        f(std::span<const Symbol>(prefix));
      } else {
        ++pos;
        cursor[pos] = 0;
      }
    } else {
      if (pos == base) break;
      --pos;
    }
  }
}

template <class F>
void for_each_word(const TransitionMatrix& a, int length, F&& f) {
  for_each_extension(a, {}, length, std::forward<F>(f));
}

/// Admissible words of `length` symbols that may follow the symbol `prev`.
template <class F>
void for_each_continuation(const TransitionMatrix& a, Symbol prev, int length, F&& f) {
  if (length == 0) {
    f(std::span<const Symbol>());
    return;
  }
  for (Symbol first : a.successors(prev)) for_each_extension(a, {first}, length, f);
}

inline std::vector<std::vector<Symbol>> admissible_words(const TransitionMatrix& a, int length) {
  std::vector<std::vector<Symbol>> out;
  for_each_word(a, length, [&](std::span<const Symbol> w) { out.emplace_back(w.begin(), w.end()); });
  return out;
}

/// Shortest cycle through `a`, lexicographically least among the shortest,
/// returned as (a, c_1, ..., c_{L-1}) with A[c_{L-1}][a] = 1.
inline std::vector<Symbol> reference_cycle(const TransitionMatrix& a, Symbol start) {
  if (a.allowed(start, start)) return {start};
  const int d = a.size();
  std::vector<int> parent(static_cast<std::size_t>(d), -2);
  std::deque<Symbol> queue;
  for (Symbol s : a.successors(start)) {
    if (parent[s] == -2) {
      parent[s] = start;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const Symbol u = queue.front();
    queue.pop_front();
    if (a.allowed(u, start)) {
      std::vector<Symbol> path;
      for (Symbol v = u; v != start; v = parent[v]) path.push_back(v);
      path.push_back(start);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (Symbol s : a.successors(u)) {
      if (s != start && parent[s] == -2) {
        parent[s] = u;
        queue.push_back(s);
      }
    }
  }
  throw Error(ErrorCode::invalid_argument, "no admissible cycle through symbol " + std::to_string(start));
}

/// Eventually periodic two-sided sequence: past_cycle repeated to the left of
/// the core, future_cycle repeated to its right. The last entry of past_cycle
/// sits at coordinate core.start - 1 and the first entry of future_cycle at
/// core.last() + 1.
class PeriodicPoint {
 public:
  PeriodicPoint(const TransitionMatrix& a, std::vector<Symbol> past_cycle, Word core,
                std::vector<Symbol> future_cycle)
      : d_(a.size()), past_(std::move(past_cycle)), core_(std::move(core)), future_(std::move(future_cycle)) {
    if (past_.empty() || future_.empty()) {
      throw Error(ErrorCode::invalid_argument, "periodic point cycles must be nonempty");
    }
    auto cyclic_ok = [&](const std::vector<Symbol>& c) {
      return a.admissible(c) && a.allowed(c.back(), c.front());
    };
    if (!cyclic_ok(past_) || !cyclic_ok(future_)) {
      throw Error(ErrorCode::inadmissible_word, "periodic point cycle is not an admissible cycle");
    }
    if (!a.admissible(core_.symbols)) throw Error(ErrorCode::inadmissible_word, "periodic point core");
    const Symbol after_past = core_.empty() ? future_.front() : core_.symbols.front();
    if (!a.allowed(past_.back(), after_past)) {
      throw Error(ErrorCode::inadmissible_word, "past seam of periodic point");
    }
    if (!core_.empty() && !a.allowed(core_.symbols.back(), future_.front())) {
      throw Error(ErrorCode::inadmissible_word, "future seam of periodic point");
    }
  }

  /// Purely periodic point with x_i = cycle[i mod L].
  static PeriodicPoint periodic(const TransitionMatrix& a, std::vector<Symbol> cycle) {
    return PeriodicPoint(a, cycle, Word{0, {}}, cycle);
  }

  /// The point equal to `block` on its coordinates and continued by reference
  /// cycles on both sides.
  static PeriodicPoint from_block(const TransitionMatrix& a, const Word& block) {
    if (block.empty()) throw Error(ErrorCode::invalid_argument, "from_block needs a nonempty block");
    std::vector<Symbol> past = reference_cycle(a, block.symbols.front());
    std::vector<Symbol> cyc = reference_cycle(a, block.symbols.back());
    std::rotate(cyc.begin(), cyc.begin() + 1, cyc.end());
    return PeriodicPoint(a, std::move(past), block, std::move(cyc));
  }

  int alphabet_size() const noexcept { return d_; }
  const std::vector<Symbol>& past_cycle() const noexcept { return past_; }
  const Word& core() const noexcept { return core_; }
  const std::vector<Symbol>& future_cycle() const noexcept { return future_; }

  Symbol operator[](int i) const {
    const int s = core_.start;
    const int n = core_.size();
    if (i < s) {
      const int len = static_cast<int>(past_.size());
      const int k = (s - 1 - i) % len;
      return past_[static_cast<std::size_t>(len - 1 - k)];
    }
    if (i >= s + n) {
      const int len = static_cast<int>(future_.size());
      return future_[static_cast<std::size_t>((i - s - n) % len)];
    }
    return core_.symbols[static_cast<std::size_t>(i - s)];
  }

  Word window(int first, int last) const {
    Word w{first, {}};
    w.symbols.reserve(static_cast<std::size_t>(std::max(0, last - first + 1)));
    for (int i = first; i <= last; ++i) w.symbols.push_back((*this)[i]);
    return w;
  }

  /// sigma^k applied k times (negative k applies the inverse).
  PeriodicPoint shifted(int k) const {
    PeriodicPoint out = *this;
    out.core_.start -= k;
    return out;
  }

  /// Keeps coordinates <= j, writes `tail` on j+1.., then continues with the
  /// reference cycle of the last symbol.
  PeriodicPoint splice_future(const TransitionMatrix& a, int j, std::span<const Symbol> tail) const {
    const int s = core_.start;
    Word core{};
    std::vector<Symbol> past;
    if (j >= s - 1) {
      past = past_;
      core.start = s;
      for (int i = s; i <= j; ++i) core.symbols.push_back((*this)[i]);
    } else {
      const int len = static_cast<int>(past_.size());
      for (int k = 0; k < len; ++k) past.push_back((*this)[j - len + 1 + k]);
      core.start = j + 1;
    }
    const Symbol prev = (*this)[j];
    if (!tail.empty() && !a.allowed(prev, tail.front())) {
      throw Error(ErrorCode::inadmissible_word, "future does not continue the past admissibly");
    }
    core.symbols.insert(core.symbols.end(), tail.begin(), tail.end());
    const Symbol last = tail.empty() ? prev : tail.back();
    std::vector<Symbol> fut = reference_cycle(a, last);
    std::rotate(fut.begin(), fut.begin() + 1, fut.end());
    return PeriodicPoint(a, std::move(past), std::move(core), std::move(fut));
  }

  /// Range [lo, hi] outside of which both points are periodic with a common period.
  friend std::pair<int, int> comparison_range(const PeriodicPoint& x, const PeriodicPoint& y) {
    const int lp = std::lcm(static_cast<int>(x.past_.size()), static_cast<int>(y.past_.size()));
    const int lf = std::lcm(static_cast<int>(x.future_.size()), static_cast<int>(y.future_.size()));
    const int lo = std::min(x.core_.start, y.core_.start) - lp;
    const int hi = std::max(x.core_.last(), y.core_.last()) + lf;
    return {lo, hi};
  }

  friend bool operator==(const PeriodicPoint& x, const PeriodicPoint& y) {
    if (x.d_ != y.d_) return false;
    const auto [lo, hi] = comparison_range(x, y);
    for (int i = lo; i <= hi; ++i)
      if (x[i] != y[i]) return false;
    return true;
  }

 private:
  int d_ = 0;
  std::vector<Symbol> past_;
  Word core_;
  std::vector<Symbol> future_;
};

/// Every periodic point of least-or-not period 1..max_period, i.e. one point
/// per admissible cyclic word (rotations included).
template <class F>
void for_each_periodic_point(const TransitionMatrix& a, int max_period, F&& f) {
  for (int p = 1; p <= max_period; ++p) {
    for_each_word(a, p, [&](std::span<const Symbol> w) {
      if (a.allowed(w.back(), w.front())) f(PeriodicPoint::periodic(a, std::vector<Symbol>(w.begin(), w.end())));
    });
  }
}

/// d(x, y) = 2^{-(N+1)}, N the half-width of the largest symmetric rectangle
/// containing both points; N = -1 when x_0 != y_0, and 0 when x == y.
inline double distance(const PeriodicPoint& x, const PeriodicPoint& y) {
  if (x.alphabet_size() != y.alphabet_size()) {
    throw Error(ErrorCode::alphabet_mismatch, "points live over different alphabets");
  }
  const auto [lo, hi] = comparison_range(x, y);
  const int bound = std::max(-lo, hi) + 1;
  int n = -1;
  while (n < bound) {
    const int k = n + 1;
    if (x[k] != y[k] || x[-k] != y[-k]) break;
    ++n;
  }
  if (n >= bound) return 0.0;
  return std::ldexp(1.0, -(n + 1));
}

/// One-symbol refinements of a cylinder, lexicographic in the new symbol.
inline std::vector<Cylinder> cylinder_children(const TransitionMatrix& a, const Cylinder& c, Direction direction) {
  if (c.word.empty() || !a.admissible(c.word.symbols)) {
    throw Error(ErrorCode::inadmissible_word, "cylinder_children needs a nonempty admissible cylinder");
  }
  std::vector<Cylinder> out;
  if (direction == Direction::future) {
    for (Symbol s : a.successors(c.word.symbols.back())) {
      Cylinder child = c;
      child.word.symbols.push_back(s);
      out.push_back(std::move(child));
    }
  } else {
    for (Symbol s : a.predecessors(c.word.symbols.front())) {
      Cylinder child{Word{c.word.start - 1, {s}}};
      child.word.symbols.insert(child.word.symbols.end(), c.word.symbols.begin(), c.word.symbols.end());
      out.push_back(std::move(child));
    }
  }
  return out;
}

/// One piece W^u_loc(y^i) of sigma^m(W^u_loc(x)): `future` is the word x was
/// extended by on coordinates 1..m, and representative = sigma^m of that point.
struct UnstablePiece {
  Word future;
  PeriodicPoint representative;
};

inline std::vector<UnstablePiece> sigma_m_unstable_decomposition(const TransitionMatrix& a, const PeriodicPoint& x,
                                                                 int m) {
  if (m < 1) throw Error(ErrorCode::invalid_argument, "decomposition needs m >= 1");
  std::vector<UnstablePiece> out;
  for_each_continuation(a, x[0], m, [&](std::span<const Symbol> w) {
    Word future{1, std::vector<Symbol>(w.begin(), w.end())};
    out.push_back(UnstablePiece{future, x.splice_future(a, 0, w).shifted(m)});
  });
  return out;
}

struct HitFraction {
  double fraction = 0.0;
  double bound = 0.0;
};

/// Share of pieces of sigma^m(W^u_loc(x)) whose leaf meets U = C(a_0..a_l)_0,
/// with the m-independent lower bound min_e (A^M)[e][a_0] / sum_b (A^M)[e][b].
inline HitFraction cylinder_hit_fraction(const TransitionMatrix& a, const PeriodicPoint& x, int m,
                                         const Cylinder& u) {
  const auto mix = mixing_exponent(a);
  if (!mix) throw Error(ErrorCode::not_mixing, "cylinder_hit_fraction needs a mixing matrix");
  if (m <= *mix) {
    throw Error(ErrorCode::invalid_argument,
                "cylinder_hit_fraction needs m > M = " + std::to_string(*mix));
  }
  if (u.word.start != 0 || u.word.empty() || !a.admissible(u.word.symbols)) {
    throw Error(ErrorCode::invalid_argument, "U must be a nonempty admissible cylinder C(a_0..a_l)_0");
  }
  const Symbol target = u.word.symbols.front();
  long long hits = 0;
  long long total = 0;
  for_each_continuation(a, x[0], m, [&](std::span<const Symbol> w) {
    ++total;
    if (w.back() == target) ++hits;
  });
  const auto counts = a.power_counts(*mix);
  double bound = 1.0;
  for (int e = 0; e < a.size(); ++e) {
    const double row = std::accumulate(counts[e].begin(), counts[e].end(), 0.0);
    bound = std::min(bound, counts[e][target] / row);
  }
  return HitFraction{static_cast<double>(hits) / static_cast<double>(total), bound};
}

}  // namespace sftherm
