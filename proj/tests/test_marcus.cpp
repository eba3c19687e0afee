#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sftherm/marcus.hpp"

using namespace sftherm;

namespace {

PeriodicPoint random_point(const TransitionMatrix& a, std::mt19937_64& rng, int len = 8) {
  std::vector<Symbol> w{static_cast<Symbol>(rng() % static_cast<unsigned>(a.size()))};
  while (static_cast<int>(w.size()) < len) {
    const auto& s = a.successors(w.back());
    w.push_back(s[rng() % s.size()]);
  }
  return PeriodicPoint::from_block(a, Word{-len + 3, w});
}

FiniteRangePotential indicator(const TransitionMatrix& a, Word w) {
  return FiniteRangePotential::tabulate(a, Window{w.start, w.last()}, [&](std::span<const Symbol> s) {
    return std::equal(s.begin(), s.end(), w.symbols.begin()) ? 1.0 : 0.0;
  });
}

/// R_n h(x) by enumerating every future word that h o sigma^n can see.
double brute_Rn(const LeafwiseFamily& fam, const FiniteRangePotential& h, int n, const PeriodicPoint& x) {
  const TransitionMatrix& a = fam.matrix();
  const int len = std::max(1, n + h.window().last);
  double num = 0.0;
  double den = 0.0;
  for_each_continuation(a, x[0], len, [&](std::span<const Symbol> b) {
    const double m = fam.mass(x, Word{1, {b.begin(), b.end()}});
    num += m * h.at(x.splice_future(a, 0, b), n);
    den += m;
  });
  return num / den;
}

}  // namespace

TEST(ApplyRn, Examples) {
  const auto full = TransitionMatrix::full(2);
  const LeafwiseFamily zero(FiniteRangePotential::constant(full, 0.0));
  std::mt19937_64 rng(1);
  const auto c = FiniteRangePotential::constant(full, 2.5, Window{-1, 1});
  const auto h = indicator(full, Word{1, {0}});
  for (int n = 0; n <= 5; ++n) {
    const auto x = random_point(full, rng);
    EXPECT_NEAR(apply_Rn(zero, c, n, x), 2.5, 1e-15);
    EXPECT_NEAR(apply_Rn(zero, h, n, x), 0.5, 1e-15);
  }

  const auto g = oracle::golden_mean();
  const LeafwiseFamily parry(FiniteRangePotential::constant(g, 0.0));
  const auto h1 = indicator(g, Word{1, {1}});
  const MarcusOperator op(parry, h1);
  const double target = parry.gibbs().cylinder_mass(std::vector<Symbol>{1});
  for (int t = 0; t < 5; ++t) {
    const auto x = random_point(g, rng);
    for (int n = 0; n <= 4; ++n) EXPECT_NEAR(op.apply(n, x), brute_Rn(parry, h1, n, x), 1e-14);
    EXPECT_NEAR(op.apply(40, x), target, 1e-12);
  }
}

TEST(ApplyRn, MatchesBruteForceOnRandomSystems) {
  std::mt19937_64 rng(2);
  for (const auto& a : {oracle::golden_mean(), oracle::three_symbol()}) {
    const LeafwiseFamily fam(oracle::random_potential(a, Window{-1, 2}, rng));
    for (Window hw : {Window{0, 0}, Window{-2, 0}, Window{1, 2}, Window{-1, 1}}) {
      const auto h = oracle::random_potential(a, hw, rng);
      const MarcusOperator op(fam, h);
      for (int t = 0; t < 4; ++t) {
        const auto x = random_point(a, rng);
        for (int n = 0; n <= 4; ++n) EXPECT_NEAR(op.apply(n, x), brute_Rn(fam, h, n, x), 1e-12);
      }
    }
  }
}

TEST(ApplyRn, ContractionLeafConstancyAndEquicontinuity) {
  std::mt19937_64 rng(3);
  const auto a = oracle::three_symbol();
  const LeafwiseFamily fam(oracle::random_potential(a, Window{-2, 1}, rng));
  const auto h = oracle::random_potential(a, Window{-1, 2}, rng);
  const MarcusOperator op(fam, h);
  const double norm = h.sup_norm();
  op.sweep(25, [&](int n, const std::vector<double>& v) {
    for (double e : v) EXPECT_LE(std::abs(e), norm * (1 + 1e-15));
    // once h o sigma^n is read in the future, only the leaf-measure past matters
    if (n + h.window().first >= 1) {
      EXPECT_EQ(op.oscillation(v, fam.past_dependence()), 0.0);
    }
    EXPECT_EQ(op.oscillation(v, op.state_length()), 0.0);
    return true;
  });
  for (int t = 0; t < 10; ++t) {
    const auto x = random_point(a, rng);
    // same past, different future: same leaf
    std::vector<Symbol> fut{a.successors(x[0]).back()};
    const auto y = x.splice_future(a, 0, fut);
    for (int n = 0; n <= 6; ++n) EXPECT_EQ(op.apply(n, x), op.apply(n, y));
  }
}

TEST(Theta, ExamplesAndComposition) {
  const auto full = TransitionMatrix::full(2);
  const LeafwiseFamily zero(FiniteRangePotential::constant(full, 0.0));
  const auto th = theta_measure(zero, PeriodicPoint::periodic(full, {0}), 0, 1);
  ASSERT_EQ(th.weights.size(), 2u);
  EXPECT_NEAR(th.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(th.weights[1], 0.5, 1e-15);

  const auto g = oracle::golden_mean();
  const LeafwiseFamily parry(FiniteRangePotential::constant(g, 0.0));
  const auto x = PeriodicPoint::periodic(g, {1, 0});
  const auto tg = theta_measure(parry, x, 0, 2);
  ASSERT_EQ(tg.weights.size(), 2u);
  const auto& mu = parry.gibbs();
  const double w00 = mu.cylinder_mass(std::vector<Symbol>{1, 0, 0});
  const double w01 = mu.cylinder_mass(std::vector<Symbol>{1, 0, 1});
  EXPECT_NEAR(tg.weights[0], w00 / (w00 + w01), 1e-14);
  EXPECT_NEAR(tg.weights[1], w01 / (w00 + w01), 1e-14);

  std::mt19937_64 rng(4);
  for (const auto& a : {oracle::golden_mean(), oracle::three_symbol()}) {
    const LeafwiseFamily fam(oracle::random_potential(a, Window{-1, 2}, rng));
    const auto h = oracle::random_potential(a, Window{-1, 1}, rng);
    const MarcusOperator op(fam, h);
    for (int t = 0; t < 10; ++t) {
      const auto xx = random_point(a, rng);
      const int n = static_cast<int>(rng() % 5);
      const int m = 1 + static_cast<int>(rng() % 4);
      const auto theta = theta_measure(fam, xx, n, m);
      double total = 0.0;
      double avg = 0.0;
      for (std::size_t i = 0; i < theta.support.size(); ++i) {
        total += theta.weights[i];
        avg += theta.weights[i] * op.apply(n, theta.support[i]);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_NEAR(avg, op.apply(n + m, xx), 1e-10);
    }
  }
}

TEST(Adaptedness, BoundAndPartition) {
  const auto full = TransitionMatrix::full(2);
  const LeafwiseFamily zero(FiniteRangePotential::constant(full, 0.0));
  std::vector<ThetaMeasure> ths;
  for (int m = 2; m <= 4; ++m) ths.push_back(theta_measure(zero, PeriodicPoint::periodic(full, {1}), 0, m));
  const auto r = adaptedness_check(zero, ths, Cylinder{Word{0, {0}}});
  EXPECT_NEAR(r.inf_weight, 0.5, 1e-15);
  EXPECT_NEAR(r.bound, 0.5, 1e-15);

  const auto g = oracle::golden_mean();
  std::mt19937_64 rng(5);
  const LeafwiseFamily fam(oracle::random_potential(g, Window{-1, 1}, rng));
  std::vector<ThetaMeasure> fam_th;
  for (int t = 0; t < 20; ++t)
    for (int m = 3; m <= 5; ++m) fam_th.push_back(theta_measure(fam, random_point(g, rng), 0, m));
  const auto ru = adaptedness_check(fam, fam_th, Cylinder{Word{0, {1}}});
  EXPECT_GT(ru.inf_weight, 0.0);
  EXPECT_GE(ru.inf_weight, ru.bound);
  EXPECT_GT(ru.bound, 0.0);
  for (const auto& th : fam_th) {
    double s = 0.0;
    for (Symbol a = 0; a < g.size(); ++a) s += theta_mass(th, Cylinder{Word{0, {a}}});
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Converge, Examples) {
  const auto full = TransitionMatrix::full(2);
  const LeafwiseFamily zero(FiniteRangePotential::constant(full, 0.0));
  const auto c = converge(zero, FiniteRangePotential::constant(full, 3.0), 1e-12, 10);
  EXPECT_EQ(c.converged_at, 0);
  EXPECT_EQ(c.rows.front().gap, 0.0);
  EXPECT_NEAR(c.limit, 3.0, 1e-15);

  std::mt19937_64 rng(6);
  const auto h = oracle::random_potential(full, Window{-1, 1}, rng);
  const auto r = converge(zero, h, 1e-12, 10);
  ASSERT_TRUE(r.converged_at.has_value());
  EXPECT_LE(*r.converged_at, 2);
  double avg = 0.0;
  h.for_each([&](std::span<const Symbol>, double v) { avg += v / 8.0; });
  EXPECT_NEAR(r.limit, avg, 1e-12);

  const auto g = oracle::golden_mean();
  const auto phi = oracle::random_potential(g, Window{0, 1}, rng);
  const LeafwiseFamily fam(phi);
  const auto h01 = indicator(g, Word{0, {0, 1}});
  const auto rep = converge(fam, h01, 1e-10, 200);
  ASSERT_TRUE(rep.converged_at.has_value());
  EXPECT_NEAR(rep.limit, fam.gibbs().cylinder_mass(std::vector<Symbol>{0, 1}), 1e-8);
  // geometric decay at about the spectral gap rate
  const double rate = fam.gibbs().spectral().gap;
  const auto& rows = rep.rows;
  const std::size_t k = rows.size() - 1;
  const double observed = std::pow(rows[k].gap / rows[k / 2].gap, 1.0 / static_cast<double>(k - k / 2));
  EXPECT_NEAR(observed, rate, 0.05);
}

TEST(Converge, MonotoneBrackets) {
  std::mt19937_64 rng(7);
  for (const auto& a : {oracle::golden_mean(), oracle::three_symbol()}) {
    const LeafwiseFamily fam(oracle::random_potential(a, Window{-1, 1}, rng));
    const auto h = oracle::random_potential(a, Window{-1, 1}, rng);
    const auto rep = converge(fam, h, 1e-12, 300);
    ASSERT_TRUE(rep.converged_at.has_value());
    const double slack = 4e-16 * h.sup_norm();
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      EXPECT_GE(rep.rows[i].c_n, rep.rows[i - 1].c_n - slack);
      EXPECT_LE(rep.rows[i].sup, rep.rows[i - 1].sup + slack);
    }
    EXPECT_LT(rep.defect, 1e-12);
  }
}

TEST(ExpectationEn, TowerPropertyAndPointMass) {
  std::mt19937_64 rng(8);
  const auto g = oracle::golden_mean();
  const LeafwiseFamily fam(oracle::random_potential(g, Window{-1, 2}, rng));
  const auto h = oracle::random_potential(g, Window{-1, 1}, rng);
  const double ref = fam.gibbs().integral(h);
  const auto gibbs = glue(PastMarginal::gibbs(fam.gibbs_ptr()), fam, 8);
  for (int n = 0; n <= 8; ++n) EXPECT_NEAR(expectation_En(gibbs, h, n), ref, 1e-12);

  const auto full = TransitionMatrix::full(2);
  const LeafwiseFamily zero(FiniteRangePotential::constant(full, 0.0));
  const auto hf = oracle::random_potential(full, Window{-2, 0}, rng);
  const auto z = PeriodicPoint(full, {0, 1, 1}, Word{-4, {1, 0, 0, 1, 0}}, {1});
  const auto point = glue(PastMarginal::point(z, full), zero, 6);
  for (int n = 0; n <= 6; ++n) EXPECT_NEAR(expectation_En(point, hf, n), apply_Rn(zero, hf, n, z.shifted(-n)), 1e-14);
  const auto rep = converge(zero, hf, 1e-12, 20);
  ASSERT_TRUE(rep.converged_at.has_value());
  EXPECT_NEAR(expectation_En(point, hf, *rep.converged_at), zero.gibbs().integral(hf), 1e-12);

  std::map<std::vector<Symbol>, double> shallow{{{0, 1}, 1.0}};
  try {
    const auto tab = glue(PastMarginal::table(g, {std::map<std::vector<Symbol>, double>{{{1}, 1.0}}, shallow}), fam, 2);
    expectation_En(tab, h, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_depth);
  }
}

TEST(Rigidity, ExperimentTable) {
  std::mt19937_64 rng(9);
  const auto g = oracle::golden_mean();
  const auto bern = FiniteRangePotential::tabulate(g, Window{0, 1}, [](std::span<const Symbol> w) {
    return w[0] == 0 ? (w[1] == 0 ? -0.2 : 0.3) : 0.1;
  });
  const LeafwiseFamily fam(bern);
  std::vector<NamedMarginal> ms{{"gibbs", PastMarginal::gibbs(fam.gibbs_ptr())}};
  for (int i = 0; i < 5; ++i) ms.push_back({"random" + std::to_string(i), PastMarginal::random_markov(g, 100 + i)});
  // concentrated on the rarest past block
  ms.push_back({"rare", PastMarginal::point(PeriodicPoint::periodic(g, {1, 0}), g)});
  std::vector<NamedObservable> obs;
  for (int i = 0; i < 3; ++i) obs.push_back({"h" + std::to_string(i), oracle::random_potential(g, Window{-1, 1}, rng)});
  const auto rep = rigidity_experiment(fam, ms, obs, 1e-6, 40, 4);
  EXPECT_TRUE(rep.all_pass);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.n, 40);
    EXPECT_LT(r.defect, 1e-6);
    if (r.marginal == "gibbs") {
      EXPECT_LT(r.defect, 1e-10);
    }
  }
  const auto serial = rigidity_experiment(fam, ms, obs, 1e-6, 40, 1);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) EXPECT_EQ(rep.rows[i].value, serial.rows[i].value);
}
