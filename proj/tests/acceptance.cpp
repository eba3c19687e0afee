/**
 * @file acceptance.cpp
 * @brief Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on
 *        any failure.
 */
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sftherm/cli.hpp"
#include "sftherm/sftherm.hpp"

using namespace sftherm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

PeriodicPoint random_point(const TransitionMatrix& a, std::mt19937_64& rng, int len = 10) {
  std::vector<Symbol> w{static_cast<Symbol>(rng() % static_cast<unsigned>(a.size()))};
  while (static_cast<int>(w.size()) < len) {
    const auto& s = a.successors(w.back());
    w.push_back(s[rng() % s.size()]);
  }
  return PeriodicPoint::from_block(a, Word{1 - len, w});
}

std::vector<TransitionMatrix> mixing_matrices() {
  std::vector<TransitionMatrix> out{TransitionMatrix::full(2), oracle::golden_mean(), oracle::three_symbol(),
                                    TransitionMatrix::full(3), TransitionMatrix::full(4),
                                    TransitionMatrix({{1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 0, 1}, {1, 1, 1, 0}})};
  std::mt19937_64 rng(2024);
  while (out.size() < 16) {
    const int d = 2 + static_cast<int>(rng() % 3);
    std::vector<std::vector<int>> rows(d, std::vector<int>(d));
    for (auto& r : rows)
      for (int& v : r) v = rng() % 2;
    try {
      TransitionMatrix a(rows);
      if (mixing_exponent(a)) out.push_back(a);
    } catch (const Error&) {
    }
  }
  return out;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome pressure_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& a : mixing_matrices()) {
    const GibbsMeasure g(FiniteRangePotential::constant(a, 0.0));
    worst = std::max(worst, std::abs(g.pressure() - std::log(oracle::spectral_radius(oracle::to_eigen(a)))));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-10 && t < 1.0, "max defect " + num(worst) + ", " + num(t) + " s"};
}

Outcome variational_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  double worst = 0.0;
  int count = 0;
  for (const auto& a : {TransitionMatrix::full(2), oracle::golden_mean()}) {
    for (int i = 0; i < 20; ++i) {
      const Window w = i % 2 ? Window{0, 1} : Window{-1, 0};
      const auto vc = entropy_and_variational_check(GibbsMeasure(oracle::random_potential(a, w, rng)));
      worst = std::max(worst, vc.defect);
      ++count;
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-8 && t < 5.0, std::to_string(count) + " potentials, max defect " + num(worst) + ", " + num(t) + " s"};
}

Outcome gibbs_bounds() {
  std::mt19937_64 rng(3);
  long violations = 0;
  long checked = 0;
  for (const auto& a : {oracle::golden_mean(), oracle::three_symbol()}) {
    const GibbsMeasure g(oracle::random_potential(a, Window{-1, 1}, rng));
    const double k = g.gibbs_constant();
    const auto& psi = g.normalized_potential();
    const int s = g.block_length();
    for (int n = 1; n <= 10; ++n) {
      for_each_word(a, n, [&](std::span<const Symbol> w) {
        const double m = g.cylinder_mass(w);
        for_each_extension(a, std::vector<Symbol>(w.begin(), w.end()), n + s, [&](std::span<const Symbol> x) {
          const Word block{1, {x.begin(), x.end()}};
          double sum = 0.0;
          for (int j = 0; j < n; ++j) sum += psi.at(block, j);
          const double ratio = m / std::exp(sum);
          ++checked;
          if (!(ratio >= 1.0 / k && ratio <= k)) ++violations;
        });
      });
    }
  }
  return {violations == 0, std::to_string(checked) + " cylinder/extension pairs, " + std::to_string(violations) +
                               " violations"};
}

Outcome coboundary_identities() {
  std::mt19937_64 rng(4);
  double sinai = 0.0;
  double flow = 0.0;
  for (const auto& a : {TransitionMatrix::full(2), oracle::golden_mean(), oracle::three_symbol()}) {
    for (Window w : {Window{-1, 0}, Window{-2, 1}, Window{-1, 2}}) {
      const auto phi = oracle::random_potential(a, w, rng);
      const auto c = sinai_reduce(phi, Side::plus);
      for_each_periodic_point(a, 6, [&](const PeriodicPoint& x) {
        sinai = std::max(sinai, std::abs(c.plus_side.at(x) - phi.at(x) - c.transfer.at(x) + c.transfer.at(x, 1)));
      });
    }
    std::uniform_real_distribution<double> u(1.0, 2.0);
    const RoofFunction roof(FiniteRangePotential::tabulate(a, Window{-1, 1}, [&](std::span<const Symbol>) { return u(rng); }));
    const FlowPotential fp({oracle::random_potential(a, Window{-1, 0}, rng), oracle::random_potential(a, Window{-1, 0}, rng)});
    flow = std::max(flow, coboundary_residual(coboundary_k(fp, roof), 6));
  }
  return {sinai < 1e-10 && flow < 1e-10, "Sinai residual " + num(sinai) + ", flow k residual " + num(flow)};
}

Outcome quasi_invariance() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  int points = 0;
  for (const auto& a : {oracle::golden_mean(), oracle::three_symbol()}) {
    const LeafwiseFamily fam(oracle::random_potential(a, Window{-1, 1}, rng));
    for (int i = 0; i < 50; ++i, ++points) worst = std::max(worst, quasi_invariance_check(fam, random_point(a, rng), 5));
  }
  return {worst < 1e-9, std::to_string(points) + " base points at depth 5, max relative defect " + num(worst)};
}

Outcome theta_machinery() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  int triples = 0;
  std::vector<std::pair<TransitionMatrix, FiniteRangePotential>> systems;
  for (const auto& a : {oracle::golden_mean(), oracle::three_symbol()})
    systems.emplace_back(a, oracle::random_potential(a, Window{-1, 1}, rng));
  for (const auto& [a, phi] : systems) {
    const LeafwiseFamily fam(phi);
    const MarcusOperator op(fam, oracle::random_potential(a, Window{-1, 1}, rng));
    for (int i = 0; i < 50; ++i, ++triples) {
      const auto x = random_point(a, rng);
      const int n = static_cast<int>(rng() % 5);
      const int m = 1 + static_cast<int>(rng() % 4);
      const auto th = theta_measure(fam, x, n, m);
      double avg = 0.0;
      for (std::size_t k = 0; k < th.support.size(); ++k) avg += th.weights[k] * op.apply(n, th.support[k]);
      worst = std::max(worst, std::abs(avg - op.apply(n + m, x)));
    }
  }
  bool adapted = true;
  std::string bounds;
  int cylinders = 0;
  for (const auto& [a, phi] : systems) {
    const LeafwiseFamily fam(phi);
    const int mix = *mixing_exponent(a);
    std::vector<ThetaMeasure> ths;
    for (int i = 0; i < 20; ++i)
      for (int m = mix + 1; m <= mix + 3; ++m) ths.push_back(theta_measure(fam, random_point(a, rng), 0, m));
    for (Symbol s = 0; s < a.size(); ++s, ++cylinders) {
      const auto r = adaptedness_check(fam, ths, Cylinder{Word{0, {s}}});
      adapted = adapted && r.bound > 0.0 && r.inf_weight >= r.bound;
      bounds += " " + num(r.inf_weight) + ">=" + num(r.bound);
    }
  }
  return {worst < 1e-10 && adapted && cylinders >= 5,
          std::to_string(triples) + " (x,n,m), composition defect " + num(worst) + "; " + std::to_string(cylinders) +
              " cylinders, inf Theta(U) vs bound:" + bounds};
}

struct System {
  std::string name;
  std::shared_ptr<LeafwiseFamily> family;
  std::vector<NamedObservable> observables;
};

std::vector<System> convergence_systems() {
  std::mt19937_64 rng(7);
  std::vector<System> out;
  const std::vector<std::pair<std::string, TransitionMatrix>> mats{
      {"full2", TransitionMatrix::full(2)}, {"golden", oracle::golden_mean()}, {"three", oracle::three_symbol()}};
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const auto& [name, a] = mats[i];
    System s{name, std::make_shared<LeafwiseFamily>(oracle::random_potential(a, Window{-1, 0}, rng, 0.5)), {}};
    const int count = i == 0 ? 4 : 3;
    for (int k = 0; k < count; ++k) {
      const Window w = k % 2 ? Window{0, 1} : Window{-1, 0};
      s.observables.push_back({name + "_h" + std::to_string(k), oracle::random_potential(a, w, rng)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

Outcome marcus_convergence(const std::vector<System>& systems) {
  const auto t0 = Clock::now();
  bool monotone = true;
  double worst = 0.0;
  int worst_n = 0;
  int count = 0;
  bool all_converged = true;
  for (const auto& s : systems) {
    for (const auto& ob : s.observables) {
      ++count;
      const auto r = converge(*s.family, ob.h, 1e-7, 30, ob.id);
      all_converged = all_converged && r.converged_at.has_value();
      if (r.converged_at) worst_n = std::max(worst_n, *r.converged_at);
      worst = std::max(worst, r.defect);
      const double slack = 4e-16 * ob.h.sup_norm();
      for (std::size_t i = 1; i < r.rows.size(); ++i) {
        monotone = monotone && r.rows[i].gap <= r.rows[i - 1].gap + 2 * slack;
        monotone = monotone && r.rows[i].c_n >= r.rows[i - 1].c_n - slack;
      }
    }
  }
  const double t = seconds_since(t0);
  return {all_converged && monotone && worst < 1e-6 && t < 60.0,
          std::to_string(count) + " observables over " + std::to_string(systems.size()) + " systems, monotone " +
              (monotone ? "yes" : "no") + ", max defect " + num(worst) + ", converged by n = " +
              std::to_string(worst_n) + ", " + num(t) + " s"};
}

Outcome rigidity(const std::vector<System>& systems) {
  double worst = 0.0;
  bool pass = true;
  int pairs = 0;
  for (const auto& s : systems) {
    const auto& fam = *s.family;
    const auto& a = fam.matrix();
    std::vector<NamedMarginal> ms;
    for (std::uint64_t k = 0; k < 3; ++k) ms.push_back({"random" + std::to_string(k), PastMarginal::random_markov(a, 900 + k)});
    // all mass on a past ending in the least likely block of length 4
    std::vector<Symbol> rare;
    double least = 2.0;
    for_each_word(a, 4, [&](std::span<const Symbol> w) {
      const double m = fam.gibbs().cylinder_mass(w);
      if (m < least) {
        least = m;
        rare.assign(w.begin(), w.end());
      }
    });
    ms.push_back({"rare", PastMarginal::point(PeriodicPoint::from_block(a, Word{-3, rare}), a)});
    // backward chain that always steps to the lowest admissible predecessor
    std::vector<std::vector<double>> back(static_cast<std::size_t>(a.size()), std::vector<double>(a.size(), 0.0));
    for (Symbol b = 0; b < a.size(); ++b) back[b][a.predecessors(b).front()] = 1.0;
    std::vector<double> init(a.size(), 0.0);
    init.back() = 1.0;
    ms.push_back({"lowest_predecessor", PastMarginal::markov(a, init, back)});
    const auto rep = rigidity_experiment(fam, ms, s.observables, 1e-7, 30, 4);
    pass = pass && rep.all_pass;
    for (const auto& r : rep.rows) {
      ++pairs;
      worst = std::max(worst, r.defect);
      pass = pass && r.defect < 1e-6;
    }
  }
  return {pass, std::to_string(pairs) + " (marginal, observable) pairs, 5 marginals per system, max defect " + num(worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const fs::path configs{SFTHERM_CONFIG_DIR};
  const fs::path root = fs::temp_directory_path() / "sftherm_acceptance";
  fs::remove_all(root);
  std::vector<std::string> files;
  bool pass = true;
  for (const std::string run : {"a", "b"}) {
    const std::string out = (root / run).string();
    const std::vector<std::vector<std::string>> cmds{
        {"gibbs", "--config", (configs / "golden_mean.json").string()},
        {"marcus", "--config", (configs / "golden_mean.json").string()},
        {"rigidity", "--config", (configs / "golden_mean.json").string(), "--tol", "1e-7"},
        {"leafwise-check", "--config", (configs / "three_symbol.json").string(), "--points", "20", "--tol", "1e-9"},
        {"birkhoff", "--config", (configs / "suspension_golden.json").string(), "--orbits", "32", "--horizon", "60"}};
    for (auto args : cmds) {
      args.insert(args.begin(), "sftherm");
      for (const std::string extra : {"--out", out.c_str(), "--seed", "17"}) args.push_back(extra);
      std::vector<const char*> argv;
      for (const auto& s : args) argv.push_back(s.c_str());
      pass = pass && cli::run(static_cast<int>(argv.size()), argv.data()) == 0;
    }
  }
  int compared = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    if (e.path().extension() != ".csv") continue;
    ++compared;
    pass = pass && slurp(e.path()) == slurp(root / "b" / e.path().filename());
  }
  return {pass && compared >= 6, std::to_string(compared) + " CSV files byte-identical across two runs"};
}

}  // namespace

int main() {
  const auto systems = convergence_systems();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"pressure equals log spectral radius for zero potential", pressure_oracle},
      {"variational identity P = h + int phi", variational_identity},
      {"Gibbs bounds with constant from eigendata", gibbs_bounds},
      {"Sinai and suspension coboundary identities", coboundary_identities},
      {"quasi-invariance of leaf measures", quasi_invariance},
      {"Theta composition identity and adaptedness", theta_machinery},
      {"Marcus operator convergence", [&] { return marcus_convergence(systems); }},
      {"rigidity under non-invariant past marginals", [&] { return rigidity(systems); }},
      {"byte-identical CSV reruns", reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %zu: %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
