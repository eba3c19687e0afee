/**
 * @file cli.hpp
 * @brief Batch driver behind the `sftherm` executable.
 *
 * Subcommands: pressure, gibbs, marcus, rigidity, leafwise-check, birkhoff.
 * Each reads a schema-1 config, writes CSV/JSON into --out together with
 * <command>.manifest.json, and returns
 *   0 success, 2 schema/input error, 3 non-mixing matrix, 4 tolerance failure.
 */
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sftherm/error.hpp"
#include "sftherm/io.hpp"
#include "sftherm/leafwise.hpp"
#include "sftherm/marcus.hpp"
#include "sftherm/parallel.hpp"
#include "sftherm/suspension.hpp"
#include "sftherm/transfer.hpp"

namespace sftherm::cli {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int { ok = 0, schema_error = 2, non_mixing = 3, tolerance_failure = 4 };

struct Options {
  std::string command;
  std::string config;
  std::string out = ".";
  double tol = 1e-8;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int depth = -1;
  int n_max = -1;
  int points = -1;
  double horizon = -1.0;
  int orbits = -1;
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_mixing:
    case ErrorCode::non_convergence: return non_mixing;
    default: return schema_error;
  }
}

namespace detail {

using io::format_double;
using json = nlohmann::json;

struct Run {
  const Options& opt;
  io::SystemConfig config;
  std::string config_hash;
  std::vector<std::string> outputs;
  json summary = json::object();

  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (std::filesystem::path(opt.out) / name).string();
  }
};

inline void require_mixing(const TransitionMatrix& a) {
  if (!mixing_exponent(a)) {
    const int d = a.size();
    throw Error(ErrorCode::not_mixing, "no power A^k with k <= " + std::to_string(std::max(1, d * d - 2 * d + 2)) +
                                           " is strictly positive, so A is not primitive");
  }
}

inline int cmd_pressure(Run& run) {
  const GibbsMeasure g(run.config.potential);
  const auto& sd = g.spectral();
  const auto vc = entropy_and_variational_check(g);
  run.summary = {{"lambda", sd.lambda},
                 {"pressure", sd.pressure},
                 {"gap", sd.gap},
                 {"right_residual", sd.right_residual},
                 {"left_residual", sd.left_residual},
                 {"iterations", sd.iterations},
                 {"block_length", sd.block_length},
                 {"entropy", vc.entropy},
                 {"integral", vc.integral},
                 {"variational_defect", vc.defect}};
  io::save_json(run.path("pressure.json"), run.summary);
  std::cout << "pressure " << format_double(sd.pressure) << " lambda " << format_double(sd.lambda) << '\n';
  const bool pass = sd.right_residual < run.opt.tol && sd.left_residual < run.opt.tol && vc.defect < run.opt.tol;
  return pass ? ok : tolerance_failure;
}

inline int cmd_gibbs(Run& run) {
  const int depth = run.opt.depth > 0 ? run.opt.depth : run.config.settings.depth;
  const GibbsMeasure g(run.config.potential);
  io::CsvWriter csv({"word", "mass"});
  double total = 0.0;
  for_each_word(run.config.a, depth, [&](std::span<const Symbol> w) {
    const double m = g.cylinder_mass(w);
    total += m;
    csv.row({io::word_key(w, run.config.a.size()), format_double(m)});
  });
  csv.save(run.path("gibbs.csv"));
  run.summary = {{"depth", depth}, {"rows_total_mass", total}};
  std::cout << "gibbs depth " << depth << " total mass " << format_double(total) << '\n';
  return std::abs(total - 1.0) < run.opt.tol ? ok : tolerance_failure;
}

inline std::vector<NamedObservable> observables(const Run& run) {
  if (run.config.observables.empty()) throw Error(ErrorCode::schema, "config has no observables");
  std::vector<NamedObservable> out;
  for (const auto& [id, h] : run.config.observables) out.push_back(NamedObservable{id, h});
  return out;
}

inline int cmd_marcus(Run& run) {
  const int n_max = run.opt.n_max >= 0 ? run.opt.n_max : run.config.settings.n_max;
  const LeafwiseFamily family(run.config.potential);
  const auto obs = observables(run);
  std::vector<ObservableReport> reports(obs.size());
  parallel_for(obs.size(), run.opt.threads, [&](std::size_t i) {
    reports[i] = converge(family, obs[i].h, run.opt.tol, n_max, obs[i].id);
  });
  io::CsvWriter csv({"observable", "n", "inf", "sup", "gap", "c_n", "reference", "defect"});
  bool all = true;
  json list = json::array();
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      csv.row({r.id, std::to_string(row.n), format_double(row.inf), format_double(row.sup), format_double(row.gap),
               format_double(row.c_n), format_double(r.reference),
               format_double(std::abs(0.5 * (row.inf + row.sup) - r.reference))});
    }
    all = all && r.converged_at.has_value() && r.defect < run.opt.tol;
    list.push_back({{"observable", r.id},
                    {"converged_at", r.converged_at ? json(*r.converged_at) : json(nullptr)},
                    {"limit", r.limit},
                    {"reference", r.reference},
                    {"defect", r.defect}});
    std::cout << r.id << ": " << (r.converged_at ? "converged at n = " + std::to_string(*r.converged_at)
                                                 : std::string("not converged"))
              << ", defect " << format_double(r.defect) << '\n';
  }
  csv.save(run.path("marcus.csv"));
  run.summary = {{"n_max", n_max}, {"observables", list}};
  return all ? ok : tolerance_failure;
}

inline int cmd_rigidity(Run& run) {
  const int n_max = run.opt.n_max >= 0 ? run.opt.n_max : run.config.settings.n_max;
  const LeafwiseFamily family(run.config.potential);
  const auto obs = observables(run);
  if (run.config.marginals.empty()) throw Error(ErrorCode::schema, "config has no marginals");
  std::vector<NamedMarginal> marginals;
  for (std::size_t i = 0; i < run.config.marginals.size(); ++i) {
    const auto& spec = run.config.marginals[i];
    marginals.push_back(NamedMarginal{spec.id, io::build_marginal(spec, family, run.opt.seed, i)});
  }
  const auto rep = rigidity_experiment(family, marginals, obs, run.opt.tol, n_max, run.opt.threads);
  io::CsvWriter csv({"marginal", "kind", "observable", "n", "value", "reference", "defect", "pass"});
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& r = rep.rows[k];
    csv.row({r.marginal, marginals[k / obs.size()].marginal.kind(), r.observable, std::to_string(r.n),
             format_double(r.value), format_double(r.reference), format_double(r.defect), r.pass ? "1" : "0"});
  }
  csv.save(run.path("rigidity.csv"));
  double worst = 0.0;
  for (const auto& r : rep.rows) worst = std::max(worst, r.defect);
  run.summary = {{"n_max", n_max}, {"pairs", rep.rows.size()}, {"max_defect", worst}, {"all_pass", rep.all_pass}};
  std::cout << "rigidity: " << rep.rows.size() << " pairs, max defect " << format_double(worst)
            << (rep.all_pass ? ", all within tolerance" : ", FAILED") << '\n';
  return rep.all_pass ? ok : tolerance_failure;
}

/// Base point i: a seeded random admissible past block, continued by
/// reference cycles.
inline PeriodicPoint sample_base_point(const TransitionMatrix& a, int length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Symbol> w{static_cast<Symbol>(rng() % static_cast<std::uint64_t>(a.size()))};
  while (static_cast<int>(w.size()) < length) {
    const auto& succ = a.successors(w.back());
    w.push_back(succ[rng() % succ.size()]);
  }
  return PeriodicPoint::from_block(a, Word{1 - length, std::move(w)});
}

inline int cmd_leafwise_check(Run& run) {
  const int depth = run.opt.depth > 0 ? run.opt.depth : 5;
  const int points = run.opt.points > 0 ? run.opt.points : run.config.settings.points;
  const LeafwiseFamily family(run.config.potential);
  const TransitionMatrix& a = run.config.a;
  const int block = family.past_dependence() + 2 - std::min(0, family.past_interaction().window().first);
  std::vector<PeriodicPoint> bases;
  for (int i = 0; i < points; ++i)
    bases.push_back(sample_base_point(a, block, derive_seed(run.opt.seed, static_cast<std::uint64_t>(i))));
  std::vector<double> defects(bases.size());
  std::vector<LeafMeasure> leaves(bases.size(), LeafMeasure{bases.front(), 0, 0.0, {}});
  parallel_for(bases.size(), run.opt.threads, [&](std::size_t i) {
    defects[i] = quasi_invariance_check(family, bases[i], depth);
    leaves[i] = family.materialize(bases[i], std::min(depth, 4));
  });
  io::CsvWriter summary({"point", "past", "multiplier", "total", "defect"});
  io::CsvWriter masses({"point", "future", "mass"});
  double worst = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const auto past = bases[i].window(1 - block, 0).symbols;
    summary.row({std::to_string(i), io::word_key(past, a.size()), format_double(family.multiplier(bases[i])),
                 format_double(leaves[i].total), format_double(defects[i])});
    for (const auto& [w, m] : leaves[i].masses) masses.row({std::to_string(i), io::word_key(w, a.size()), format_double(m)});
    worst = std::max(worst, defects[i]);
  }
  summary.save(run.path("leafwise.csv"));
  masses.save(run.path("leaf_masses.csv"));
  run.summary = {{"depth", depth},
                 {"points", points},
                 {"max_relative_defect", worst},
                 {"normalization", "nu_z[b] = exp(-Q(z)) sum exp(F(z b')) mu[b'], multiplier exp(phi(z) - P)"}};
  std::cout << "quasi-invariance: max relative defect " << format_double(worst) << " over " << points
            << " base points, depth " << depth << '\n';
  return worst < run.opt.tol ? ok : tolerance_failure;
}

inline int cmd_birkhoff(Run& run) {
  const TransitionMatrix& a = run.config.a;
  const RoofFunction roof = run.config.roof ? *run.config.roof : RoofFunction(FiniteRangePotential::constant(a, 1.0));
  const FlowPotential phi =
      run.config.flow_potential ? *run.config.flow_potential : FlowPotential::height_constant(run.config.potential);
  const double horizon = run.opt.horizon > 0 ? run.opt.horizon : run.config.settings.horizon;
  const int orbits = run.opt.orbits > 0 ? run.opt.orbits : run.config.settings.orbits;
  const GibbsMeasure mu(run.config.potential);
  const auto res = birkhoff_cross_check(phi, roof, mu, horizon, orbits, run.opt.seed, run.opt.threads);
  const auto cob = coboundary_k(phi, roof);
  const double cob_residual = coboundary_residual(cob, 6);
  io::CsvWriter csv({"orbit", "average"});
  for (std::size_t i = 0; i < res.orbit_averages.size(); ++i)
    csv.row({std::to_string(i), format_double(res.orbit_averages[i])});
  csv.save(run.path("birkhoff.csv"));
  run.summary = {{"flow_average", res.flow_average},
                 {"reference", res.reference},
                 {"defect", res.defect},
                 {"standard_error", res.standard_error},
                 {"within_3_se", res.defect <= 3.0 * res.standard_error},
                 {"horizon", horizon},
                 {"orbits", orbits},
                 {"seed", run.opt.seed},
                 {"coboundary_k_residual", cob_residual}};
  io::save_json(run.path("birkhoff.json"), run.summary);
  std::cout << "flow average " << format_double(res.flow_average) << " reference " << format_double(res.reference)
            << " (se " << format_double(res.standard_error) << ")\n";
  return cob_residual < run.opt.tol ? ok : tolerance_failure;
}

}  // namespace detail

/// Runs one subcommand; errors are reported on stderr and mapped to exit codes.
inline int execute(const Options& opt) {
  using detail::json;
  const auto started = std::chrono::steady_clock::now();
  try {
    if (!(opt.tol > 0.0)) throw Error(ErrorCode::schema, "--tol must be positive");
    std::ifstream in(opt.config, std::ios::binary);
    if (!in) throw Error(ErrorCode::schema, "cannot read config '" + opt.config + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::schema, std::string("config is not valid JSON: ") + e.what());
    }
    detail::Run run{opt, io::parse_config(j), io::hex64(io::fnv1a(text)), {}, json::object()};
    detail::require_mixing(run.config.a);
    std::filesystem::create_directories(opt.out);

    int code = ok;
    if (opt.command == "pressure") code = detail::cmd_pressure(run);
    else if (opt.command == "gibbs") code = detail::cmd_gibbs(run);
    else if (opt.command == "marcus") code = detail::cmd_marcus(run);
    else if (opt.command == "rigidity") code = detail::cmd_rigidity(run);
    else if (opt.command == "leafwise-check") code = detail::cmd_leafwise_check(run);
    else if (opt.command == "birkhoff") code = detail::cmd_birkhoff(run);
    else throw Error(ErrorCode::schema, "unknown command '" + opt.command + "'");

    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    json manifest = {{"tool", "sftherm"},
                     {"version", version},
                     {"command", opt.command},
                     {"config", opt.config},
                     {"config_hash", run.config_hash},
                     {"seed", opt.seed},
                     {"tolerances", {{"tol", opt.tol}}},
                     {"threads", opt.threads},
                     {"timing_ms", {{opt.command, ms}}},
                     {"outputs", run.outputs},
                     {"summary", run.summary},
                     {"exit_code", code}};
    io::save_json((std::filesystem::path(opt.out) / (opt.command + ".manifest.json")).string(), manifest);
    return code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return schema_error;
  }
}

/// Parses argv with CLI11 and runs the chosen subcommand.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Thermodynamic formalism on mixing subshifts of finite type"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "system definition (JSON, schema 1)")->required();
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--tol", opt.tol, "tolerance")->capture_default_str();
    sub->add_option("--seed", opt.seed, "seed for all randomness")->capture_default_str();
    sub->add_option("--threads", opt.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* pressure = app.add_subcommand("pressure", "pressure, leading eigendata, variational check");
  common(pressure);
  auto* gibbs = app.add_subcommand("gibbs", "equilibrium-state cylinder masses");
  common(gibbs);
  gibbs->add_option("--depth", opt.depth, "word length");
  auto* marcus = app.add_subcommand("marcus", "convergence of R_n h for every observable");
  common(marcus);
  marcus->add_option("--n-max", opt.n_max, "largest n");
  auto* rigidity = app.add_subcommand("rigidity", "E_n h against every past marginal");
  common(rigidity);
  rigidity->add_option("--n-max", opt.n_max, "largest n");
  auto* leaf = app.add_subcommand("leafwise-check", "quasi-invariance of the leaf measures");
  common(leaf);
  leaf->add_option("--depth", opt.depth, "cylinder depth");
  leaf->add_option("--points", opt.points, "number of base points");
  auto* birk = app.add_subcommand("birkhoff", "flow averages against the equilibrium reference");
  common(birk);
  birk->add_option("--horizon", opt.horizon, "orbit length");
  birk->add_option("--orbits", opt.orbits, "number of orbits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : schema_error;
  }
  opt.command = app.get_subcommands().front()->get_name();
  return execute(opt);
}

}  // namespace sftherm::cli
