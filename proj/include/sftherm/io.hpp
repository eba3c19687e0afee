/**
 * @file io.hpp
 * @brief Config ingestion (schema 1) and deterministic CSV / JSON output.
 *
 * Config layout:
 *
 *   { "schema": 1, "d": 2, "A": [[1,1],[1,0]],
 *     "potential": {"window": [p, q], "table": {"01": 0.5, ...}},
 *     "roof": {...same shape, strictly positive...},
 *     "flow_potential": {"window": [p, q], "coefficients": [{table}, {table}, ...]},
 *     "observables": [{"id": "h", "window": [p, q], "table": {...}},
 *                     {"id": "c", "cylinder": {"start": 0, "symbols": [0, 1]}}],
 *     "marginals": [{"id": "m", "kind": "gibbs" | "point" | "markov" | "random_markov" | "table", ...}],
 *     "settings": {"n_max": 60, "depth": 3, "points": 50, "horizon": 200, "orbits": 200} }
 *
 * Table keys are words written as digit strings ("0110"), or as
 * comma-separated symbols when d > 10. Symbols are 0-based.
 */
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sftherm/error.hpp"
#include "sftherm/leafwise.hpp"
#include "sftherm/potential.hpp"
#include "sftherm/sft_core.hpp"
#include "sftherm/suspension.hpp"

namespace sftherm::io {

using json = nlohmann::json;

struct Settings {
  int n_max = 60;
  int depth = 3;
  int points = 50;
  double horizon = 200.0;
  int orbits = 200;
};

struct MarginalSpec {
  std::string id;
  json body;
};

struct SystemConfig {
  TransitionMatrix a;
  FiniteRangePotential potential;
  std::optional<RoofFunction> roof;
  std::optional<FlowPotential> flow_potential;
  std::vector<std::pair<std::string, FiniteRangePotential>> observables;
  std::vector<MarginalSpec> marginals;
  Settings settings;
};

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string word_key(std::span<const Symbol> w, int d) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (d > 10 && i > 0) s += ',';
    s += std::to_string(w[i]);
  }
  return s;
}

inline std::vector<Symbol> parse_word_key(const std::string& key, int d) {
  std::vector<Symbol> out;
  if (d > 10 || key.find(',') != std::string::npos) {
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, ',')) {
      int v = 0;
      const auto r = std::from_chars(part.data(), part.data() + part.size(), v);
      if (r.ec != std::errc() || r.ptr != part.data() + part.size()) {
        throw Error(ErrorCode::schema, "bad word key '" + key + "'");
      }
      out.push_back(v);
    }
  } else {
    for (char c : key) {
      if (c < '0' || c > '9') throw Error(ErrorCode::schema, "bad word key '" + key + "'");
      out.push_back(c - '0');
    }
  }
  for (Symbol s : out)
    if (s < 0 || s >= d) throw Error(ErrorCode::alphabet_mismatch, "symbol out of range in '" + key + "'");
  return out;
}

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::schema, where + ": missing \"" + key + "\"");
  return j.at(key);
}

inline int require_int(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer()) throw Error(ErrorCode::schema, where + ": \"" + key + "\" must be an integer");
  return v.get<int>();
}

inline Window parse_window(const json& j, const std::string& where) {
  const json& w = require(j, "window", where);
  if (!w.is_array() || w.size() != 2 || !w[0].is_number_integer() || !w[1].is_number_integer()) {
    throw Error(ErrorCode::schema, where + ": window must be [p, q]");
  }
  const int p = w[0].get<int>();
  const int q = w[1].get<int>();
  if (p < 0 || q < 0) throw Error(ErrorCode::schema, where + ": window entries must be nonnegative");
  return Window::from_pq(p, q);
}

inline std::map<std::vector<Symbol>, double> parse_table(const json& t, int d, const std::string& where) {
  if (!t.is_object()) throw Error(ErrorCode::schema, where + ": table must be an object");
  std::map<std::vector<Symbol>, double> out;
  for (const auto& [key, value] : t.items()) {
    if (!value.is_number()) throw Error(ErrorCode::schema, where + ": table values must be numbers");
    out.emplace(parse_word_key(key, d), value.get<double>());
  }
  return out;
}

inline FiniteRangePotential parse_potential(const json& j, const TransitionMatrix& a, const std::string& where) {
  const Window w = parse_window(j, where);
  return FiniteRangePotential::from_table(a, w, parse_table(require(j, "table", where), a.size(), where));
}

}  // namespace detail

inline TransitionMatrix parse_matrix(const json& j) {
  const int d = detail::require_int(j, "d", "config");
  if (d < 1) throw Error(ErrorCode::schema, "config: d must be positive");
  const json& rows = detail::require(j, "A", "config");
  if (!rows.is_array()) throw Error(ErrorCode::schema, "config: A must be an array of rows");
  std::vector<std::vector<int>> m;
  for (const auto& row : rows) {
    if (!row.is_array()) throw Error(ErrorCode::schema, "config: A must be an array of rows");
    std::vector<int> r;
    for (const auto& v : row) {
      if (!v.is_number_integer()) throw Error(ErrorCode::schema, "config: A entries must be 0 or 1");
      r.push_back(v.get<int>());
    }
    m.push_back(std::move(r));
  }
  if (static_cast<int>(m.size()) != d) throw Error(ErrorCode::non_square_matrix, "config: A has the wrong number of rows");
  return TransitionMatrix(m);
}

inline FiniteRangePotential cylinder_indicator(const TransitionMatrix& a, const Word& w) {
  if (w.empty() || !a.admissible(w.symbols)) throw Error(ErrorCode::inadmissible_word, "observable cylinder");
  return FiniteRangePotential::tabulate(a, Window{w.start, w.last()}, [&](std::span<const Symbol> s) {
    return std::equal(s.begin(), s.end(), w.symbols.begin()) ? 1.0 : 0.0;
  });
}

inline SystemConfig parse_config(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::schema, "config must be a JSON object");
  if (detail::require_int(j, "schema", "config") != 1) throw Error(ErrorCode::schema, "unsupported schema version");
  SystemConfig c;
  c.a = parse_matrix(j);
  const int d = c.a.size();
  c.potential = j.contains("potential") ? detail::parse_potential(j.at("potential"), c.a, "potential")
                                        : FiniteRangePotential::constant(c.a, 0.0);
  if (j.contains("roof")) c.roof.emplace(detail::parse_potential(j.at("roof"), c.a, "roof"));
  if (j.contains("flow_potential")) {
    const json& fp = j.at("flow_potential");
    const Window w = detail::parse_window(fp, "flow_potential");
    const json& coeffs = detail::require(fp, "coefficients", "flow_potential");
    if (!coeffs.is_array() || coeffs.empty()) {
      throw Error(ErrorCode::schema, "flow_potential: coefficients must be a nonempty array");
    }
    std::vector<FiniteRangePotential> cs;
    for (const auto& t : coeffs)
      cs.push_back(FiniteRangePotential::from_table(c.a, w, detail::parse_table(t, d, "flow_potential")));
    c.flow_potential.emplace(std::move(cs));
  }
  if (j.contains("observables")) {
    for (const auto& o : j.at("observables")) {
      const std::string id = detail::require(o, "id", "observable").get<std::string>();
      if (o.contains("cylinder")) {
        const json& cy = o.at("cylinder");
        Word w{detail::require_int(cy, "start", "observable " + id),
               detail::require(cy, "symbols", "observable " + id).get<std::vector<int>>()};
        for (Symbol s : w.symbols)
          if (!c.a.valid_symbol(s)) throw Error(ErrorCode::alphabet_mismatch, "observable " + id + ": bad symbol");
        c.observables.emplace_back(id, cylinder_indicator(c.a, w));
      } else {
        c.observables.emplace_back(id, detail::parse_potential(o, c.a, "observable " + id));
      }
    }
  }
  if (j.contains("marginals")) {
    for (const auto& m : j.at("marginals")) {
      MarginalSpec spec{detail::require(m, "id", "marginal").get<std::string>(), m};
      detail::require(m, "kind", "marginal " + spec.id);
      c.marginals.push_back(std::move(spec));
    }
  }
  if (j.contains("settings")) {
    const json& s = j.at("settings");
    c.settings.n_max = s.value("n_max", c.settings.n_max);
    c.settings.depth = s.value("depth", c.settings.depth);
    c.settings.points = s.value("points", c.settings.points);
    c.settings.horizon = s.value("horizon", c.settings.horizon);
    c.settings.orbits = s.value("orbits", c.settings.orbits);
  }
  return c;
}

/// Builds a past marginal; random kinds draw their seed from the run seed
/// unless the marginal fixes one.
inline PastMarginal build_marginal(const MarginalSpec& spec, const LeafwiseFamily& family, std::uint64_t seed,
                                   std::size_t stream) {
  const TransitionMatrix& a = family.matrix();
  const int d = a.size();
  const std::string where = "marginal " + spec.id;
  const std::string kind = spec.body.at("kind").get<std::string>();
  if (kind == "gibbs") return PastMarginal::gibbs(family.gibbs_ptr());
  if (kind == "point") {
    const auto past = detail::require(spec.body, "past", where).get<std::vector<int>>();
    if (past.empty()) throw Error(ErrorCode::schema, where + ": past must be nonempty");
    const int n = static_cast<int>(past.size());
    return PastMarginal::point(PeriodicPoint::from_block(a, Word{1 - n, past}), a);
  }
  if (kind == "markov") {
    return PastMarginal::markov(a, detail::require(spec.body, "initial", where).get<std::vector<double>>(),
                                detail::require(spec.body, "backward", where).get<std::vector<std::vector<double>>>());
  }
  if (kind == "random_markov") {
    const std::uint64_t s = spec.body.contains("seed") ? spec.body.at("seed").get<std::uint64_t>()
                                                       : derive_seed(seed, stream);
    return PastMarginal::random_markov(a, s);
  }
  if (kind == "table") {
    std::vector<std::map<std::vector<Symbol>, double>> tables;
    for (const auto& t : detail::require(spec.body, "tables", where)) tables.push_back(detail::parse_table(t, d, where));
    return PastMarginal::table(a, std::move(tables));
  }
  throw Error(ErrorCode::schema, where + ": unknown kind '" + kind + "'");
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::schema, "cannot read config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("config is not valid JSON: ") + e.what());
  }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  const auto r = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, r.ptr);
  return std::string(16 - s.size(), '0') + s;
}

/// RFC 4180 writer: CRLF line ends, fields quoted when needed.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw Error(ErrorCode::invalid_argument, "csv row has the wrong width");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ += ',';
      out_ += quote(fields[i]);
    }
    out_ += "\r\n";
  }

  const std::string& str() const noexcept { return out_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::invalid_argument, "cannot write '" + path + "'");
    f << out_;
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  std::size_t width_;
  std::string out_;
};

inline void save_json(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::invalid_argument, "cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

}  // namespace sftherm::io
