#pragma once

// Serialization and artifact emission: JSON forms for operators, models and
// state descriptors; a small TOML-subset reader so configs can be written by
// hand; deterministic CSV/JSON file output carrying reproducibility metadata
// (config hash, library version, tolerances).

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spinlab/errors.hpp"
#include "spinlab/model.hpp"
#include "spinlab/pauli.hpp"
#include "spinlab/version.hpp"

namespace spinlab::io {

using json = nlohmann::ordered_json;

/// Fixed 17-significant-digit decimal rendering; round-trips any double and
/// is byte-stable across runs, which CSV determinism relies on.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Operator literal: a JSON array of {sites, letters, re, im} terms.
inline json operator_to_json(const LocalOperator& a) {
  json out = json::array();
  for (const auto& [p, c] : a.terms()) {
    json term;
    json sites = json::array();
    std::string letters;
    for (const auto& [site, l] : p.letters) {
      sites.push_back(site);
      letters += letter_char(l);
    }
    term["sites"] = std::move(sites);
    term["letters"] = letters;
    term["re"] = c.real();
    term["im"] = c.imag();
    out.push_back(std::move(term));
  }
  return out;
}

inline LocalOperator operator_from_json(const json& j) {
  if (!j.is_array()) throw ConfigInvalid("operator: expected an array of terms");
  LocalOperator::TermMap m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = "operator[" + std::to_string(i) + "]";
    const json& term = j[i];
    if (!term.is_object()) throw ConfigInvalid(at + ": expected an object");
    for (const char* key : {"sites", "letters", "re", "im"})
      if (!term.contains(key)) throw ConfigInvalid(at + "." + key + ": missing");
    if (!term["sites"].is_array()) throw ConfigInvalid(at + ".sites: expected an array");
    if (!term["letters"].is_string()) throw ConfigInvalid(at + ".letters: expected a string");
    if (!term["re"].is_number() || !term["im"].is_number())
      throw ConfigInvalid(at + ".re/.im: expected numbers");
    const std::string letters = term["letters"].get<std::string>();
    if (letters.size() != term["sites"].size())
      throw ConfigInvalid(at + ".letters: length differs from sites");
    PauliString p;
    for (std::size_t q = 0; q < letters.size(); ++q) {
      if (!term["sites"][q].is_number_integer())
        throw ConfigInvalid(at + ".sites: expected integers");
      const int site = term["sites"][q].get<int>();
      Letter l;
      switch (letters[q]) {
        case 'X': l = Letter::X; break;
        case 'Y': l = Letter::Y; break;
        case 'Z': l = Letter::Z; break;
        default: throw ConfigInvalid(at + ".letters: unknown letter '" +
                                     std::string(1, letters[q]) + "'");
      }
      p.letters.emplace_back(site, l);
    }
    std::sort(p.letters.begin(), p.letters.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t q = 1; q < p.letters.size(); ++q)
      if (p.letters[q].first == p.letters[q - 1].first)
        throw ConfigInvalid(at + ".sites: duplicate site " +
                            std::to_string(p.letters[q].first));
    m[std::move(p)] += cplx(term["re"].get<double>(), term["im"].get<double>());
  }
  return LocalOperator::from_map(std::move(m));
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Model file form: {alpha: [re, im], beta, gamma, jumps: [[aRe, aIm, ... eIm]]}.
inline json model_to_json(const LindbladModel& m) {
  json out;
  out["alpha"] = {m.alpha.real(), m.alpha.imag()};
  out["beta"] = m.beta;
  out["gamma"] = m.gamma;
  json jumps = json::array();
  for (const JumpTuple& t : m.jumps) {
    json row = json::array();
    for (const cplx& c : t) {
      row.push_back(c.real());
      row.push_back(c.imag());
    }
    jumps.push_back(std::move(row));
  }
  out["jumps"] = std::move(jumps);
  return out;
}

inline LindbladModel model_from_json(const json& j) {
  if (!j.is_object()) throw ConfigInvalid("model: expected an object");
  LindbladModel m;
  if (j.contains("alpha")) {
    const json& a = j["alpha"];
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
      throw ConfigInvalid("model.alpha: expected [re, im]");
    m.alpha = cplx(a[0].get<double>(), a[1].get<double>());
  }
  if (j.contains("beta")) {
    if (!j["beta"].is_number()) throw ConfigInvalid("model.beta: expected a number");
    m.beta = j["beta"].get<double>();
  }
  if (j.contains("gamma")) {
    if (!j["gamma"].is_number()) throw ConfigInvalid("model.gamma: expected a number");
    m.gamma = j["gamma"].get<double>();
  }
  if (j.contains("jumps")) {
    if (!j["jumps"].is_array()) throw ConfigInvalid("model.jumps: expected an array");
    for (std::size_t i = 0; i < j["jumps"].size(); ++i) {
      const json& row = j["jumps"][i];
      const std::string at = "model.jumps[" + std::to_string(i) + "]";
      if (!row.is_array() || row.size() != 10)
        throw ConfigInvalid(at + ": expected 10 numbers (re/im pairs a..e)");
      JumpTuple t;
      for (int q = 0; q < 5; ++q) {
        if (!row[2 * q].is_number() || !row[2 * q + 1].is_number())
          throw ConfigInvalid(at + ": expected numbers");
        t[static_cast<std::size_t>(q)] =
            cplx(row[2 * q].get<double>(), row[2 * q + 1].get<double>());
      }
      m.jumps.push_back(t);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// State descriptors
// ---------------------------------------------------------------------------

/// Config-file state form: {kind: "product_gibbs", mu} or
/// {kind: "thermal", window: [lo, hi], beta, mu}.
struct StateDescriptor {
  std::string kind = "product_gibbs";
  double mu = 0.0;
  double beta = 1.0;    // thermal only
  int window_lo = 0;    // thermal only
  int window_hi = 0;    // thermal only
};

inline json state_to_json(const StateDescriptor& s) {
  json out;
  out["kind"] = s.kind;
  if (s.kind == "thermal") {
    out["window"] = {s.window_lo, s.window_hi};
    out["beta"] = s.beta;
  }
  out["mu"] = s.mu;
  return out;
}

inline StateDescriptor state_from_json(const json& j) {
  if (!j.is_object()) throw ConfigInvalid("state: expected an object");
  StateDescriptor s;
  if (!j.contains("kind") || !j["kind"].is_string())
    throw ConfigInvalid("state.kind: missing or not a string");
  s.kind = j["kind"].get<std::string>();
  if (s.kind != "product_gibbs" && s.kind != "thermal")
    throw ConfigInvalid("state.kind: expected 'product_gibbs' or 'thermal'");
  if (!j.contains("mu") || !j["mu"].is_number())
    throw ConfigInvalid("state.mu: missing or not a number");
  s.mu = j["mu"].get<double>();
  if (s.kind == "thermal") {
    if (!j.contains("window") || !j["window"].is_array() || j["window"].size() != 2 ||
        !j["window"][0].is_number_integer() || !j["window"][1].is_number_integer())
      throw ConfigInvalid("state.window: expected [lo, hi]");
    s.window_lo = j["window"][0].get<int>();
    s.window_hi = j["window"][1].get<int>();
    if (!j.contains("beta") || !j["beta"].is_number())
      throw ConfigInvalid("state.beta: missing or not a number");
    s.beta = j["beta"].get<double>();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Config ingestion: JSON directly, or a TOML subset for hand-written files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

/// Strip a trailing comment, respecting double-quoted strings.
inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

/// Split a bracketed array body on top-level commas.
inline std::vector<std::string> split_top_level(const std::string& body) {
  std::vector<std::string> parts;
  int depth = 0;
  bool in_string = false;
  std::string cur;
  for (const char ch : body) {
    if (ch == '"') in_string = !in_string;
    if (!in_string) {
      if (ch == '[') ++depth;
      if (ch == ']') --depth;
      if (ch == ',' && depth == 0) {
        parts.push_back(cur);
        cur.clear();
        continue;
      }
    }
    cur += ch;
  }
  if (!trim(cur).empty()) parts.push_back(cur);
  return parts;
}

inline json parse_toml_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  const std::string where = "config line " + std::to_string(line_no);
  if (v.empty()) throw ConfigInvalid(where + ": empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigInvalid(where + ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigInvalid(where + ": unterminated array");
    json arr = json::array();
    for (const std::string& part : split_top_level(v.substr(1, v.size() - 2)))
      arr.push_back(parse_toml_value(part, line_no));
    return arr;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  // integer?
  bool integral = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const char ch = v[i];
    if (i == 0 && (ch == '+' || ch == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      integral = false;
      break;
    }
  }
  try {
    if (integral) return std::stoll(v);
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigInvalid(where + ": cannot parse value '" + v + "'");
  }
}

/// Walk/create nested objects along a dotted key path.
inline json* descend(json& root, const std::string& dotted, int line_no) {
  json* node = &root;
  std::string rest = dotted;
  while (true) {
    const std::size_t dot = rest.find('.');
    if (dot == std::string::npos) break;
    const std::string head = trim(rest.substr(0, dot));
    if (head.empty())
      throw ConfigInvalid("config line " + std::to_string(line_no) + ": empty key segment");
    node = &(*node)[head];
    rest = rest.substr(dot + 1);
  }
  return &(*node)[trim(rest)];
}

}  // namespace detail

/// Parse the TOML subset used for hand-written configs: [section] headers
/// (dotted allowed), key = value lines, strings, booleans, numbers and
/// (nested) arrays, # comments. Returns the equivalent JSON object.
inline json parse_toml_subset(const std::string& text) {
  json root = json::object();
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigInvalid("config line " + std::to_string(line_no) +
                            ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigInvalid("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigInvalid("config line " + std::to_string(line_no) + ": empty key");
    const std::string dotted = section.empty() ? key : section + "." + key;
    *detail::descend(root, dotted, line_no) =
        detail::parse_toml_value(line.substr(eq + 1), line_no);
  }
  return root;
}

/// Load a config file: JSON if it looks like JSON (or ends in .json),
/// otherwise the TOML subset.
inline json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const std::string trimmed = detail::trim(text);
  const bool looks_json = !trimmed.empty() && trimmed.front() == '{';
  const bool named_json =
      path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (looks_json || named_json) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigInvalid(std::string("config: invalid JSON: ") + e.what());
    }
  }
  return parse_toml_subset(text);
}

// ---------------------------------------------------------------------------
// Deterministic output files
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a over the compact dump; key order inside a parsed config is
/// preserved by ordered_json, so equal files hash equally.
inline std::string config_hash(const json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Standard metadata lines embedded (as # comments / JSON fields) in every
/// artifact: config hash, library version, tolerances in effect.
inline std::vector<std::string> metadata_lines(const json& config,
                                               const json& tolerances) {
  std::vector<std::string> out;
  out.push_back("config_hash=" + config_hash(config));
  out.push_back(std::string("version=") + kVersionString);
  for (const auto& [key, value] : tolerances.items())
    out.push_back(key + "=" + (value.is_number() ? fmt_g17(value.get<double>())
                                                 : value.dump()));
  return out;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& meta,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigInvalid("output: cannot open '" + path + "' for writing");
  for (const std::string& line : meta) out << "# " << line << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigInvalid("output: cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace spinlab::io
