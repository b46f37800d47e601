#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hicrec/dataset.hpp"
#include "hicrec/errors.hpp"
#include "hicrec/eval.hpp"
#include "hicrec/hin.hpp"
#include "hicrec/metapath.hpp"
#include "hicrec/model.hpp"
#include "hicrec/synthetic.hpp"
#include "hicrec/training.hpp"

namespace hicrec {

// ---------------------------------------------------------------------------
// TOML subset: [tables], dotted bare keys, basic strings, integers, floats,
// booleans, single-line arrays of scalars, # comments.

struct TomlValue {
  using Array = std::vector<TomlValue>;
  std::variant<std::int64_t, double, bool, std::string, Array> data;
  std::size_t line = 0;
};

/// Flattened document: full dotted key -> value, in file order.
struct TomlDocument {
  std::vector<std::pair<std::string, TomlValue>> entries;
  std::vector<std::string> tables;  // headers in file order

  const TomlValue* find(const std::string& key) const {
    for (const auto& [k, v] : entries) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

namespace toml_detail {

inline bool bare_key_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

class LineParser {
 public:
  LineParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  std::string key() {
    std::string out;
    for (;;) {
      skip_ws();
      const std::size_t start = pos_;
      while (pos_ < s_.size() && bare_key_char(s_[pos_])) ++pos_;
      if (pos_ == start) fail("expected a key");
      out.append(s_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '.') {
        ++pos_;
        out.push_back('.');
        continue;
      }
      return out;
    }
  }

  TomlValue value() {
    skip_ws();
    TomlValue v;
    v.line = line_;
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') {
      v.data = string();
    } else if (c == '[') {
      ++pos_;
      TomlValue::Array arr;
      for (;;) {
        if (consume(']')) break;
        arr.push_back(value());
        if (consume(',')) continue;
        expect(']');
        break;
      }
      v.data = std::move(arr);
    } else if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      v.data = true;
    } else if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      v.data = false;
    } else {
      v.data = number();
    }
    return v;
  }

 private:
  std::string string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::variant<std::int64_t, double, bool, std::string, TomlValue::Array> number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '+' ||
                                s_[pos_] == '-' || s_[pos_] == '.' || s_[pos_] == '_')) {
      ++pos_;
    }
    std::string tok;
    for (char c : s_.substr(start, pos_ - start)) {
      if (c != '_') tok.push_back(c);
    }
    if (tok.empty()) fail("expected a value");
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (*b == '+') ++b;
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "nan";
    if (!is_float) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(b, e, i);
      if (ec == std::errc() && p == e) return i;
    } else {
      double d = 0.0;
      auto [p, ec] = std::from_chars(b, e, d);
      if (ec == std::errc() && p == e) return d;
    }
    fail("malformed value '" + tok + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

}  // namespace toml_detail

inline TomlDocument parse_toml(std::istream& in) {
  TomlDocument doc;
  std::string prefix;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    toml_detail::LineParser p(line, lineno);
    if (p.at_end_or_comment()) continue;
    if (p.consume('[')) {
      if (p.consume('[')) p.fail("arrays of tables are not supported");
      prefix = p.key();
      p.expect(']');
      if (!p.at_end_or_comment()) p.fail("trailing characters after table header");
      for (const auto& t : doc.tables) {
        if (t == prefix) p.fail("duplicate table [" + prefix + "]");
      }
      doc.tables.push_back(prefix);
      continue;
    }
    std::string key = p.key();
    p.expect('=');
    TomlValue v = p.value();
    if (!p.at_end_or_comment()) p.fail("trailing characters after value");
    if (!prefix.empty()) key = prefix + "." + key;
    if (doc.find(key)) p.fail("duplicate key '" + key + "'");
    doc.entries.emplace_back(std::move(key), std::move(v));
  }
  return doc;
}

inline std::string toml_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

/// Shortest text that parses back to exactly `x`, always with a float marker.
inline std::string toml_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// ---------------------------------------------------------------------------

struct SweepConfig {
  std::string base_aspect = "History";
  std::vector<std::size_t> dimensions{2, 4, 8, 16, 32, 64, 128, 256};
  bool operator==(const SweepConfig&) const = default;
};

/// One run's full configuration with every path resolved to an absolute one.
struct RunConfig {
  std::filesystem::path edges;
  std::filesystem::path interactions;
  SchemaSpec schema;
  std::vector<AspectDef> aspects;
  ModelConfig model;
  AdjacencyNorm normalize = AdjacencyNorm::symmetric;
  TrainConfig train;
  EvalProtocol eval;
  SweepConfig sweep;
  std::optional<SyntheticConfig> synthetic;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  bool operator==(const RunConfig&) const = default;

  /// Propagates the run seed into the train, eval and generator settings.
  void set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
    eval.seed = s;
    if (synthetic) synthetic->seed = s;
  }

  std::filesystem::path cache_dir() const { return output_dir / "cache"; }
};

namespace config_detail {

class Reader {
 public:
  explicit Reader(const TomlDocument& doc) : doc_(doc), used_(doc.entries.size(), false) {}

  const TomlValue* get(const std::string& key) {
    for (std::size_t i = 0; i < doc_.entries.size(); ++i) {
      if (doc_.entries[i].first == key) {
        used_[i] = true;
        return &doc_.entries[i].second;
      }
    }
    return nullptr;
  }

  [[noreturn]] static void fail(const std::string& key, const TomlValue* v, const std::string& what) {
    std::string where = key;
    if (v) where += " (line " + std::to_string(v->line) + ")";
    throw ConfigError(where + ": " + what);
  }

  std::optional<std::string> str(const std::string& key) {
    const TomlValue* v = get(key);
    if (!v) return std::nullopt;
    if (auto s = std::get_if<std::string>(&v->data)) return *s;
    fail(key, v, "expected a string");
  }

  std::optional<std::int64_t> integer(const std::string& key) {
    const TomlValue* v = get(key);
    if (!v) return std::nullopt;
    if (auto i = std::get_if<std::int64_t>(&v->data)) return *i;
    fail(key, v, "expected an integer");
  }

  std::optional<std::size_t> count(const std::string& key, std::size_t min_value = 0) {
    auto i = integer(key);
    if (!i) return std::nullopt;
    if (*i < static_cast<std::int64_t>(min_value)) {
      fail(key, get(key), "must be >= " + std::to_string(min_value));
    }
    return static_cast<std::size_t>(*i);
  }

  std::optional<double> real(const std::string& key) {
    const TomlValue* v = get(key);
    if (!v) return std::nullopt;
    if (auto d = std::get_if<double>(&v->data)) return *d;
    if (auto i = std::get_if<std::int64_t>(&v->data)) return static_cast<double>(*i);
    fail(key, v, "expected a number");
  }

  std::optional<bool> boolean(const std::string& key) {
    const TomlValue* v = get(key);
    if (!v) return std::nullopt;
    if (auto b = std::get_if<bool>(&v->data)) return *b;
    fail(key, v, "expected true or false");
  }

  std::optional<std::vector<std::string>> strings(const std::string& key) {
    const TomlValue* v = get(key);
    if (!v) return std::nullopt;
    const auto* arr = std::get_if<TomlValue::Array>(&v->data);
    if (!arr) fail(key, v, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& x : *arr) {
      const auto* s = std::get_if<std::string>(&x.data);
      if (!s) fail(key, v, "expected an array of strings");
      out.push_back(*s);
    }
    return out;
  }

  std::optional<std::vector<std::size_t>> counts(const std::string& key) {
    const TomlValue* v = get(key);
    if (!v) return std::nullopt;
    const auto* arr = std::get_if<TomlValue::Array>(&v->data);
    if (!arr) fail(key, v, "expected an array of integers");
    std::vector<std::size_t> out;
    for (const auto& x : *arr) {
      const auto* i = std::get_if<std::int64_t>(&x.data);
      if (!i || *i < 1) fail(key, v, "expected an array of positive integers");
      out.push_back(static_cast<std::size_t>(*i));
    }
    return out;
  }

  void reject_unknown() const {
    for (std::size_t i = 0; i < used_.size(); ++i) {
      if (!used_[i]) fail(doc_.entries[i].first, &doc_.entries[i].second, "unknown key");
    }
  }

  const TomlDocument& doc() const { return doc_; }

 private:
  const TomlDocument& doc_;
  std::vector<bool> used_;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

}  // namespace config_detail

inline AdjacencyNorm parse_norm(const std::string& s) {
  if (s == "symmetric") return AdjacencyNorm::symmetric;
  if (s == "none") return AdjacencyNorm::none;
  throw ConfigError("gcn.normalize: expected \"symmetric\" or \"none\", got \"" + s + "\"");
}

inline std::string to_string(AdjacencyNorm n) { return n == AdjacencyNorm::symmetric ? "symmetric" : "none"; }

/// Builds a RunConfig; relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(const TomlDocument& doc, const std::filesystem::path& base_dir) {
  using config_detail::Reader;
  Reader r(doc);
  RunConfig c;
  const auto base = std::filesystem::absolute(base_dir);

  if (auto s = r.integer("seed")) {
    if (*s < 0) Reader::fail("seed", r.get("seed"), "must be >= 0");
    c.seed = static_cast<std::uint64_t>(*s);
  }
  c.output_dir = config_detail::resolve(base, r.str("output_dir").value_or("out"));
  if (auto s = r.str("data.edges")) c.edges = config_detail::resolve(base, *s);
  if (auto s = r.str("data.interactions")) c.interactions = config_detail::resolve(base, *s);

  c.schema.user_symbol = r.str("schema.user").value_or("U");
  c.schema.item_symbol = r.str("schema.item").value_or("I");
  const auto types = r.strings("schema.types").value_or(std::vector<std::string>{"U", "I"});
  for (const auto& t : types) {
    if (t.empty() || t.find('.') != std::string::npos) Reader::fail("schema.types", r.get("schema.types"), "bad type symbol '" + t + "'");
    if (c.schema.find(t)) Reader::fail("schema.types", r.get("schema.types"), "duplicate type symbol '" + t + "'");
    c.schema.types.push_back({t, 0});
  }
  for (auto& t : c.schema.types) {
    if (auto n = r.count("schema.counts." + t.symbol, 1)) t.pinned_count = *n;
  }
  if (!c.schema.find(c.schema.user_symbol)) Reader::fail("schema.user", r.get("schema.user"), "not listed in schema.types");
  if (!c.schema.find(c.schema.item_symbol)) Reader::fail("schema.item", r.get("schema.item"), "not listed in schema.types");
  if (c.schema.user_symbol == c.schema.item_symbol) Reader::fail("schema.item", r.get("schema.item"), "must differ from schema.user");

  // Aspect order follows first appearance in the file.
  for (const auto& [key, value] : doc.entries) {
    if (key.rfind("aspect.", 0) != 0) continue;
    const std::string rest = key.substr(7);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos) Reader::fail(key, &value, "expected aspect.<name>.user_path or .item_path");
    const std::string name = rest.substr(0, dot);
    if (name.find('.') != std::string::npos) Reader::fail(key, &value, "aspect names may not contain '.'");
    bool seen = false;
    for (const auto& a : c.aspects) seen = seen || a.name == name;
    if (!seen) c.aspects.push_back({name, "", ""});
  }
  for (auto& a : c.aspects) {
    const std::string k = "aspect." + a.name;
    auto up = r.str(k + ".user_path");
    auto ip = r.str(k + ".item_path");
    if (!up || !ip) throw ConfigError(k + ": both user_path and item_path are required");
    a.user_path = *up;
    a.item_path = *ip;
    // Token-level check now; relation checks need the graph.
    for (const auto* p : {&a.user_path, &a.item_path}) {
      std::vector<std::string> tokens;
      if (p->find('.') != std::string::npos) {
        std::stringstream ss(*p);
        std::string t;
        while (std::getline(ss, t, '.')) tokens.push_back(t);
      } else {
        std::size_t pos = 0;
        while (pos < p->size()) {
          std::size_t best = 0;
          for (const auto& t : c.schema.types) {
            if (t.symbol.size() > best && p->compare(pos, t.symbol.size(), t.symbol) == 0) best = t.symbol.size();
          }
          if (best == 0) throw ConfigError(k + ": meta-path '" + *p + "' has an unknown type token");
          tokens.push_back(p->substr(pos, best));
          pos += best;
        }
      }
      for (const auto& t : tokens) {
        if (!c.schema.find(t)) throw ConfigError(k + ": meta-path '" + *p + "' has unknown type '" + t + "'");
      }
      if (tokens.size() < 2) throw ConfigError(k + ": meta-path '" + *p + "' needs at least two types");
    }
  }

  if (auto s = r.str("model.kind")) c.model.kind = parse_model_kind(*s);
  if (auto n = r.count("model.d", 1)) c.model.dim = *n;
  if (auto n = r.count("model.K", 1)) c.model.factors = *n;
  if (auto n = r.count("model.layers", 1)) c.model.layers = *n;
  if (auto s = r.str("gcn.normalize")) c.normalize = parse_norm(*s);
  if (auto b = r.boolean("gcn.share_across_aspects")) c.model.share_across_aspects = *b;

  if (auto n = r.count("train.epochs")) c.train.epochs = *n;
  if (auto n = r.count("train.batch_size", 1)) c.train.batch_size = *n;
  if (auto x = r.real("train.lr")) c.train.lr = *x;
  if (auto x = r.real("train.lambda")) c.train.lambda = *x;
  if (auto n = r.count("train.eval_every", 1)) c.train.eval_every = *n;
  if (auto n = r.count("train.patience")) c.train.patience = *n;
  if (auto n = r.count("train.validation_users")) c.train.validation_users = *n;
  if (auto n = r.count("train.checkpoint_every")) c.train.checkpoint_every = *n;

  if (auto n = r.count("eval.negatives", 1)) c.eval.negatives = *n;
  if (auto v = r.counts("eval.top_n")) {
    if (v->empty()) Reader::fail("eval.top_n", r.get("eval.top_n"), "must not be empty");
    c.eval.top_n = *v;
  }
  if (auto n = r.count("eval.cold_start_threshold")) c.eval.cold_start_threshold = *n;

  if (auto s = r.str("sweep.base_aspect")) c.sweep.base_aspect = *s;
  if (auto v = r.counts("sweep.dimensions")) c.sweep.dimensions = *v;

  bool any_synth = false;
  for (const auto& [key, value] : doc.entries) any_synth = any_synth || key.rfind("synthetic.", 0) == 0;
  for (const auto& t : doc.tables) any_synth = any_synth || t == "synthetic";
  if (any_synth) {
    SyntheticConfig s;
    if (auto n = r.count("synthetic.users", 1)) s.users = *n;
    if (auto n = r.count("synthetic.items", 1)) s.items = *n;
    if (auto n = r.count("synthetic.groups", 1)) s.groups = *n;
    if (auto n = r.count("synthetic.brands", 1)) s.brands = *n;
    if (auto n = r.count("synthetic.categories", 1)) s.categories = *n;
    if (auto n = r.count("synthetic.min_interactions", 1)) s.min_interactions = *n;
    if (auto n = r.count("synthetic.max_interactions", 1)) s.max_interactions = *n;
    if (auto x = r.real("synthetic.alignment")) s.alignment = *x;
    s.validate();
    c.synthetic = s;
  }

  // Informational block written into run manifests.
  r.str("run.model");
  r.integer("run.parameter_count");
  r.str("run.command");
  r.integer("run.best_epoch");

  r.reject_unknown();
  c.train.validate();
  c.set_seed(c.seed);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  const TomlDocument doc = parse_toml(in);
  return parse_run_config(doc, std::filesystem::absolute(path).parent_path());
}

/// Canonical TOML for `c`; parse_run_config of the output reproduces `c`.
inline void write_run_config(const RunConfig& c, std::ostream& out) {
  const auto join = [](const auto& xs, auto fmt) {
    std::string s = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i]);
    return s + "]";
  };
  out << "seed = " << c.seed << "\n";
  out << "output_dir = " << toml_quote(c.output_dir.string()) << "\n\n";
  out << "[data]\n";
  out << "edges = " << toml_quote(c.edges.string()) << "\n";
  out << "interactions = " << toml_quote(c.interactions.string()) << "\n\n";
  out << "[schema]\n";
  out << "user = " << toml_quote(c.schema.user_symbol) << "\n";
  out << "item = " << toml_quote(c.schema.item_symbol) << "\n";
  out << "types = " << join(c.schema.types, [](const auto& t) { return toml_quote(t.symbol); }) << "\n";
  bool pinned = false;
  for (const auto& t : c.schema.types) pinned = pinned || t.pinned_count != 0;
  if (pinned) {
    out << "\n[schema.counts]\n";
    for (const auto& t : c.schema.types) {
      if (t.pinned_count != 0) out << t.symbol << " = " << t.pinned_count << "\n";
    }
  }
  for (const auto& a : c.aspects) {
    out << "\n[aspect." << a.name << "]\n";
    out << "user_path = " << toml_quote(a.user_path) << "\n";
    out << "item_path = " << toml_quote(a.item_path) << "\n";
  }
  out << "\n[model]\n";
  out << "kind = " << toml_quote(to_string(c.model.kind)) << "\n";
  out << "d = " << c.model.dim << "\nK = " << c.model.factors << "\nlayers = " << c.model.layers << "\n\n";
  out << "[gcn]\n";
  out << "normalize = " << toml_quote(to_string(c.normalize)) << "\n";
  out << "share_across_aspects = " << (c.model.share_across_aspects ? "true" : "false") << "\n\n";
  out << "[train]\n";
  out << "epochs = " << c.train.epochs << "\nbatch_size = " << c.train.batch_size << "\n";
  out << "lr = " << toml_double(c.train.lr) << "\nlambda = " << toml_double(c.train.lambda) << "\n";
  out << "eval_every = " << c.train.eval_every << "\npatience = " << c.train.patience << "\n";
  out << "validation_users = " << c.train.validation_users << "\ncheckpoint_every = " << c.train.checkpoint_every
      << "\n\n";
  out << "[eval]\n";
  out << "negatives = " << c.eval.negatives << "\n";
  out << "top_n = " << join(c.eval.top_n, [](std::size_t n) { return std::to_string(n); }) << "\n";
  out << "cold_start_threshold = " << c.eval.cold_start_threshold << "\n\n";
  out << "[sweep]\n";
  out << "base_aspect = " << toml_quote(c.sweep.base_aspect) << "\n";
  out << "dimensions = " << join(c.sweep.dimensions, [](std::size_t n) { return std::to_string(n); }) << "\n";
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    out << "\n[synthetic]\n";
    out << "users = " << s.users << "\nitems = " << s.items << "\ngroups = " << s.groups << "\nbrands = " << s.brands
        << "\ncategories = " << s.categories << "\nmin_interactions = " << s.min_interactions
        << "\nmax_interactions = " << s.max_interactions << "\nalignment = " << toml_double(s.alignment) << "\n";
  }
}

/// Ensures the files a command reads are present.
inline void require_inputs(const RunConfig& c) {
  if (c.edges.empty()) throw ConfigError("data.edges is required");
  if (c.interactions.empty()) throw ConfigError("data.interactions is required");
  for (const auto& [key, p] : {std::pair{"data.edges", c.edges}, std::pair{"data.interactions", c.interactions}}) {
    if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string(key) + ": file not found: " + p.string());
  }
  if (c.aspects.empty() && c.model.kind != ModelKind::mf_bpr) throw ConfigError("no [aspect.<name>] tables defined");
}

}  // namespace hicrec
