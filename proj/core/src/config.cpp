#include "specfil/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "specfil/error.hpp"
#include "specfil/rng.hpp"

namespace specfil {

namespace {

std::string type_name(TomlValue::Type t) {
  switch (t) {
    case TomlValue::Type::Bool: return "bool";
    case TomlValue::Type::Int: return "integer";
    case TomlValue::Type::Float: return "float";
    case TomlValue::Type::String: return "string";
    case TomlValue::Type::Array: return "array";
  }
  return "?";
}

[[noreturn]] void type_error(const std::string& key, TomlValue::Type got, const char* want) {
  throw ConfigError("config: key '" + key + "' has type " + type_name(got) + ", expected " + want);
}

}  // namespace

bool TomlValue::as_bool(const std::string& key) const {
  if (type != Type::Bool) type_error(key, type, "bool");
  return b;
}

std::int64_t TomlValue::as_int(const std::string& key) const {
  if (type != Type::Int) type_error(key, type, "integer");
  return i;
}

double TomlValue::as_float(const std::string& key) const {
  if (type == Type::Int) return static_cast<double>(i);
  if (type != Type::Float) type_error(key, type, "float");
  return f;
}

const std::string& TomlValue::as_string(const std::string& key) const {
  if (type != Type::String) type_error(key, type, "string");
  return s;
}

std::vector<double> TomlValue::as_float_array(const std::string& key) const {
  if (type != Type::Array) type_error(key, type, "array of floats");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(v.as_float(key));
  return out;
}

std::vector<std::string> TomlValue::as_string_array(const std::string& key) const {
  if (type != Type::Array) type_error(key, type, "array of strings");
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(v.as_string(key));
  return out;
}

std::string TomlValue::render() const {
  switch (type) {
    case Type::Bool: return b ? "true" : "false";
    case Type::Int: return std::to_string(i);
    case Type::Float: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", f);
      std::string s_(buf);
      if (s_.find_first_of(".eEnN") == std::string::npos) s_ += ".0";
      return s_;
    }
    case Type::String: {
      std::string out = "\"";
      for (const char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      return out + "\"";
    }
    case Type::Array: {
      std::string out = "[";
      for (std::size_t k = 0; k < arr.size(); ++k) {
        if (k > 0) out += ", ";
        out += arr[k].render();
      }
      return out + "]";
    }
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Strips a trailing comment, respecting quoted strings.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '"' && (k == 0 || s[k - 1] != '\\')) in_string = !in_string;
    if (s[k] == '#' && !in_string) return s.substr(0, k);
  }
  return s;
}

TomlValue parse_value(std::string_view tok, const std::string& where, bool lenient_strings = false);

TomlValue parse_array(std::string_view body, const std::string& where, bool lenient_strings) {
  TomlValue v;
  v.type = TomlValue::Type::Array;
  body = trim(body);
  if (body.empty()) return v;
  std::size_t start = 0;
  bool in_string = false;
  for (std::size_t k = 0; k <= body.size(); ++k) {
    const bool end = (k == body.size());
    if (!end && body[k] == '"' && (k == 0 || body[k - 1] != '\\')) in_string = !in_string;
    if (end || (body[k] == ',' && !in_string)) {
      const auto item = trim(body.substr(start, k - start));
      if (!item.empty()) v.arr.push_back(parse_value(item, where, lenient_strings));
      start = k + 1;
    }
  }
  return v;
}

TomlValue parse_value(std::string_view tok, const std::string& where, bool lenient_strings) {
  TomlValue v;
  if (tok.empty()) throw ConfigError("config: empty value at " + where);
  if (tok.front() == '[') {
    if (tok.back() != ']') throw ConfigError("config: unterminated array at " + where);
    return parse_array(tok.substr(1, tok.size() - 2), where, lenient_strings);
  }
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      throw ConfigError("config: unterminated string at " + where);
    v.type = TomlValue::Type::String;
    for (std::size_t k = 1; k + 1 < tok.size(); ++k) {
      if (tok[k] == '\\' && k + 2 < tok.size()) {
        ++k;
        switch (tok[k]) {
          case 'n': v.s += '\n'; break;
          case 't': v.s += '\t'; break;
          default: v.s += tok[k];
        }
      } else {
        v.s += tok[k];
      }
    }
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.type = TomlValue::Type::Bool;
    v.b = (tok == "true");
    return v;
  }
  // Integer first, float as fallback.
  {
    std::int64_t iv = 0;
    const auto* last = tok.data() + tok.size();
    const auto res = std::from_chars(tok.data(), last, iv);
    if (res.ec == std::errc{} && res.ptr == last) {
      v.type = TomlValue::Type::Int;
      v.i = iv;
      return v;
    }
  }
  {
    double fv = 0.0;
    const auto* last = tok.data() + tok.size();
    const auto res = std::from_chars(tok.data(), last, fv);
    if (res.ec == std::errc{} && res.ptr == last) {
      v.type = TomlValue::Type::Float;
      v.f = fv;
      return v;
    }
  }
  // Command-line overrides accept bare strings since most shells eat quotes.
  if (lenient_strings) {
    v.type = TomlValue::Type::String;
    v.s = std::string(tok);
    return v;
  }
  throw ConfigError("config: cannot parse value '" + std::string(tok) + "' at " + where);
}

}  // namespace

TomlTable parse_toml(const std::string& text, const std::string& origin) {
  TomlTable table;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: malformed section header at " + where);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError("config: empty section name at " + where);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config: expected key = value at " + where);
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config: empty key at " + where);
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (table.contains(full)) throw ConfigError("config: duplicate key '" + full + "' at " + where);
    table.emplace(std::move(full), parse_value(trim(line.substr(eq + 1)), where));
  }
  return table;
}

TomlTable parse_toml_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str(), file.string());
}

TomlValue parse_toml_scalar(const std::string& text) {
  return parse_value(trim(text), "<override>", /*lenient_strings=*/true);
}

namespace {

struct Schema {
  const TomlTable* table;
  std::vector<std::string> consumed;

  template <typename Fn>
  void key(const std::string& name, Fn&& fn) {
    consumed.push_back(name);
    const auto it = table->find(name);
    if (it != table->end()) fn(it->second);
  }

  void finish() const {
    for (const auto& [k, v] : *table) {
      (void)v;
      if (std::find(consumed.begin(), consumed.end(), k) == consumed.end())
        throw ConfigError("config: unknown key '" + k + "'");
    }
  }
};

int as_pos_int(const TomlValue& v, const std::string& key) {
  const auto x = v.as_int(key);
  if (x < 1 || x > (1LL << 31)) throw ConfigError("config: key '" + key + "' must be a positive integer");
  return static_cast<int>(x);
}

}  // namespace

void RunConfig::apply(const TomlTable& table) {
  Schema s{&table, {}};
  s.key("dataset", [&](const TomlValue& v) { dataset = v.as_string("dataset"); });
  s.key("output", [&](const TomlValue& v) { output = v.as_string("output"); });
  s.key("seed", [&](const TomlValue& v) { seed = static_cast<std::uint64_t>(v.as_int("seed")); });
  s.key("data.row_normalize", [&](const TomlValue& v) { row_normalize = v.as_bool("data.row_normalize"); });
  s.key("filter.kind", [&](const TomlValue& v) {
    filter_kind = v.as_string("filter.kind");
    filter_kind_from_string(filter_kind);
  });
  s.key("filter.order", [&](const TomlValue& v) { filter_order = as_pos_int(v, "filter.order"); });
  s.key("train.embed_dim", [&](const TomlValue& v) { embed_dim = as_pos_int(v, "train.embed_dim"); });
  s.key("train.sample_size", [&](const TomlValue& v) { sample_size = as_pos_int(v, "train.sample_size"); });
  s.key("train.batch_size", [&](const TomlValue& v) { batch_size = as_pos_int(v, "train.batch_size"); });
  s.key("train.learning_rate", [&](const TomlValue& v) {
    learning_rate = v.as_float("train.learning_rate");
    if (!(learning_rate >= 0.0)) throw ConfigError("config: train.learning_rate must be >= 0");
  });
  s.key("train.max_epochs", [&](const TomlValue& v) { max_epochs = as_pos_int(v, "train.max_epochs"); });
  s.key("train.patience", [&](const TomlValue& v) { patience = as_pos_int(v, "train.patience"); });
  s.key("train.per_channel_slope",
        [&](const TomlValue& v) { per_channel_slope = v.as_bool("train.per_channel_slope"); });
  s.key("train.independent_encoders",
        [&](const TomlValue& v) { independent_encoders = v.as_bool("train.independent_encoders"); });
  s.key("rff.enabled", [&](const TomlValue& v) { rff_enabled = v.as_bool("rff.enabled"); });
  s.key("rff.out_dim", [&](const TomlValue& v) { rff_out_dim = as_pos_int(v, "rff.out_dim"); });
  s.key("rff.gamma", [&](const TomlValue& v) {
    rff_gamma = v.as_float("rff.gamma");
    if (!(rff_gamma > 0.0)) throw ConfigError("config: rff.gamma must be > 0");
  });
  s.key("rff.stage", [&](const TomlValue& v) {
    rff_stage = v.as_string("rff.stage");
    if (rff_stage != "pre" && rff_stage != "post")
      throw ConfigError("config: rff.stage must be 'pre' or 'post'");
  });
  s.key("rff.standardize", [&](const TomlValue& v) { rff_standardize = v.as_bool("rff.standardize"); });
  s.key("head.budget", [&](const TomlValue& v) { head_budget = as_pos_int(v, "head.budget"); });
  s.key("head.max_epochs", [&](const TomlValue& v) { head_max_epochs = as_pos_int(v, "head.max_epochs"); });
  s.key("head.patience", [&](const TomlValue& v) { head_patience = as_pos_int(v, "head.patience"); });
  s.key("head.lr_grid", [&](const TomlValue& v) { head_lr_grid = v.as_float_array("head.lr_grid"); });
  s.key("head.alpha_lr_grid",
        [&](const TomlValue& v) { head_alpha_lr_grid = v.as_float_array("head.alpha_lr_grid"); });
  s.key("head.wd_grid", [&](const TomlValue& v) { head_wd_grid = v.as_float_array("head.wd_grid"); });
  s.key("head.activation_grid", [&](const TomlValue& v) {
    head_activation_grid = v.as_string_array("head.activation_grid");
    for (const auto& a : head_activation_grid) coeff_activation_from_string(a);
  });
  s.key("head.gamma_grid", [&](const TomlValue& v) { head_gamma_grid = v.as_float_array("head.gamma_grid"); });
  s.key("eval.checkpoint", [&](const TomlValue& v) { eval_checkpoint = v.as_string("eval.checkpoint"); });
  s.key("bench.warmup", [&](const TomlValue& v) { bench_warmup = as_pos_int(v, "bench.warmup"); });
  s.key("bench.epochs", [&](const TomlValue& v) { bench_epochs = as_pos_int(v, "bench.epochs"); });
  s.finish();
}

RunConfig RunConfig::load(const std::filesystem::path* file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file != nullptr) cfg.apply(parse_toml_file(*file));
  if (!overrides.empty()) {
    TomlTable table;
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("config: override '" + o + "' is not key=value");
      table[o.substr(0, eq)] = parse_toml_scalar(o.substr(eq + 1));
    }
    cfg.apply(table);
  }
  return cfg;
}

namespace {

TomlValue make_value(bool b) {
  TomlValue v;
  v.type = TomlValue::Type::Bool;
  v.b = b;
  return v;
}
TomlValue make_value(std::int64_t i) {
  TomlValue v;
  v.type = TomlValue::Type::Int;
  v.i = i;
  return v;
}
TomlValue make_value(double f) {
  TomlValue v;
  v.type = TomlValue::Type::Float;
  v.f = f;
  return v;
}
TomlValue make_value(const std::string& s) {
  TomlValue v;
  v.type = TomlValue::Type::String;
  v.s = s;
  return v;
}
TomlValue make_value(const std::vector<double>& a) {
  TomlValue v;
  v.type = TomlValue::Type::Array;
  for (const double x : a) v.arr.push_back(make_value(x));
  return v;
}
TomlValue make_value(const std::vector<std::string>& a) {
  TomlValue v;
  v.type = TomlValue::Type::Array;
  for (const auto& x : a) v.arr.push_back(make_value(x));
  return v;
}

using KeyList = std::vector<std::pair<std::string, TomlValue>>;

KeyList config_entries(const RunConfig& c) {
  KeyList out;
  out.emplace_back("dataset", make_value(c.dataset));
  out.emplace_back("output", make_value(c.output));
  out.emplace_back("seed", make_value(static_cast<std::int64_t>(c.seed)));
  out.emplace_back("data.row_normalize", make_value(c.row_normalize));
  out.emplace_back("filter.kind", make_value(c.filter_kind));
  out.emplace_back("filter.order", make_value(static_cast<std::int64_t>(c.filter_order)));
  out.emplace_back("train.embed_dim", make_value(static_cast<std::int64_t>(c.embed_dim)));
  out.emplace_back("train.sample_size", make_value(static_cast<std::int64_t>(c.sample_size)));
  out.emplace_back("train.batch_size", make_value(static_cast<std::int64_t>(c.batch_size)));
  out.emplace_back("train.learning_rate", make_value(c.learning_rate));
  out.emplace_back("train.max_epochs", make_value(static_cast<std::int64_t>(c.max_epochs)));
  out.emplace_back("train.patience", make_value(static_cast<std::int64_t>(c.patience)));
  out.emplace_back("train.per_channel_slope", make_value(c.per_channel_slope));
  out.emplace_back("train.independent_encoders", make_value(c.independent_encoders));
  out.emplace_back("rff.enabled", make_value(c.rff_enabled));
  out.emplace_back("rff.out_dim", make_value(static_cast<std::int64_t>(c.rff_out_dim)));
  out.emplace_back("rff.gamma", make_value(c.rff_gamma));
  out.emplace_back("rff.stage", make_value(c.rff_stage));
  out.emplace_back("rff.standardize", make_value(c.rff_standardize));
  out.emplace_back("head.budget", make_value(static_cast<std::int64_t>(c.head_budget)));
  out.emplace_back("head.max_epochs", make_value(static_cast<std::int64_t>(c.head_max_epochs)));
  out.emplace_back("head.patience", make_value(static_cast<std::int64_t>(c.head_patience)));
  out.emplace_back("head.lr_grid", make_value(c.head_lr_grid));
  out.emplace_back("head.alpha_lr_grid", make_value(c.head_alpha_lr_grid));
  out.emplace_back("head.wd_grid", make_value(c.head_wd_grid));
  out.emplace_back("head.activation_grid", make_value(c.head_activation_grid));
  out.emplace_back("head.gamma_grid", make_value(c.head_gamma_grid));
  out.emplace_back("eval.checkpoint", make_value(c.eval_checkpoint));
  out.emplace_back("bench.warmup", make_value(static_cast<std::int64_t>(c.bench_warmup)));
  out.emplace_back("bench.epochs", make_value(static_cast<std::int64_t>(c.bench_epochs)));
  return out;
}

}  // namespace

std::string RunConfig::to_toml() const {
  std::string out;
  std::string section;
  for (const auto& [key, value] : config_entries(*this)) {
    const auto dot = key.rfind('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    if (sec != section) {
      section = sec;
      out += "\n[" + section + "]\n";
    }
    out += leaf + " = " + value.render() + "\n";
  }
  return out;
}

std::string RunConfig::describe_keys() {
  std::string out;
  for (const auto& [key, value] : config_entries(RunConfig{})) {
    out += "  " + key + " (default " + value.render() + ")\n";
  }
  return out;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.embed_dim = embed_dim;
  t.sample_size = sample_size;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.seed = seed;
  t.bank = bank();
  t.per_channel_slope = per_channel_slope;
  return t;
}

RffSettings RunConfig::rff_settings() const {
  RffSettings r;
  r.enabled = rff_enabled;
  r.out_dim = rff_out_dim;
  r.gamma = rff_gamma;
  r.post_stage = (rff_stage == "post");
  r.standardize = rff_standardize;
  r.seed = Pcg64::mix(seed, 0xF0F0);
  return r;
}

SweepSettings RunConfig::sweep_settings() const {
  SweepSettings s;
  s.lr_grid = head_lr_grid;
  s.alpha_lr_grid = head_alpha_lr_grid;
  s.wd_grid = head_wd_grid;
  s.activation_grid.clear();
  for (const auto& a : head_activation_grid) s.activation_grid.push_back(coeff_activation_from_string(a));
  s.gamma_grid = head_gamma_grid;
  s.budget = head_budget;
  s.seed = Pcg64::mix(seed, 0x5EEE);
  s.max_epochs = head_max_epochs;
  s.patience = head_patience;
  return s;
}

FilterBank RunConfig::bank() const {
  return FilterBank::make(filter_kind_from_string(filter_kind), filter_order);
}

}  // namespace specfil
