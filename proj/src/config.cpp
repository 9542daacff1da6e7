#include "ppgscreen/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ppgscreen/error.hpp"
#include "text_util.hpp"

namespace ppgscreen {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const std::string& why) {
  throw Error(ErrorKind::ConfigError,
              "invalid value '" + std::string(value) + "' for " + std::string(key) + ": " + why);
}

std::string unquote(std::string_view raw) {
  const auto v = detail::trim(raw);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) ++i;
      out += v[i];
    }
    return out;
  }
  return std::string(v);
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

double to_double(std::string_view key, std::string_view value) {
  const auto v = detail::parse_double(unquote(value));
  if (!v || !std::isfinite(*v)) bad_value(key, value, "expected a finite number");
  return *v;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view value) {
  const std::string s = unquote(value);
  Int out{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, value, "expected an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  const std::string s = detail::lower(unquote(value));
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad_value(key, value, "expected true or false");
}

std::vector<std::string> to_list(std::string_view value) {
  auto v = detail::trim(value);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  for (const auto& item : detail::split_csv_line(std::string(v))) {
    auto s = unquote(item);
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeyDef {
  const char* key;
  std::function<void(PipelineConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define PPG_DOUBLE(NAME, FIELD)                                                                  \
  KeyDef {                                                                                       \
    NAME, [](PipelineConfig& c, std::string_view k, std::string_view v) { c.FIELD = to_double(k, v); }, \
        [](const PipelineConfig& c) { return fmt_double(c.FIELD); }                              \
  }
#define PPG_INT(NAME, FIELD)                                                                          \
  KeyDef {                                                                                            \
    NAME, [](PipelineConfig& c, std::string_view k, std::string_view v) { c.FIELD = to_int<int>(k, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.FIELD); }                               \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      {"seed",
       [](PipelineConfig& c, std::string_view k, std::string_view v) { c.seed = to_int<std::uint64_t>(k, v); },
       [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      PPG_DOUBLE("sample_rate", sample_rate),
      PPG_INT("max_segments", max_segments),
      {"exclude_ids",
       [](PipelineConfig& c, std::string_view, std::string_view v) { c.exclude_ids = to_list(v); },
       [](const PipelineConfig& c) {
         std::string out = "[";
         for (std::size_t i = 0; i < c.exclude_ids.size(); ++i) out += (i ? ", " : "") + quote(c.exclude_ids[i]);
         return out + "]";
       }},
      PPG_INT("filter.order", filter.order),
      PPG_DOUBLE("filter.cutoff_hz", filter.cutoff_hz),
      {"filter.mode",
       [](PipelineConfig& c, std::string_view k, std::string_view v) {
         const auto s = detail::lower(unquote(v));
         if (s == "zero_phase") {
           c.filter.mode = FilterMode::ZeroPhase;
         } else if (s == "forward") {
           c.filter.mode = FilterMode::Forward;
         } else {
           bad_value(k, v, "expected zero_phase or forward");
         }
       },
       [](const PipelineConfig& c) {
         return quote(c.filter.mode == FilterMode::ZeroPhase ? "zero_phase" : "forward");
       }},
      PPG_DOUBLE("fsw.window_s", fsw.window_s),
      PPG_DOUBLE("fsw.edge_flat_frac", fsw.edge_flat_frac),
      // One key drives both the valley merge distance and the cycle check.
      {"cycle.min_s",
       [](PipelineConfig& c, std::string_view k, std::string_view v) {
         c.cycle.min_s = c.fsw.min_cycle_s = to_double(k, v);
       },
       [](const PipelineConfig& c) { return fmt_double(c.cycle.min_s); }},
      PPG_DOUBLE("cycle.max_s", cycle.max_s),
      PPG_DOUBLE("cycle.peak_prominence_frac", cycle.peak_prominence_frac),
      PPG_DOUBLE("cycle.peak_position_frac", cycle.peak_position_frac),
      PPG_DOUBLE("cycle.baseline_tolerance", cycle.baseline_tolerance),
      {"features.impute_missing",
       [](PipelineConfig& c, std::string_view k, std::string_view v) { c.impute_missing = to_bool(k, v); },
       [](const PipelineConfig& c) { return std::string(c.impute_missing ? "true" : "false"); }},
      PPG_DOUBLE("model.lr_lambda", logreg.lambda),
      PPG_DOUBLE("model.lr_tolerance", logreg.tolerance),
      PPG_INT("model.lr_max_sweeps", logreg.max_sweeps),
      PPG_INT("model.gbt_rounds", gbt.rounds),
      PPG_DOUBLE("model.gbt_learning_rate", gbt.learning_rate),
      PPG_INT("model.gbt_max_depth", gbt.max_depth),
      PPG_DOUBLE("model.gbt_lambda", gbt.lambda),
      PPG_INT("model.gbt_min_child_count", gbt.min_child_count),
      PPG_INT("eval.folds", folds),
      PPG_DOUBLE("eval.threshold", threshold),
      PPG_INT("eval.permutation_repeats", permutation_repeats),
      {"paths.metadata",
       [](PipelineConfig& c, std::string_view, std::string_view v) { c.metadata_path = unquote(v); },
       [](const PipelineConfig& c) { return quote(c.metadata_path); }},
      {"paths.signals",
       [](PipelineConfig& c, std::string_view, std::string_view v) { c.signals_dir = unquote(v); },
       [](const PipelineConfig& c) { return quote(c.signals_dir); }},
  };
  return table;
}

#undef PPG_DOUBLE
#undef PPG_INT

const KeyDef& find_key(std::string_view key) {
  for (const auto& def : key_table()) {
    if (key == def.key) return def;
  }
  throw Error(ErrorKind::ConfigError, "unknown config key '" + std::string(key) + "'");
}

// Drops a trailing comment, ignoring '#' inside double quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  for (const auto& def : key_table()) {
    if (def.get(a) != def.get(b)) return false;
  }
  return a.fsw.min_cycle_s == b.fsw.min_cycle_s;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& def : key_table()) out.emplace_back(def.key);
    return out;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  find_key(key).set(config, key, value);
}

std::string get_config_value(const PipelineConfig& config, std::string_view key) {
  return find_key(key).get(config);
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (line_no == 1) detail::strip_bom(raw);
    const auto line = detail::trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto name = std::string(detail::trim(line.substr(0, eq)));
    const auto key = section.empty() ? name : section + "." + name;
    set_config_value(config, key, line.substr(eq + 1));
  }
  validate_config(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string format_config(const PipelineConfig& config) {
  std::string out;
  std::string section;
  for (const auto& def : key_table()) {
    const std::string key = def.key;
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (sec != section) {
      if (sec.empty()) {
        throw std::logic_error("top-level config keys must precede sections");
      }
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += name + " = " + def.get(config) + "\n";
  }
  return out;
}

nlohmann::json config_to_json(const PipelineConfig& config) {
  nlohmann::json doc = nlohmann::json::object();
  doc["filter"] = {{"order", config.filter.order},
                   {"cutoff_hz", config.filter.cutoff_hz},
                   {"mode", config.filter.mode == FilterMode::ZeroPhase ? "zero_phase" : "forward"}};
  doc["fsw"] = {{"window_s", config.fsw.window_s}, {"edge_flat_frac", config.fsw.edge_flat_frac}};
  doc["cycle"] = {{"min_s", config.cycle.min_s},
                  {"max_s", config.cycle.max_s},
                  {"peak_prominence_frac", config.cycle.peak_prominence_frac},
                  {"peak_position_frac", config.cycle.peak_position_frac},
                  {"baseline_tolerance", config.cycle.baseline_tolerance}};
  doc["features"] = {{"impute_missing", config.impute_missing}};
  doc["model"] = {{"lr_lambda", config.logreg.lambda},
                  {"lr_tolerance", config.logreg.tolerance},
                  {"lr_max_sweeps", config.logreg.max_sweeps},
                  {"gbt_rounds", config.gbt.rounds},
                  {"gbt_learning_rate", config.gbt.learning_rate},
                  {"gbt_max_depth", config.gbt.max_depth},
                  {"gbt_lambda", config.gbt.lambda},
                  {"gbt_min_child_count", config.gbt.min_child_count}};
  doc["eval"] = {{"folds", config.folds},
                 {"threshold", config.threshold},
                 {"permutation_repeats", config.permutation_repeats},
                 {"stratified", true},
                 {"grouped_by", "subject_id"}};
  doc["seed"] = config.seed;
  doc["sample_rate"] = config.sample_rate;
  doc["max_segments"] = config.max_segments;
  doc["exclude_ids"] = config.exclude_ids;
  // Paths are left out on purpose: they differ between machines but not
  // between results.
  return doc;
}

void validate_config(const PipelineConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::ConfigError, what);
  };
  require(c.filter.order > 0 && c.filter.order % 2 == 0, "filter.order must be a positive even number");
  require(c.sample_rate > 0.0, "sample_rate must be positive");
  require(c.filter.cutoff_hz > 0.0 && c.filter.cutoff_hz < c.sample_rate / 2.0,
          "filter.cutoff_hz must lie in (0, sample_rate / 2)");
  require(c.fsw.window_s > 0.0, "fsw.window_s must be positive");
  require(c.fsw.edge_flat_frac >= 0.0, "fsw.edge_flat_frac must be non-negative");
  require(c.cycle.min_s > 0.0 && c.cycle.min_s < c.cycle.max_s, "cycle.min_s must be positive and below cycle.max_s");
  require(c.cycle.peak_prominence_frac >= 0.0 && c.cycle.peak_prominence_frac <= 1.0,
          "cycle.peak_prominence_frac must lie in [0, 1]");
  require(c.cycle.peak_position_frac > 0.0 && c.cycle.peak_position_frac <= 1.0,
          "cycle.peak_position_frac must lie in (0, 1]");
  require(c.cycle.baseline_tolerance >= 0.0, "cycle.baseline_tolerance must be non-negative");
  require(c.logreg.lambda >= 0.0, "model.lr_lambda must be non-negative");
  require(c.logreg.tolerance > 0.0, "model.lr_tolerance must be positive");
  require(c.logreg.max_sweeps > 0, "model.lr_max_sweeps must be positive");
  require(c.gbt.rounds >= 0, "model.gbt_rounds must be non-negative");
  require(c.gbt.learning_rate > 0.0, "model.gbt_learning_rate must be positive");
  require(c.gbt.max_depth >= 0, "model.gbt_max_depth must be non-negative");
  require(c.gbt.lambda >= 0.0, "model.gbt_lambda must be non-negative");
  require(c.gbt.min_child_count >= 1, "model.gbt_min_child_count must be at least 1");
  require(c.folds >= 2, "eval.folds must be at least 2");
  require(c.threshold > 0.0 && c.threshold < 1.0, "eval.threshold must lie in (0, 1)");
  require(c.permutation_repeats >= 0, "eval.permutation_repeats must be non-negative");
  require(c.max_segments >= 1, "max_segments must be at least 1");
}

}  // namespace ppgscreen
