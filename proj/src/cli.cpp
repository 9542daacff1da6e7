#include "ppgscreen/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ppgscreen/config.hpp"
#include "ppgscreen/error.hpp"
#include "ppgscreen/pipeline.hpp"
#include "ppgscreen/report.hpp"
#include "ppgscreen/synth.hpp"

namespace ppgscreen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  2  input unreadable: MissingFile, SchemaError, ParseError, IoError\n"
    "  3  too little data: TooFewSubjects, EmptyInput, EmptyClass, SingleClass\n"
    "  4  anything else: ConfigError, usage errors, numerical failures\n";

struct DataOptions {
  std::string data_dir;
  std::string metadata;
  std::string signals;
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<double> sample_rate;
  std::optional<std::string> exclude_ids;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.data_dir, "Dataset directory holding subjects.csv and signals/");
  cmd->add_option("--metadata", o.metadata, "Path of subjects.csv (overrides --data)");
  cmd->add_option("--signals", o.signals, "Directory of <subject_id>_<k>.txt files (overrides --data)");
  cmd->add_option("--config", o.config_file, "TOML-style config file");
  cmd->add_option("--set", o.sets, "Override one config key, e.g. --set model.lr_lambda=0.5")->take_all();
  cmd->add_option("--sample-rate", o.sample_rate, "Signal sample rate in Hz (default 1000)");
  cmd->add_option("--exclude-ids", o.exclude_ids, "Comma-separated subject IDs to drop before analysis");
  cmd->add_option("--seed", o.seed, "Random seed for folds and permutations");
  cmd->add_option("--folds", o.folds, "Number of cross-validation folds (default 5)");
}

// defaults < config file < flags
PipelineConfig resolve_config(const DataOptions& o) {
  PipelineConfig c = o.config_file.empty() ? PipelineConfig{} : load_config(o.config_file);
  if (!o.data_dir.empty()) {
    const fs::path dir = o.data_dir;
    c.metadata_path = (dir / "subjects.csv").string();
    c.signals_dir = fs::is_directory(dir / "signals") ? (dir / "signals").string() : dir.string();
  }
  if (!o.metadata.empty()) c.metadata_path = o.metadata;
  if (!o.signals.empty()) c.signals_dir = o.signals;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ConfigError, "--set expects key=value, got '" + s + "'");
    set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.sample_rate) c.sample_rate = *o.sample_rate;
  if (o.exclude_ids) set_config_value(c, "exclude_ids", *o.exclude_ids);
  if (o.seed) c.seed = *o.seed;
  if (o.folds) c.folds = *o.folds;
  if (c.metadata_path.empty()) throw Error(ErrorKind::ConfigError, "no dataset given; use --data or --metadata");
  if (c.signals_dir.empty()) c.signals_dir = fs::path(c.metadata_path).parent_path().string();
  validate_config(c);
  return c;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

LoadResult load(const PipelineConfig& c) {
  LoadOptions options;
  options.sample_rate = c.sample_rate;
  options.max_segments = c.max_segments;
  return load_dataset(c.metadata_path, c.signals_dir, options);
}

std::string pct(const json& stat) {
  if (stat.at("mean").is_null()) return "n/a";
  char buf[48];
  if (stat.at("std").is_null()) {
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * stat["mean"].get<double>());
  } else {
    std::snprintf(buf, sizeof buf, "%.1f +/- %.1f", 100.0 * stat["mean"].get<double>(), 100.0 * stat["std"].get<double>());
  }
  return buf;
}

void print_metrics(const json& report, std::ostream& out) {
  for (const auto& [kind, model] : report.at("models").items()) {
    out << kind << '\n';
    for (const auto& name : metric_names()) {
      out << "  " << name << "  " << pct(model.at("aggregate").at(name)) << '\n';
    }
  }
}

void print_summary(const CohortSummary& s, std::ostream& out) {
  auto line = [&](const char* name, const ClassSummary& c) {
    char buf[160];
    auto m = [](const Stat& st) { return st.mean ? *st.mean : 0.0; };
    std::snprintf(buf, sizeof buf, "%-13s subjects %3zu  males %3zu  cycles %4zu  age %5.1f  bmi %5.1f\n", name,
                  c.subjects, c.males, c.cycles, m(c.age), m(c.bmi));
    out << buf;
  };
  line("non_diabetic", s.non_diabetic);
  line("diabetic", s.diabetic);
  line("total", s.total);
}

int cmd_run(const DataOptions& o, const fs::path& out_dir, std::ostream& out) {
  const PipelineConfig c = resolve_config(o);
  make_dir(out_dir);
  const PipelineResult r = run_pipeline(load(c), c);
  const json report = build_report(r, c);
  write_json(report, out_dir / "report.json");
  {
    std::ofstream f(out_dir / "config.toml", std::ios::binary);
    f << format_config(c);
    if (!f) throw Error(ErrorKind::IoError, "failed writing config.toml");
  }
  write_feature_csv(r.features.vectors, out_dir / "features.csv");
  write_models(r, out_dir);
  render_figures(report, out_dir);
  print_summary(r.summary, out);
  print_metrics(report, out);
  out << "report: " << (out_dir / "report.json").string() << '\n';
  return 0;
}

int cmd_features(const DataOptions& o, const fs::path& out_dir, std::ostream& out) {
  const PipelineConfig c = resolve_config(o);
  make_dir(out_dir);
  const auto loaded = load(c);
  const Cohort cohort = select_cohort(loaded.records, c.exclude_ids);
  const CohortFeatures f = extract_cohort_features(cohort, c);
  write_feature_csv(f.vectors, out_dir / "features.csv");
  out << f.vectors.size() << " cycles written to " << (out_dir / "features.csv").string() << '\n';
  return 0;
}

int cmd_summarize(const DataOptions& o, const fs::path& out_dir, std::ostream& out) {
  const PipelineConfig c = resolve_config(o);
  make_dir(out_dir);
  const auto loaded = load(c);
  const Cohort cohort = select_cohort(loaded.records, c.exclude_ids);
  const CohortFeatures f = extract_cohort_features(cohort, c);
  json excluded = json::array();
  for (const auto& e : cohort.excluded) excluded.push_back({{"subject_id", e.subject_id}, {"reason", e.reason}});
  const json doc = {{"records_loaded", loaded.records.size()},
                    {"candidates",
                     {{"non_diabetic", cohort.count(ClassLabel::NonDiabetic)},
                      {"diabetic", cohort.count(ClassLabel::Diabetic)}}},
                    {"excluded", std::move(excluded)},
                    {"dropped_for_signal_quality", f.dropped_subjects},
                    {"rejections", f.rejections},
                    {"summary", summary_to_json(summarize_cohort(cohort, f.cycles_per_subject))}};
  write_json(doc, out_dir / "cohort_summary.json");
  print_summary(summarize_cohort(cohort, f.cycles_per_subject), out);
  return 0;
}

int cmd_report(const std::string& report_path, const fs::path& out_dir, std::ostream& out) {
  const json report = read_json(report_path);
  for (const auto& name : render_figures(report, out_dir)) out << (out_dir / name).string() << '\n';
  return 0;
}

struct SynthFlags {
  std::string spec_file;
  std::optional<int> non_diabetic, diabetic, hypertensive, segments;
  std::optional<double> noise, drift, hr_min, hr_max, rr_jitter, duration, sample_rate;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthFlags& f, const fs::path& out_dir, std::ostream& out) {
  SynthSpec spec;
  if (!f.spec_file.empty()) spec = synth_spec_from_json(read_json(f.spec_file));
  if (f.non_diabetic) spec.non_diabetic = *f.non_diabetic;
  if (f.diabetic) spec.diabetic = *f.diabetic;
  if (f.hypertensive) spec.hypertensive = *f.hypertensive;
  if (f.segments) spec.segments = *f.segments;
  if (f.noise) spec.noise_level = *f.noise;
  if (f.drift) spec.drift_per_s = *f.drift;
  if (f.hr_min) spec.hr_min_bpm = *f.hr_min;
  if (f.hr_max) spec.hr_max_bpm = *f.hr_max;
  if (f.rr_jitter) spec.rr_jitter = *f.rr_jitter;
  if (f.duration) spec.duration_s = *f.duration;
  if (f.sample_rate) spec.sample_rate = *f.sample_rate;
  if (f.seed) spec.seed = *f.seed;
  const auto data = generate_synthetic(spec);
  write_synthetic(data, spec, out_dir);
  out << data.records.size() << " subjects written to " << out_dir.string() << '\n';
  return 0;
}

void report_error(const std::string& kind, int code, const std::string& message, const std::string& out_dir,
                  std::ostream& err) {
  const json doc = {{"error", kind}, {"exit_code", code}, {"message", message}};
  err << doc.dump() << '\n';
  if (out_dir.empty()) return;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream f(fs::path(out_dir) / "error.json", std::ios::binary);
  if (f) f << doc.dump(2) << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PPG-based diabetes screening pipeline"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  std::string out_dir;
  DataOptions data;
  SynthFlags synth;
  std::string report_path;

  auto* run = app.add_subcommand("run", "Full pipeline: cohort, signal processing, features, grouped CV, report");
  add_data_options(run, data);
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* features = app.add_subcommand("features", "Write the per-cycle feature table (features.csv)");
  add_data_options(features, data);
  features->add_option("--out", out_dir, "Output directory")->required();

  auto* summarize = app.add_subcommand("summarize", "Cohort selection and per-class summary");
  add_data_options(summarize, data);
  summarize->add_option("--out", out_dir, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Regenerate figures from a stored report.json");
  report->add_option("--report", report_path, "Path of report.json")->required();
  report->add_option("--out", out_dir, "Output directory")->required();

  auto* gen = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--spec", synth.spec_file, "JSON generator spec; flags override it");
  gen->add_option("--non-diabetic", synth.non_diabetic, "Non-diabetic subjects (default 10)");
  gen->add_option("--diabetic", synth.diabetic, "Diabetic subjects (default 10)");
  gen->add_option("--hypertensive", synth.hypertensive, "Hypertensive non-diabetic subjects (default 0)");
  gen->add_option("--segments", synth.segments, "Segments per subject (default 3)");
  gen->add_option("--noise", synth.noise, "Noise std as a fraction of pulse amplitude (default 0)");
  gen->add_option("--drift", synth.drift, "Baseline drift per second (default 0.1)");
  gen->add_option("--hr-min", synth.hr_min, "Lowest heart rate, bpm (default 60)");
  gen->add_option("--hr-max", synth.hr_max, "Highest heart rate, bpm (default 90)");
  gen->add_option("--rr-jitter", synth.rr_jitter, "Relative beat-interval jitter (default 0.02)");
  gen->add_option("--duration", synth.duration, "Segment length in seconds (default 2.1)");
  gen->add_option("--sample-rate", synth.sample_rate, "Sample rate in Hz (default 1000)");
  gen->add_option("--seed", synth.seed, "Random seed (default 7)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", 4, e.what(), "", err);
    return 4;
  }

  try {
    if (*run) return cmd_run(data, out_dir, out);
    if (*features) return cmd_features(data, out_dir, out);
    if (*summarize) return cmd_summarize(data, out_dir, out);
    if (*report) return cmd_report(report_path, out_dir, out);
    if (*gen) return cmd_synth(synth, out_dir, out);
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    report_error(std::string(to_string(e.kind())), code, e.what(), out_dir, err);
    return code;
  } catch (const std::exception& e) {
    report_error("InternalError", 4, e.what(), out_dir, err);
    return 4;
  }
  return 4;
}

}  // namespace ppgscreen
