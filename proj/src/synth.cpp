#include "ppgscreen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "ppgscreen/error.hpp"
#include "random_util.hpp"
#include "text_util.hpp"

namespace ppgscreen {

namespace fs = std::filesystem;
using nlohmann::json;

double PulseShape::operator()(double u) const {
  auto gauss = [](double x, double c, double w) { return std::exp(-(x - c) * (x - c) / (2.0 * w * w)); };
  return systolic_amp * gauss(u, systolic_center_s, systolic_width_s) +
         dicrotic_amp * gauss(u, dicrotic_center_s, dicrotic_width_s) -
         valley_depth * gauss(u, 0.0, valley_width_s);
}

namespace {

json shape_to_json(const PulseShape& s) {
  return {{"systolic_amp", s.systolic_amp},         {"systolic_center_s", s.systolic_center_s},
          {"systolic_width_s", s.systolic_width_s}, {"dicrotic_amp", s.dicrotic_amp},
          {"dicrotic_center_s", s.dicrotic_center_s}, {"dicrotic_width_s", s.dicrotic_width_s},
          {"valley_depth", s.valley_depth},         {"valley_width_s", s.valley_width_s}};
}

template <typename T>
void read_key(json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("synth key '") + key + "': " + e.what());
  }
  doc.erase(key);
}

void reject_leftovers(const json& doc, const std::string& where) {
  if (!doc.empty()) throw Error(ErrorKind::ConfigError, "unknown " + where + " key '" + doc.begin().key() + "'");
}

PulseShape shape_from_json(json doc, const PulseShape& defaults) {
  PulseShape s = defaults;
  read_key(doc, "systolic_amp", s.systolic_amp);
  read_key(doc, "systolic_center_s", s.systolic_center_s);
  read_key(doc, "systolic_width_s", s.systolic_width_s);
  read_key(doc, "dicrotic_amp", s.dicrotic_amp);
  read_key(doc, "dicrotic_center_s", s.dicrotic_center_s);
  read_key(doc, "dicrotic_width_s", s.dicrotic_width_s);
  read_key(doc, "valley_depth", s.valley_depth);
  read_key(doc, "valley_width_s", s.valley_width_s);
  reject_leftovers(doc, "pulse shape");
  return s;
}

PulseShape subject_shape(const PulseShape& base, double spread, std::mt19937_64& rng) {
  auto vary = [&](double v, double rel) { return v * std::max(0.2, 1.0 + rel * detail::normal(rng)); };
  PulseShape s = base;
  s.systolic_amp = vary(base.systolic_amp, spread);
  s.systolic_width_s = vary(base.systolic_width_s, spread / 2.0);
  s.dicrotic_amp = vary(base.dicrotic_amp, spread * 2.0);
  s.dicrotic_center_s = vary(base.dicrotic_center_s, spread / 4.0);
  s.dicrotic_width_s = vary(base.dicrotic_width_s, spread / 2.0);
  return s;
}

struct SegmentDraw {
  std::vector<double> onsets;
  std::vector<double> clean;
};

SegmentDraw draw_segment(const SynthSpec& spec, const PulseShape& shape, double period, std::size_t n,
                         std::mt19937_64& rng) {
  SegmentDraw d;
  double t = -(2.0 * period + detail::uniform(rng, 0.0, period));
  while (t < spec.duration_s + period) {
    d.onsets.push_back(t);
    const double rr = period * (1.0 + spec.rr_jitter * detail::normal(rng));
    t += std::clamp(rr, 0.5 * period, 1.5 * period);
  }
  d.clean.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = static_cast<double>(i) / spec.sample_rate;
    double v = spec.drift_per_s * ti;
    for (double onset : d.onsets) v += shape(ti - onset);
    d.clean[i] = v;
  }
  return d;
}

// An edge sitting in a flat trough is ambiguous (is it a valley or not?), so
// such draws are discarded. 5% of the steepest slope is well clear of the
// detector's 1% flatness rule.
bool edges_unambiguous(const std::vector<double>& x, double sample_rate) {
  const std::size_t n = x.size();
  double steepest = 0.0;
  for (std::size_t i = 1; i < n; ++i) steepest = std::max(steepest, std::abs(x[i] - x[i - 1]));
  const auto reach = std::min(n - 1, static_cast<std::size_t>(0.3 * sample_rate));
  const bool start_trough = std::abs(x[1] - x[0]) <= 0.05 * steepest &&
                            x[0] <= *std::min_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(reach) + 1);
  const bool end_trough = std::abs(x[n - 1] - x[n - 2]) <= 0.05 * steepest &&
                          x[n - 1] <= *std::min_element(x.end() - static_cast<std::ptrdiff_t>(reach) - 1, x.end());
  return !start_trough && !end_trough;
}

SegmentTruth segment_truth(const SegmentDraw& d, const PulseShape& shape, const SynthSpec& spec) {
  SegmentTruth truth;
  const auto n = static_cast<long>(d.clean.size());
  // Clean signal at any sample position, including outside the recording.
  auto clean_at = [&](long i) {
    if (i >= 0 && i < n) return d.clean[static_cast<std::size_t>(i)];
    const double ti = static_cast<double>(i) / spec.sample_rate;
    double v = spec.drift_per_s * ti;
    for (double onset : d.onsets) v += shape(ti - onset);
    return v;
  };
  for (std::size_t k = 1; k < d.onsets.size(); ++k) {
    const auto lo = static_cast<long>(std::ceil((d.onsets[k - 1] + shape.systolic_center_s) * spec.sample_rate));
    const auto hi = static_cast<long>(std::floor((d.onsets[k] + shape.systolic_center_s) * spec.sample_rate));
    if (hi < 1 || lo > n - 2) continue;
    long best = lo;
    for (long i = lo + 1; i <= hi; ++i) {
      if (clean_at(i) < clean_at(best)) best = i;
    }
    // The minimum of a beat that runs past either end belongs to the edge of
    // the recording, not to a valley inside it.
    if (best < 1 || best > n - 2) continue;
    truth.valley_indices.push_back(static_cast<std::size_t>(best));
    truth.valley_times_s.push_back(static_cast<double>(best) / spec.sample_rate);
  }
  for (std::size_t v = 1; v < truth.valley_indices.size(); ++v) {
    const auto begin = d.clean.begin() + static_cast<std::ptrdiff_t>(truth.valley_indices[v - 1]);
    const auto end = d.clean.begin() + static_cast<std::ptrdiff_t>(truth.valley_indices[v]) + 1;
    truth.peak_times_s.push_back(static_cast<double>(std::max_element(begin, end) - d.clean.begin()) / spec.sample_rate);
  }
  return truth;
}

// A beat cut by the segment edge can show a shallow trough (late diastole
// plus upward drift) that is the lowest point for a quarter second either
// way while its true minimum lies outside the recording. Such a draw has no
// well-defined truth, so it is discarded as well.
bool no_false_troughs(const std::vector<double>& clean, const SegmentTruth& truth, double sample_rate) {
  const std::size_t n = clean.size();
  const auto half = static_cast<std::size_t>(0.25 * sample_rate);
  // Troughs within a minimum cycle length of a real valley merge into it.
  const auto near = static_cast<std::size_t>(0.4 * sample_rate);
  // Late diastole is nearly flat, so "lowest" has to allow for the small
  // shifts the low-pass filter makes there.
  const auto [min_it, max_it] = std::minmax_element(clean.begin(), clean.end());
  const double slack = 0.01 * (*max_it - *min_it);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (clean[i] > clean[i - 1] || clean[i] > clean[i + 1]) continue;
    const std::size_t lo = i > half ? i - half : 0, hi = std::min(n - 1, i + half);
    bool lowest = true;
    for (std::size_t j = lo; j <= hi && lowest; ++j) lowest = clean[j] >= clean[i] - slack;
    if (!lowest) continue;
    const bool known = std::any_of(truth.valley_indices.begin(), truth.valley_indices.end(), [&](std::size_t v) {
      return (v > i ? v - i : i - v) <= near;
    });
    if (!known) return false;
  }
  return true;
}

// A valley a few samples from an edge gets pulled onto the edge by the
// low-pass and is then indistinguishable from a truncated beat.
bool valleys_clear_of_edges(const SegmentTruth& truth, std::size_t n, double sample_rate) {
  const auto margin = static_cast<std::size_t>(0.05 * sample_rate);
  for (std::size_t v : truth.valley_indices) {
    if (v < margin || v + margin >= n) return false;
  }
  return true;
}

std::string format_number(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

json to_json(const SynthSpec& s) {
  return {{"non_diabetic", s.non_diabetic},
          {"diabetic", s.diabetic},
          {"hypertensive", s.hypertensive},
          {"segments", s.segments},
          {"duration_s", s.duration_s},
          {"sample_rate", s.sample_rate},
          {"hr_min_bpm", s.hr_min_bpm},
          {"hr_max_bpm", s.hr_max_bpm},
          {"rr_jitter", s.rr_jitter},
          {"non_diabetic_shape", shape_to_json(s.non_diabetic_shape)},
          {"diabetic_shape", shape_to_json(s.diabetic_shape)},
          {"shape_spread", s.shape_spread},
          {"noise_level", s.noise_level},
          {"drift_per_s", s.drift_per_s},
          {"adc_offset", s.adc_offset},
          {"adc_gain", s.adc_gain},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& input) {
  if (!input.is_object()) throw Error(ErrorKind::ConfigError, "synth spec must be a JSON object");
  json doc = input;
  SynthSpec s;
  read_key(doc, "non_diabetic", s.non_diabetic);
  read_key(doc, "diabetic", s.diabetic);
  read_key(doc, "hypertensive", s.hypertensive);
  read_key(doc, "segments", s.segments);
  read_key(doc, "duration_s", s.duration_s);
  read_key(doc, "sample_rate", s.sample_rate);
  read_key(doc, "hr_min_bpm", s.hr_min_bpm);
  read_key(doc, "hr_max_bpm", s.hr_max_bpm);
  read_key(doc, "rr_jitter", s.rr_jitter);
  if (doc.contains("non_diabetic_shape")) {
    s.non_diabetic_shape = shape_from_json(doc["non_diabetic_shape"], s.non_diabetic_shape);
    doc.erase("non_diabetic_shape");
  }
  if (doc.contains("diabetic_shape")) {
    s.diabetic_shape = shape_from_json(doc["diabetic_shape"], s.diabetic_shape);
    doc.erase("diabetic_shape");
  }
  read_key(doc, "shape_spread", s.shape_spread);
  read_key(doc, "noise_level", s.noise_level);
  read_key(doc, "drift_per_s", s.drift_per_s);
  read_key(doc, "adc_offset", s.adc_offset);
  read_key(doc, "adc_gain", s.adc_gain);
  read_key(doc, "seed", s.seed);
  reject_leftovers(doc, "synth");
  return s;
}

SynthDataset generate_synthetic(const SynthSpec& spec) {
  if (spec.non_diabetic < 0 || spec.diabetic < 0 || spec.hypertensive < 0 || spec.segments < 1 ||
      spec.segments > 9 || !(spec.duration_s > 0.0) || !(spec.sample_rate > 0.0) ||
      !(spec.hr_min_bpm > 0.0) || spec.hr_max_bpm < spec.hr_min_bpm || spec.rr_jitter < 0.0 ||
      spec.noise_level < 0.0 || !(spec.adc_gain > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "invalid synthetic dataset spec");
  }
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));
  if (n < 3) throw Error(ErrorKind::InvalidSpec, "segments must hold at least 3 samples");

  std::mt19937_64 rng(spec.seed);
  SynthDataset out;
  struct Plan {
    const char* prefix;
    int count;
    ClassLabel label;
    bool hypertensive;
  };
  const Plan plans[] = {{"ND", spec.non_diabetic, ClassLabel::NonDiabetic, false},
                        {"DM", spec.diabetic, ClassLabel::Diabetic, false},
                        {"HT", spec.hypertensive, ClassLabel::NonDiabetic, true}};
  for (const auto& plan : plans) {
    for (int s = 1; s <= plan.count; ++s) {
      char id[16];
      std::snprintf(id, sizeof id, "%s%03d", plan.prefix, s);
      const bool diabetic = plan.label == ClassLabel::Diabetic;

      SubjectRecord rec;
      rec.subject_id = id;
      rec.sex = detail::bounded(rng, 2) == 0 ? Sex::Female : Sex::Male;
      rec.age = std::round(diabetic ? detail::uniform(rng, 45.0, 80.0) : detail::uniform(rng, 25.0, 65.0));
      rec.height_cm = std::round(detail::uniform(rng, rec.sex == Sex::Male ? 160.0 : 150.0,
                                                 rec.sex == Sex::Male ? 190.0 : 178.0));
      rec.weight_kg = std::round(detail::uniform(rng, 48.0, diabetic ? 105.0 : 95.0));
      const double h = *rec.height_cm / 100.0;
      rec.bmi = std::round(*rec.weight_kg / (h * h) * 100.0) / 100.0;
      if (plan.hypertensive) {
        rec.systolic_bp = std::round(detail::uniform(rng, 140.0, 159.0));
        rec.diastolic_bp = std::round(detail::uniform(rng, 90.0, 99.0));
        rec.hypertension_stage = HypertensionStage::Stage1;
      } else {
        rec.systolic_bp = std::round(detail::uniform(rng, 100.0, 119.0));
        rec.diastolic_bp = std::round(detail::uniform(rng, 60.0, 79.0));
        rec.hypertension_stage = HypertensionStage::Normal;
      }
      rec.has_diabetes = diabetic;

      SubjectTruth truth;
      truth.subject_id = id;
      truth.label = plan.label;
      truth.hypertensive = plan.hypertensive;
      truth.heart_rate_bpm = detail::uniform(rng, spec.hr_min_bpm, spec.hr_max_bpm);
      rec.heart_rate_bpm = std::round(truth.heart_rate_bpm);
      truth.shape = subject_shape(diabetic ? spec.diabetic_shape : spec.non_diabetic_shape, spec.shape_spread, rng);
      const double period = 60.0 / truth.heart_rate_bpm;

      for (int k = 1; k <= spec.segments; ++k) {
        SegmentDraw draw;
        SegmentTruth seg;
        for (int attempt = 0; attempt < 1000; ++attempt) {
          draw = draw_segment(spec, truth.shape, period, n, rng);
          seg = segment_truth(draw, truth.shape, spec);
          if (edges_unambiguous(draw.clean, spec.sample_rate) && valleys_clear_of_edges(seg, n, spec.sample_rate) &&
              no_false_troughs(draw.clean, seg, spec.sample_rate)) {
            break;
          }
        }
        seg.file = std::string(id) + "_" + std::to_string(k) + ".txt";
        const double noise_std = spec.noise_level * truth.shape.systolic_amp;
        Segment segment;
        segment.sample_rate = spec.sample_rate;
        segment.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double noisy = draw.clean[i] + (noise_std > 0.0 ? noise_std * detail::normal(rng) : 0.0);
          // Round to the 6 decimals written to disk so in-memory and
          // file-loaded datasets are identical.
          segment.samples[i] = *detail::parse_double(format_number(spec.adc_offset + spec.adc_gain * noisy, 6));
        }
        rec.segments.push_back(std::move(segment));
        truth.segments.push_back(std::move(seg));
      }
      out.records.push_back(std::move(rec));
      out.truth.push_back(std::move(truth));
    }
  }
  return out;
}

json truth_to_json(const SynthDataset& data, const SynthSpec& spec) {
  json subjects = json::array();
  for (const auto& t : data.truth) {
    json segments = json::array();
    for (const auto& s : t.segments) {
      segments.push_back({{"file", s.file},
                          {"valley_indices", s.valley_indices},
                          {"valley_times_s", s.valley_times_s},
                          {"peak_times_s", s.peak_times_s},
                          {"complete_cycles", s.complete_cycles()}});
    }
    subjects.push_back({{"subject_id", t.subject_id},
                        {"label", std::string(to_string(t.label))},
                        {"hypertensive", t.hypertensive},
                        {"heart_rate_bpm", t.heart_rate_bpm},
                        {"shape", shape_to_json(t.shape)},
                        {"segments", std::move(segments)}});
  }
  return {{"format_version", 1}, {"spec", to_json(spec)}, {"subjects", std::move(subjects)}};
}

void write_synthetic(const SynthDataset& data, const SynthSpec& spec, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir / "signals", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + (out_dir / "signals").string() + ": " + ec.message());

  auto open = [](const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + p.string());
    return f;
  };
  auto opt = [](const std::optional<double>& v, int decimals) { return v ? format_number(*v, decimals) : std::string(); };

  {
    auto csv = open(out_dir / "subjects.csv");
    for (std::size_t c = 0; c < metadata_columns().size(); ++c) csv << (c ? "," : "") << metadata_columns()[c];
    csv << '\n';
    for (const auto& r : data.records) {
      csv << r.subject_id << ',' << (r.sex == Sex::Male ? 'M' : 'F') << ',' << opt(r.age, 0) << ','
          << opt(r.height_cm, 0) << ',' << opt(r.weight_kg, 0) << ',' << opt(r.heart_rate_bpm, 0) << ','
          << opt(r.bmi, 2) << ',' << opt(r.systolic_bp, 0) << ',' << opt(r.diastolic_bp, 0) << ','
          << to_string(r.hypertension_stage) << ',' << (r.has_diabetes ? 1 : 0) << ','
          << (r.has_cerebrovascular_disease ? 1 : 0) << '\n';
    }
    if (!csv) throw Error(ErrorKind::IoError, "failed writing subjects.csv");
  }
  for (std::size_t s = 0; s < data.records.size(); ++s) {
    for (std::size_t k = 0; k < data.records[s].segments.size(); ++k) {
      auto f = open(out_dir / "signals" / data.truth[s].segments[k].file);
      for (double v : data.records[s].segments[k].samples) f << format_number(v, 6) << '\n';
      if (!f) throw Error(ErrorKind::IoError, "failed writing " + data.truth[s].segments[k].file);
    }
  }
  {
    auto f = open(out_dir / "truth.json");
    f << truth_to_json(data, spec).dump(2) << '\n';
    if (!f) throw Error(ErrorKind::IoError, "failed writing truth.json");
  }
}

}  // namespace ppgscreen
