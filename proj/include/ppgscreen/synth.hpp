#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppgscreen/dataset.hpp"

namespace ppgscreen {

/// One beat: systolic and dicrotic Gaussians plus a narrow negative dip
/// centred on the beat onset, which pins the inter-beat valley.
struct PulseShape {
  double systolic_amp = 1.0;
  double systolic_center_s = 0.18;
  double systolic_width_s = 0.045;
  double dicrotic_amp = 0.40;
  double dicrotic_center_s = 0.40;
  double dicrotic_width_s = 0.09;
  double valley_depth = 0.30;
  double valley_width_s = 0.03;

  double operator()(double u) const;
};

struct SynthSpec {
  int non_diabetic = 10;
  int diabetic = 10;
  int hypertensive = 0;  // non-diabetic stage-1 subjects the cohort filter must drop
  int segments = 3;
  double duration_s = 2.1;
  double sample_rate = 1000.0;
  double hr_min_bpm = 60.0;
  double hr_max_bpm = 90.0;
  double rr_jitter = 0.02;  // relative std of beat-to-beat intervals
  PulseShape non_diabetic_shape{};
  PulseShape diabetic_shape{1.0, 0.18, 0.055, 0.22, 0.40, 0.09, 0.30, 0.03};
  double shape_spread = 0.10;  // relative per-subject variation of the shape
  double noise_level = 0.0;    // white-noise std as a fraction of systolic_amp
  double drift_per_s = 0.1;    // linear baseline drift, amplitude units per second
  double adc_offset = 2048.0;
  double adc_gain = 400.0;
  std::uint64_t seed = 7;
};

nlohmann::json to_json(const SynthSpec& spec);
/// Missing keys keep their defaults; unknown keys throw Error{ConfigError}.
SynthSpec synth_spec_from_json(const nlohmann::json& doc);

struct SegmentTruth {
  std::string file;
  std::vector<std::size_t> valley_indices;
  std::vector<double> valley_times_s;
  std::vector<double> peak_times_s;  // one per complete cycle
  std::size_t complete_cycles() const { return valley_indices.empty() ? 0 : valley_indices.size() - 1; }
};

struct SubjectTruth {
  std::string subject_id;
  ClassLabel label = ClassLabel::NonDiabetic;
  bool hypertensive = false;
  double heart_rate_bpm = 0.0;
  PulseShape shape;
  std::vector<SegmentTruth> segments;
};

struct SynthDataset {
  std::vector<SubjectRecord> records;
  std::vector<SubjectTruth> truth;
};

/// Deterministic given spec.seed. Truth valleys are the minima of the clean
/// (noise-free, drift included) sampled signal between consecutive beats.
/// Segment start phases are drawn so that neither edge sits in a flat trough.
SynthDataset generate_synthetic(const SynthSpec& spec);

/// Writes subjects.csv, signals/<id>_<k>.txt and truth.json under `out_dir`.
/// Throws Error{IoError} on write failure.
void write_synthetic(const SynthDataset& data, const SynthSpec& spec,
                     const std::filesystem::path& out_dir);

nlohmann::json truth_to_json(const SynthDataset& data, const SynthSpec& spec);

}  // namespace ppgscreen
