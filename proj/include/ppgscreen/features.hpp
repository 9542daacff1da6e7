#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppgscreen/dataset.hpp"
#include "ppgscreen/dsp.hpp"

namespace ppgscreen {

inline constexpr std::size_t kPpgFeatureCount = 104;
inline constexpr std::size_t kMetadataFeatureCount = 6;
inline constexpr std::size_t kFeatureCount = kPpgFeatureCount + kMetadataFeatureCount;

/// Central differences in the interior, one-sided at both ends.
/// Throws Error{TooShort} for fewer than 3 samples.
std::vector<double> derivative(std::span<const double> samples, double sample_rate);

struct TimedValue {
  double t = 0.0;  // seconds from cycle onset
  double v = 0.0;
};

struct FiducialSet {
  double onset_t = 0.0, peak_t = 0.0, end_t = 0.0;
  double onset_v = 0.0, peak_v = 0.0, end_v = 0.0;
  std::size_t peak_index = 0;
  /// First dominant local maximum of the first derivative before the peak.
  TimedValue d1_max;
  /// Minimum of the first derivative after the peak.
  TimedValue d1_min;
  /// Second-derivative waves: a = maximum before the peak, then alternating
  /// minimum/maximum extrema b, c, d, e.
  std::optional<TimedValue> d2_a, d2_b, d2_c, d2_d, d2_e;
  std::optional<TimedValue> notch;
  std::optional<TimedValue> diastolic_peak;
};

/// Throws Error{NoPeak} when every sample is equal.
FiducialSet detect_fiducials(const PulseCycle& cycle);

enum class SignalKind { Cycle, FirstDerivative, SecondDerivative };

enum class FeatureUnit {
  Seconds,
  PerMinute,
  Ratio,
  Flag,
  Amplitude,
  AmplitudeSeconds,
  AmplitudePerSecond,
  AmplitudePerSecond2,
  PerSecond,
};

struct FeatureContext;

struct FeatureDef {
  std::string name;
  SignalKind signal = SignalKind::Cycle;
  FeatureUnit unit = FeatureUnit::Ratio;
  std::string formula;
  double parameter = 0.0;
  std::string description;
  double (*evaluate)(const FeatureContext&, double parameter) = nullptr;
};

using FeatureCatalog = std::vector<FeatureDef>;

/// The fixed 104-entry catalog documented in FEATURES.md.
const FeatureCatalog& default_catalog();

/// Names of all 110 model inputs: catalog order, then metadata.
const std::vector<std::string>& feature_names();

bool is_time_based(FeatureUnit unit);
bool is_amplitude_scaled(FeatureUnit unit);

/// Values in catalog order. Throws Error{DegenerateCycle} for zero duration,
/// zero amplitude range, non-positive mean, or any non-finite result.
std::vector<double> compute_features(const PulseCycle& cycle, const FiducialSet& fiducials,
                                     const FeatureCatalog& catalog = default_catalog());

struct FeatureVector {
  std::string subject_id;
  std::vector<double> values;  // kFeatureCount entries
  ClassLabel label = ClassLabel::NonDiabetic;
  int segment_index = 0;
  std::size_t onset_index = 0;
};

/// Median of each metadata field over a reference set of subjects.
class MetadataImputer {
 public:
  MetadataImputer() = default;
  explicit MetadataImputer(const std::vector<SubjectRecord>& reference);

  std::optional<double> median(const std::string& field) const;

 private:
  std::map<std::string, double> medians_;
};

struct ImputationEntry {
  std::string subject_id;
  std::string field;
  double value = 0.0;
};

/// [104 PPG features; sex, age, height, weight, heart_rate, bmi]. Sex encodes
/// female = 0, male = 1. Blood pressure is never included. Missing metadata
/// is replaced by the imputer's median and logged; without an imputer it
/// throws Error{MissingMetadata}.
FeatureVector assemble_vector(const SubjectRecord& subject, std::span<const double> ppg_features,
                              const MetadataImputer* imputer = nullptr,
                              std::vector<ImputationEntry>* log = nullptr);

}  // namespace ppgscreen
