#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ppgscreen {

enum class Sex { Female, Male };

enum class HypertensionStage { Normal, Prehypertension, Stage1, Stage2, Unknown };

enum class ClassLabel { NonDiabetic = 0, Diabetic = 1 };

std::string_view to_string(HypertensionStage stage);
std::string_view to_string(ClassLabel label);

/// One contiguous PPG recording. Amplitudes are raw ADC units.
struct Segment {
  std::vector<double> samples;
  double sample_rate = 1000.0;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct SubjectRecord {
  std::string subject_id;
  Sex sex = Sex::Female;
  std::optional<double> age;
  std::optional<double> height_cm;
  std::optional<double> weight_kg;
  std::optional<double> heart_rate_bpm;
  std::optional<double> bmi;
  // Loaded for completeness; never exported as model features.
  std::optional<double> systolic_bp;
  std::optional<double> diastolic_bp;
  HypertensionStage hypertension_stage = HypertensionStage::Unknown;
  bool has_diabetes = false;
  bool has_cerebrovascular_disease = false;
  std::vector<Segment> segments;
};

/// A problem found while loading one metadata row or its signal files.
/// Fatal issues drop the record; non-fatal ones are informational.
struct LoadIssue {
  std::size_t row = 0;  // 1-based data row (header excluded); 0 for file-level
  std::string subject_id;
  std::string column;
  std::string message;
  bool fatal = true;
};

struct LoadResult {
  std::vector<SubjectRecord> records;
  std::vector<LoadIssue> issues;
};

struct LoadOptions {
  double sample_rate = 1000.0;
  int max_segments = 3;
};

/// Columns required in subjects.csv, in canonical order.
const std::vector<std::string>& metadata_columns();

/// Reads subjects.csv plus `<subject_id>_<k>.txt` signal files.
/// Throws Error{MissingFile} when the metadata file or every segment file of
/// a subject is missing, Error{SchemaError} when a column is absent. Rows with
/// unparseable values are reported in LoadResult::issues and skipped.
LoadResult load_dataset(const std::filesystem::path& metadata_path,
                        const std::filesystem::path& signals_dir,
                        const LoadOptions& options = {});

/// Parses one signal file: whitespace-, comma- or newline-separated reals.
Segment load_segment(const std::filesystem::path& path, double sample_rate);

struct CohortMember {
  SubjectRecord record;
  ClassLabel label = ClassLabel::NonDiabetic;
};

struct Exclusion {
  std::string subject_id;
  std::string reason;
};

struct Cohort {
  std::vector<CohortMember> included;
  std::vector<Exclusion> excluded;

  std::size_t count(ClassLabel label) const;
};

inline constexpr const char* kComorbidityFilter = "comorbidity_filter";
inline constexpr const char* kManualExclusion = "manual_exclusion";

/// Non-diabetic arm: no diabetes, normal blood pressure, no cerebrovascular
/// disease. Diabetic arm: every diabetic subject regardless of comorbidity.
/// Subjects listed in `exclude_ids` are removed first.
Cohort select_cohort(const std::vector<SubjectRecord>& records,
                     const std::vector<std::string>& exclude_ids = {});

struct Stat {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> std;  // sample (n-1) standard deviation
};

Stat describe(const std::vector<double>& values);

struct ClassSummary {
  std::size_t subjects = 0;
  std::size_t males = 0;
  std::size_t cycles = 0;
  Stat age, height_cm, weight_kg, heart_rate_bpm, bmi;
};

struct CohortSummary {
  ClassSummary non_diabetic;
  ClassSummary diabetic;
  ClassSummary total;
};

/// Table-style cohort description. Subjects missing from `cycles_per_subject`
/// count as zero cycles.
CohortSummary summarize_cohort(const Cohort& cohort,
                               const std::map<std::string, std::size_t>& cycles_per_subject);

}  // namespace ppgscreen
