#include "ppgscreen/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ppgscreen/error.hpp"
#include "text_util.hpp"

namespace ppgscreen {

namespace fs = std::filesystem;

std::string_view to_string(HypertensionStage stage) {
  switch (stage) {
    case HypertensionStage::Normal: return "normal";
    case HypertensionStage::Prehypertension: return "prehtn";
    case HypertensionStage::Stage1: return "stage1";
    case HypertensionStage::Stage2: return "stage2";
    case HypertensionStage::Unknown: return "";
  }
  return "";
}

std::string_view to_string(ClassLabel label) {
  return label == ClassLabel::Diabetic ? "diabetic" : "non_diabetic";
}

const std::vector<std::string>& metadata_columns() {
  static const std::vector<std::string> columns = {
      "subject_id", "sex",      "age",      "height_cm",          "weight_kg",  "heart_rate_bpm",
      "bmi",        "sbp_mmhg", "dbp_mmhg", "hypertension_stage", "diabetes",   "cerebrovascular"};
  return columns;
}

namespace {

struct RowContext {
  std::size_t row;
  std::string subject_id;
};

class RowError : public std::runtime_error {
 public:
  RowError(std::string column, const std::string& message)
      : std::runtime_error(message), column(std::move(column)) {}
  std::string column;
};

std::optional<double> parse_optional_number(std::string_view text, const std::string& column) {
  const std::string_view trimmed = detail::trim(text);
  if (trimmed.empty() || detail::iequals(trimmed, "na") || detail::iequals(trimmed, "nan")) {
    return std::nullopt;
  }
  const auto value = detail::parse_double(trimmed);
  if (!value || !std::isfinite(*value)) {
    throw RowError(column, "cannot parse '" + std::string(trimmed) + "' as a number");
  }
  return value;
}

bool parse_flag(std::string_view text, const std::string& column) {
  const std::string_view trimmed = detail::trim(text);
  if (trimmed == "1") return true;
  if (trimmed == "0") return false;
  throw RowError(column, "expected 0 or 1, got '" + std::string(trimmed) + "'");
}

Sex parse_sex(std::string_view text) {
  const std::string_view trimmed = detail::trim(text);
  if (detail::iequals(trimmed, "M") || detail::iequals(trimmed, "male")) return Sex::Male;
  if (detail::iequals(trimmed, "F") || detail::iequals(trimmed, "female")) return Sex::Female;
  throw RowError("sex", "expected F or M, got '" + std::string(trimmed) + "'");
}

HypertensionStage parse_stage(std::string_view text) {
  std::string key = detail::lower(detail::trim(text));
  key.erase(std::remove_if(key.begin(), key.end(), [](char c) { return c == ' ' || c == '_'; }),
            key.end());
  if (key.empty() || key == "unknown") return HypertensionStage::Unknown;
  if (key == "normal") return HypertensionStage::Normal;
  if (key == "prehtn" || key == "prehypertension") return HypertensionStage::Prehypertension;
  if (key == "stage1" || key == "stage1hypertension") return HypertensionStage::Stage1;
  if (key == "stage2" || key == "stage2hypertension") return HypertensionStage::Stage2;
  throw RowError("hypertension_stage", "unknown stage '" + std::string(detail::trim(text)) + "'");
}

}  // namespace

Segment load_segment(const fs::path& path, double sample_rate) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open signal file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  Segment segment;
  segment.sample_rate = sample_rate;
  std::size_t pos = 0;
  auto is_sep = [](char c) { return c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c)); };
  while (pos < text.size()) {
    while (pos < text.size() && is_sep(text[pos])) ++pos;
    if (pos >= text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && !is_sep(text[end])) ++end;
    const std::string_view token(text.data() + pos, end - pos);
    const auto value = detail::parse_double(token);
    if (!value || !std::isfinite(*value)) {
      throw Error(ErrorKind::ParseError, path.string() + ": bad sample '" + std::string(token) +
                                             "' at sample " + std::to_string(segment.samples.size() + 1));
    }
    segment.samples.push_back(*value);
    pos = end;
  }
  if (segment.samples.size() < 2) {
    throw Error(ErrorKind::ParseError, path.string() + ": fewer than 2 samples");
  }
  return segment;
}

LoadResult load_dataset(const fs::path& metadata_path, const fs::path& signals_dir,
                        const LoadOptions& options) {
  if (!(options.sample_rate > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "sample rate must be positive");
  }
  std::ifstream in(metadata_path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open metadata file " + metadata_path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaError, "metadata file is empty");
  detail::strip_bom(line);
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    index[detail::lower(detail::trim(header[i]))] = i;
  }
  for (const auto& column : metadata_columns()) {
    if (!index.count(column)) {
      throw Error(ErrorKind::SchemaError, "metadata is missing column '" + column + "'");
    }
  }

  LoadResult result;
  std::set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto fields = detail::split_csv_line(line);
    auto field = [&](const std::string& column) -> std::string_view {
      const std::size_t i = index.at(column);
      return i < fields.size() ? std::string_view(fields[i]) : std::string_view();
    };

    SubjectRecord record;
    record.subject_id = std::string(detail::trim(field("subject_id")));
    try {
      if (record.subject_id.empty()) throw RowError("subject_id", "empty subject id");
      if (seen.count(record.subject_id)) throw RowError("subject_id", "duplicate subject id");
      record.sex = parse_sex(field("sex"));
      record.age = parse_optional_number(field("age"), "age");
      if (record.age && *record.age <= 0.0) throw RowError("age", "age must be positive");
      record.height_cm = parse_optional_number(field("height_cm"), "height_cm");
      record.weight_kg = parse_optional_number(field("weight_kg"), "weight_kg");
      record.heart_rate_bpm = parse_optional_number(field("heart_rate_bpm"), "heart_rate_bpm");
      record.bmi = parse_optional_number(field("bmi"), "bmi");
      record.systolic_bp = parse_optional_number(field("sbp_mmhg"), "sbp_mmhg");
      record.diastolic_bp = parse_optional_number(field("dbp_mmhg"), "dbp_mmhg");
      record.hypertension_stage = parse_stage(field("hypertension_stage"));
      record.has_diabetes = parse_flag(field("diabetes"), "diabetes");
      record.has_cerebrovascular_disease = parse_flag(field("cerebrovascular"), "cerebrovascular");
    } catch (const RowError& e) {
      result.issues.push_back({row, record.subject_id, e.column, e.what(), true});
      continue;
    }
    seen.insert(record.subject_id);

    if (record.bmi && record.height_cm && record.weight_kg && *record.height_cm > 0.0) {
      const double h = *record.height_cm / 100.0;
      const double expected = *record.weight_kg / (h * h);
      if (std::abs(expected - *record.bmi) > 1.0) {
        result.issues.push_back({row, record.subject_id, "bmi",
                                 "bmi differs from weight/height^2 by more than 1.0", false});
      }
    }

    bool any_file = false;
    bool segment_failed = false;
    for (int k = 1; k <= options.max_segments; ++k) {
      const fs::path path = signals_dir / (record.subject_id + "_" + std::to_string(k) + ".txt");
      if (!fs::exists(path)) continue;
      any_file = true;
      try {
        record.segments.push_back(load_segment(path, options.sample_rate));
      } catch (const Error& e) {
        result.issues.push_back({row, record.subject_id, "segment_" + std::to_string(k), e.what(), true});
        segment_failed = true;
        break;
      }
    }
    if (!any_file) {
      throw Error(ErrorKind::MissingFile, "no signal files for subject '" + record.subject_id +
                                              "' in " + signals_dir.string());
    }
    if (segment_failed) continue;
    result.records.push_back(std::move(record));
  }
  return result;
}

std::size_t Cohort::count(ClassLabel label) const {
  return static_cast<std::size_t>(std::count_if(
      included.begin(), included.end(), [label](const CohortMember& m) { return m.label == label; }));
}

Cohort select_cohort(const std::vector<SubjectRecord>& records,
                     const std::vector<std::string>& exclude_ids) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no subject records");
  const std::set<std::string> manual(exclude_ids.begin(), exclude_ids.end());
  Cohort cohort;
  for (const auto& record : records) {
    if (manual.count(record.subject_id)) {
      cohort.excluded.push_back({record.subject_id, kManualExclusion});
    } else if (record.has_diabetes) {
      cohort.included.push_back({record, ClassLabel::Diabetic});
    } else if (record.hypertension_stage == HypertensionStage::Normal &&
               !record.has_cerebrovascular_disease) {
      cohort.included.push_back({record, ClassLabel::NonDiabetic});
    } else {
      cohort.excluded.push_back({record.subject_id, kComorbidityFilter});
    }
  }
  return cohort;
}

Stat describe(const std::vector<double>& values) {
  Stat stat;
  stat.n = values.size();
  if (values.empty()) return stat;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  stat.mean = mean;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    stat.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return stat;
}

namespace {

ClassSummary summarize_members(const std::vector<const CohortMember*>& members,
                               const std::map<std::string, std::size_t>& cycles_per_subject) {
  ClassSummary summary;
  std::vector<double> age, height, weight, hr, bmi;
  for (const CohortMember* member : members) {
    const SubjectRecord& r = member->record;
    ++summary.subjects;
    if (r.sex == Sex::Male) ++summary.males;
    if (auto it = cycles_per_subject.find(r.subject_id); it != cycles_per_subject.end()) {
      summary.cycles += it->second;
    }
    if (r.age) age.push_back(*r.age);
    if (r.height_cm) height.push_back(*r.height_cm);
    if (r.weight_kg) weight.push_back(*r.weight_kg);
    if (r.heart_rate_bpm) hr.push_back(*r.heart_rate_bpm);
    if (r.bmi) bmi.push_back(*r.bmi);
  }
  summary.age = describe(age);
  summary.height_cm = describe(height);
  summary.weight_kg = describe(weight);
  summary.heart_rate_bpm = describe(hr);
  summary.bmi = describe(bmi);
  return summary;
}

}  // namespace

CohortSummary summarize_cohort(const Cohort& cohort,
                               const std::map<std::string, std::size_t>& cycles_per_subject) {
  std::vector<const CohortMember*> non_diabetic, diabetic, all;
  for (const auto& member : cohort.included) {
    (member.label == ClassLabel::Diabetic ? diabetic : non_diabetic).push_back(&member);
    all.push_back(&member);
  }
  return {summarize_members(non_diabetic, cycles_per_subject),
          summarize_members(diabetic, cycles_per_subject),
          summarize_members(all, cycles_per_subject)};
}

}  // namespace ppgscreen
