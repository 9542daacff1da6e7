#include "ppgscreen/pipeline.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <set>

#include "ppgscreen/error.hpp"

namespace ppgscreen {

Segmentation process_segment(const Segment& segment, const PipelineConfig& config,
                             const std::string& subject_id, int segment_index) {
  FilterSpec spec = config.filter;
  spec.sample_rate_hz = segment.sample_rate;
  Segmentation out;
  try {
    const Segment filtered = filter_segment(segment, spec);
    const BaselineFit fit = fsw_baseline(filtered, config.fsw);
    out = segment_cycles(filtered, fit, config.cycle, subject_id, segment_index);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::TooShort && e.kind() != ErrorKind::NoValleys && e.kind() != ErrorKind::InvalidSpec) {
      throw;
    }
    const char* reason = e.kind() == ErrorKind::TooShort    ? "segment_too_short"
                         : e.kind() == ErrorKind::NoValleys ? "segment_no_valleys"
                                                            : "segment_filter_spec";
    out.rejected.push_back({0, segment.samples.empty() ? 0 : segment.samples.size() - 1, reason});
  }
  return out;
}

CohortFeatures extract_cohort_features(const Cohort& cohort, const PipelineConfig& config) {
  CohortFeatures out;
  std::vector<SubjectRecord> reference;
  for (const auto& m : cohort.included) reference.push_back(m.record);
  const MetadataImputer imputer(reference);
  const MetadataImputer* use_imputer = config.impute_missing ? &imputer : nullptr;

  for (const auto& member : cohort.included) {
    const auto& rec = member.record;
    std::size_t accepted = 0;
    bool logged = false;
    for (std::size_t k = 0; k < rec.segments.size(); ++k) {
      Segmentation seg = process_segment(rec.segments[k], config, rec.subject_id, static_cast<int>(k));
      for (const auto& r : seg.rejected) ++out.rejections[r.reason];
      for (auto& cycle : seg.cycles) {
        std::vector<double> ppg;
        try {
          ppg = compute_features(cycle, detect_fiducials(cycle));
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::DegenerateCycle && e.kind() != ErrorKind::NoPeak) throw;
          ++out.rejections["degenerate"];
          continue;
        }
        // Imputations are per subject; log them once, not once per cycle.
        FeatureVector v = assemble_vector(rec, ppg, use_imputer, logged ? nullptr : &out.imputations);
        logged = true;
        v.label = member.label;
        v.segment_index = cycle.segment_index;
        v.onset_index = cycle.onset_index;
        out.vectors.push_back(std::move(v));
        out.cycles.push_back(std::move(cycle));
        ++accepted;
      }
    }
    out.cycles_per_subject[rec.subject_id] = accepted;
    if (accepted == 0) out.dropped_subjects.push_back(rec.subject_id);
  }
  return out;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  void str(const std::string& s) {
    const std::uint64_t n = s.size();
    bytes(&n, sizeof n);
    bytes(s.data(), s.size());
  }
  void num(double v) { bytes(&v, sizeof v); }
  void opt(const std::optional<double>& v) {
    const unsigned char present = v ? 1 : 0;
    bytes(&present, 1);
    if (v) num(*v);
  }
};

}  // namespace

std::string dataset_fingerprint(const std::vector<SubjectRecord>& records) {
  Fnv1a f;
  for (const auto& r : records) {
    f.str(r.subject_id);
    const int flags[] = {static_cast<int>(r.sex), static_cast<int>(r.hypertension_stage), r.has_diabetes ? 1 : 0,
                         r.has_cerebrovascular_disease ? 1 : 0};
    f.bytes(flags, sizeof flags);
    for (const auto* v : {&r.age, &r.height_cm, &r.weight_kg, &r.heart_rate_bpm, &r.bmi, &r.systolic_bp, &r.diastolic_bp}) {
      f.opt(*v);
    }
    for (const auto& s : r.segments) {
      f.num(s.sample_rate);
      const std::uint64_t n = s.samples.size();
      f.bytes(&n, sizeof n);
      f.bytes(s.samples.data(), s.samples.size() * sizeof(double));
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f.h));
  return buf;
}

PipelineResult run_pipeline(const LoadResult& loaded, const PipelineConfig& config) {
  validate_config(config);
  PipelineResult r;
  r.fingerprint = dataset_fingerprint(loaded.records);
  r.records_loaded = loaded.records.size();
  r.load_issues = loaded.issues;

  Cohort cohort = select_cohort(loaded.records, config.exclude_ids);
  r.candidates_non_diabetic = cohort.count(ClassLabel::NonDiabetic);
  r.candidates_diabetic = cohort.count(ClassLabel::Diabetic);
  r.features = extract_cohort_features(cohort, config);

  const std::set<std::string> dropped(r.features.dropped_subjects.begin(), r.features.dropped_subjects.end());
  for (auto& m : cohort.included) {
    if (dropped.count(m.record.subject_id)) {
      r.cohort.excluded.push_back({m.record.subject_id, "signal_quality"});
    } else {
      r.cohort.included.push_back(std::move(m));
    }
  }
  r.cohort.excluded.insert(r.cohort.excluded.begin(), cohort.excluded.begin(), cohort.excluded.end());
  r.summary = summarize_cohort(r.cohort, r.features.cycles_per_subject);

  r.plan = grouped_stratified_kfold(r.features.vectors, config.folds, config.seed);
  EvalOptions eval;
  eval.threshold = config.threshold;
  eval.permutation_repeats = config.permutation_repeats;
  eval.seed = config.seed;
  ModelConfig model;
  model.logreg = config.logreg;
  model.gbt = config.gbt;
  model.kind = ModelKind::LogisticRegression;
  r.logreg = cross_validate(r.features.vectors, r.plan, model, eval);
  model.kind = ModelKind::GradientBoosting;
  r.gbt = cross_validate(r.features.vectors, r.plan, model, eval);

  std::vector<ClassLabel> labels;
  for (const auto& v : r.features.vectors) labels.push_back(v.label);
  r.mean_cycles = mean_cycle_report(r.features.cycles, labels);
  return r;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  LoadOptions options;
  options.sample_rate = config.sample_rate;
  options.max_segments = config.max_segments;
  return run_pipeline(load_dataset(config.metadata_path, config.signals_dir, options), config);
}

}  // namespace ppgscreen
