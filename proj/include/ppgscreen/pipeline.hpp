#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ppgscreen/config.hpp"
#include "ppgscreen/dataset.hpp"
#include "ppgscreen/dsp.hpp"
#include "ppgscreen/eval.hpp"
#include "ppgscreen/features.hpp"

namespace ppgscreen {

/// Filter -> FSW baseline -> segmentation for one segment. Segment-level
/// failures (too short, no valleys) become a single rejection instead of an
/// exception.
Segmentation process_segment(const Segment& segment, const PipelineConfig& config,
                             const std::string& subject_id, int segment_index);

struct CohortFeatures {
  std::vector<FeatureVector> vectors;
  std::vector<PulseCycle> cycles;  // parallel to vectors
  std::map<std::string, std::size_t> cycles_per_subject;  // every included subject
  std::map<std::string, std::size_t> rejections;          // reason -> count
  std::vector<ImputationEntry> imputations;
  std::vector<std::string> dropped_subjects;  // included, but no usable cycle
};

/// Runs every included subject through dsp and features. Metadata gaps are
/// filled with cohort medians when config.impute_missing is set.
CohortFeatures extract_cohort_features(const Cohort& cohort, const PipelineConfig& config);

/// FNV-1a over subject IDs, metadata and raw sample bits, as 16 hex digits.
std::string dataset_fingerprint(const std::vector<SubjectRecord>& records);

struct PipelineResult {
  std::string fingerprint;
  std::size_t records_loaded = 0;
  std::vector<LoadIssue> load_issues;
  /// Class counts straight after cohort selection, before signal quality.
  std::size_t candidates_non_diabetic = 0;
  std::size_t candidates_diabetic = 0;
  /// Final cohort: subjects without a usable cycle are moved to `excluded`
  /// with reason "signal_quality".
  Cohort cohort;
  CohortSummary summary;
  CohortFeatures features;
  FoldPlan plan;
  ModelEvaluation logreg;
  ModelEvaluation gbt;
  MeanCycleReport mean_cycles;
};

/// Everything after loading: cohort selection through cross-validation of
/// both model kinds and the mean-cycle report.
PipelineResult run_pipeline(const LoadResult& loaded, const PipelineConfig& config);

/// Loads config.metadata_path / config.signals_dir, then run_pipeline.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace ppgscreen
