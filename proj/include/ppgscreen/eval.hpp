#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppgscreen/dsp.hpp"
#include "ppgscreen/features.hpp"
#include "ppgscreen/matrix.hpp"
#include "ppgscreen/models.hpp"

namespace ppgscreen {

// --- Fold planning ----------------------------------------------------------

/// Subject-level fold assignment.
struct FoldPlan {
  int k = 5;
  std::map<std::string, int> assignments;  // subject_id -> fold

  /// Fold of every vector; throws Error{InvalidSpec} for an unassigned subject.
  std::vector<int> folds_of(const std::vector<FeatureVector>& vectors) const;
};

/// Stratified by subject label, grouped by subject. Subjects of each class
/// are shuffled with `seed`; class 0 is dealt round-robin from fold 0 and
/// class 1 continues where class 0 stopped, so total fold sizes also differ
/// by at most one. Throws Error{TooFewSubjects} when a class has fewer than
/// k subjects, Error{InvalidSpec} when a subject carries two labels.
FoldPlan grouped_stratified_kfold(const std::vector<FeatureVector>& vectors, int k = 5,
                                  std::uint64_t seed = 0);

/// Cycle-level stratified assignment that ignores subject identity. Only
/// useful to demonstrate how much record-wise splitting inflates scores.
std::vector<int> record_wise_folds(const std::vector<FeatureVector>& vectors, int k,
                                   std::uint64_t seed);

/// Number of (fold, subject) pairs where the subject has cycles on both the
/// training and the test side.
std::size_t leakage_violations(const std::vector<FeatureVector>& vectors,
                               std::span<const int> fold_of, int k);

// --- Metrics ----------------------------------------------------------------

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

/// score >= threshold predicts the positive class.
ConfusionCounts confusion_counts(std::span<const double> scores, std::span<const int> labels,
                                 double threshold = 0.5);

/// Ratios with a zero denominator are left empty rather than reported as 0.
struct MetricSet {
  std::optional<double> se, sp, ppv, f1, acc, auc;
};

/// Throws Error{EmptyInput} when all counts are zero.
MetricSet confusion_metrics(const ConfusionCounts& counts);

/// Metric names in report order: se, sp, f1, acc, ppv, auc.
const std::vector<std::string>& metric_names();
std::optional<double> metric_value(const MetricSet& metrics, const std::string& name);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the (0, 0) starting point
};

struct RocResult {
  double auc = 0.0;
  std::vector<RocPoint> points;
};

/// ROC swept over unique scores in descending order; AUC is the trapezoidal
/// area, which equals the Mann-Whitney statistic with half credit for ties.
/// Throws Error{SingleClass} unless both labels occur.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Aggregate {
  std::size_t n = 0;  // folds where the metric was defined
  std::optional<double> mean;
  std::optional<double> std;  // sample (n-1)
};

Aggregate aggregate(std::span<const double> values);

// --- Cross-validation -------------------------------------------------------

struct ModelConfig {
  ModelKind kind = ModelKind::LogisticRegression;
  LogRegOptions logreg;
  GbtOptions gbt;
};

TrainedModel train_model(const Matrix& x, std::span<const int> y, const ModelConfig& config);

struct EvalOptions {
  double threshold = 0.5;
  int permutation_repeats = 10;  // 0 disables permutation importance
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct FoldResult {
  int fold = 0;
  std::vector<std::string> train_subjects;  // sorted
  std::vector<std::string> test_subjects;   // sorted
  std::size_t train_cycles = 0;
  std::size_t test_cycles = 0;
  ClassWeights class_weights;
  ConfusionCounts counts;
  MetricSet metrics;
  std::vector<RocPoint> roc;
  std::vector<double> importance;  // empty when not computed
  TrainedModel model;
};

struct ModelEvaluation {
  ModelKind kind = ModelKind::LogisticRegression;
  std::vector<FoldResult> folds;
  std::map<std::string, Aggregate> aggregates;  // keyed by metric name
  std::vector<double> importance;               // mean over folds
};

/// Grouped CV: every fold trains on the other folds' subjects only. Throws
/// std::logic_error if a subject ever appears on both sides of a fold.
ModelEvaluation cross_validate(const std::vector<FeatureVector>& vectors, const FoldPlan& plan,
                               const ModelConfig& model, const EvalOptions& options = {});

/// Same procedure for an arbitrary per-vector fold assignment (no grouping
/// check), e.g. the output of record_wise_folds.
ModelEvaluation cross_validate(const std::vector<FeatureVector>& vectors,
                               std::span<const int> fold_of, int k, const ModelConfig& model,
                               const EvalOptions& options = {});

/// Recomputes aggregates and mean importance from the fold results.
void summarize_folds(ModelEvaluation& evaluation);

Matrix to_matrix(const std::vector<FeatureVector>& vectors);
std::vector<int> to_labels(const std::vector<FeatureVector>& vectors);

// --- Permutation importance -------------------------------------------------

/// importance[f] = AUC(x) - mean over repeats of AUC(x with column f permuted).
/// Throws Error{SingleClass} when `y` holds one class.
std::vector<double> permutation_importance(const TrainedModel& model, const Matrix& x,
                                           std::span<const int> y, int repeats,
                                           std::uint64_t seed);

/// Uses the given row permutations (one per repeat) for every column.
std::vector<double> permutation_importance(const TrainedModel& model, const Matrix& x,
                                           std::span<const int> y,
                                           const std::vector<std::vector<std::size_t>>& permutations);

// --- Mean cycles ------------------------------------------------------------

inline constexpr std::size_t kMeanCycleGrid = 1000;

struct MeanCycle {
  ClassLabel label = ClassLabel::NonDiabetic;
  std::size_t cycles = 0;
  std::vector<double> mean;                // kMeanCycleGrid values; 0 where uncovered
  std::vector<std::size_t> coverage;       // contributing cycles per grid point
};

/// Grid t_j = (j - 500) * half_span_s / 500 seconds relative to the peak, so
/// every peak lands on index 500.
struct MeanCycleReport {
  double half_span_s = 0.0;
  std::vector<MeanCycle> classes;  // non-diabetic, then diabetic

  double time_at(std::size_t j) const;
};

/// Each cycle is min-max normalized to [0, 1], shifted so its (first)
/// maximum sits at t = 0, linearly interpolated onto the grid and averaged
/// per class. Throws Error{EmptyClass} when either class has no cycles,
/// Error{LengthMismatch} when the inputs differ in length.
MeanCycleReport mean_cycle_report(const std::vector<PulseCycle>& cycles,
                                  const std::vector<ClassLabel>& labels);

}  // namespace ppgscreen
