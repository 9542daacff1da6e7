#include "ppgscreen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "ppgscreen/error.hpp"
#include "random_util.hpp"

namespace ppgscreen {

// --- Fold planning ----------------------------------------------------------

std::vector<int> FoldPlan::folds_of(const std::vector<FeatureVector>& vectors) const {
  std::vector<int> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    auto it = assignments.find(v.subject_id);
    if (it == assignments.end()) {
      throw Error(ErrorKind::InvalidSpec, "subject '" + v.subject_id + "' has no fold");
    }
    out.push_back(it->second);
  }
  return out;
}

namespace {

void check_k(int k) {
  if (k < 2) throw Error(ErrorKind::InvalidSpec, "k must be at least 2");
}

// Deals shuffled items of each class round-robin; class 1 starts where class 0
// stopped so overall fold sizes stay within one of each other.
template <typename Key>
std::map<Key, int> deal(std::vector<Key> class0, std::vector<Key> class1, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  detail::shuffle(std::span<Key>(class0), rng);
  detail::shuffle(std::span<Key>(class1), rng);
  std::map<Key, int> out;
  const auto uk = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < class0.size(); ++i) out[class0[i]] = static_cast<int>(i % uk);
  for (std::size_t i = 0; i < class1.size(); ++i) {
    out[class1[i]] = static_cast<int>((class0.size() + i) % uk);
  }
  return out;
}

}  // namespace

FoldPlan grouped_stratified_kfold(const std::vector<FeatureVector>& vectors, int k,
                                  std::uint64_t seed) {
  check_k(k);
  std::map<std::string, ClassLabel> label_of;
  for (const auto& v : vectors) {
    auto [it, inserted] = label_of.emplace(v.subject_id, v.label);
    if (!inserted && it->second != v.label) {
      throw Error(ErrorKind::InvalidSpec, "subject '" + v.subject_id + "' carries both labels");
    }
  }
  // std::map iteration gives a sorted, input-order-independent start.
  std::vector<std::string> ids[2];
  for (const auto& [id, label] : label_of) ids[static_cast<int>(label)].push_back(id);
  for (int c = 0; c < 2; ++c) {
    if (ids[c].size() < static_cast<std::size_t>(k)) {
      throw Error(ErrorKind::TooFewSubjects,
                  "class " + std::to_string(c) + " has " + std::to_string(ids[c].size()) +
                      " subjects, need at least k = " + std::to_string(k));
    }
  }
  FoldPlan plan;
  plan.k = k;
  plan.assignments = deal(std::move(ids[0]), std::move(ids[1]), k, seed);
  return plan;
}

std::vector<int> record_wise_folds(const std::vector<FeatureVector>& vectors, int k,
                                   std::uint64_t seed) {
  check_k(k);
  std::vector<std::size_t> idx[2];
  for (std::size_t i = 0; i < vectors.size(); ++i) idx[static_cast<int>(vectors[i].label)].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (idx[c].size() < static_cast<std::size_t>(k)) {
      throw Error(ErrorKind::TooFewSubjects, "too few cycles for a record-wise split");
    }
  }
  const auto dealt = deal(std::move(idx[0]), std::move(idx[1]), k, seed);
  std::vector<int> out(vectors.size());
  for (const auto& [i, fold] : dealt) out[i] = fold;
  return out;
}

std::size_t leakage_violations(const std::vector<FeatureVector>& vectors,
                               std::span<const int> fold_of, int k) {
  if (fold_of.size() != vectors.size()) {
    throw Error(ErrorKind::LengthMismatch, "fold assignment and vectors differ in length");
  }
  std::map<std::string, std::set<int>> folds_by_subject;
  for (std::size_t i = 0; i < vectors.size(); ++i) folds_by_subject[vectors[i].subject_id].insert(fold_of[i]);
  std::size_t violations = 0;
  for (int f = 0; f < k; ++f) {
    for (const auto& [id, folds] : folds_by_subject) {
      // On the test side of f and also on its training side.
      if (folds.count(f) && folds.size() > 1) ++violations;
    }
  }
  return violations;
}

// --- Metrics ----------------------------------------------------------------

ConfusionCounts confusion_counts(std::span<const double> scores, std::span<const int> labels,
                                 double threshold) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "scores and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

MetricSet confusion_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(ErrorKind::EmptyInput, "confusion counts are all zero");
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  MetricSet m;
  m.se = ratio(c.tp, c.tp + c.fn);
  m.sp = ratio(c.tn, c.tn + c.fp);
  m.ppv = ratio(c.tp, c.tp + c.fp);
  m.acc = ratio(c.tp + c.tn, c.total());
  if (m.se && m.ppv && *m.se + *m.ppv > 0.0) m.f1 = 2.0 * *m.ppv * *m.se / (*m.ppv + *m.se);
  return m;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"se", "sp", "f1", "acc", "ppv", "auc"};
  return names;
}

std::optional<double> metric_value(const MetricSet& m, const std::string& name) {
  if (name == "se") return m.se;
  if (name == "sp") return m.sp;
  if (name == "f1") return m.f1;
  if (name == "acc") return m.acc;
  if (name == "ppv") return m.ppv;
  if (name == "auc") return m.auc;
  throw Error(ErrorKind::InvalidSpec, "unknown metric '" + name + "'");
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "scores and labels differ in length");
  std::size_t positives = 0;
  for (int y : labels) positives += y == 1 ? 1 : 0;
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw Error(ErrorKind::SingleClass, "ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult out;
  out.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  const auto p = static_cast<double>(positives), n = static_cast<double>(negatives);
  std::size_t tp = 0, fp = 0;
  // Twice the area in units of (one positive x one negative); integer-valued,
  // so the sum is exact and the single final division matches the pairwise count.
  double doubled_area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::size_t tp_before = tp, fp_before = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    doubled_area += static_cast<double>(fp - fp_before) * static_cast<double>(tp + tp_before);
    out.points.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p, s});
  }
  out.auc = doubled_area / (2.0 * p * n);
  return out;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = values.size();
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  a.mean = mean;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

// --- Cross-validation -------------------------------------------------------

TrainedModel train_model(const Matrix& x, std::span<const int> y, const ModelConfig& config) {
  std::size_t n1 = 0;
  for (int label : y) n1 += label == 1 ? 1 : 0;
  if (n1 == 0 || n1 == y.size()) throw Error(ErrorKind::SingleClass, "training data holds one class only");
  const ClassWeights w = balanced_weights(y.size() - n1, n1);
  if (config.kind == ModelKind::LogisticRegression) return train_logreg(x, y, w, config.logreg);
  return train_gbt(x, y, w, config.gbt);
}

Matrix to_matrix(const std::vector<FeatureVector>& vectors) {
  if (vectors.empty()) return {};
  Matrix m(vectors.size(), vectors.front().values.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != m.cols()) {
      throw Error(ErrorKind::LengthMismatch, "feature vectors differ in length");
    }
    std::copy(vectors[i].values.begin(), vectors[i].values.end(), m.row(i).begin());
  }
  return m;
}

std::vector<int> to_labels(const std::vector<FeatureVector>& vectors) {
  std::vector<int> y;
  y.reserve(vectors.size());
  for (const auto& v : vectors) y.push_back(static_cast<int>(v.label));
  return y;
}

namespace {

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(fold + 1));
}

std::vector<std::string> sorted_unique(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

FoldResult run_fold(const std::vector<FeatureVector>& vectors, std::span<const int> fold_of, int fold,
                    const ModelConfig& config, const EvalOptions& options) {
  std::vector<FeatureVector> train, test;
  for (std::size_t i = 0; i < vectors.size(); ++i) (fold_of[i] == fold ? test : train).push_back(vectors[i]);
  if (test.empty()) throw Error(ErrorKind::TooFewSubjects, "fold " + std::to_string(fold) + " has no test cycles");

  FoldResult r;
  r.fold = fold;
  std::vector<std::string> ids;
  for (const auto& v : train) ids.push_back(v.subject_id);
  r.train_subjects = sorted_unique(std::move(ids));
  ids.clear();
  for (const auto& v : test) ids.push_back(v.subject_id);
  r.test_subjects = sorted_unique(std::move(ids));
  r.train_cycles = train.size();
  r.test_cycles = test.size();

  const Matrix x_train = to_matrix(train), x_test = to_matrix(test);
  const auto y_train = to_labels(train), y_test = to_labels(test);
  const std::size_t n1 = static_cast<std::size_t>(std::count(y_train.begin(), y_train.end(), 1));
  if (n1 > 0 && n1 < y_train.size()) r.class_weights = balanced_weights(y_train.size() - n1, n1);
  r.model = train_model(x_train, y_train, config);

  std::vector<double> scores(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) scores[i] = predict(r.model, x_test.row(i));
  r.counts = confusion_counts(scores, y_test, options.threshold);
  r.metrics = confusion_metrics(r.counts);
  const std::size_t test_pos = static_cast<std::size_t>(std::count(y_test.begin(), y_test.end(), 1));
  if (test_pos > 0 && test_pos < y_test.size()) {
    auto roc = roc_auc(scores, y_test);
    r.metrics.auc = roc.auc;
    r.roc = std::move(roc.points);
    if (options.permutation_repeats > 0) {
      r.importance = permutation_importance(r.model, x_test, y_test, options.permutation_repeats,
                                            fold_seed(options.seed, fold));
    }
  }
  return r;
}

}  // namespace

void summarize_folds(ModelEvaluation& e) {
  e.aggregates.clear();
  for (const auto& name : metric_names()) {
    std::vector<double> values;
    for (const auto& f : e.folds) {
      if (auto v = metric_value(f.metrics, name)) values.push_back(*v);
    }
    e.aggregates[name] = aggregate(values);
  }
  e.importance.clear();
  std::size_t contributing = 0;
  for (const auto& f : e.folds) {
    if (f.importance.empty()) continue;
    if (e.importance.empty()) e.importance.assign(f.importance.size(), 0.0);
    for (std::size_t j = 0; j < f.importance.size(); ++j) e.importance[j] += f.importance[j];
    ++contributing;
  }
  for (double& v : e.importance) v /= static_cast<double>(contributing);
}

ModelEvaluation cross_validate(const std::vector<FeatureVector>& vectors, std::span<const int> fold_of,
                               int k, const ModelConfig& model, const EvalOptions& options) {
  check_k(k);
  if (fold_of.size() != vectors.size()) {
    throw Error(ErrorKind::LengthMismatch, "fold assignment and vectors differ in length");
  }
  for (int f : fold_of) {
    if (f < 0 || f >= k) throw Error(ErrorKind::InvalidSpec, "fold index out of range");
  }
  ModelEvaluation e;
  e.kind = model.kind;
  if (options.parallel) {
    std::vector<std::future<FoldResult>> pending;
    for (int f = 0; f < k; ++f) {
      pending.push_back(std::async(std::launch::async, [&, f] { return run_fold(vectors, fold_of, f, model, options); }));
    }
    // Wait for every fold before rethrowing so no task outlives `vectors`.
    for (auto& p : pending) p.wait();
    for (auto& p : pending) e.folds.push_back(p.get());
  } else {
    for (int f = 0; f < k; ++f) e.folds.push_back(run_fold(vectors, fold_of, f, model, options));
  }
  summarize_folds(e);
  return e;
}

ModelEvaluation cross_validate(const std::vector<FeatureVector>& vectors, const FoldPlan& plan,
                               const ModelConfig& model, const EvalOptions& options) {
  const auto fold_of = plan.folds_of(vectors);
  if (leakage_violations(vectors, fold_of, plan.k) != 0) {
    throw std::logic_error("grouped fold plan puts a subject on both sides of a fold");
  }
  auto e = cross_validate(vectors, fold_of, plan.k, model, options);
  for (const auto& f : e.folds) {
    std::vector<std::string> shared;
    std::set_intersection(f.train_subjects.begin(), f.train_subjects.end(), f.test_subjects.begin(),
                          f.test_subjects.end(), std::back_inserter(shared));
    if (!shared.empty()) throw std::logic_error("subject '" + shared.front() + "' leaked across fold " + std::to_string(f.fold));
  }
  return e;
}

// --- Permutation importance -------------------------------------------------

std::vector<double> permutation_importance(const TrainedModel& model, const Matrix& x,
                                           std::span<const int> y,
                                           const std::vector<std::vector<std::size_t>>& permutations) {
  if (x.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "rows and labels differ in length");
  for (const auto& p : permutations) {
    if (p.size() != x.rows()) throw Error(ErrorKind::LengthMismatch, "permutation length differs from row count");
  }
  const std::size_t n = x.rows(), d = x.cols();
  auto auc_of = [&](const Matrix& m) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = predict(model, m.row(i));
    return roc_auc(s, y).auc;
  };
  const double baseline = auc_of(x);
  std::vector<double> importance(d, 0.0);
  if (permutations.empty()) return importance;
  Matrix work = x;
  for (std::size_t f = 0; f < d; ++f) {
    double drop = 0.0;
    for (const auto& perm : permutations) {
      for (std::size_t i = 0; i < n; ++i) work(i, f) = x(perm[i], f);
      drop += baseline - auc_of(work);
    }
    for (std::size_t i = 0; i < n; ++i) work(i, f) = x(i, f);
    importance[f] = drop / static_cast<double>(permutations.size());
  }
  return importance;
}

std::vector<double> permutation_importance(const TrainedModel& model, const Matrix& x,
                                           std::span<const int> y, int repeats, std::uint64_t seed) {
  if (repeats < 0) throw Error(ErrorKind::InvalidSpec, "repeats must be non-negative");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> perms(static_cast<std::size_t>(repeats));
  for (auto& p : perms) {
    p.resize(x.rows());
    std::iota(p.begin(), p.end(), std::size_t{0});
    detail::shuffle(std::span<std::size_t>(p), rng);
  }
  return permutation_importance(model, x, y, perms);
}

// --- Mean cycles ------------------------------------------------------------

double MeanCycleReport::time_at(std::size_t j) const {
  constexpr auto center = static_cast<double>(kMeanCycleGrid / 2);
  return (static_cast<double>(j) - center) * half_span_s / center;
}

MeanCycleReport mean_cycle_report(const std::vector<PulseCycle>& cycles,
                                  const std::vector<ClassLabel>& labels) {
  if (cycles.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "cycles and labels differ in length");
  MeanCycleReport report;
  report.classes.resize(2);
  report.classes[1].label = ClassLabel::Diabetic;

  struct Prepared {
    std::vector<double> normalized;
    std::size_t peak = 0;
    double fs = 1.0;
  };
  std::vector<Prepared> prepared;
  for (const auto& c : cycles) {
    if (c.samples.size() < 2) throw Error(ErrorKind::DegenerateCycle, "cycle has fewer than 2 samples");
    const auto [lo_it, hi_it] = std::minmax_element(c.samples.begin(), c.samples.end());
    const double lo = *lo_it, range = *hi_it - *lo_it;
    if (!(range > 0.0)) throw Error(ErrorKind::DegenerateCycle, "flat cycle cannot be normalized");
    Prepared p;
    p.fs = c.sample_rate_hz;
    p.peak = static_cast<std::size_t>(std::max_element(c.samples.begin(), c.samples.end()) - c.samples.begin());
    for (double v : c.samples) p.normalized.push_back((v - lo) / range);
    const double reach = static_cast<double>(std::max(p.peak, c.samples.size() - 1 - p.peak)) / p.fs;
    report.half_span_s = std::max(report.half_span_s, reach);
    prepared.push_back(std::move(p));
  }
  for (auto& mc : report.classes) {
    mc.mean.assign(kMeanCycleGrid, 0.0);
    mc.coverage.assign(kMeanCycleGrid, 0);
  }
  for (std::size_t c = 0; c < prepared.size(); ++c) {
    const auto& p = prepared[c];
    auto& mc = report.classes[static_cast<int>(labels[c])];
    ++mc.cycles;
    const double last = static_cast<double>(p.normalized.size() - 1);
    for (std::size_t j = 0; j < kMeanCycleGrid; ++j) {
      const double u = static_cast<double>(p.peak) + report.time_at(j) * p.fs;
      if (u < 0.0 || u > last) continue;
      const auto i0 = static_cast<std::size_t>(std::floor(u));
      const double frac = u - static_cast<double>(i0);
      const double v = i0 + 1 < p.normalized.size()
                           ? p.normalized[i0] + frac * (p.normalized[i0 + 1] - p.normalized[i0])
                           : p.normalized[i0];
      mc.mean[j] += v;
      ++mc.coverage[j];
    }
  }
  for (auto& mc : report.classes) {
    if (mc.cycles == 0) {
      throw Error(ErrorKind::EmptyClass, std::string("no cycles for class ") + std::string(to_string(mc.label)));
    }
    for (std::size_t j = 0; j < kMeanCycleGrid; ++j) {
      if (mc.coverage[j] > 0) mc.mean[j] /= static_cast<double>(mc.coverage[j]);
    }
  }
  return report;
}

}  // namespace ppgscreen
