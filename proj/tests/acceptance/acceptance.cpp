// Acceptance gate: one PASS/FAIL/SKIP line per criterion, nonzero exit on
// any FAIL. Criteria 1 and 2 need the public dataset converted to the
// subjects.csv + signals/ layout; point PPGSCREEN_DATASET at that directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cycles.hpp"
#include "oracles.hpp"
#include "ppgscreen/dsp.hpp"
#include "ppgscreen/error.hpp"
#include "ppgscreen/eval.hpp"
#include "ppgscreen/features.hpp"
#include "ppgscreen/pipeline.hpp"
#include "ppgscreen/synth.hpp"

using namespace ppgscreen;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

const char* dataset_dir() {
  const char* d = std::getenv("PPGSCREEN_DATASET");
  return d && *d ? d : nullptr;
}

PipelineConfig dataset_config(const fs::path& dir) {
  PipelineConfig c;
  c.metadata_path = (dir / "subjects.csv").string();
  c.signals_dir = fs::is_directory(dir / "signals") ? (dir / "signals").string() : dir.string();
  return c;
}

// The real-data run is shared by criteria 1 and 2.
struct DatasetRun {
  PipelineResult result;
  double seconds = 0.0;
};

const DatasetRun& dataset_run() {
  static const DatasetRun run = [] {
    DatasetRun r;
    const auto start = std::chrono::steady_clock::now();
    r.result = run_pipeline(dataset_config(dataset_dir()));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }();
  return run;
}

Outcome dataset_reproduction() {
  if (!dataset_dir()) return {Status::Skip, "PPGSCREEN_DATASET not set"};
  const auto& run = dataset_run();
  const auto& r = run.result;
  const std::size_t cycles = r.summary.total.cycles;
  const std::size_t subjects = r.cohort.included.size();
  const bool ok = r.candidates_non_diabetic == 59 && r.candidates_diabetic == 38 &&
                  std::abs(static_cast<double>(cycles) - 453.0) <= 0.15 * 453.0 &&
                  std::abs(static_cast<double>(subjects) - 86.0) <= 11.0 && run.seconds < 60.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "candidates %zu/%zu (want 59/38), cycles %zu (453 +/- 15%%), subjects %zu (86 +/- 11), %.1f s",
                r.candidates_non_diabetic, r.candidates_diabetic, cycles, subjects, run.seconds);
  return verdict(ok, buf);
}

Outcome headline_metrics() {
  if (!dataset_dir()) return {Status::Skip, "PPGSCREEN_DATASET not set"};
  const auto& r = dataset_run().result;
  auto auc = [](const ModelEvaluation& e) {
    const auto& a = e.aggregates.at("auc");
    return a.mean ? *a.mean : std::nan("");
  };
  bool complete = true;
  for (const auto* e : {&r.logreg, &r.gbt}) {
    for (const auto& f : e->folds) complete = complete && f.metrics.auc.has_value();
    complete = complete && e->aggregates.at("auc").std.has_value();
  }
  const double lr = auc(r.logreg), gbt = auc(r.gbt);
  const bool ok = complete && std::abs(lr - 0.792) <= 0.10 && std::abs(gbt - 0.736) <= 0.10;
  return verdict(ok, fmt("LR AUC %.3f (0.792 +/- 0.10), GBT AUC %.3f (0.736 +/- 0.10)", lr, gbt) +
                         (complete ? "" : ", per-fold values or std missing"));
}

Outcome filter_correctness() {
  const auto coeffs = design_lowpass(FilterSpec{});
  const auto h = oracle::impulse_response(coeffs, 1 << 15);
  const double h0 = oracle::dft_magnitude(h, 0.0, 1000.0);
  const double h16 = oracle::dft_magnitude(h, 16.0, 1000.0);
  const double h32 = oracle::dft_magnitude(h, 32.0, 1000.0);
  const bool ok = std::abs(h0 - 1.0) <= 1e-6 && std::abs(h16 - 0.7071) <= 1e-3 && h32 <= 0.017;
  return verdict(ok, fmt("|H(0)| %.9f, |H(16)| %.6f, |H(32)| %.6f", h0, h16, h32));
}

Outcome segmentation_oracle() {
  SynthSpec spec;
  spec.non_diabetic = 20;
  spec.diabetic = 20;
  const auto clean = generate_synthetic(spec);
  std::size_t segments = 0, count_mismatch = 0, cycle_mismatch = 0;
  double worst = 0.0;
  for (std::size_t s = 0; s < clean.records.size(); ++s) {
    for (std::size_t k = 0; k < clean.records[s].segments.size(); ++k, ++segments) {
      const auto& truth = clean.truth[s].segments[k];
      const auto filtered = filter_segment(clean.records[s].segments[k], FilterSpec{});
      const auto fit = fsw_baseline(filtered);
      if (fit.valley_indices.size() != truth.valley_indices.size()) {
        ++count_mismatch;
      } else {
        for (std::size_t v = 0; v < truth.valley_times_s.size(); ++v)
          worst = std::max(worst, std::abs(fit.valley_indices[v] / spec.sample_rate - truth.valley_times_s[v]));
      }
      if (segment_cycles(filtered, fit).cycles.size() != truth.complete_cycles()) ++cycle_mismatch;
    }
  }

  spec.noise_level = 0.05;
  const auto noisy = generate_synthetic(spec);
  std::size_t expected = 0, found = 0;
  for (std::size_t s = 0; s < noisy.records.size(); ++s) {
    for (std::size_t k = 0; k < noisy.records[s].segments.size(); ++k) {
      const auto& truth = noisy.truth[s].segments[k];
      std::vector<std::size_t> valleys;
      try {
        valleys = fsw_baseline(filter_segment(noisy.records[s].segments[k], FilterSpec{})).valley_indices;
      } catch (const Error&) {
      }
      for (double t : truth.valley_times_s) {
        ++expected;
        for (auto v : valleys)
          if (std::abs(v / spec.sample_rate - t) <= 0.005) {
            ++found;
            break;
          }
      }
    }
  }
  const double recall = expected ? static_cast<double>(found) / expected : 0.0;
  const bool ok = segments >= 100 && count_mismatch == 0 && cycle_mismatch == 0 && worst <= 0.005 && recall >= 0.95;
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "%zu segments, valley-count mismatches %zu, cycle-count mismatches %zu, worst error %.1f ms, noisy recall %.4f",
                segments, count_mismatch, cycle_mismatch, worst * 1000.0, recall);
  return verdict(ok, buf);
}

struct Tiny {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
};

Tiny tiny_problem(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> z(0.0, 1.0);
  Tiny p;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < 2 ? static_cast<int>(i) : static_cast<int>(rng() % 2);
    std::vector<double> r(d);
    for (auto& v : r) v = z(rng) + 0.8 * label;
    p.rows.push_back(r);
    p.y.push_back(label);
  }
  return p;
}

ClassWeights weights_for(std::span<const int> y) {
  const auto n1 = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  return balanced_weights(y.size() - n1, n1);
}

Outcome solver_oracles() {
  std::mt19937_64 rng(2024);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const auto p = tiny_problem(rng, 4 + rng() % 7, d);
    const auto w = weights_for(p.y);
    const double lambda = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    const auto m = train_logreg(Matrix::from_rows(p.rows), p.y, w, {.lambda = lambda});
    std::vector<std::vector<double>> z;
    std::vector<double> s;
    for (std::size_t i = 0; i < p.rows.size(); ++i) z.push_back(m.scaler.transform(p.rows[i])), s.push_back(w(p.y[i]));
    auto f = [&](const std::vector<double>& q) { return oracle::lr_objective(z, p.y, s, lambda, {q.data(), d}, q[d]); };
    const auto best = oracle::minimize_convex(f, d + 1);
    worst_gap = std::max(worst_gap, std::abs(oracle::lr_objective(z, p.y, s, lambda, m.weights, m.intercept) - f(best)));
  }

  int tree_mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng() % 6, d = 1 + rng() % 2;
    auto p = tiny_problem(rng, n, d);
    if (trial % 2)
      for (auto& r : p.rows)
        for (auto& v : r) v = std::round(v * 2.0) / 2.0;
    const auto w = weights_for(p.y);
    const auto m = train_gbt(Matrix::from_rows(p.rows), p.y, w, {.rounds = 1, .max_depth = 2});
    const double p0 = sigmoid(m.base_score);
    std::vector<double> g, h;
    for (int label : p.y) g.push_back(w(label) * (p0 - label)), h.push_back(w(label) * p0 * (1.0 - p0));
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    if (!oracle::compare_trees(m.trees[0], 0, oracle::exhaustive_tree(p.rows, g, h, all, 0, 2, 1.0)).empty())
      ++tree_mismatches;
  }
  return verdict(worst_gap <= 1e-4 && tree_mismatches == 0,
                 fmt("LR worst objective gap %.2e over 5 problems; GBT tree mismatches %.0f of 20", worst_gap,
                     tree_mismatches));
}

Outcome auc_equivalence() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    const int levels = 1 + static_cast<int>(rng() % 12);
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(static_cast<double>(rng() % levels) / levels);
      y.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(rng() % 2));
    }
    worst = std::max(worst, std::abs(roc_auc(s, y).auc - oracle::pairwise_auc(s, y)));
  }
  return verdict(worst <= 1e-12, fmt("worst |trapezoid - pairwise| %.2e over 1000 sets", worst));
}

// Subject offsets shared by all of a subject's cycles; `signal` moves
// feature 0 with the label.
std::vector<FeatureVector> vector_cohort(std::mt19937_64& rng, int n0, int n1, int cycles, std::size_t dims,
                                         double signal, double subject_sd, double cycle_sd) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<FeatureVector> out;
  for (int s = 0; s < n0 + n1; ++s) {
    const int label = s < n0 ? 0 : 1;
    std::vector<double> offset(dims);
    for (auto& o : offset) o = subject_sd * z(rng);
    for (int c = 0; c < cycles; ++c) {
      FeatureVector v;
      v.subject_id = "s" + std::to_string(s);
      v.label = label ? ClassLabel::Diabetic : ClassLabel::NonDiabetic;
      for (std::size_t d = 0; d < dims; ++d) v.values.push_back(offset[d] + cycle_sd * z(rng));
      v.values[0] += label ? signal : 0.0;
      out.push_back(v);
    }
  }
  return out;
}

Outcome leakage_property() {
  std::mt19937_64 rng(31);
  std::size_t violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = vector_cohort(rng, 5 + static_cast<int>(rng() % 20), 5 + static_cast<int>(rng() % 20),
                                 1 + static_cast<int>(rng() % 6), 1, 0.0, 0.0, 1.0);
    const auto plan = grouped_stratified_kfold(v, 5, rng());
    violations += leakage_violations(v, plan.folds_of(v), 5);
  }
  const auto v = vector_cohort(rng, 20, 20, 8, 4, 0.0, 1.0, 0.05);
  ModelConfig model;
  model.kind = ModelKind::GradientBoosting;
  model.gbt.rounds = 20;
  EvalOptions o;
  o.permutation_repeats = 0;
  const double grouped = *cross_validate(v, grouped_stratified_kfold(v, 5, 1), model, o).aggregates.at("auc").mean;
  const double records = *cross_validate(v, record_wise_folds(v, 5, 1), 5, model, o).aggregates.at("auc").mean;
  return verdict(violations == 0 && records >= grouped + 0.05,
                 fmt("violations %.0f over 200 plans; record-wise AUC %.3f vs grouped %.3f", violations, records,
                     grouped));
}

Outcome feature_contracts() {
  std::vector<std::string> failures;
  const auto& names = feature_names();
  auto index = [&](const char* n) { return static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin()); };

  const auto tri = oracle::make_cycle(oracle::triangle(0.2, 0.6, 1000.0), 1000.0);
  const auto fid = detect_fiducials(tri);
  const auto v = compute_features(tri, fid);
  const double aid = v[index("AID")], did = v[index("DID")], as = v[index("AS")];
  if (std::abs(aid - 1.0) > 1e-9 || std::abs(did - 1.0) > 1e-9) failures.push_back("AID/DID");
  if (std::abs(fid.peak_t - 0.2) > 0.002) failures.push_back("peak time");
  // AS = AID / peak time, so it inherits the 2 ms time tolerance.
  if (std::abs(as - 5.0) > 5.0 * 0.002 / 0.198) failures.push_back("AS");

  const auto& cat = default_catalog();
  std::mt19937_64 rng(99);
  std::size_t scale_bad = 0, resample_bad = 0;
  for (int k = 0; k < 100; ++k) {
    const auto shape = cycles::random_shape(rng);
    const double period = 0.65 + 0.004 * k;
    const double gain = std::uniform_real_distribution<double>(0.2, 20.0)(rng);
    const auto c1 = cycles::beat(shape, period, 1000.0);
    const auto a = compute_features(c1, detect_fiducials(c1));
    const auto cg = cycles::beat(shape, period, 1000.0, gain);
    const auto b = compute_features(cg, detect_fiducials(cg));
    const auto c2 = cycles::beat(shape, period, 2000.0);
    const auto r = compute_features(c2, detect_fiducials(c2));
    for (std::size_t i = 0; i < cat.size(); ++i) {
      const auto u = cat[i].unit;
      const double expect = is_amplitude_scaled(u) ? gain * a[i] : a[i];
      if (std::abs(b[i] - expect) > 1e-9 * std::max(1e-6, std::abs(expect))) ++scale_bad;
      if (is_time_based(u) && std::abs(r[i] - a[i]) > 0.01 * std::abs(a[i]) + 1e-12) ++resample_bad;
    }
  }
  if (scale_bad) failures.push_back("amplitude scaling x" + std::to_string(scale_bad));
  if (resample_bad) failures.push_back("resampling x" + std::to_string(resample_bad));

  SynthSpec spec;
  spec.non_diabetic = 6;
  spec.diabetic = 6;
  const auto data = generate_synthetic(spec);
  const auto f = extract_cohort_features(select_cohort(data.records), PipelineConfig{});
  std::size_t wrong_length = 0;
  for (const auto& fv : f.vectors) wrong_length += fv.values.size() != 110;
  if (f.vectors.empty() || wrong_length || names.size() != 110) failures.push_back("vector length");

  std::string detail = fmt("AID %.12f, DID %.12f, AS %.4f; ", aid, did, as) + std::to_string(f.vectors.size()) +
                       " vectors of length 110";
  for (const auto& x : failures) detail += "; bad: " + x;
  return verdict(failures.empty(), detail);
}

Outcome importance_sanity() {
  std::mt19937_64 rng(5);
  auto v = vector_cohort(rng, 15, 15, 4, 8, 0.0, 0.3, 1.0);
  std::normal_distribution<double> z(0.0, 0.3);
  for (auto& f : v) {
    f.values[2] = (f.label == ClassLabel::Diabetic ? 1.5 : -1.5) + z(rng);  // planted
    f.values[5] = 3.0;                                                     // constant
  }
  const auto plan = grouped_stratified_kfold(v, 5, 3);
  std::string detail;
  bool ok = true;
  for (auto kind : {ModelKind::LogisticRegression, ModelKind::GradientBoosting}) {
    ModelConfig model;
    model.kind = kind;
    model.gbt.rounds = 30;
    EvalOptions o;
    o.permutation_repeats = 10;
    const auto e = cross_validate(v, plan, model, o);
    const auto top = static_cast<std::size_t>(std::max_element(e.importance.begin(), e.importance.end()) - e.importance.begin());
    double constant = 0.0;
    for (const auto& f : e.folds) constant = std::max(constant, std::abs(f.importance[5]));
    ok = ok && top == 2 && constant <= 1e-12;
    detail += std::string(detail.empty() ? "" : "; ") + std::string(to_string(kind)) +
              fmt(" top feature %.0f (planted 2, importance %.3f), constant |imp| %.1e", static_cast<double>(top),
                  e.importance[2], constant);
  }
  return verdict(ok, detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 dataset reproduction", dataset_reproduction},
      {"2 headline metrics", headline_metrics},
      {"3 filter correctness", filter_correctness},
      {"4 segmentation oracle", segmentation_oracle},
      {"5 solver oracles", solver_oracles},
      {"6 AUC equivalence", auc_equivalence},
      {"7 leakage property", leakage_property},
      {"8 feature contracts", feature_contracts},
      {"9 permutation importance", importance_sanity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    failed += o.status == Status::Fail;
    std::printf("%s  criterion %s: %s\n", tag, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
