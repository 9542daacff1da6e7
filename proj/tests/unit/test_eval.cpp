#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "ppgscreen/error.hpp"
#include "ppgscreen/eval.hpp"
#include "ppgscreen/report.hpp"

using namespace ppgscreen;

namespace {

// `cycles` vectors per subject. Each subject has a random offset shared by
// all of its cycles, plus per-cycle noise; `signal` shifts feature 0 by label.
std::vector<FeatureVector> cohort(std::mt19937_64& rng, int n0, int n1, int cycles, std::size_t dims,
                                  double signal = 0.0, double subject_sd = 0.0, double cycle_sd = 1.0) {
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
      v.segment_index = c;
      for (std::size_t d = 0; d < dims; ++d) v.values.push_back(offset[d] + cycle_sd * z(rng));
      v.values[0] += label ? signal : 0.0;
      out.push_back(v);
    }
  }
  return out;
}

std::vector<double> sequence(std::initializer_list<double> v) { return v; }

ModelConfig fast(ModelKind kind) {
  ModelConfig m;
  m.kind = kind;
  m.gbt.rounds = 20;
  m.gbt.max_depth = 4;
  return m;
}

EvalOptions no_importance() {
  EvalOptions o;
  o.permutation_repeats = 0;
  return o;
}

PulseCycle pulse(double peak_s, double width_s, double dur_s, double gain = 1.0, double floor = 0.0) {
  std::vector<double> v;
  for (int i = 0; i <= static_cast<int>(std::lround(dur_s * 1000.0)); ++i)
    v.push_back(floor + gain * oracle::gauss(i / 1000.0, peak_s, width_s));
  return oracle::make_cycle(std::move(v), 1000.0);
}

}  // namespace

TEST_CASE("folds: one subject per class per fold with five of each") {
  std::mt19937_64 rng(1);
  const auto v = cohort(rng, 5, 5, 3, 2);
  const auto plan = grouped_stratified_kfold(v, 5, 9);
  REQUIRE(plan.assignments.size() == 10);
  std::vector<std::array<int, 2>> per_fold(5, {0, 0});
  for (const auto& [id, fold] : plan.assignments) per_fold[fold][std::stoi(id.substr(1)) < 5 ? 0 : 1]++;
  for (const auto& f : per_fold) CHECK(f == std::array<int, 2>{1, 1});

  const auto folds = plan.folds_of(v);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      if (v[i].subject_id == v[j].subject_id) CHECK(folds[i] == folds[j]);
}

TEST_CASE("folds: 54/32 subjects") {
  std::mt19937_64 rng(2);
  const auto v = cohort(rng, 54, 32, 2, 1);
  for (std::uint64_t seed : {0u, 1u, 42u}) {
    const auto plan = grouped_stratified_kfold(v, 5, seed);
    std::vector<int> total(5, 0), c0(5, 0), c1(5, 0);
    for (const auto& [id, fold] : plan.assignments) {
      total[fold]++;
      (std::stoi(id.substr(1)) < 54 ? c0 : c1)[fold]++;
    }
    for (int f = 0; f < 5; ++f) {
      CHECK((total[f] == 17 || total[f] == 18));
      CHECK((c0[f] == 10 || c0[f] == 11));
      CHECK((c1[f] == 6 || c1[f] == 7));
    }
  }
}

TEST_CASE("folds: determinism, seeds and errors") {
  std::mt19937_64 rng(3);
  const auto v = cohort(rng, 12, 9, 2, 1);
  CHECK(grouped_stratified_kfold(v, 5, 4).assignments == grouped_stratified_kfold(v, 5, 4).assignments);
  CHECK(grouped_stratified_kfold(v, 5, 4).assignments != grouped_stratified_kfold(v, 5, 5).assignments);
  try {
    grouped_stratified_kfold(cohort(rng, 6, 4, 1, 1), 5, 0);
    FAIL("expected TooFewSubjects");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewSubjects);
  }
  auto mixed = v;
  mixed[1].label = ClassLabel::Diabetic;
  CHECK_THROWS_AS(grouped_stratified_kfold(mixed, 5, 0), Error);
}

TEST_CASE("leakage: grouped plans never split a subject, record-wise plans do") {
  std::mt19937_64 rng(4);
  std::size_t record_wise = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n0 = 5 + static_cast<int>(rng() % 20), n1 = 5 + static_cast<int>(rng() % 20);
    const auto v = cohort(rng, n0, n1, 1 + static_cast<int>(rng() % 6), 1);
    const int k = 2 + static_cast<int>(rng() % 4);
    const auto plan = grouped_stratified_kfold(v, k, rng());
    CHECK(leakage_violations(v, plan.folds_of(v), k) == 0);
    record_wise += leakage_violations(v, record_wise_folds(v, k, rng()), k);
  }
  CHECK(record_wise > 0);
}

TEST_CASE("confusion metric examples") {
  const auto m = confusion_metrics({.tp = 2, .fp = 1, .tn = 6, .fn = 1});
  CHECK(*m.se == doctest::Approx(2.0 / 3.0));
  CHECK(*m.ppv == doctest::Approx(2.0 / 3.0));
  CHECK(*m.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(*m.acc == doctest::Approx(0.8));
  CHECK(*m.sp == doctest::Approx(6.0 / 7.0));
  CHECK(*m.sp == doctest::Approx(0.857).epsilon(1e-3));

  const auto perfect = confusion_metrics({.tp = 3, .fp = 0, .tn = 4, .fn = 0});
  CHECK(*perfect.se == 1.0);
  CHECK(*perfect.sp == 1.0);
  CHECK(*perfect.acc == 1.0);

  const auto none = confusion_metrics({.tp = 0, .fp = 0, .tn = 4, .fn = 2});
  CHECK_FALSE(none.ppv.has_value());
  CHECK_FALSE(none.f1.has_value());
  CHECK(*none.se == 0.0);
  CHECK_THROWS_AS(confusion_metrics({}), Error);

  const auto c = confusion_counts(sequence({0.5, 0.49, 0.9, 0.1}), std::vector<int>{1, 1, 0, 0});
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 1);
}

TEST_CASE("AUC examples") {
  const std::vector<int> y = {1, 1, 0, 0};
  CHECK(roc_auc(sequence({0.9, 0.8, 0.2, 0.1}), y).auc == 1.0);
  CHECK(roc_auc(sequence({0.4, 0.4, 0.4, 0.4}), y).auc == 0.5);
  CHECK(roc_auc(sequence({0.8, 0.3, 0.5, 0.3}), y).auc == 0.625);
  try {
    roc_auc(sequence({0.1, 0.2}), std::vector<int>{1, 1});
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingleClass);
  }
  const auto r = roc_auc(sequence({0.8, 0.3, 0.5, 0.3}), y);
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.front().tpr == 0.0);
  CHECK(std::isinf(r.points.front().threshold));
  CHECK(r.points.back().fpr == 1.0);
  CHECK(r.points.back().tpr == 1.0);
  CHECK(r.points.size() == 4);  // start plus three unique scores
}

TEST_CASE("trapezoidal AUC equals the pairwise statistic") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    const int levels = 1 + static_cast<int>(rng() % 12);  // few levels force ties
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(static_cast<double>(rng() % levels) / levels);
      y.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(rng() % 2));
    }
    const auto r = roc_auc(s, y);
    CHECK(std::abs(r.auc - oracle::pairwise_auc(s, y)) <= 1e-12);
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
      CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
    }
  }
}

TEST_CASE("aggregate uses the sample standard deviation") {
  const auto a = aggregate(sequence({0.1, 0.2, 0.3, 0.4, 0.5}));
  CHECK(a.n == 5);
  CHECK(*a.mean == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(*a.std == doctest::Approx(std::sqrt(0.025)).epsilon(1e-12));
  CHECK(*a.std == doctest::Approx(0.158).epsilon(1e-3));
  CHECK_FALSE(aggregate(sequence({0.7})).std.has_value());
  CHECK_FALSE(aggregate({}).mean.has_value());
}

TEST_CASE("separable subject-consistent cohort scores AUC 1 in every fold") {
  std::mt19937_64 rng(6);
  std::vector<FeatureVector> v;
  for (int s = 0; s < 20; ++s) {
    const int label = s % 2;
    for (int c = 0; c < 4; ++c) {
      FeatureVector f;
      f.subject_id = "p" + std::to_string(s);
      f.label = label ? ClassLabel::Diabetic : ClassLabel::NonDiabetic;
      const double mag = 0.5 + std::uniform_real_distribution<double>(0.0, 2.0)(rng);
      f.values = {label ? mag : -mag, std::normal_distribution<double>()(rng)};
      v.push_back(f);
    }
  }
  const auto plan = grouped_stratified_kfold(v, 5, 1);
  for (auto kind : {ModelKind::LogisticRegression, ModelKind::GradientBoosting}) {
    const auto e = cross_validate(v, plan, fast(kind), no_importance());
    REQUIRE(e.folds.size() == 5);
    for (const auto& f : e.folds) CHECK(*f.metrics.auc == 1.0);
    CHECK(*e.aggregates.at("auc").mean == 1.0);
    CHECK(*e.aggregates.at("auc").std == 0.0);
  }
}

TEST_CASE("null labels give chance-level AUC") {
  double total = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(100 + seed);
    auto v = cohort(rng, 20, 20, 4, 5, 0.0, 1.0);
    // Shuffle labels across subjects, keeping each subject's cycles consistent.
    std::vector<int> labels(40);
    std::iota(labels.begin(), labels.end(), 0);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (auto& f : v) f.label = labels[std::stoi(f.subject_id.substr(1))] < 20 ? ClassLabel::NonDiabetic : ClassLabel::Diabetic;
    const auto e = cross_validate(v, grouped_stratified_kfold(v, 5, seed), fast(ModelKind::LogisticRegression), no_importance());
    total += *e.aggregates.at("auc").mean;
  }
  const double mean = total / seeds;
  CHECK(mean >= 0.3);
  CHECK(mean <= 0.7);
}

TEST_CASE("fold results are consistent and scalers see training cycles only") {
  std::mt19937_64 rng(7);
  const auto v = cohort(rng, 12, 8, 5, 3, 1.0, 0.5);
  const auto plan = grouped_stratified_kfold(v, 5, 3);
  const auto folds = plan.folds_of(v);
  const auto e = cross_validate(v, plan, fast(ModelKind::LogisticRegression), no_importance());
  for (const auto& f : e.folds) {
    CHECK(f.counts.total() == f.test_cycles);
    CHECK(f.train_cycles + f.test_cycles == v.size());
    std::vector<std::string> both;
    std::set_intersection(f.train_subjects.begin(), f.train_subjects.end(), f.test_subjects.begin(),
                          f.test_subjects.end(), std::back_inserter(both));
    CHECK(both.empty());
    for (const auto& name : metric_names())
      if (auto m = metric_value(f.metrics, name)) CHECK((*m >= 0.0 && *m <= 1.0));

    std::vector<FeatureVector> train, with_test;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (folds[i] != f.fold) train.push_back(v[i]);
    with_test = train;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (folds[i] == f.fold) {
        with_test.push_back(v[i]);
        break;
      }
    auto weights_of = [](const std::vector<FeatureVector>& s) {
      const auto y = to_labels(s);
      const auto n1 = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
      const auto w = balanced_weights(y.size() - n1, n1);
      std::vector<double> out;
      for (int label : y) out.push_back(w(label));
      return out;
    };
    const auto& model = std::get<LogRegModel>(f.model);
    const auto own = Scaler::fit(to_matrix(train), weights_of(train));
    const auto leaky = Scaler::fit(to_matrix(with_test), weights_of(with_test));
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(std::abs(model.scaler.mean[d] - own.mean[d]) <= 1e-12);
      CHECK(std::abs(model.scaler.scale[d] - own.scale[d]) <= 1e-12);
    }
    CHECK(model.scaler.mean != leaky.mean);
  }
}

TEST_CASE("record-wise splitting inflates AUC on subject-correlated data") {
  std::mt19937_64 rng(8);
  // Subjects differ a lot, cycles of one subject barely; labels carry no
  // population-level signal, so only memorizing subjects helps.
  const auto v = cohort(rng, 20, 20, 8, 4, 0.0, 1.0, 0.05);
  const auto config = fast(ModelKind::GradientBoosting);
  const auto grouped = cross_validate(v, grouped_stratified_kfold(v, 5, 1), config, no_importance());
  const auto leaky = record_wise_folds(v, 5, 1);
  CHECK(leakage_violations(v, leaky, 5) > 0);
  const auto records = cross_validate(v, leaky, 5, config, no_importance());
  CHECK(*records.aggregates.at("auc").mean >= *grouped.aggregates.at("auc").mean + 0.05);
}

TEST_CASE("permutation importance examples") {
  std::mt19937_64 rng(9);
  auto train = cohort(rng, 30, 30, 1, 4);
  auto test = cohort(rng, 30, 30, 1, 4);
  for (auto* set : {&train, &test})
    for (auto& f : *set) {
      f.values[0] = f.label == ClassLabel::Diabetic ? 1.0 : 0.0;
      f.values[3] = 2.5;  // constant
    }
  const auto x = to_matrix(train), xt = to_matrix(test);
  const auto y = to_labels(train), yt = to_labels(test);
  for (auto kind : {ModelKind::LogisticRegression, ModelKind::GradientBoosting}) {
    const auto model = train_model(x, y, fast(kind));
    std::vector<std::size_t> identity(xt.rows());
    std::iota(identity.begin(), identity.end(), 0);
    for (double imp : permutation_importance(model, xt, yt, {identity})) CHECK(imp == 0.0);

    const auto imp = permutation_importance(model, xt, yt, 10, 4);
    REQUIRE(imp.size() == 4);
    CHECK(imp[0] >= 0.4);
    CHECK(std::abs(imp[1]) <= 0.05);
    CHECK(std::abs(imp[2]) <= 0.05);
    CHECK(std::abs(imp[3]) <= 1e-12);
    CHECK(imp == permutation_importance(model, xt, yt, 10, 4));
  }
  std::vector<int> one(yt.size(), 1);
  CHECK_THROWS_AS(permutation_importance(train_model(x, y, fast(ModelKind::LogisticRegression)), xt, one, 2, 0), Error);
}

TEST_CASE("cross-validation output is deterministic") {
  std::mt19937_64 rng(10);
  const auto v = cohort(rng, 10, 10, 3, 3, 0.8, 0.3);
  const auto plan = grouped_stratified_kfold(v, 5, 2);
  EvalOptions o;
  o.permutation_repeats = 3;
  const auto a = evaluation_to_json(cross_validate(v, plan, fast(ModelKind::GradientBoosting), o)).dump();
  o.parallel = false;
  const auto b = evaluation_to_json(cross_validate(v, plan, fast(ModelKind::GradientBoosting), o)).dump();
  CHECK(a == b);
}

TEST_CASE("mean cycles: identical and scaled cycles") {
  const auto c = pulse(0.2, 0.05, 0.8, 2.0, 1.0);
  const auto other = pulse(0.3, 0.08, 0.9);
  const auto single = mean_cycle_report({c, other}, {ClassLabel::NonDiabetic, ClassLabel::Diabetic});
  const auto twice = mean_cycle_report({c, c, other}, {ClassLabel::NonDiabetic, ClassLabel::NonDiabetic, ClassLabel::Diabetic});
  REQUIRE(single.classes.size() == 2);
  const auto& m = single.classes[0].mean;
  REQUIRE(m.size() == kMeanCycleGrid);
  CHECK(twice.classes[0].mean == m);
  CHECK(twice.classes[0].cycles == 2);
  CHECK(m[500] == 1.0);
  CHECK(single.time_at(500) == 0.0);

  // Oracle: normalize, shift the maximum to 0 and interpolate linearly.
  const auto& s = c.samples;
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const auto peak = static_cast<double>(std::max_element(s.begin(), s.end()) - s.begin());
  for (std::size_t j = 0; j < kMeanCycleGrid; ++j) {
    if (single.classes[0].coverage[j] == 0) continue;
    const double pos = peak + single.time_at(j) * 1000.0;
    const auto i = std::min(static_cast<std::size_t>(pos), s.size() - 2);
    const double frac = pos - static_cast<double>(i);
    const double expected = ((1.0 - frac) * s[i] + frac * s[i + 1] - *lo) / (*hi - *lo);
    CHECK(std::abs(m[j] - expected) <= 1e-12);
  }

  auto tripled = c;
  for (auto& x : tripled.samples) x *= 3.0;
  const auto scaled = mean_cycle_report({tripled, other}, {ClassLabel::NonDiabetic, ClassLabel::Diabetic});
  for (std::size_t j = 0; j < kMeanCycleGrid; ++j) CHECK(std::abs(scaled.classes[0].mean[j] - m[j]) <= 1e-12);
}

TEST_CASE("mean cycles: peaks at different times align at the grid centre") {
  const auto a = pulse(0.20, 0.05, 0.8);
  const auto b = pulse(0.25, 0.05, 0.8);
  const auto r = mean_cycle_report({a, b, a}, {ClassLabel::NonDiabetic, ClassLabel::NonDiabetic, ClassLabel::Diabetic});
  const auto& m = r.classes[0].mean;
  CHECK(std::max_element(m.begin(), m.end()) - m.begin() == 500);
  // Where coverage drops the mean can step by ~1e-27 on the flat tails;
  // only maxima of visible height count.
  int maxima = 0;
  for (std::size_t j = 1; j + 1 < m.size(); ++j)
    if (m[j] > 0.01 && m[j] > m[j - 1] && m[j] >= m[j + 1]) ++maxima;
  CHECK(maxima == 1);

  CHECK_THROWS_AS(mean_cycle_report({a}, {ClassLabel::NonDiabetic}), Error);
  CHECK_THROWS_AS(mean_cycle_report({a, b}, {ClassLabel::NonDiabetic}), Error);
}
