#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <thread>

#include "oracles.hpp"
#include "ppgscreen/error.hpp"
#include "ppgscreen/model_io.hpp"
#include "ppgscreen/models.hpp"

using namespace ppgscreen;

namespace {

struct Problem {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
};

// Overlapping Gaussian classes; both classes are always present.
Problem random_problem(std::mt19937_64& rng, std::size_t n, std::size_t d, double shift = 0.8) {
  std::normal_distribution<double> z(0.0, 1.0);
  Problem p;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < 2 ? static_cast<int>(i) : static_cast<int>(rng() % 2);
    std::vector<double> r(d);
    for (auto& v : r) v = z(rng) + (label ? shift : 0.0);
    p.rows.push_back(r);
    p.y.push_back(label);
  }
  return p;
}

ClassWeights weights_for(std::span<const int> y) {
  const auto n1 = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  return balanced_weights(y.size() - n1, n1);
}

std::vector<double> sample_weights(std::span<const int> y, const ClassWeights& w) {
  std::vector<double> s;
  for (int v : y) s.push_back(w(v));
  return s;
}

std::vector<std::vector<double>> standardized(const LogRegModel& m, const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> z;
  for (const auto& r : rows) z.push_back(m.scaler.transform(r));
  return z;
}

double model_objective(const LogRegModel& m, const Problem& p, const ClassWeights& w, double lambda) {
  const auto s = sample_weights(p.y, w);
  return oracle::lr_objective(standardized(m, p.rows), p.y, s, lambda, m.weights, m.intercept);
}

double l1(const std::vector<double>& w) {
  double t = 0.0;
  for (double v : w) t += std::abs(v);
  return t;
}

}  // namespace

TEST_CASE("balanced_weights examples") {
  const auto a = balanced_weights(75, 25);
  CHECK(a.w0 == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(a.w1 == 2.0);
  const auto b = balanced_weights(40, 40);
  CHECK(b.w0 == 1.0);
  CHECK(b.w1 == 1.0);
  const auto c = balanced_weights(281, 172);
  CHECK(std::abs(c.w0 - 0.8060) < 5e-5);
  CHECK(std::abs(c.w1 - 1.3169) < 5e-5);
  CHECK(c(0) == c.w0);
  CHECK(c(1) == c.w1);
  try {
    balanced_weights(0, 3);
    FAIL("expected EmptyClass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyClass);
  }
}

TEST_CASE("scaler uses weighted statistics and flags constant columns") {
  const Matrix x = Matrix::from_rows({{1.0, 5.0}, {3.0, 5.0}});
  const std::vector<double> w = {3.0, 1.0};
  const auto s = Scaler::fit(x, w);
  CHECK(s.mean[0] == doctest::Approx(1.5));
  CHECK(s.scale[0] == doctest::Approx(std::sqrt(0.75)));
  CHECK(s.constant[1]);
  CHECK(s.scale[1] == 1.0);
}

TEST_CASE("logistic regression on two points") {
  const Matrix x = Matrix::from_rows({{-1.0}, {1.0}});
  const std::vector<int> y = {0, 1};
  const auto w = balanced_weights(1, 1);

  const auto strong = train_logreg(x, y, w, {.lambda = 100.0});
  CHECK(strong.weights[0] == 0.0);
  for (double v : {-1.0, 0.0, 1.0}) CHECK(predict_logreg(strong, std::vector<double>{v}) == doctest::Approx(0.5).epsilon(1e-9));

  const auto weak = train_logreg(x, y, w, {.lambda = 0.01});
  CHECK(weak.converged);
  CHECK(predict_logreg(weak, std::vector<double>{1.0}) > 0.9);
  CHECK(predict_logreg(weak, std::vector<double>{-1.0}) < 0.1);

  const Problem p{{{-1.0}, {1.0}}, y};
  const auto s = sample_weights(y, w);
  const auto z = standardized(weak, p.rows);
  const auto best = oracle::minimize_convex(
      [&](const std::vector<double>& q) { return oracle::lr_objective(z, y, s, 0.01, {&q[0], 1}, q[1]); }, 2, 12.0);
  const double target = oracle::lr_objective(z, y, s, 0.01, {&best[0], 1}, best[1]);
  CHECK(std::abs(model_objective(weak, p, w, 0.01) - target) <= 1e-4);
}

TEST_CASE("logistic regression matches a brute-force minimum on random tiny problems") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(0.2, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const auto p = random_problem(rng, 4 + rng() % 7, d);
    const auto w = weights_for(p.y);
    const double lambda = lam(rng);
    const auto model = train_logreg(Matrix::from_rows(p.rows), p.y, w, {.lambda = lambda});
    const auto z = standardized(model, p.rows);
    const auto s = sample_weights(p.y, w);
    auto f = [&](const std::vector<double>& q) { return oracle::lr_objective(z, p.y, s, lambda, {q.data(), d}, q[d]); };
    const auto best = oracle::minimize_convex(f, d + 1);
    INFO("trial " << trial);
    CHECK(std::abs(model_objective(model, p, w, lambda) - f(best)) <= 1e-4);
  }
}

TEST_CASE("class weight equals duplication") {
  std::mt19937_64 rng(8);
  const auto p = random_problem(rng, 12, 2);
  Problem dup = p;
  for (std::size_t i = 0; i < p.y.size(); ++i)
    if (p.y[i] == 0) dup.rows.push_back(p.rows[i]), dup.y.push_back(0);
  const ClassWeights twice{2.0, 1.0};
  const ClassWeights once{1.0, 1.0};
  const auto a = train_logreg(Matrix::from_rows(p.rows), p.y, twice, {.lambda = 0.3, .tolerance = 1e-10});
  const auto b = train_logreg(Matrix::from_rows(dup.rows), dup.y, once, {.lambda = 0.3, .tolerance = 1e-10});
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(a.weights[j] - b.weights[j]) <= 1e-6);
  CHECK(std::abs(a.intercept - b.intercept) <= 1e-6);
}

TEST_CASE("L1 path shrinks as the penalty grows") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_problem(rng, 60, 5, 0.6);
    const Matrix x = Matrix::from_rows(p.rows);
    const auto w = weights_for(p.y);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
      const double norm = l1(train_logreg(x, p.y, w, {.lambda = lambda, .tolerance = 1e-10}).weights);
      CHECK(norm <= previous + 1e-8);
      previous = norm;
    }
    CHECK(previous == 0.0);
  }
}

TEST_CASE("converged weights satisfy the soft-threshold condition") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_problem(rng, 50, 6, 0.7);
    const auto w = weights_for(p.y);
    const double lambda = 0.5 + trial;
    const auto m = train_logreg(Matrix::from_rows(p.rows), p.y, w, {.lambda = lambda});
    REQUIRE(m.converged);
    const auto z = standardized(m, p.rows);
    std::vector<double> grad(6, 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double margin = m.intercept;
      for (std::size_t j = 0; j < 6; ++j) margin += m.weights[j] * z[i][j];
      const double r = w(p.y[i]) * (sigmoid(margin) - p.y[i]);
      grad_b += r;
      for (std::size_t j = 0; j < 6; ++j) grad[j] += r * z[i][j];
    }
    CHECK(std::abs(grad_b) <= 1e-5);
    for (std::size_t j = 0; j < 6; ++j) {
      if (m.weights[j] != 0.0)
        CHECK(std::abs(grad[j] + lambda * (m.weights[j] > 0 ? 1.0 : -1.0)) <= 1e-5);
      else
        CHECK(std::abs(grad[j]) <= lambda + 1e-5);
    }
  }
}

TEST_CASE("affine rescaling of an input leaves probabilities unchanged") {
  std::mt19937_64 rng(15);
  const auto p = random_problem(rng, 40, 3);
  auto scaled = p.rows;
  for (auto& r : scaled) r[1] = 250.0 * r[1] - 40.0;
  const auto w = weights_for(p.y);
  const auto a = train_logreg(Matrix::from_rows(p.rows), p.y, w, {.lambda = 0.5});
  const auto b = train_logreg(Matrix::from_rows(scaled), p.y, w, {.lambda = 0.5});
  for (std::size_t i = 0; i < p.rows.size(); ++i)
    CHECK(std::abs(predict_logreg(a, p.rows[i]) - predict_logreg(b, scaled[i])) <= 1e-9);
}

TEST_CASE("constant features get zero weight") {
  const Matrix x = Matrix::from_rows({{1.0, 7.0}, {2.0, 7.0}, {3.0, 7.0}, {4.0, 7.0}});
  const std::vector<int> y = {0, 0, 1, 1};
  const auto m = train_logreg(x, y, balanced_weights(2, 2), {.lambda = 0.01});
  CHECK(m.weights[1] == 0.0);
  CHECK(m.scaler.scale[1] == 1.0);
}

TEST_CASE("logistic regression input errors") {
  const Matrix x = Matrix::from_rows({{1.0}, {2.0}});
  try {
    train_logreg(x, std::vector<int>{1, 1}, ClassWeights{});
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingleClass);
  }
  const Matrix bad = Matrix::from_rows({{1.0}, {std::nan("")}});
  try {
    train_logreg(bad, std::vector<int>{0, 1}, ClassWeights{});
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
}

TEST_CASE("predict_logreg examples") {
  LogRegModel m;
  m.weights = {0.0, 0.0};
  m.scaler.mean = {0.0, 0.0};
  m.scaler.scale = {1.0, 1.0};
  m.scaler.constant = {false, false};
  CHECK(predict_logreg(m, std::vector<double>{3.0, -2.0}) == 0.5);
  m.intercept = std::log(3.0);
  CHECK(predict_logreg(m, std::vector<double>{3.0, -2.0}) == doctest::Approx(0.75).epsilon(1e-12));
  try {
    predict_logreg(m, std::vector<double>{1.0});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LengthMismatch);
  }
}

TEST_CASE("boosting hand example") {
  const Matrix x = Matrix::from_rows({{0.0}, {1.0}});
  const std::vector<int> y = {0, 1};
  const auto m = train_gbt(x, y, balanced_weights(1, 1), {.rounds = 1, .max_depth = 1});
  CHECK(m.base_score == 0.0);
  REQUIRE(m.trees.size() == 1);
  const auto& t = m.trees[0];
  CHECK(t.depth() == 1);
  CHECK(t.nodes[0].threshold == 0.5);
  CHECK(m.learning_rate * t.evaluate(std::vector<double>{0.0}) == doctest::Approx(-0.04).epsilon(1e-12));
  CHECK(m.learning_rate * t.evaluate(std::vector<double>{1.0}) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(predict_gbt(m, std::vector<double>{1.0}) == doctest::Approx(sigmoid(0.04)).epsilon(1e-12));
  CHECK(predict_gbt(m, std::vector<double>{1.0}) == doctest::Approx(0.510).epsilon(1e-3));
}

TEST_CASE("pure node stays a leaf with the class sign") {
  const Matrix x = Matrix::from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
  const std::vector<double> g(4, -0.5), h(4, 0.25);
  const auto t = build_tree(x, g, h, {});
  REQUIRE(t.nodes.size() == 1);
  CHECK(t.nodes[0].is_leaf());
  CHECK(t.nodes[0].value > 0.0);

  // A pure class-0 side of a split is not split further.
  const Matrix x2 = Matrix::from_rows({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}});
  const auto m = train_gbt(x2, std::vector<int>{0, 0, 0, 1, 1}, ClassWeights{}, {.rounds = 1});
  const auto& root = m.trees[0].nodes[0];
  REQUIRE_FALSE(root.is_leaf());
  const auto& left = m.trees[0].nodes[static_cast<std::size_t>(root.left)];
  CHECK(left.is_leaf());
  CHECK(left.count == 3);
  CHECK(left.value < 0.0);
}

TEST_CASE("boosting training loss never increases") {
  std::mt19937_64 rng(6);
  const auto p = random_problem(rng, 40, 3, 0.5);
  const auto m = train_gbt(Matrix::from_rows(p.rows), p.y, weights_for(p.y), {.rounds = 30});
  REQUIRE(m.train_loss.size() == 31);
  for (std::size_t r = 1; r < m.train_loss.size(); ++r) CHECK(m.train_loss[r] <= m.train_loss[r - 1] + 1e-12);
  for (const auto& t : m.trees) {
    CHECK(t.depth() <= 30);
    for (const auto& n : t.nodes) CHECK(std::isfinite(n.value));
  }
}

TEST_CASE("depth cap holds on hard data") {
  std::mt19937_64 rng(2);
  const auto p = random_problem(rng, 300, 2, 0.0);
  for (int cap : {1, 3, 30}) {
    const auto m = train_gbt(Matrix::from_rows(p.rows), p.y, weights_for(p.y), {.rounds = 3, .max_depth = cap});
    for (const auto& t : m.trees) CHECK(t.depth() <= cap);
  }
}

TEST_CASE("first tree equals exhaustive split enumeration") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng() % 6;
    const std::size_t d = 1 + rng() % 2;
    auto p = random_problem(rng, n, d);
    // Half the problems use a coarse grid so equal gains and repeated values occur.
    if (trial % 2)
      for (auto& r : p.rows)
        for (auto& v : r) v = std::round(v * 2.0) / 2.0;
    const auto w = weights_for(p.y);
    const auto m = train_gbt(Matrix::from_rows(p.rows), p.y, w, {.rounds = 1, .max_depth = 2});
    const double p0 = sigmoid(m.base_score);
    std::vector<double> g, h;
    for (int label : p.y) g.push_back(w(label) * (p0 - label)), h.push_back(w(label) * p0 * (1.0 - p0));
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const auto expected = oracle::exhaustive_tree(p.rows, g, h, all, 0, 2, 1.0);
    INFO("trial " << trial);
    CHECK(oracle::compare_trees(m.trees[0], 0, expected, 1e-12) == "");
  }
}

TEST_CASE("predict_gbt examples") {
  GbtModel empty;
  empty.feature_count = 1;
  CHECK(predict_gbt(empty, std::vector<double>{4.0}) == 0.5);
  CHECK_THROWS_AS(predict_gbt(empty, std::vector<double>{4.0, 1.0}), Error);

  std::mt19937_64 rng(9);
  const auto p = random_problem(rng, 30, 2);
  const auto m = train_gbt(Matrix::from_rows(p.rows), p.y, weights_for(p.y), {.rounds = 10});
  auto reversed = m;
  std::reverse(reversed.trees.begin(), reversed.trees.end());
  for (const auto& r : p.rows) CHECK(std::abs(predict_gbt(m, r) - predict_gbt(reversed, r)) <= 1e-12);
}

TEST_CASE("concurrent predictions agree bitwise") {
  std::mt19937_64 rng(10);
  const auto p = random_problem(rng, 40, 3);
  const auto w = weights_for(p.y);
  const Matrix x = Matrix::from_rows(p.rows);
  const std::vector<TrainedModel> models = {train_logreg(x, p.y, w), train_gbt(x, p.y, w, {.rounds = 20})};
  for (const auto& model : models) {
    std::vector<double> serial;
    for (const auto& r : p.rows) serial.push_back(predict(model, r));
    std::vector<std::vector<double>> results(4);
    std::vector<std::thread> threads;
    for (auto& out : results)
      threads.emplace_back([&] {
        for (const auto& r : p.rows) out.push_back(predict(model, r));
      });
    for (auto& t : threads) t.join();
    for (const auto& out : results) CHECK(std::memcmp(out.data(), serial.data(), serial.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("model JSON round trip is lossless") {
  std::mt19937_64 rng(13);
  const auto p = random_problem(rng, 40, 4);
  const auto w = weights_for(p.y);
  const Matrix x = Matrix::from_rows(p.rows);
  for (const TrainedModel& model : {TrainedModel(train_logreg(x, p.y, w)), TrainedModel(train_gbt(x, p.y, w, {.rounds = 15}))}) {
    const auto text = model_to_json(model).dump();
    const auto back = model_from_json(nlohmann::json::parse(text));
    CHECK(back.index() == model.index());
    CHECK(model_to_json(back).dump() == text);
    for (const auto& r : p.rows) {
      const double a = predict(model, r), b = predict(back, r);
      CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    }
  }
  auto doc = model_to_json(TrainedModel(train_logreg(x, p.y, w)));
  doc["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(doc), Error);
}
