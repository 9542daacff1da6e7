#include <algorithm>
#include <cmath>
#include <string>

#include "model_common.hpp"
#include "ppgscreen/error.hpp"
#include "ppgscreen/models.hpp"

namespace ppgscreen {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ClassWeights balanced_weights(std::size_t n0, std::size_t n1) {
  if (n0 == 0 || n1 == 0) throw Error(ErrorKind::EmptyClass, "both classes need at least one sample");
  const auto total = static_cast<double>(n0 + n1);
  return {total / (2.0 * static_cast<double>(n0)), total / (2.0 * static_cast<double>(n1))};
}

Scaler Scaler::fit(const Matrix& x, std::span<const double> sample_weights) {
  Scaler s;
  const std::size_t n = x.rows(), d = x.cols();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  s.constant.assign(d, false);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += sample_weights[i];
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += sample_weights[i] * x(i, j);
    mean /= total;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += sample_weights[i] * (x(i, j) - mean) * (x(i, j) - mean);
    var /= total;
    const double sd = std::sqrt(var);
    s.mean[j] = mean;
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      s.constant[j] = true;
    } else {
      s.scale[j] = sd;
    }
  }
  return s;
}

std::vector<double> Scaler::transform(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = constant[j] ? 0.0 : (x[j] - mean[j]) / scale[j];
  return z;
}

namespace detail {

void check_training_input(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorKind::LengthMismatch, "feature rows and labels differ in length");
  }
  std::size_t n1 = 0;
  for (int label : y) {
    if (label != 0 && label != 1) throw Error(ErrorKind::InvalidSpec, "labels must be 0 or 1");
    n1 += static_cast<std::size_t>(label);
  }
  if (n1 == 0 || n1 == y.size()) throw Error(ErrorKind::SingleClass, "training data holds one class only");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "training features contain NaN or Inf");
  }
}

double log_loss(double margin, int label) {
  // log(1 + e^m) - y*m, evaluated without overflow.
  const double softplus = margin > 0.0 ? margin + std::log1p(std::exp(-margin)) : std::log1p(std::exp(margin));
  return softplus - (label == 1 ? margin : 0.0);
}

}  // namespace detail

namespace {

double weighted_loss(std::span<const double> margins, std::span<const int> y, std::span<const double> s) {
  double loss = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) loss += s[i] * detail::log_loss(margins[i], y[i]);
  return loss;
}

}  // namespace

LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const ClassWeights& weights,
                         const LogRegOptions& options) {
  detail::check_training_input(x, y);
  if (!(options.lambda >= 0.0)) throw Error(ErrorKind::InvalidSpec, "lambda must be non-negative");

  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = weights(y[i]);

  LogRegModel model;
  model.penalty_strength = options.lambda;
  model.scaler = Scaler::fit(x, s);
  model.weights.assign(d, 0.0);

  // Column-major standardized copy for cache-friendly coordinate passes.
  std::vector<std::vector<double>> z(d, std::vector<double>(n));
  for (std::size_t j = 0; j < d; ++j) {
    if (model.scaler.constant[j]) continue;
    for (std::size_t i = 0; i < n; ++i) z[j][i] = (x(i, j) - model.scaler.mean[j]) / model.scaler.scale[j];
  }

  std::vector<double> margin(n, 0.0), trial(n), prob(n, 0.5);
  double loss = weighted_loss(margin, y, s);
  const double lambda = options.lambda;
  constexpr double kSigma = 0.01;
  constexpr int kMaxBacktracks = 60;

  // One Newton/soft-threshold step on coordinate j (j == d is the intercept).
  auto step = [&](std::size_t j) -> double {
    const bool is_intercept = j == d;
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = prob[i];
      const double zij = is_intercept ? 1.0 : z[j][i];
      g += s[i] * (p - y[i]) * zij;
      h += s[i] * p * (1.0 - p) * zij * zij;
    }
    h = std::max(h, 1e-12);
    const double w = is_intercept ? model.intercept : model.weights[j];
    double dir;
    if (is_intercept) {
      dir = -g / h;
    } else if (g + lambda <= h * w) {
      dir = -(g + lambda) / h;
    } else if (g - lambda >= h * w) {
      dir = -(g - lambda) / h;
    } else {
      dir = -w;
    }
    if (dir == 0.0) return 0.0;
    const double penalty_now = is_intercept ? 0.0 : lambda * std::abs(w);
    const double decrease = g * dir + (is_intercept ? 0.0 : lambda * std::abs(w + dir) - penalty_now);

    double alpha = 1.0;
    for (int k = 0; k < kMaxBacktracks; ++k, alpha *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) {
        trial[i] = margin[i] + alpha * dir * (is_intercept ? 1.0 : z[j][i]);
      }
      const double new_loss = weighted_loss(trial, y, s);
      const double penalty_new = is_intercept ? 0.0 : lambda * std::abs(w + alpha * dir);
      if (new_loss + penalty_new - loss - penalty_now <= kSigma * alpha * decrease) {
        margin.swap(trial);
        for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(margin[i]);
        loss = new_loss;
        if (is_intercept) {
          model.intercept = w + alpha * dir;
        } else {
          model.weights[j] = w + alpha * dir;
        }
        return std::abs(alpha * dir);
      }
    }
    return 0.0;
  };

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = step(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (model.scaler.constant[j]) continue;
      max_change = std::max(max_change, step(j));
    }
    model.sweeps = sweep + 1;
    if (max_change < options.tolerance) {
      model.converged = true;
      break;
    }
  }
  return model;
}

double predict_logreg(const LogRegModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) {
    throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(model.weights.size()) +
                                               " features, got " + std::to_string(x.size()));
  }
  double m = model.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (model.scaler.constant[j] || model.weights[j] == 0.0) continue;
    m += model.weights[j] * (x[j] - model.scaler.mean[j]) / model.scaler.scale[j];
  }
  return sigmoid(m);
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::LogisticRegression ? "logistic_regression" : "gradient_boosting";
}

double predict(const TrainedModel& model, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogRegModel>) {
          return predict_logreg(m, x);
        } else {
          return predict_gbt(m, x);
        }
      },
      model);
}

}  // namespace ppgscreen
