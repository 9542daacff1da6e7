#include "ppgscreen/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppgscreen/error.hpp"

namespace ppgscreen {

std::vector<double> derivative(std::span<const double> samples, double sample_rate) {
  const std::size_t n = samples.size();
  if (n < 3) throw Error(ErrorKind::TooShort, "derivative needs at least 3 samples");
  std::vector<double> d(n);
  d[0] = (samples[1] - samples[0]) * sample_rate;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (samples[i + 1] - samples[i - 1]) * sample_rate / 2.0;
  d[n - 1] = (samples[n - 1] - samples[n - 2]) * sample_rate;
  return d;
}

namespace {

// Sub-sample position of an extremum from a parabola through i-1, i, i+1.
// Only applied where the parabola also predicts i-2 and i+2 well, so kinks
// (e.g. the apex of a triangle) stay on the sample grid.
double refined_index(std::span<const double> y, std::size_t i) {
  if (i < 2 || i + 2 >= y.size()) return static_cast<double>(i);
  const double a = (y[i - 1] + y[i + 1] - 2.0 * y[i]) / 2.0;
  const double b = (y[i + 1] - y[i - 1]) / 2.0;
  if (a == 0.0) return static_cast<double>(i);
  const double residual = std::max(std::abs(y[i] - 2.0 * b + 4.0 * a - y[i - 2]),
                                   std::abs(y[i] + 2.0 * b + 4.0 * a - y[i + 2]));
  if (residual > 0.25 * std::abs(a)) return static_cast<double>(i);
  const double offset = -b / (2.0 * a);
  if (std::abs(offset) > 0.5) return static_cast<double>(i);
  return static_cast<double>(i) + offset;
}

TimedValue at(std::span<const double> y, std::size_t i, double fs) {
  return {refined_index(y, i) / fs, y[i]};
}

std::size_t argmax(std::span<const double> y, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo; i < hi; ++i) {
    if (y[i] > y[best]) best = i;
  }
  return best;
}

std::size_t argmin(std::span<const double> y, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo; i < hi; ++i) {
    if (y[i] < y[best]) best = i;
  }
  return best;
}

std::optional<std::size_t> first_after(const std::vector<std::size_t>& indices, std::size_t after) {
  for (std::size_t i : indices) {
    if (i > after) return i;
  }
  return std::nullopt;
}

}  // namespace

FiducialSet detect_fiducials(const PulseCycle& cycle) {
  const std::span<const double> x = cycle.samples;
  const double fs = cycle.sample_rate_hz;
  if (x.size() < 3) throw Error(ErrorKind::NoPeak, "cycle shorter than 3 samples");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  if (*lo_it == *hi_it) throw Error(ErrorKind::NoPeak, "cycle is flat");

  FiducialSet f;
  const std::size_t n = x.size();
  f.peak_index = argmax(x, 0, n);
  f.onset_t = 0.0;
  f.end_t = static_cast<double>(n - 1) / fs;
  f.onset_v = x.front();
  f.end_v = x.back();
  f.peak_v = x[f.peak_index];
  f.peak_t = refined_index(x, f.peak_index) / fs;

  const std::vector<double> d1 = derivative(x, fs);
  const std::vector<double> d2 = derivative(d1, fs);

  // First local maximum of d1 before the peak that reaches half the largest
  // upstroke slope; small ripples near the onset are skipped.
  const std::size_t upstroke_end = std::max<std::size_t>(f.peak_index, 1);
  const double d1_top = d1[argmax(d1, 0, upstroke_end)];
  std::optional<std::size_t> d1_max_index;
  for (std::size_t i : local_maxima(d1)) {
    if (i >= f.peak_index) break;
    if (d1[i] >= 0.5 * d1_top) {
      d1_max_index = i;
      break;
    }
  }
  f.d1_max = at(d1, d1_max_index.value_or(argmax(d1, 0, upstroke_end)), fs);
  f.d1_min = at(d1, argmin(d1, std::min(f.peak_index + 1, n - 1), n), fs);

  const std::size_t a_index = argmax(d2, 0, f.peak_index + 1);
  f.d2_a = at(d2, a_index, fs);
  const auto d2_max = local_maxima(d2);
  const auto d2_min = local_minima(d2);
  if (auto b = first_after(d2_min, a_index)) {
    f.d2_b = at(d2, *b, fs);
    if (auto c = first_after(d2_max, *b)) {
      f.d2_c = at(d2, *c, fs);
      if (auto d = first_after(d2_min, *c)) {
        f.d2_d = at(d2, *d, fs);
        if (auto e = first_after(d2_max, *d)) f.d2_e = at(d2, *e, fs);
      }
    }
  }

  // Dicrotic notch: first local minimum after the peak that is followed by a
  // local maximum rising at least 0.1% of the cycle range above it.
  const double min_rise = 1e-3 * (*hi_it - *lo_it);
  const auto maxima = local_maxima(x);
  for (std::size_t m : local_minima(x)) {
    if (m <= f.peak_index) continue;
    const auto next_max = first_after(maxima, m);
    if (!next_max) break;
    if (x[*next_max] - x[m] >= min_rise) {
      f.notch = at(x, m, fs);
      f.diastolic_peak = at(x, *next_max, fs);
      break;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

struct FeatureContext {
  std::span<const double> x;
  std::vector<double> d1, d2;
  double fs = 1000.0;
  double duration = 0.0;
  FiducialSet f;
  double mean = 0.0, stddev = 0.0, skewness = 0.0, kurtosis = 0.0, rms = 0.0;
  double d1_mean = 0.0, d1_std = 0.0, d1_rms = 0.0;
  double d2_std = 0.0, d2_rms = 0.0;
  double area_total = 0.0, area_systolic = 0.0, area_diastolic = 0.0;
  double area_pre_notch = 0.0, area_post_notch = 0.0;

  // Level crossings at onset_v + level * (peak_v - onset_v), linearly
  // interpolated; clipped to the cycle ends when the level is never crossed.
  double rise_time(double level) const {
    const double threshold = f.onset_v + level * (f.peak_v - f.onset_v);
    for (std::size_t i = f.peak_index; i-- > 0;) {
      if (x[i] < threshold) {
        const double frac = (threshold - x[i]) / (x[i + 1] - x[i]);
        return (static_cast<double>(i) + frac) / fs;
      }
    }
    return 0.0;
  }
  double fall_time(double level) const {
    const double threshold = f.onset_v + level * (f.peak_v - f.onset_v);
    for (std::size_t i = f.peak_index + 1; i < x.size(); ++i) {
      if (x[i] < threshold) {
        const double frac = (x[i - 1] - threshold) / (x[i - 1] - x[i]);
        return (static_cast<double>(i - 1) + frac) / fs;
      }
    }
    return duration;
  }
  double systolic_width(double level) const { return f.peak_t - rise_time(level); }
  double diastolic_width(double level) const { return fall_time(level) - f.peak_t; }

  // Trapezoidal integral of x over [t0, t1] seconds with linear interpolation
  // at fractional end points.
  double integrate(double t0, double t1) const {
    if (t1 <= t0) return 0.0;
    auto value = [&](double pos) {
      const auto i = std::min(static_cast<std::size_t>(pos), x.size() - 2);
      const double frac = pos - static_cast<double>(i);
      return x[i] + frac * (x[i + 1] - x[i]);
    };
    const double p0 = std::clamp(t0 * fs, 0.0, static_cast<double>(x.size() - 1));
    const double p1 = std::clamp(t1 * fs, 0.0, static_cast<double>(x.size() - 1));
    const auto first = static_cast<std::size_t>(std::ceil(p0));
    const auto last = static_cast<std::size_t>(std::floor(p1));
    double sum = 0.0;
    if (first > last) return (value(p0) + value(p1)) / 2.0 * (p1 - p0) / fs;
    sum += (value(p0) + x[first]) / 2.0 * (static_cast<double>(first) - p0);
    for (std::size_t i = first; i < last; ++i) sum += (x[i] + x[i + 1]) / 2.0;
    sum += (x[last] + value(p1)) / 2.0 * (p1 - static_cast<double>(last));
    return sum / fs;
  }
};

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

struct Moments {
  double mean = 0.0, stddev = 0.0, skewness = 0.0, kurtosis = 0.0, rms = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  const auto n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, sq = 0.0;
  for (double value : v) {
    const double d = value - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    sq += value * value;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.stddev = std::sqrt(m2);
  m.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  m.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  m.rms = std::sqrt(sq / n);
  return m;
}

using C = FeatureContext;

double opt_t(const std::optional<TimedValue>& p) { return p ? p->t : 0.0; }
double opt_v(const std::optional<TimedValue>& p) { return p ? p->v : 0.0; }

double aid(const C& c) { return c.f.peak_v - c.f.onset_v; }
double did(const C& c) { return c.f.peak_v - c.f.end_v; }

bool d2_complete(const C& c) { return c.f.d2_b && c.f.d2_c && c.f.d2_d && c.f.d2_e; }

FeatureDef def(std::string name, SignalKind signal, FeatureUnit unit, std::string formula,
               std::string description, double (*eval)(const C&, double), double parameter = 0.0) {
  return {std::move(name), signal, unit, std::move(formula), parameter, std::move(description), eval};
}

FeatureCatalog build_catalog() {
  using S = SignalKind;
  using U = FeatureUnit;
  FeatureCatalog cat;

  // Named features.
  cat.push_back(def("der_1_PI", S::FirstDerivative, U::AmplitudePerSecond, "d1_max_value",
                    "Intensity of the first local maximum of the first derivative (1st inflection point)",
                    [](const C& c, double) { return c.f.d1_max.v; }));
  cat.push_back(def("AS", S::Cycle, U::AmplitudePerSecond, "systolic_slope",
                    "Slope of the systolic portion: AID / (peak time - onset time)",
                    [](const C& c, double) { return safe_div(aid(c), c.f.peak_t - c.f.onset_t); }));
  cat.push_back(def("der_1_AS", S::FirstDerivative, U::AmplitudePerSecond2, "d1_upslope",
                    "Slope of the first derivative from the cycle onset to the 1st inflection point",
                    [](const C& c, double) { return safe_div(c.f.d1_max.v - c.d1.front(), c.f.d1_max.t); }));
  cat.push_back(def("DID", S::Cycle, U::Amplitude, "peak_minus_end",
                    "Intensity difference between the systolic peak and the cycle end",
                    [](const C& c, double) { return did(c); }));
  cat.push_back(def("AID", S::Cycle, U::Amplitude, "peak_minus_onset",
                    "Intensity difference between the cycle onset and the systolic peak",
                    [](const C& c, double) { return aid(c); }));
  cat.push_back(def("PI", S::Cycle, U::Ratio, "peak_over_mean",
                    "Systolic peak intensity divided by the cycle mean",
                    [](const C& c, double) { return c.f.peak_v / c.mean; }));

  // Timing and amplitude.
  cat.push_back(def("cycle_duration", S::Cycle, U::Seconds, "duration", "Cycle duration T",
                    [](const C& c, double) { return c.duration; }));
  cat.push_back(def("systolic_time", S::Cycle, U::Seconds, "peak_time", "Onset to systolic peak",
                    [](const C& c, double) { return c.f.peak_t; }));
  cat.push_back(def("diastolic_time", S::Cycle, U::Seconds, "peak_to_end", "Systolic peak to cycle end",
                    [](const C& c, double) { return c.duration - c.f.peak_t; }));
  cat.push_back(def("systolic_time_ratio", S::Cycle, U::Ratio, "peak_time_over_duration",
                    "Systolic time divided by T", [](const C& c, double) { return c.f.peak_t / c.duration; }));
  cat.push_back(def("systolic_amplitude", S::Cycle, U::Amplitude, "peak_value", "Systolic peak value",
                    [](const C& c, double) { return c.f.peak_v; }));
  cat.push_back(def("onset_amplitude", S::Cycle, U::Amplitude, "onset_value", "Value at the cycle onset",
                    [](const C& c, double) { return c.f.onset_v; }));
  cat.push_back(def("end_amplitude", S::Cycle, U::Amplitude, "end_value", "Value at the cycle end",
                    [](const C& c, double) { return c.f.end_v; }));
  cat.push_back(def("descending_slope", S::Cycle, U::AmplitudePerSecond, "diastolic_slope",
                    "DID divided by the diastolic time",
                    [](const C& c, double) { return safe_div(did(c), c.duration - c.f.peak_t); }));
  cat.push_back(def("aid_did_ratio", S::Cycle, U::Ratio, "aid_over_did", "AID / DID",
                    [](const C& c, double) { return safe_div(aid(c), did(c)); }));
  cat.push_back(def("cycle_heart_rate", S::Cycle, U::PerMinute, "rate", "60 / T in beats per minute",
                    [](const C& c, double) { return 60.0 / c.duration; }));

  // Widths at fractions of the onset-to-peak amplitude.
  for (int level : {10, 25, 33, 50, 66, 75, 90}) {
    const double p = level / 100.0;
    const std::string pct = std::to_string(level);
    cat.push_back(def("sw_" + pct, S::Cycle, U::Seconds, "systolic_width",
                      "Systolic-side width at " + pct + "% of the pulse amplitude",
                      [](const C& c, double q) { return c.systolic_width(q); }, p));
    cat.push_back(def("dw_" + pct, S::Cycle, U::Seconds, "diastolic_width",
                      "Diastolic-side width at " + pct + "% of the pulse amplitude",
                      [](const C& c, double q) { return c.diastolic_width(q); }, p));
    cat.push_back(def("width_" + pct, S::Cycle, U::Seconds, "total_width",
                      "Total width at " + pct + "% of the pulse amplitude",
                      [](const C& c, double q) { return c.systolic_width(q) + c.diastolic_width(q); }, p));
    cat.push_back(def("dw_sw_ratio_" + pct, S::Cycle, U::Ratio, "width_ratio",
                      "Diastolic over systolic width at " + pct + "%",
                      [](const C& c, double q) { return safe_div(c.diastolic_width(q), c.systolic_width(q)); },
                      p));
  }

  // Areas.
  cat.push_back(def("area_total", S::Cycle, U::AmplitudeSeconds, "area", "Area under the cycle",
                    [](const C& c, double) { return c.area_total; }));
  cat.push_back(def("area_systolic", S::Cycle, U::AmplitudeSeconds, "area", "Area from onset to peak",
                    [](const C& c, double) { return c.area_systolic; }));
  cat.push_back(def("area_diastolic", S::Cycle, U::AmplitudeSeconds, "area", "Area from peak to end",
                    [](const C& c, double) { return c.area_diastolic; }));
  cat.push_back(def("area_ratio", S::Cycle, U::Ratio, "area_ratio", "Diastolic area / systolic area",
                    [](const C& c, double) { return safe_div(c.area_diastolic, c.area_systolic); }));

  // Dicrotic notch and diastolic peak; zero when no notch is present.
  cat.push_back(def("notch_present", S::Cycle, U::Flag, "notch_flag", "1 if a dicrotic notch was found",
                    [](const C& c, double) { return c.f.notch ? 1.0 : 0.0; }));
  cat.push_back(def("notch_time", S::Cycle, U::Seconds, "notch_time", "Onset to dicrotic notch",
                    [](const C& c, double) { return opt_t(c.f.notch); }));
  cat.push_back(def("notch_amplitude", S::Cycle, U::Amplitude, "notch_value", "Value at the dicrotic notch",
                    [](const C& c, double) { return opt_v(c.f.notch); }));
  cat.push_back(def("notch_time_ratio", S::Cycle, U::Ratio, "notch_time_over_duration", "Notch time / T",
                    [](const C& c, double) { return opt_t(c.f.notch) / c.duration; }));
  cat.push_back(def("notch_amplitude_ratio", S::Cycle, U::Ratio, "notch_over_peak",
                    "Notch value / systolic peak value",
                    [](const C& c, double) { return opt_v(c.f.notch) / c.f.peak_v; }));
  cat.push_back(def("diastolic_peak_time", S::Cycle, U::Seconds, "diastolic_peak_time",
                    "Onset to diastolic peak", [](const C& c, double) { return opt_t(c.f.diastolic_peak); }));
  cat.push_back(def("diastolic_peak_amplitude", S::Cycle, U::Amplitude, "diastolic_peak_value",
                    "Value at the diastolic peak", [](const C& c, double) { return opt_v(c.f.diastolic_peak); }));
  cat.push_back(def("reflection_index", S::Cycle, U::Ratio, "diastolic_over_systolic",
                    "Diastolic peak value / systolic peak value",
                    [](const C& c, double) { return opt_v(c.f.diastolic_peak) / c.f.peak_v; }));
  cat.push_back(def("peak_to_peak_interval", S::Cycle, U::Seconds, "peak_to_peak",
                    "Systolic peak to diastolic peak", [](const C& c, double) {
                      return c.f.diastolic_peak ? c.f.diastolic_peak->t - c.f.peak_t : 0.0;
                    }));
  cat.push_back(def("inflection_area_ratio", S::Cycle, U::Ratio, "area_ratio",
                    "Area after the notch / area before the notch",
                    [](const C& c, double) { return c.f.notch ? safe_div(c.area_post_notch, c.area_pre_notch) : 0.0; }));
  cat.push_back(def("notch_delay", S::Cycle, U::Seconds, "peak_to_notch", "Systolic peak to notch",
                    [](const C& c, double) { return c.f.notch ? c.f.notch->t - c.f.peak_t : 0.0; }));

  // First derivative.
  cat.push_back(def("der_1_PI_time", S::FirstDerivative, U::Seconds, "d1_max_time",
                    "Time of the 1st inflection point", [](const C& c, double) { return c.f.d1_max.t; }));
  cat.push_back(def("der_1_PI_time_ratio", S::FirstDerivative, U::Ratio, "d1_max_time_over_duration",
                    "Time of the 1st inflection point / T",
                    [](const C& c, double) { return c.f.d1_max.t / c.duration; }));
  cat.push_back(def("der_1_min_value", S::FirstDerivative, U::AmplitudePerSecond, "d1_min_value",
                    "Minimum of the first derivative after the peak",
                    [](const C& c, double) { return c.f.d1_min.v; }));
  cat.push_back(def("der_1_min_time", S::FirstDerivative, U::Seconds, "d1_min_time",
                    "Time of the first-derivative minimum", [](const C& c, double) { return c.f.d1_min.t; }));
  cat.push_back(def("der_1_min_time_ratio", S::FirstDerivative, U::Ratio, "d1_min_time_over_duration",
                    "Time of the first-derivative minimum / T",
                    [](const C& c, double) { return c.f.d1_min.t / c.duration; }));
  cat.push_back(def("der_1_onset_value", S::FirstDerivative, U::AmplitudePerSecond, "d1_onset",
                    "First derivative at the onset", [](const C& c, double) { return c.d1.front(); }));
  cat.push_back(def("der_1_end_value", S::FirstDerivative, U::AmplitudePerSecond, "d1_end",
                    "First derivative at the cycle end", [](const C& c, double) { return c.d1.back(); }));
  cat.push_back(def("der_1_PI_norm", S::FirstDerivative, U::PerSecond, "d1_max_over_peak",
                    "1st inflection intensity / systolic peak value",
                    [](const C& c, double) { return c.f.d1_max.v / c.f.peak_v; }));
  cat.push_back(def("der_1_min_norm", S::FirstDerivative, U::PerSecond, "d1_min_over_peak",
                    "First-derivative minimum / systolic peak value",
                    [](const C& c, double) { return c.f.d1_min.v / c.f.peak_v; }));
  cat.push_back(def("der_1_min_max_ratio", S::FirstDerivative, U::Ratio, "d1_min_over_max",
                    "First-derivative minimum / 1st inflection intensity",
                    [](const C& c, double) { return safe_div(c.f.d1_min.v, c.f.d1_max.v); }));
  cat.push_back(def("der_1_mean", S::FirstDerivative, U::AmplitudePerSecond, "mean",
                    "Mean of the first derivative", [](const C& c, double) { return c.d1_mean; }));
  cat.push_back(def("der_1_std", S::FirstDerivative, U::AmplitudePerSecond, "std",
                    "Standard deviation of the first derivative", [](const C& c, double) { return c.d1_std; }));

  // Second-derivative waves.
  cat.push_back(def("der_2_a_value", S::SecondDerivative, U::AmplitudePerSecond2, "d2_wave_value",
                    "a-wave value", [](const C& c, double) { return opt_v(c.f.d2_a); }));
  cat.push_back(def("der_2_a_time", S::SecondDerivative, U::Seconds, "d2_wave_time", "a-wave time",
                    [](const C& c, double) { return opt_t(c.f.d2_a); }));
  cat.push_back(def("der_2_b_value", S::SecondDerivative, U::AmplitudePerSecond2, "d2_wave_value",
                    "b-wave value", [](const C& c, double) { return opt_v(c.f.d2_b); }));
  cat.push_back(def("der_2_b_time", S::SecondDerivative, U::Seconds, "d2_wave_time", "b-wave time",
                    [](const C& c, double) { return opt_t(c.f.d2_b); }));
  cat.push_back(def("der_2_c_value", S::SecondDerivative, U::AmplitudePerSecond2, "d2_wave_value",
                    "c-wave value", [](const C& c, double) { return opt_v(c.f.d2_c); }));
  cat.push_back(def("der_2_c_time", S::SecondDerivative, U::Seconds, "d2_wave_time", "c-wave time",
                    [](const C& c, double) { return opt_t(c.f.d2_c); }));
  cat.push_back(def("der_2_d_value", S::SecondDerivative, U::AmplitudePerSecond2, "d2_wave_value",
                    "d-wave value", [](const C& c, double) { return opt_v(c.f.d2_d); }));
  cat.push_back(def("der_2_d_time", S::SecondDerivative, U::Seconds, "d2_wave_time", "d-wave time",
                    [](const C& c, double) { return opt_t(c.f.d2_d); }));
  cat.push_back(def("der_2_e_value", S::SecondDerivative, U::AmplitudePerSecond2, "d2_wave_value",
                    "e-wave value", [](const C& c, double) { return opt_v(c.f.d2_e); }));
  cat.push_back(def("der_2_e_time", S::SecondDerivative, U::Seconds, "d2_wave_time", "e-wave time",
                    [](const C& c, double) { return opt_t(c.f.d2_e); }));
  cat.push_back(def("der_2_b_a_ratio", S::SecondDerivative, U::Ratio, "d2_wave_ratio", "b / a",
                    [](const C& c, double) { return safe_div(opt_v(c.f.d2_b), opt_v(c.f.d2_a)); }));
  cat.push_back(def("der_2_c_a_ratio", S::SecondDerivative, U::Ratio, "d2_wave_ratio", "c / a",
                    [](const C& c, double) { return safe_div(opt_v(c.f.d2_c), opt_v(c.f.d2_a)); }));
  cat.push_back(def("der_2_d_a_ratio", S::SecondDerivative, U::Ratio, "d2_wave_ratio", "d / a",
                    [](const C& c, double) { return safe_div(opt_v(c.f.d2_d), opt_v(c.f.d2_a)); }));
  cat.push_back(def("der_2_e_a_ratio", S::SecondDerivative, U::Ratio, "d2_wave_ratio", "e / a",
                    [](const C& c, double) { return safe_div(opt_v(c.f.d2_e), opt_v(c.f.d2_a)); }));
  cat.push_back(def("der_2_aging_index", S::SecondDerivative, U::Ratio, "aging_index", "(b - c - d - e) / a",
                    [](const C& c, double) {
                      if (!d2_complete(c)) return 0.0;
                      return safe_div(c.f.d2_b->v - c.f.d2_c->v - c.f.d2_d->v - c.f.d2_e->v, opt_v(c.f.d2_a));
                    }));
  cat.push_back(def("der_2_waves_complete", S::SecondDerivative, U::Flag, "d2_flag",
                    "1 if waves b through e were all found", [](const C& c, double) { return d2_complete(c) ? 1.0 : 0.0; }));
  cat.push_back(def("der_2_std", S::SecondDerivative, U::AmplitudePerSecond2, "std",
                    "Standard deviation of the second derivative", [](const C& c, double) { return c.d2_std; }));

  // Shape statistics.
  cat.push_back(def("cycle_mean", S::Cycle, U::Amplitude, "mean", "Mean value of the cycle",
                    [](const C& c, double) { return c.mean; }));
  cat.push_back(def("cycle_std", S::Cycle, U::Amplitude, "std", "Standard deviation of the cycle",
                    [](const C& c, double) { return c.stddev; }));
  cat.push_back(def("cycle_skewness", S::Cycle, U::Ratio, "skewness", "Skewness of the cycle samples",
                    [](const C& c, double) { return c.skewness; }));
  cat.push_back(def("cycle_kurtosis", S::Cycle, U::Ratio, "kurtosis", "Excess kurtosis of the cycle samples",
                    [](const C& c, double) { return c.kurtosis; }));
  cat.push_back(def("cycle_rms", S::Cycle, U::Amplitude, "rms", "Root mean square of the cycle",
                    [](const C& c, double) { return c.rms; }));

  // Normalized and cross-signal measures.
  cat.push_back(def("area_normalized", S::Cycle, U::Ratio, "area_over_box", "Total area / (peak value * T)",
                    [](const C& c, double) { return c.area_total / (c.f.peak_v * c.duration); }));
  cat.push_back(def("systolic_area_fraction", S::Cycle, U::Ratio, "area_fraction", "Systolic area / total area",
                    [](const C& c, double) { return safe_div(c.area_systolic, c.area_total); }));
  cat.push_back(def("d1_max_to_peak_time", S::FirstDerivative, U::Seconds, "interval",
                    "1st inflection point to systolic peak",
                    [](const C& c, double) { return c.f.peak_t - c.f.d1_max.t; }));
  cat.push_back(def("der_2_b_minus_a_time", S::SecondDerivative, U::Seconds, "interval", "a-wave to b-wave",
                    [](const C& c, double) { return c.f.d2_b ? c.f.d2_b->t - opt_t(c.f.d2_a) : 0.0; }));
  cat.push_back(def("der_1_min_delay", S::FirstDerivative, U::Seconds, "interval",
                    "Systolic peak to first-derivative minimum",
                    [](const C& c, double) { return c.f.d1_min.t - c.f.peak_t; }));
  cat.push_back(def("width_50_ratio", S::Cycle, U::Ratio, "width_over_duration", "Width at 50% / T",
                    [](const C& c, double) { return (c.systolic_width(0.5) + c.diastolic_width(0.5)) / c.duration; }));
  cat.push_back(def("notch_depth_ratio", S::Cycle, U::Ratio, "notch_depth",
                    "(diastolic peak - notch) / systolic peak", [](const C& c, double) {
                      return c.f.notch ? (c.f.diastolic_peak->v - c.f.notch->v) / c.f.peak_v : 0.0;
                    }));
  cat.push_back(def("der_1_rms", S::FirstDerivative, U::AmplitudePerSecond, "rms",
                    "Root mean square of the first derivative", [](const C& c, double) { return c.d1_rms; }));
  cat.push_back(def("der_2_rms", S::SecondDerivative, U::AmplitudePerSecond2, "rms",
                    "Root mean square of the second derivative", [](const C& c, double) { return c.d2_rms; }));
  cat.push_back(def("crest_factor", S::Cycle, U::Ratio, "peak_over_rms", "Systolic peak / RMS",
                    [](const C& c, double) { return c.f.peak_v / c.rms; }));
  cat.push_back(def("diastolic_decay_slope", S::Cycle, U::AmplitudePerSecond, "notch_to_end_slope",
                    "(notch value - end value) / (T - notch time)", [](const C& c, double) {
                      return c.f.notch ? safe_div(c.f.notch->v - c.f.end_v, c.duration - c.f.notch->t) : 0.0;
                    }));
  return cat;
}

}  // namespace

const FeatureCatalog& default_catalog() {
  static const FeatureCatalog catalog = build_catalog();
  return catalog;
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& d : default_catalog()) out.push_back(d.name);
    for (const char* m : {"sex", "age", "height", "weight", "heart_rate", "bmi"}) out.emplace_back(m);
    return out;
  }();
  return names;
}

bool is_time_based(FeatureUnit unit) {
  return unit == FeatureUnit::Seconds || unit == FeatureUnit::PerMinute;
}

bool is_amplitude_scaled(FeatureUnit unit) {
  switch (unit) {
    case FeatureUnit::Amplitude:
    case FeatureUnit::AmplitudeSeconds:
    case FeatureUnit::AmplitudePerSecond:
    case FeatureUnit::AmplitudePerSecond2:
      return true;
    default:
      return false;
  }
}

std::vector<double> compute_features(const PulseCycle& cycle, const FiducialSet& fiducials,
                                     const FeatureCatalog& catalog) {
  const std::span<const double> x = cycle.samples;
  if (x.size() < 3 || cycle.duration_s() <= 0.0) {
    throw Error(ErrorKind::DegenerateCycle, "cycle has zero duration");
  }
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  if (*hi_it == *lo_it) throw Error(ErrorKind::DegenerateCycle, "cycle has zero amplitude range");

  FeatureContext c;
  c.x = x;
  c.fs = cycle.sample_rate_hz;
  c.duration = cycle.duration_s();
  c.f = fiducials;
  c.d1 = derivative(x, c.fs);
  c.d2 = derivative(c.d1, c.fs);

  const Moments m = moments(x);
  if (!(m.mean > 0.0)) throw Error(ErrorKind::DegenerateCycle, "cycle mean is not positive");
  c.mean = m.mean;
  c.stddev = m.stddev;
  c.skewness = m.skewness;
  c.kurtosis = m.kurtosis;
  c.rms = m.rms;
  const Moments m1 = moments(c.d1);
  c.d1_mean = m1.mean;
  c.d1_std = m1.stddev;
  c.d1_rms = m1.rms;
  const Moments m2 = moments(c.d2);
  c.d2_std = m2.stddev;
  c.d2_rms = m2.rms;

  c.area_total = c.integrate(0.0, c.duration);
  c.area_systolic = c.integrate(0.0, fiducials.peak_t);
  c.area_diastolic = c.integrate(fiducials.peak_t, c.duration);
  if (fiducials.notch) {
    c.area_pre_notch = c.integrate(0.0, fiducials.notch->t);
    c.area_post_notch = c.integrate(fiducials.notch->t, c.duration);
  }

  std::vector<double> values;
  values.reserve(catalog.size());
  for (const auto& d : catalog) {
    const double v = d.evaluate(c, d.parameter);
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::DegenerateCycle, "feature '" + d.name + "' is not finite");
    }
    values.push_back(v);
  }
  return values;
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::pair<std::string, std::optional<double> SubjectRecord::*>>& metadata_fields() {
  static const std::vector<std::pair<std::string, std::optional<double> SubjectRecord::*>> fields = {
      {"age", &SubjectRecord::age},
      {"height", &SubjectRecord::height_cm},
      {"weight", &SubjectRecord::weight_kg},
      {"heart_rate", &SubjectRecord::heart_rate_bpm},
      {"bmi", &SubjectRecord::bmi},
  };
  return fields;
}

}  // namespace

MetadataImputer::MetadataImputer(const std::vector<SubjectRecord>& reference) {
  for (const auto& [name, member] : metadata_fields()) {
    std::vector<double> values;
    for (const auto& r : reference) {
      if (r.*member) values.push_back(*(r.*member));
    }
    if (values.empty()) continue;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    medians_[name] = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
  }
}

std::optional<double> MetadataImputer::median(const std::string& field) const {
  if (auto it = medians_.find(field); it != medians_.end()) return it->second;
  return std::nullopt;
}

FeatureVector assemble_vector(const SubjectRecord& subject, std::span<const double> ppg_features,
                              const MetadataImputer* imputer, std::vector<ImputationEntry>* log) {
  if (ppg_features.size() != kPpgFeatureCount) {
    throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(kPpgFeatureCount) +
                                               " PPG features, got " + std::to_string(ppg_features.size()));
  }
  FeatureVector out;
  out.subject_id = subject.subject_id;
  out.label = subject.has_diabetes ? ClassLabel::Diabetic : ClassLabel::NonDiabetic;
  out.values.assign(ppg_features.begin(), ppg_features.end());
  out.values.push_back(subject.sex == Sex::Male ? 1.0 : 0.0);
  for (const auto& [name, member] : metadata_fields()) {
    if (const auto& value = subject.*member) {
      out.values.push_back(*value);
      continue;
    }
    const std::optional<double> fill = imputer ? imputer->median(name) : std::nullopt;
    if (!fill) {
      throw Error(ErrorKind::MissingMetadata, "subject '" + subject.subject_id + "' has no " + name);
    }
    out.values.push_back(*fill);
    if (log) log->push_back({subject.subject_id, name, *fill});
  }
  return out;
}

}  // namespace ppgscreen
