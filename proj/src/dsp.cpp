#include "ppgscreen/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "ppgscreen/error.hpp"

namespace ppgscreen {

FilterCoefficients design_lowpass(const FilterSpec& spec) {
  if (spec.order <= 0 || spec.order % 2 != 0) {
    throw Error(ErrorKind::InvalidSpec, "filter order must be a positive even number");
  }
  if (!(spec.sample_rate_hz > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "sample rate must be positive");
  }
  if (!(spec.cutoff_hz > 0.0) || spec.cutoff_hz >= spec.sample_rate_hz / 2.0) {
    throw Error(ErrorKind::InvalidSpec, "cutoff must lie strictly between 0 and Nyquist");
  }

  // Prewarped analog cutoff, already divided by 2*fs.
  const double omega = std::tan(std::numbers::pi * spec.cutoff_hz / spec.sample_rate_hz);
  const double omega2 = omega * omega;

  FilterCoefficients coeffs;
  const int pairs = spec.order / 2;
  for (int k = 0; k < pairs; ++k) {
    // Conjugate pole pair at omega * (-sin(theta) +/- j cos(theta)).
    const double theta = std::numbers::pi * (2.0 * k + 1.0) / (2.0 * spec.order);
    const double damping = 2.0 * std::sin(theta) * omega;
    const double a0 = 1.0 + damping + omega2;
    BiquadSection s;
    s.b0 = omega2 / a0;
    s.b1 = 2.0 * omega2 / a0;
    s.b2 = omega2 / a0;
    s.a1 = (2.0 * omega2 - 2.0) / a0;
    s.a2 = (1.0 - damping + omega2) / a0;
    coeffs.sections.push_back(s);
  }
  return coeffs;
}

std::complex<double> frequency_response(const FilterCoefficients& coeffs, double freq_hz,
                                        double sample_rate_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : coeffs.sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

std::vector<double> sos_filter(const FilterCoefficients& coeffs, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  double level = y.front();
  for (const auto& s : coeffs.sections) {
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z2 = (s.b2 - s.a2 * gain) * level;
    double z1 = (s.b1 - s.a1 * gain) * level + z2;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    level *= gain;
  }
  return y;
}

std::vector<double> filter_signal(std::span<const double> x, const FilterSpec& spec) {
  const FilterCoefficients coeffs = design_lowpass(spec);
  const std::size_t n = x.size();
  if (n < static_cast<std::size_t>(3 * spec.order) || n < 2) {
    throw Error(ErrorKind::TooShort, "signal has " + std::to_string(n) + " samples; need at least " +
                                         std::to_string(3 * spec.order));
  }
  if (spec.mode == FilterMode::Forward) return sos_filter(coeffs, x);

  // 3 * order samples is too short for the start-up transient of a sharp
  // low cutoff: the ends come out flattened. Two cutoff periods cover it.
  const auto settle = static_cast<std::size_t>(std::ceil(2.0 * spec.sample_rate_hz / spec.cutoff_hz));
  const std::size_t pad = std::min<std::size_t>(std::max<std::size_t>(3 * spec.order, settle), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  std::vector<double> forward = sos_filter(coeffs, ext);
  std::reverse(forward.begin(), forward.end());
  std::vector<double> backward = sos_filter(coeffs, forward);
  std::reverse(backward.begin(), backward.end());
  return {backward.begin() + static_cast<std::ptrdiff_t>(pad),
          backward.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Segment filter_segment(const Segment& segment, const FilterSpec& spec) {
  FilterSpec effective = spec;
  effective.sample_rate_hz = segment.sample_rate;
  return {filter_signal(segment.samples, effective), segment.sample_rate};
}

namespace {

template <typename Compare>
std::vector<std::size_t> local_extrema(std::span<const double> x, Compare better) {
  std::vector<std::size_t> out;
  const std::size_t n = x.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (better(x[i], x[i - 1])) {
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && better(x[i], x[j + 1])) out.push_back(i);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace

std::vector<std::size_t> local_maxima(std::span<const double> x) {
  return local_extrema(x, [](double a, double b) { return a > b; });
}

std::vector<std::size_t> local_minima(std::span<const double> x) {
  return local_extrema(x, [](double a, double b) { return a < b; });
}

double peak_prominence(std::span<const double> x, std::size_t peak) {
  const double height = x[peak];
  double left_min = height;
  for (std::size_t i = peak; i-- > 0;) {
    if (x[i] > height) break;
    left_min = std::min(left_min, x[i]);
  }
  double right_min = height;
  for (std::size_t i = peak + 1; i < x.size(); ++i) {
    if (x[i] > height) break;
    right_min = std::min(right_min, x[i]);
  }
  return height - std::max(left_min, right_min);
}

BaselineFit fsw_baseline(const Segment& segment, const FswOptions& options) {
  if (!(options.window_s > 0.0)) throw Error(ErrorKind::InvalidSpec, "FSW window must be positive");
  const auto& x = segment.samples;
  const std::size_t n = x.size();
  const auto window = static_cast<std::size_t>(std::llround(options.window_s * segment.sample_rate));
  if (n <= window || n < 3) {
    throw Error(ErrorKind::TooShort, "segment is not longer than the FSW window");
  }
  const std::size_t half = std::max<std::size_t>(window / 2, 1);

  double max_step = 0.0;
  for (std::size_t i = 1; i < n; ++i) max_step = std::max(max_step, std::abs(x[i] - x[i - 1]));
  if (max_step == 0.0) throw Error(ErrorKind::NoValleys, "signal is constant");
  const double flat_step = options.edge_flat_frac * max_step;

  // Sliding min and max over [i - half, i + half]; the min deque keeps the
  // earliest index among equal values at its front.
  std::deque<std::size_t> mins, maxs;
  std::size_t next = 0;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(n - 1, i + half);
    for (; next <= hi; ++next) {
      while (!mins.empty() && x[mins.back()] > x[next]) mins.pop_back();
      mins.push_back(next);
      while (!maxs.empty() && x[maxs.back()] <= x[next]) maxs.pop_back();
      maxs.push_back(next);
    }
    const std::size_t lo = i >= half ? i - half : 0;
    while (mins.front() < lo) mins.pop_front();
    while (maxs.front() < lo) maxs.pop_front();
    if (mins.front() != i || x[maxs.front()] == x[i]) continue;
    if (i == 0 && std::abs(x[1] - x[0]) > flat_step) continue;
    if (i == n - 1 && std::abs(x[n - 1] - x[n - 2]) > flat_step) continue;
    candidates.push_back(i);
  }

  const auto min_gap = static_cast<std::size_t>(std::llround(options.min_cycle_s * segment.sample_rate));
  BaselineFit fit;
  for (std::size_t v : candidates) {
    if (!fit.valley_indices.empty() && v - fit.valley_indices.back() < min_gap) {
      if (x[v] < x[fit.valley_indices.back()]) fit.valley_indices.back() = v;
      continue;
    }
    fit.valley_indices.push_back(v);
  }
  if (fit.valley_indices.empty()) throw Error(ErrorKind::NoValleys, "no valleys found");

  fit.baseline.resize(n);
  const auto& v = fit.valley_indices;
  for (std::size_t i = 0; i <= v.front(); ++i) fit.baseline[i] = x[v.front()];
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    const double x0 = x[v[k]];
    const double slope = (x[v[k + 1]] - x0) / static_cast<double>(v[k + 1] - v[k]);
    for (std::size_t i = v[k]; i <= v[k + 1]; ++i) {
      fit.baseline[i] = x0 + slope * static_cast<double>(i - v[k]);
    }
  }
  for (std::size_t i = v.back(); i < n; ++i) fit.baseline[i] = x[v.back()];
  return fit;
}

std::vector<double> subtract_baseline(const Segment& segment, const BaselineFit& fit) {
  std::vector<double> out(segment.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = segment.samples[i] - fit.baseline[i];
  return out;
}

CycleVerdict validate_cycle(const PulseCycle& cycle, const CycleOptions& options) {
  const double duration = cycle.duration_s();
  if (duration < options.min_s) return CycleVerdict::reject("too_short");
  if (duration > options.max_s) return CycleVerdict::reject("too_long");

  const std::span<const double> x = cycle.samples;
  const auto [min_it, max_it] = std::minmax_element(x.begin(), x.end());
  // max_element returns the first maximum on ties.
  const auto peak = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
  const double range = *max_it - *min_it;
  if (!(x[peak] > 0.0)) return CycleVerdict::reject("non_positive_peak");
  if (static_cast<double>(peak) > options.peak_position_frac * static_cast<double>(x.size() - 1)) {
    return CycleVerdict::reject("peak_position");
  }

  const double needed = options.peak_prominence_frac * range;
  bool global_is_dominant = false;
  std::size_t dominant = 0;
  for (std::size_t p : local_maxima(x)) {
    if (peak_prominence(x, p) >= needed) {
      ++dominant;
      if (x[p] == x[peak]) global_is_dominant = true;
    }
  }
  if (!global_is_dominant) return CycleVerdict::reject("no_dominant_peak");
  if (dominant != 1) return CycleVerdict::reject("multiple_peaks");

  const double tolerance = options.baseline_tolerance * range;
  if (std::abs(x.front()) > tolerance || std::abs(x.back()) > tolerance) {
    return CycleVerdict::reject("baseline");
  }
  return CycleVerdict::accept();
}

Segmentation segment_cycles(const Segment& segment, const BaselineFit& fit,
                            const CycleOptions& options, const std::string& subject_id,
                            int segment_index) {
  Segmentation result;
  const std::vector<double> corrected = subtract_baseline(segment, fit);
  const auto& v = fit.valley_indices;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    PulseCycle cycle;
    cycle.subject_id = subject_id;
    cycle.segment_index = segment_index;
    cycle.sample_rate_hz = segment.sample_rate;
    cycle.onset_index = v[k];
    cycle.end_index = v[k + 1];
    cycle.samples.assign(corrected.begin() + static_cast<std::ptrdiff_t>(v[k]),
                         corrected.begin() + static_cast<std::ptrdiff_t>(v[k + 1]) + 1);
    const CycleVerdict verdict = validate_cycle(cycle, options);
    if (verdict.accepted) {
      result.cycles.push_back(std::move(cycle));
    } else {
      result.rejected.push_back({v[k], v[k + 1], verdict.reason});
    }
  }
  return result;
}

}  // namespace ppgscreen
