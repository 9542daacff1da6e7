#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppgscreen/dataset.hpp"

namespace ppgscreen {

enum class FilterMode { Forward, ZeroPhase };

struct FilterSpec {
  int order = 6;
  double cutoff_hz = 16.0;
  double sample_rate_hz = 1000.0;
  FilterMode mode = FilterMode::ZeroPhase;
};

/// One second-order section, a0 normalized to 1:
///   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct BiquadSection {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct FilterCoefficients {
  std::vector<BiquadSection> sections;
};

/// Butterworth low-pass as cascaded biquads (bilinear transform, cutoff
/// prewarped). Throws Error{InvalidSpec} for odd/non-positive order or a
/// cutoff outside (0, fs/2).
FilterCoefficients design_lowpass(const FilterSpec& spec);

/// H(e^{jw}) of the cascade evaluated analytically.
std::complex<double> frequency_response(const FilterCoefficients& coeffs, double freq_hz,
                                        double sample_rate_hz);

/// Causal cascade in transposed direct form II. The state starts at the
/// steady-state response to a constant input equal to `x[0]`, so a constant
/// signal passes through without a start-up transient.
std::vector<double> sos_filter(const FilterCoefficients& coeffs, std::span<const double> x);

/// Applies the designed filter. Zero-phase mode runs the cascade forward then
/// backward over an odd-reflected extension of max(3*order, 2*fs/cutoff)
/// samples per side (capped at n - 1).
/// Throws Error{TooShort} when x has fewer than 3*order samples.
std::vector<double> filter_signal(std::span<const double> x, const FilterSpec& spec);
Segment filter_segment(const Segment& segment, const FilterSpec& spec);

struct FswOptions {
  double window_s = 0.5;
  double min_cycle_s = 0.4;
  /// A first/last sample only counts as a valley where the signal is flat:
  /// |first difference| <= edge_flat_frac * max |first difference|.
  double edge_flat_frac = 0.01;
};

struct BaselineFit {
  std::vector<std::size_t> valley_indices;  // strictly increasing
  std::vector<double> baseline;             // one value per input sample
};

/// Inter-beat valley search with a centred sliding window, followed by a
/// piecewise-linear baseline through the valleys (held constant beyond the
/// first and last valley). Throws Error{NoValleys} when nothing qualifies.
BaselineFit fsw_baseline(const Segment& segment, const FswOptions& options = {});

/// samples - baseline
std::vector<double> subtract_baseline(const Segment& segment, const BaselineFit& fit);

struct CycleOptions {
  double min_s = 0.4;
  double max_s = 1.5;
  double peak_prominence_frac = 0.5;
  double peak_position_frac = 0.6;
  double baseline_tolerance = 0.01;
};

/// One heartbeat between consecutive valleys of a baseline-corrected segment.
/// `samples` includes both bounding valleys.
struct PulseCycle {
  std::string subject_id;
  int segment_index = 0;
  std::vector<double> samples;
  double sample_rate_hz = 1000.0;
  std::size_t onset_index = 0;
  std::size_t end_index = 0;

  double duration_s() const {
    return samples.size() < 2 ? 0.0 : static_cast<double>(samples.size() - 1) / sample_rate_hz;
  }
};

struct CycleVerdict {
  bool accepted = true;
  std::string reason;  // empty when accepted

  static CycleVerdict accept() { return {}; }
  static CycleVerdict reject(std::string why) { return {false, std::move(why)}; }
};

/// Rejection reasons, checked in this order:
///   too_short, too_long, non_positive_peak, peak_position,
///   no_dominant_peak, multiple_peaks, baseline
CycleVerdict validate_cycle(const PulseCycle& cycle, const CycleOptions& options = {});

struct CycleRejection {
  std::size_t onset_index = 0;
  std::size_t end_index = 0;
  std::string reason;
};

struct Segmentation {
  std::vector<PulseCycle> cycles;
  std::vector<CycleRejection> rejected;
};

/// One candidate per consecutive valley pair on the corrected signal; data
/// before the first and after the last valley is discarded.
Segmentation segment_cycles(const Segment& segment, const BaselineFit& fit,
                            const CycleOptions& options = {}, const std::string& subject_id = {},
                            int segment_index = 0);

/// Topographic prominence of the local maximum at `peak` (scipy semantics).
double peak_prominence(std::span<const double> x, std::size_t peak);

/// Indices of interior local maxima; plateaus report their first index.
std::vector<std::size_t> local_maxima(std::span<const double> x);
std::vector<std::size_t> local_minima(std::span<const double> x);

}  // namespace ppgscreen
