// Prints the feature catalog as a Markdown table (the source of FEATURES.md).

#include <iostream>
#include <string>

#include "ppgscreen/features.hpp"

namespace {

const char* signal_name(ppgscreen::SignalKind s) {
  switch (s) {
    case ppgscreen::SignalKind::Cycle:
      return "cycle";
    case ppgscreen::SignalKind::FirstDerivative:
      return "1st derivative";
    case ppgscreen::SignalKind::SecondDerivative:
      return "2nd derivative";
  }
  return "?";
}

const char* unit_name(ppgscreen::FeatureUnit u) {
  using ppgscreen::FeatureUnit;
  switch (u) {
    case FeatureUnit::Seconds: return "s";
    case FeatureUnit::PerMinute: return "1/min";
    case FeatureUnit::Ratio: return "ratio";
    case FeatureUnit::Flag: return "flag";
    case FeatureUnit::Amplitude: return "a.u.";
    case FeatureUnit::AmplitudeSeconds: return "a.u.*s";
    case FeatureUnit::AmplitudePerSecond: return "a.u./s";
    case FeatureUnit::AmplitudePerSecond2: return "a.u./s^2";
    case FeatureUnit::PerSecond: return "1/s";
  }
  return "?";
}

std::string escape(std::string s) {
  for (std::size_t p = s.find('|'); p != std::string::npos; p = s.find('|', p + 2)) s.replace(p, 1, "\\|");
  return s;
}

}  // namespace

int main() {
  const auto& cat = ppgscreen::default_catalog();
  std::cout << "# Feature catalog\n\n"
            << "Each accepted cycle yields the " << cat.size()
            << " waveform features below, followed by six metadata inputs\n"
               "(sex, age, height, weight, heart_rate, bmi), for "
            << ppgscreen::kFeatureCount
            << " model inputs in total. Blood pressure is loaded but never used.\n\n"
               "Times are in seconds from the cycle onset (the first valley). Amplitudes\n"
               "are in the units of the input signal after baseline removal. Width levels\n"
               "are measured from the onset value up towards the systolic peak, with\n"
               "linearly interpolated crossings. Fiducials that do not exist on a cycle\n"
               "(for example the dicrotic notch on a monotone downslope) give 0 for the\n"
               "features that depend on them.\n\n"
               "Regenerate with `build/tools/feature_catalog > FEATURES.md`.\n\n"
               "| # | name | signal | unit | definition | description |\n"
               "|---|------|--------|------|------------|-------------|\n";
  for (std::size_t i = 0; i < cat.size(); ++i) {
    const auto& d = cat[i];
    std::cout << "| " << i << " | `" << d.name << "` | " << signal_name(d.signal) << " | " << unit_name(d.unit) << " | "
              << escape(d.formula) << " | " << escape(d.description) << " |\n";
  }
  return 0;
}
