#include "ppgscreen/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ppgscreen/error.hpp"
#include "ppgscreen/model_io.hpp"

namespace ppgscreen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json stat_to_json(const Stat& s) { return {{"n", s.n}, {"mean", opt(s.mean)}, {"std", opt(s.std)}}; }

json class_summary_to_json(const ClassSummary& c) {
  return {{"subjects", c.subjects},   {"males", c.males},
          {"cycles", c.cycles},       {"age", stat_to_json(c.age)},
          {"height_cm", stat_to_json(c.height_cm)}, {"weight_kg", stat_to_json(c.weight_kg)},
          {"heart_rate_bpm", stat_to_json(c.heart_rate_bpm)}, {"bmi", stat_to_json(c.bmi)}};
}

json metrics_to_json(const MetricSet& m) {
  json out = json::object();
  for (const auto& name : metric_names()) out[name] = opt(metric_value(m, name));
  return out;
}

}  // namespace

json summary_to_json(const CohortSummary& s) {
  return {{"non_diabetic", class_summary_to_json(s.non_diabetic)},
          {"diabetic", class_summary_to_json(s.diabetic)},
          {"total", class_summary_to_json(s.total)}};
}

json evaluation_to_json(const ModelEvaluation& e) {
  json folds = json::array();
  for (const auto& f : e.folds) {
    json roc = json::array();
    for (const auto& p : f.roc) {
      roc.push_back({p.fpr, p.tpr, std::isfinite(p.threshold) ? json(p.threshold) : json(nullptr)});
    }
    folds.push_back({{"fold", f.fold},
                     {"train_subjects", f.train_subjects.size()},
                     {"test_subjects", f.test_subjects},
                     {"train_cycles", f.train_cycles},
                     {"test_cycles", f.test_cycles},
                     {"class_weights", {{"w0", f.class_weights.w0}, {"w1", f.class_weights.w1}}},
                     {"counts", {{"tp", f.counts.tp}, {"fp", f.counts.fp}, {"tn", f.counts.tn}, {"fn", f.counts.fn}}},
                     {"metrics", metrics_to_json(f.metrics)},
                     {"roc", std::move(roc)},
                     {"importance", f.importance}});
  }
  json aggregates = json::object();
  for (const auto& [name, a] : e.aggregates) {
    aggregates[name] = {{"n", a.n}, {"mean", opt(a.mean)}, {"std", opt(a.std)}};
  }
  return {{"kind", std::string(to_string(e.kind))},
          {"folds", std::move(folds)},
          {"aggregate", std::move(aggregates)},
          {"importance", e.importance}};
}

json mean_cycles_to_json(const MeanCycleReport& r) {
  json classes = json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"label", std::string(to_string(c.label))},
                       {"cycles", c.cycles},
                       {"mean", c.mean},
                       {"coverage", c.coverage}});
  }
  return {{"grid_points", kMeanCycleGrid},
          {"half_span_s", r.half_span_s},
          {"time_origin", "systolic peak"},
          {"classes", std::move(classes)}};
}

json build_report(const PipelineResult& r, const PipelineConfig& config) {
  json issues = json::array();
  for (const auto& i : r.load_issues) {
    issues.push_back({{"row", i.row}, {"subject_id", i.subject_id}, {"column", i.column},
                      {"message", i.message}, {"fatal", i.fatal}});
  }
  json excluded = json::array();
  for (const auto& e : r.cohort.excluded) excluded.push_back({{"subject_id", e.subject_id}, {"reason", e.reason}});
  json imputations = json::array();
  for (const auto& i : r.features.imputations) {
    imputations.push_back({{"subject_id", i.subject_id}, {"field", i.field}, {"value", i.value}});
  }
  return {
      {"format_version", kReportFormatVersion},
      {"dataset",
       {{"fingerprint", r.fingerprint}, {"records_loaded", r.records_loaded}, {"load_issues", std::move(issues)}}},
      {"config", config_to_json(config)},
      {"cohort",
       {{"candidates", {{"non_diabetic", r.candidates_non_diabetic}, {"diabetic", r.candidates_diabetic}}},
        {"excluded", std::move(excluded)},
        {"summary", summary_to_json(r.summary)}}},
      {"signal_quality",
       {{"rejections", r.features.rejections},
        {"dropped_subjects", r.features.dropped_subjects},
        {"cycles_per_subject", r.features.cycles_per_subject},
        {"imputations", std::move(imputations)}}},
      {"fold_plan", {{"k", r.plan.k}, {"stratified", true}, {"seed", config.seed}, {"assignments", r.plan.assignments}}},
      {"feature_names", feature_names()},
      {"models",
       {{std::string(to_string(ModelKind::LogisticRegression)), evaluation_to_json(r.logreg)},
        {std::string(to_string(ModelKind::GradientBoosting)), evaluation_to_json(r.gbt)}}},
      {"mean_cycles", mean_cycles_to_json(r.mean_cycles)},
  };
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

void write_feature_csv(const std::vector<FeatureVector>& vectors, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "subject_id,label";
  for (const auto& name : feature_names()) out << ',' << name;
  out << '\n';
  char buf[40];
  for (const auto& v : vectors) {
    out << v.subject_id << ',' << static_cast<int>(v.label);
    for (double x : v.values) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

void write_models(const PipelineResult& result, const fs::path& out_dir) {
  const fs::path dir = out_dir / "models";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto* e : {&result.logreg, &result.gbt}) {
    for (const auto& f : e->folds) {
      write_json(model_to_json(f.model),
                 dir / (std::string(to_string(e->kind)) + "_fold" + std::to_string(f.fold + 1) + ".json"));
    }
  }
}

// --- Figures ----------------------------------------------------------------

namespace {

std::string num(double v, int decimals = 2) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};

// Square plot area mapping [x0, x1] x [y0, y1] to pixels.
struct Plot {
  double left = 70, top = 50, width = 400, height = 400;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  std::ostringstream body;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, double stroke,
                const std::string& extra = "") {
    if (pts.empty()) return;
    body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(stroke, 1) << "\"" << extra
         << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      body << (i ? " " : "") << num(px(pts[i].first)) << ',' << num(py(pts[i].second));
    }
    body << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const std::string& anchor = "middle", int size = 13) {
    body << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"" << size
         << "\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  void axes(const std::string& xlabel, const std::string& ylabel, int ticks = 5) {
    body << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(width) << "\" height=\""
         << num(height) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= ticks; ++i) {
      const double fx = x0 + (x1 - x0) * i / ticks, fy = y0 + (y1 - y0) * i / ticks;
      text(px(fx), top + height + 18, num(fx, 2), "middle", 11);
      text(left - 8, py(fy) + 4, num(fy, 2), "end", 11);
    }
    text(left + width / 2, top + height + 40, xlabel);
    body << "<text x=\"" << num(left - 50) << "\" y=\"" << num(top + height / 2)
         << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
         << num(left - 50) << ' ' << num(top + height / 2) << ")\">" << escape(ylabel) << "</text>\n";
  }

  std::string svg(const std::string& title, double total_width = 0) const {
    const double w = total_width > 0 ? total_width : left + width + 30;
    const double h = top + height + 60;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w, 0) << "\" height=\"" << num(h, 0)
        << "\" viewBox=\"0 0 " << num(w, 0) << ' ' << num(h, 0) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << num(w / 2) << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">"
        << escape(title) << "</text>\n"
        << body.str() << "</svg>\n";
    return out.str();
  }
};

void save(const std::string& content, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

const json& need(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw Error(ErrorKind::SchemaError, std::string("report lacks '") + key + "'");
  }
  return doc.at(key);
}

std::vector<std::pair<double, double>> roc_curve(const json& fold) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : need(fold, "roc")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return pts;
}

// TPR at a given FPR, taking the upper end of vertical steps.
double tpr_at(const std::vector<std::pair<double, double>>& pts, double fpr) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].first <= fpr) best = std::max(best, pts[i].second);
    if (i + 1 < pts.size() && pts[i].first <= fpr && fpr < pts[i + 1].first) {
      const double t = (fpr - pts[i].first) / (pts[i + 1].first - pts[i].first);
      best = std::max(best, pts[i].second + t * (pts[i + 1].second - pts[i].second));
    }
  }
  return best;
}

std::string auc_text(const json& metrics) {
  const auto& auc = need(metrics, "auc");
  return auc.is_null() ? "n/a" : num(auc.get<double>(), 3);
}

void diagonal(Plot& plot) { plot.polyline({{0, 0}, {1, 1}}, "#999", 1.0, " stroke-dasharray=\"4 4\""); }

}  // namespace

std::vector<std::string> render_figures(const json& report, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    save(content, out_dir / name);
    written.push_back(name);
  };

  const auto& names = need(report, "feature_names");
  for (const auto& [kind, model] : need(report, "models").items()) {
    const auto& folds = need(model, "folds");
    std::vector<std::vector<std::pair<double, double>>> curves;
    for (const auto& fold : folds) {
      const int k = need(fold, "fold").get<int>() + 1;
      auto pts = roc_curve(fold);
      Plot plot;
      plot.axes("False positive rate", "True positive rate");
      diagonal(plot);
      plot.polyline(pts, kPalette[0], 2.0);
      plot.text(plot.px(0.95), plot.py(0.05), "AUC = " + auc_text(need(fold, "metrics")), "end");
      emit("roc_" + kind + "_fold" + std::to_string(k) + ".svg",
           plot.svg(kind + ": ROC, fold " + std::to_string(k)));
      curves.push_back(std::move(pts));
    }

    Plot agg;
    agg.axes("False positive rate", "True positive rate");
    diagonal(agg);
    for (std::size_t i = 0; i < curves.size(); ++i) {
      agg.polyline(curves[i], kPalette[i % 7], 1.0, " stroke-opacity=\"0.5\"");
    }
    std::vector<std::pair<double, double>> mean_curve;
    for (int g = 0; g <= 100; ++g) {
      const double x = g / 100.0;
      double sum = 0.0;
      for (const auto& c : curves) sum += c.empty() ? 0.0 : tpr_at(c, x);
      mean_curve.emplace_back(x, curves.empty() ? 0.0 : sum / static_cast<double>(curves.size()));
    }
    mean_curve.front().second = 0.0;
    agg.polyline(mean_curve, "#000", 2.5);
    const auto& auc = need(need(model, "aggregate"), "auc");
    std::string label = "mean AUC = n/a";
    if (!need(auc, "mean").is_null()) {
      label = "mean AUC = " + num(auc["mean"].get<double>(), 3);
      if (!need(auc, "std").is_null()) label += " +/- " + num(auc["std"].get<double>(), 3);
    }
    agg.text(agg.px(0.95), agg.py(0.05), label, "end");
    emit("roc_" + kind + "_aggregate.svg", agg.svg(kind + ": ROC, all folds"));

    // Top-7 permutation importances.
    std::vector<double> imp = need(model, "importance").get<std::vector<double>>();
    std::vector<std::size_t> order(imp.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
    order.resize(std::min<std::size_t>(7, order.size()));
    double top = 1e-12;
    for (auto i : order) top = std::max(top, std::abs(imp[i]));
    Plot bars;
    bars.left = 200;
    bars.height = 30.0 * std::max<std::size_t>(order.size(), 1);
    bars.x0 = 0;
    bars.x1 = top;
    bars.body << "<line x1=\"" << num(bars.left) << "\" y1=\"" << num(bars.top) << "\" x2=\"" << num(bars.left)
              << "\" y2=\"" << num(bars.top + bars.height) << "\" stroke=\"#333\"/>\n";
    for (std::size_t r = 0; r < order.size(); ++r) {
      const double v = imp[order[r]];
      const double y = bars.top + 30.0 * static_cast<double>(r) + 5;
      const double w = std::max(0.0, v) / top * bars.width;
      bars.body << "<rect x=\"" << num(bars.left) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
                << "\" height=\"20\" fill=\"" << kPalette[0] << "\"/>\n";
      const auto name = order[r] < names.size() ? names[order[r]].get<std::string>() : std::to_string(order[r]);
      bars.text(bars.left - 6, y + 15, name, "end", 12);
      bars.text(bars.left + w + 6, y + 15, num(v, 4), "start", 11);
    }
    bars.text(bars.left + bars.width / 2, bars.top + bars.height + 30, "Mean AUC drop when permuted");
    emit("importance_" + kind + ".svg", bars.svg(kind + ": top permutation importances", bars.left + bars.width + 80));
  }

  const auto& mc = need(report, "mean_cycles");
  const double half = need(mc, "half_span_s").get<double>();
  const auto points = need(mc, "grid_points").get<std::size_t>();
  Plot cyc;
  cyc.width = 560;
  cyc.x0 = -half;
  cyc.x1 = half > 0 ? half : 1.0;
  cyc.y0 = 0;
  cyc.y1 = 1.05;
  cyc.axes("Time from systolic peak (s)", "Normalized amplitude");
  const std::size_t center = points / 2;
  int series = 0;
  for (const auto& cls : need(mc, "classes")) {
    const auto mean = need(cls, "mean").get<std::vector<double>>();
    const auto coverage = need(cls, "coverage").get<std::vector<std::size_t>>();
    std::vector<std::pair<double, double>> pts;
    for (std::size_t j = 0; j < mean.size() && j < coverage.size(); ++j) {
      if (coverage[j] == 0) continue;
      const double t = (static_cast<double>(j) - static_cast<double>(center)) * half / static_cast<double>(center);
      pts.emplace_back(t, mean[j]);
    }
    const std::string color = kPalette[series == 0 ? 0 : 3];
    cyc.polyline(pts, color, 2.0);
    const double ly = cyc.top + 20 + 20.0 * series;
    cyc.body << "<line x1=\"" << num(cyc.left + cyc.width - 190) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
             << num(cyc.left + cyc.width - 165) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
             << "\" stroke-width=\"2\"/>\n";
    cyc.text(cyc.left + cyc.width - 160, ly,
             need(cls, "label").get<std::string>() + " (" + std::to_string(need(cls, "cycles").get<std::size_t>()) +
                 " cycles)",
             "start", 12);
    ++series;
  }
  emit("mean_cycles.svg", cyc.svg("Mean normalized cycle per class, aligned at the systolic peak"));
  return written;
}

}  // namespace ppgscreen
