#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppgscreen/config.hpp"
#include "ppgscreen/pipeline.hpp"

namespace ppgscreen {

inline constexpr int kReportFormatVersion = 1;

nlohmann::json summary_to_json(const CohortSummary& summary);
nlohmann::json evaluation_to_json(const ModelEvaluation& evaluation);
nlohmann::json mean_cycles_to_json(const MeanCycleReport& report);

/// The complete run record. Holds everything the figures need and nothing
/// time- or machine-dependent, so equal inputs give byte-identical output.
nlohmann::json build_report(const PipelineResult& result, const PipelineConfig& config);

/// Writes JSON with two-space indentation and a trailing newline.
/// Throws Error{IoError}.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

/// One row per vector: subject_id, label, then the 110 features.
void write_feature_csv(const std::vector<FeatureVector>& vectors, const std::filesystem::path& path);

/// Writes each fold model as models/<kind>_fold<k>.json under `out_dir`.
void write_models(const PipelineResult& result, const std::filesystem::path& out_dir);

/// Regenerates every SVG from a report document; returns the file names.
/// Per model kind: one ROC per fold, an aggregate ROC and a top-7 importance
/// chart; plus one mean-cycle figure. Throws Error{SchemaError} when the
/// report lacks a needed section.
std::vector<std::string> render_figures(const nlohmann::json& report, const std::filesystem::path& out_dir);

}  // namespace ppgscreen
