#pragma once

#include <json.hpp>

#include "ppgscreen/models.hpp"

namespace ppgscreen {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON form of a trained model. Doubles are written in shortest
/// round-trip form, so parse(dump(m)) reproduces every value bit for bit.
nlohmann::json model_to_json(const TrainedModel& model);

/// Throws Error{SchemaError} on a missing field, unknown kind or version.
TrainedModel model_from_json(const nlohmann::json& doc);

}  // namespace ppgscreen
