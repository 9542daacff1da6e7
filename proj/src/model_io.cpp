#include "ppgscreen/model_io.hpp"

#include <string>

#include "ppgscreen/error.hpp"

namespace ppgscreen {

using nlohmann::json;

namespace {

json scaler_to_json(const Scaler& s) {
  return {{"mean", s.mean}, {"scale", s.scale}, {"constant", s.constant}};
}

json tree_to_json(const Tree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", n.value},
                     {"gain", n.gain},
                     {"count", n.count}});
  }
  return nodes;
}

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw Error(ErrorKind::SchemaError, std::string("model JSON lacks field '") + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("model field '") + key + "': " + e.what());
  }
}

Scaler scaler_from_json(const json& doc) {
  Scaler s;
  s.mean = field<std::vector<double>>(doc, "mean");
  s.scale = field<std::vector<double>>(doc, "scale");
  s.constant = field<std::vector<bool>>(doc, "constant");
  if (s.scale.size() != s.mean.size() || s.constant.size() != s.mean.size()) {
    throw Error(ErrorKind::SchemaError, "scaler arrays differ in length");
  }
  return s;
}

Tree tree_from_json(const json& doc) {
  if (!doc.is_array()) throw Error(ErrorKind::SchemaError, "tree must be a node array");
  Tree tree;
  for (const auto& n : doc) {
    TreeNode node;
    node.feature = field<int>(n, "feature");
    node.threshold = field<double>(n, "threshold");
    node.left = field<int>(n, "left");
    node.right = field<int>(n, "right");
    node.value = field<double>(n, "value");
    node.gain = field<double>(n, "gain");
    node.count = field<std::size_t>(n, "count");
    tree.nodes.push_back(node);
  }
  const auto size = static_cast<int>(tree.nodes.size());
  for (const auto& n : tree.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
      throw Error(ErrorKind::SchemaError, "tree node points outside the node array");
    }
  }
  return tree;
}

}  // namespace

json model_to_json(const TrainedModel& model) {
  json doc = {{"format_version", kModelFormatVersion}};
  if (const auto* lr = std::get_if<LogRegModel>(&model)) {
    doc["kind"] = std::string(to_string(ModelKind::LogisticRegression));
    doc["weights"] = lr->weights;
    doc["intercept"] = lr->intercept;
    doc["scaler"] = scaler_to_json(lr->scaler);
    doc["penalty_strength"] = lr->penalty_strength;
    doc["sweeps"] = lr->sweeps;
    doc["converged"] = lr->converged;
  } else {
    const auto& gbt = std::get<GbtModel>(model);
    doc["kind"] = std::string(to_string(ModelKind::GradientBoosting));
    doc["learning_rate"] = gbt.learning_rate;
    doc["max_depth"] = gbt.max_depth;
    doc["lambda"] = gbt.lambda;
    doc["base_score"] = gbt.base_score;
    doc["feature_count"] = gbt.feature_count;
    doc["train_loss"] = gbt.train_loss;
    json trees = json::array();
    for (const auto& t : gbt.trees) trees.push_back(tree_to_json(t));
    doc["trees"] = std::move(trees);
  }
  return doc;
}

TrainedModel model_from_json(const json& doc) {
  const int version = field<int>(doc, "format_version");
  if (version != kModelFormatVersion) {
    throw Error(ErrorKind::SchemaError, "unsupported model format version " + std::to_string(version));
  }
  const auto kind = field<std::string>(doc, "kind");
  if (kind == to_string(ModelKind::LogisticRegression)) {
    LogRegModel m;
    m.weights = field<std::vector<double>>(doc, "weights");
    m.intercept = field<double>(doc, "intercept");
    m.scaler = scaler_from_json(field<json>(doc, "scaler"));
    m.penalty_strength = field<double>(doc, "penalty_strength");
    m.sweeps = field<int>(doc, "sweeps");
    m.converged = field<bool>(doc, "converged");
    if (m.scaler.mean.size() != m.weights.size()) {
      throw Error(ErrorKind::SchemaError, "scaler and weights differ in length");
    }
    return m;
  }
  if (kind == to_string(ModelKind::GradientBoosting)) {
    GbtModel m;
    m.learning_rate = field<double>(doc, "learning_rate");
    m.max_depth = field<int>(doc, "max_depth");
    m.lambda = field<double>(doc, "lambda");
    m.base_score = field<double>(doc, "base_score");
    m.feature_count = field<std::size_t>(doc, "feature_count");
    m.train_loss = field<std::vector<double>>(doc, "train_loss");
    for (const auto& t : field<json>(doc, "trees")) m.trees.push_back(tree_from_json(t));
    return m;
  }
  throw Error(ErrorKind::SchemaError, "unknown model kind '" + kind + "'");
}

}  // namespace ppgscreen
