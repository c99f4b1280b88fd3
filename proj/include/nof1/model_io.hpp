#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "nof1/coordination.hpp"
#include "nof1/kmeans.hpp"
#include "nof1/learners.hpp"

namespace nof1 {

inline constexpr int kModelFormatVersion = 1;

void to_json(nlohmann::json& j, const QuadraticGlm& m);
void from_json(const nlohmann::json& j, QuadraticGlm& m);
void to_json(nlohmann::json& j, const ForestModel& m);
void from_json(const nlohmann::json& j, ForestModel& m);
void to_json(nlohmann::json& j, const SpecialistModel& m);
void from_json(const nlohmann::json& j, SpecialistModel& m);
void to_json(nlohmann::json& j, const StackerModel& m);
void from_json(const nlohmann::json& j, StackerModel& m);
void to_json(nlohmann::json& j, const KMeansResult& m);
void from_json(const nlohmann::json& j, KMeansResult& m);
void to_json(nlohmann::json& j, const RegionalAgent& a);
void from_json(const nlohmann::json& j, RegionalAgent& a);

struct ModelMetadata {
  std::string training_scope;  // e.g. "train split, region 1 (2363 rows)"
  std::uint64_t seed = 0;
  nlohmann::json metrics = nlohmann::json::object();
};

// Versioned envelope: {format_version, kind, training_scope, seed, metrics, model}.
nlohmann::json model_file(const std::string& kind, nlohmann::json model, const ModelMetadata& meta);

// Returns the "model" payload after checking the version and kind; throws
// std::runtime_error otherwise.
nlohmann::json read_model_file(const nlohmann::json& file, const std::string& expected_kind);

}  // namespace nof1
