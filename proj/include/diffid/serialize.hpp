#pragma once

// JSON forms of configs, manifests and reports. Doubles round-trip exactly.

#include <nlohmann/json.hpp>

#include "diffid/corpus.hpp"
#include "diffid/evaluate.hpp"
#include "diffid/quantify.hpp"
#include "diffid/synthetic.hpp"

namespace diffid {

void to_json(nlohmann::json& j, const SyntheticWorldConfig& c);
void from_json(const nlohmann::json& j, SyntheticWorldConfig& c);

void to_json(nlohmann::json& j, const CorpusSpec& s);
void from_json(const nlohmann::json& j, CorpusSpec& s);

void to_json(nlohmann::json& j, const ManifestEntry& e);
void from_json(const nlohmann::json& j, ManifestEntry& e);

void to_json(nlohmann::json& j, const DistanceTriple& t);
void to_json(nlohmann::json& j, const DiffIdScore& s);
void to_json(nlohmann::json& j, const DetectOptions& o);
void from_json(const nlohmann::json& j, DetectOptions& o);

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);
void to_json(nlohmann::json& j, const EntryOutcome& o);
void to_json(nlohmann::json& j, const EvalReport& r);
void to_json(nlohmann::json& j, const Calibration& c);

/// Score record of a detection, without the images.
nlohmann::json detection_record(const DetectionResult& r);

}  // namespace diffid
