#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"
#include "ppm/event_log.hpp"
#include "ppm/model.hpp"
#include "ppm/ontology.hpp"

namespace ppm {

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// {"params": [{"name", "shape": [r, c], "values": [...]}, ...]} in
/// ModelParams::all() order.
nlohmann::json params_to_json(const ModelParams<float>& params);
/// Fills freshly shaped parameters for `config`; throws ErrorKind::Format on
/// any name or shape disagreement.
ModelParams<float> params_from_json(const nlohmann::json& j, const ModelConfig& config);

/// Everything needed to rebuild a trained model and re-derive its split.
/// On disk: a directory with model.json, params.json, vocab.json and, for
/// structural encoding, spe.csv.
struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
  Vocabulary vocab;
  std::optional<NodeEmbeddingTable> spe_table;
  std::size_t max_length = 0;
  std::uint64_t split_seed = 0;

  Model<float> model() const;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ppm
