#include "ppm/checkpoint.hpp"

#include <fstream>

#include "ppm/errors.hpp"
#include "ppm/pos_encoding.hpp"

namespace ppm {

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << doc.dump() << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},     {"hidden", c.hidden},
          {"heads", c.heads},         {"layers", c.layers},
          {"dropout", c.dropout},     {"vocab_size", c.vocab_size},
          {"pe", to_string(c.pe.mode)}, {"spe_k", c.pe.k},
          {"ffn_in_blocks", c.ffn_in_blocks}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.heads = j.at("heads").get<int>();
    c.layers = j.at("layers").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.pe.mode = parse_pe_mode(j.at("pe").get<std::string>());
    c.pe.k = j.at("spe_k").get<int>();
    c.ffn_in_blocks = j.at("ffn_in_blocks").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("model config: ") + e.what());
  }
}

nlohmann::json params_to_json(const ModelParams<float>& params) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto* p : params.all()) {
    list.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"values", p->value.values()}});
  }
  return {{"params", std::move(list)}};
}

ModelParams<float> params_from_json(const nlohmann::json& j, const ModelConfig& config) {
  ModelParams<float> params = init_params<float>(config, 0);
  auto slots = params.all();
  try {
    const auto& list = j.at("params");
    if (list.size() != slots.size()) {
      throw Error(ErrorKind::Format, "checkpoint: expected " + std::to_string(slots.size()) +
                                         " parameters, found " + std::to_string(list.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& entry = list[i];
      auto* p = slots[i];
      if (entry.at("name").get<std::string>() != p->name ||
          entry.at("shape").get<std::vector<std::size_t>>() != p->value.shape()) {
        throw Error(ErrorKind::Format, "checkpoint: parameter " + std::to_string(i) +
                                           " does not match '" + p->name + "'");
      }
      auto values = entry.at("values").get<std::vector<float>>();
      if (values.size() != p->value.size()) {
        throw Error(ErrorKind::Format, "checkpoint: wrong value count for " + p->name);
      }
      p->value.values() = std::move(values);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("checkpoint: ") + e.what());
  }
  return params;
}

Model<float> Checkpoint::model() const {
  Tensor<float> spectral;
  if (config.pe.mode == PeMode::Structural) {
    if (!spe_table) throw Error(ErrorKind::Format, "checkpoint: structural model lacks spe.csv");
    spectral = token_spectral_table(*spe_table, vocab).cast<float>();
  }
  return Model<float>(config, params, std::move(spectral));
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json model = to_json(ck.config);
  model["max_length"] = ck.max_length;
  model["split_seed"] = ck.split_seed;
  write_json(dir / "model.json", model);
  write_json(dir / "params.json", params_to_json(ck.params));
  ck.vocab.save(dir / "vocab.json");
  if (ck.spe_table) ck.spe_table->save_csv(dir / "spe.csv");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::Io, "checkpoint directory not found: " + dir.string());
  }
  Checkpoint ck;
  auto model = read_json(dir / "model.json");
  ck.config = model_config_from_json(model);
  try {
    ck.max_length = model.at("max_length").get<std::size_t>();
    ck.split_seed = model.at("split_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("model.json: ") + e.what());
  }
  ck.params = params_from_json(read_json(dir / "params.json"), ck.config);
  ck.vocab = Vocabulary::load(dir / "vocab.json");
  if (ck.vocab.size() != static_cast<std::size_t>(ck.config.vocab_size)) {
    throw Error(ErrorKind::Format, "checkpoint: vocabulary size disagrees with model.json");
  }
  if (std::filesystem::exists(dir / "spe.csv")) {
    ck.spe_table = NodeEmbeddingTable::load_csv(dir / "spe.csv");
  }
  return ck;
}

}  // namespace ppm
