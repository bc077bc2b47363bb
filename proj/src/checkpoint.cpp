#include "bregdistill/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bregdistill/errors.hpp"

namespace bregdistill {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "bregdistill-checkpoint";
constexpr int kVersion = 1;
}  // namespace

std::string serialize_checkpoint(const DenseNet& net, const CheckpointMetadata& meta) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["widths"] = net.widths();
  doc["activation"] = std::string(activation_name(net.hidden_activation()));
  json layers = json::array();
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto w = net.weight(k);
    const auto b = net.bias(k);
    layers.push_back({{"weight", std::vector<double>(w.begin(), w.end())},
                      {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  doc["layers"] = std::move(layers);
  doc["metadata"] = {{"role", meta.role},
                     {"seed", meta.seed},
                     {"step", meta.step},
                     {"config_hash", meta.config_hash}};
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kFormat)
      throw CheckpointError("checkpoint: unexpected format tag");
    if (doc.at("version").get<int>() != kVersion)
      throw CheckpointError("checkpoint: unsupported version");
    auto widths = doc.at("widths").get<std::vector<std::size_t>>();
    const Activation act = parse_activation(doc.at("activation").get<std::string>());
    const auto& layers = doc.at("layers");
    if (widths.size() < 2 || layers.size() != widths.size() - 1)
      throw CheckpointError("checkpoint: layer count does not match widths");
    Vec params;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      auto w = layers[k].at("weight").get<std::vector<double>>();
      auto b = layers[k].at("bias").get<std::vector<double>>();
      if (w.size() != widths[k] * widths[k + 1] || b.size() != widths[k + 1])
        throw CheckpointError("checkpoint: layer " + std::to_string(k) + " has wrong shape");
      params.insert(params.end(), w.begin(), w.end());
      params.insert(params.end(), b.begin(), b.end());
    }
    Checkpoint out{DenseNet::from_parameters(std::move(widths), act, std::move(params)), {}};
    const auto& meta = doc.at("metadata");
    out.metadata.role = meta.at("role").get<std::string>();
    out.metadata.seed = meta.at("seed").get<std::uint64_t>();
    out.metadata.step = meta.at("step").get<std::uint64_t>();
    out.metadata.config_hash = meta.at("config_hash").get<std::string>();
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint parse error: ") + e.what());
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("checkpoint shape error: ") + e.what());
  } catch (const NumericError& e) {
    throw CheckpointError(std::string("checkpoint value error: ") + e.what());
  } catch (const ArgumentError& e) {
    throw CheckpointError(std::string("checkpoint error: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const DenseNet& net,
                      const CheckpointMetadata& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << serialize_checkpoint(net, meta);
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace bregdistill
