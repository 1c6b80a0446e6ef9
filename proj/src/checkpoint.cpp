#include "swarm/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace swarm {

namespace {

nlohmann::json spec_to_json(const PolicySpec& spec) {
  return {{"history_length", spec.history_length}, {"obs_dim", spec.obs_dim},
          {"action_dim", spec.action_dim},         {"slot_hidden1", spec.slot_hidden1},
          {"slot_hidden2", spec.slot_hidden2},     {"trunk_hidden", spec.trunk_hidden},
          {"activation", spec.activation}};
}

PolicySpec spec_from_json(const nlohmann::json& j) {
  PolicySpec spec;
  spec.history_length = j.at("history_length").get<int>();
  spec.obs_dim = j.at("obs_dim").get<int>();
  spec.action_dim = j.at("action_dim").get<int>();
  spec.slot_hidden1 = j.at("slot_hidden1").get<int>();
  spec.slot_hidden2 = j.at("slot_hidden2").get<int>();
  spec.trunk_hidden = j.at("trunk_hidden").get<int>();
  spec.activation = j.at("activation").get<std::string>();
  return spec;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint,
                     bool text) {
  static_assert(std::endian::native == std::endian::little,
                "binary checkpoints are written little-endian");
  checkpoint.spec.validate();
  if (checkpoint.params.size() != param_count(checkpoint.spec))
    throw CheckpointError("checkpoint: parameter count does not match the spec");

  nlohmann::json header = {{"format", "swarm-policy"},
                           {"version", 1},
                           {"encoding", text ? "text" : "binary"},
                           {"scalar", "float64"},
                           {"byte_order", "little-endian"},
                           {"param_count", checkpoint.params.size()},
                           {"spec", spec_to_json(checkpoint.spec)}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  out << header.dump() << "\n";
  if (text) {
    char buf[64];
    for (Eigen::Index i = 0; i < checkpoint.params.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", checkpoint.params[i]);
      out << buf;
    }
  } else {
    out.write(reinterpret_cast<const char*>(checkpoint.params.data()),
              static_cast<std::streamsize>(checkpoint.params.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) throw CheckpointError("checkpoint: missing header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (header.value("format", "") != "swarm-policy" || header.value("version", 0) != 1)
    throw CheckpointError("checkpoint: unrecognized format/version");

  Checkpoint checkpoint;
  checkpoint.spec = spec_from_json(header.at("spec"));
  checkpoint.spec.validate();
  const auto n = header.at("param_count").get<Eigen::Index>();
  if (n != param_count(checkpoint.spec))
    throw CheckpointError("checkpoint: parameter count does not match the spec");
  checkpoint.params.resize(n);

  const std::string encoding = header.at("encoding").get<std::string>();
  if (encoding == "binary") {
    in.read(reinterpret_cast<char*>(checkpoint.params.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
      throw CheckpointError("checkpoint: truncated parameter block");
  } else if (encoding == "text") {
    std::string line;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw CheckpointError("checkpoint: truncated parameter list");
      checkpoint.params[i] = std::stod(line);
    }
  } else {
    throw CheckpointError("checkpoint: unknown encoding " + encoding);
  }
  return checkpoint;
}

}  // namespace swarm
