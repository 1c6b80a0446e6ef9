#pragma once

#include <filesystem>
#include <stdexcept>

#include "swarm/policy.hpp"

namespace swarm {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  PolicySpec spec;
  VectorXd params;
};

/// Writes a checkpoint: one JSON header line (spec, parameter count, encoding,
/// byte order) followed by the flat parameter vector, either as little-endian
/// float64 or one %.17g value per line when `text` is set. Both encodings
/// round-trip doubles exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint,
                     bool text = false);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace swarm
