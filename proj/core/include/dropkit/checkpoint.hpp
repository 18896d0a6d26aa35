#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/model.hpp"

namespace dropkit {

/// Binary checkpoint layout, all integers and reals little-endian:
///
///   offset  size  field
///   0       8     magic "DRPKCKPT"
///   8       4     format version (u32, currently 1)
///   12      1     model kind (0 linear-mse, 1 logistic, 2 softmax, 3 mlp)
///   13      1     activation (0 none, 1 tanh, 2 relu)
///   14      1     bias flag
///   15      1     reserved, zero
///   16      8     input_dim (u64)
///   24      8     output_dim (u64)
///   32      8     hidden_dim (u64)
///   40      8     l2_reg (f64)
///   48      8     param_count (u64)
///   56      8*P   parameters (f64), layer by layer: weights row-major, then biases
///   56+8P   8     FNV-1a 64 of every preceding byte
inline constexpr char kCheckpointMagic[8] = {'D', 'R', 'P', 'K', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct Checkpoint {
    ModelSpec spec;
    ParamVector params;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelSpec& spec, const ParamVector& params);
/// Throws CheckpointError on any corruption or inconsistency.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const ModelSpec& spec,
                      const ParamVector& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Sidecar metadata lives next to the checkpoint as "<path>.json".
std::filesystem::path metadata_path(const std::filesystem::path& checkpoint_path);
void write_checkpoint_metadata(const std::filesystem::path& checkpoint_path,
                               const nlohmann::json& metadata);

}  // namespace dropkit
