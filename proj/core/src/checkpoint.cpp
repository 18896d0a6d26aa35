#include "dropkit/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "dropkit/dataset.hpp"
#include "dropkit/io.hpp"

namespace dropkit {

namespace {

constexpr std::size_t kHeaderSize = 56;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[offset + i]} << (8 * i);
    return v;
}

double get_f64(std::span<const std::uint8_t> in, std::size_t offset) {
    return std::bit_cast<double>(get_u64(in, offset));
}

std::uint64_t checksum(std::span<const std::uint8_t> bytes) {
    return fnv1a(std::as_bytes(bytes));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelSpec& spec, const ParamVector& params) {
    validate(spec);
    if (static_cast<std::size_t>(params.size()) != param_count(spec)) {
        throw ShapeError("parameter vector length does not match the model spec");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + 8 * static_cast<std::size_t>(params.size()) + 8);
    for (char c : kCheckpointMagic) out.push_back(static_cast<std::uint8_t>(c));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(kCheckpointVersion >> (8 * i)));
    out.push_back(static_cast<std::uint8_t>(spec.kind));
    out.push_back(static_cast<std::uint8_t>(spec.activation));
    out.push_back(spec.bias ? 1 : 0);
    out.push_back(0);
    put_u64(out, spec.input_dim);
    put_u64(out, spec.output_dim);
    put_u64(out, spec.hidden_dim);
    put_f64(out, spec.l2_reg);
    put_u64(out, static_cast<std::uint64_t>(params.size()));
    for (Eigen::Index i = 0; i < params.size(); ++i) put_f64(out, params[i]);
    put_u64(out, checksum(out));
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize + 8) throw CheckpointError("checkpoint is truncated");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw CheckpointError("not a dropkit checkpoint (bad magic)");
    }
    const std::uint32_t version = static_cast<std::uint32_t>(get_u64(bytes, 8) & 0xffffffffu);
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint64_t count = get_u64(bytes, 48);
    if (count > (bytes.size() - kHeaderSize - 8) / 8 || bytes.size() != kHeaderSize + 8 * count + 8) {
        throw CheckpointError("checkpoint size does not match its parameter count");
    }
    const std::size_t body = kHeaderSize + 8 * count;
    if (checksum(bytes.first(body)) != get_u64(bytes, body)) {
        throw CheckpointError("checkpoint checksum mismatch");
    }
    if (bytes[12] > 3 || bytes[13] > 2 || bytes[14] > 1) {
        throw CheckpointError("checkpoint has an invalid model descriptor");
    }

    Checkpoint ck;
    ck.spec.kind = static_cast<ModelKind>(bytes[12]);
    ck.spec.activation = static_cast<Activation>(bytes[13]);
    ck.spec.bias = bytes[14] != 0;
    ck.spec.input_dim = get_u64(bytes, 16);
    ck.spec.output_dim = get_u64(bytes, 24);
    ck.spec.hidden_dim = get_u64(bytes, 32);
    ck.spec.l2_reg = get_f64(bytes, 40);
    try {
        validate(ck.spec);
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint model spec is invalid: ") + e.what());
    }
    if (param_count(ck.spec) != count) {
        throw CheckpointError("checkpoint parameter count disagrees with its model spec");
    }
    ck.params.resize(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        ck.params[static_cast<Eigen::Index>(i)] = get_f64(bytes, kHeaderSize + 8 * i);
    }
    if (!ck.params.allFinite()) throw CheckpointError("checkpoint contains non-finite parameters");
    return ck;
}

void write_checkpoint(const std::filesystem::path& path, const ModelSpec& spec,
                      const ParamVector& params) {
    const auto bytes = encode_checkpoint(spec, params);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::string raw;
    try {
        raw = read_file(path);
    } catch (const ConfigError& e) {
        throw CheckpointError(e.what());
    }
    return decode_checkpoint(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
}

std::filesystem::path metadata_path(const std::filesystem::path& checkpoint_path) {
    return checkpoint_path.string() + ".json";
}

void write_checkpoint_metadata(const std::filesystem::path& checkpoint_path,
                               const nlohmann::json& metadata) {
    write_file_atomic(metadata_path(checkpoint_path), metadata.dump(2) + "\n");
}

}  // namespace dropkit
