#include "dropkit/error.hpp"
#include "dropkit/io.hpp"

namespace dropkit {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    const std::string s = read_file(path);
    return {s.begin(), s.end()};
}

}  // namespace

Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                   const std::string& name) {
    if (images.size() < 16) throw ConfigError("IDX image file is truncated");
    if (labels.size() < 8) throw ConfigError("IDX label file is truncated");
    if (const auto m = read_be32(images, 0); m != kIdxImageMagic) {
        throw ConfigError("IDX image magic mismatch: got " + std::to_string(m));
    }
    if (const auto m = read_be32(labels, 0); m != kIdxLabelMagic) {
        throw ConfigError("IDX label magic mismatch: got " + std::to_string(m));
    }
    const std::size_t count = read_be32(images, 4);
    const std::size_t rows = read_be32(images, 8);
    const std::size_t cols = read_be32(images, 12);
    const std::size_t label_count = read_be32(labels, 4);
    if (count != label_count) {
        throw ConfigError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                          std::to_string(label_count) + " labels");
    }
    const std::size_t dim = rows * cols;
    if (images.size() != 16 + count * dim) throw ConfigError("IDX image file size does not match header");
    if (labels.size() != 8 + count) throw ConfigError("IDX label file size does not match header");

    FeatureMatrix f(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd y(static_cast<Eigen::Index>(count));
    const std::uint8_t* px = images.data() + 16;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t p = 0; p < dim; ++p) {
            f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
                static_cast<double>(px[i * dim + p]) / 255.0;
        }
        y[static_cast<Eigen::Index>(i)] = static_cast<double>(labels[8 + i]);
    }
    return Dataset(std::move(f), std::move(y), name, Provenance::idx);
}

Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path) {
    const auto images = read_bytes(image_path);
    const auto labels = read_bytes(label_path);
    return decode_idx(images, labels, image_path.filename().string());
}

std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels, std::uint32_t count,
                                            std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::size_t{count} * rows * cols) {
        throw ConfigError("pixel buffer size does not match count x rows x cols");
    }
    std::vector<std::uint8_t> out;
    out.reserve(16 + pixels.size());
    write_be32(out, kIdxImageMagic);
    write_be32(out, count);
    write_be32(out, rows);
    write_be32(out, cols);
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    write_be32(out, kIdxLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

}  // namespace dropkit
