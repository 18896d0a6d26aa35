#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dropkit/dataset.hpp"

namespace dropkit {

// ---------------------------------------------------------------- CSV

enum class LabelKind { class_index, real };

struct CsvSchema {
    std::string label_column = "label";
    LabelKind label_kind = LabelKind::class_index;
    /// Reject integer labels at or above this bound.
    std::optional<std::size_t> num_classes;
    /// Allowed string class names; position is the class index. When empty,
    /// string labels are mapped to indices in sorted order.
    std::vector<std::string> class_names;
};

/// Reads a header-first CSV. Every column other than the label column is a
/// feature, in file order. Rows keep their order and get ids 0..n-1.
/// Errors name the offending line.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                 std::vector<std::string>* class_names_out = nullptr);
Dataset parse_csv(std::string_view text, const CsvSchema& schema = {},
                  std::vector<std::string>* class_names_out = nullptr,
                  const std::string& name = "csv");

/// Writes features with shortest round-trip formatting, so load_csv gives
/// back bit-identical values.
void save_csv(const std::filesystem::path& path, const Dataset& data,
              const std::string& label_column = "label");
std::string format_csv(const Dataset& data, const std::string& label_column = "label");

// ---------------------------------------------------------------- IDX

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Pairs an IDX image file with an IDX label file. Pixels are scaled to
/// [0, 1] and images flattened row-major.
Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path);
Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                   const std::string& name = "idx");

std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels, std::uint32_t count,
                                            std::uint32_t rows, std::uint32_t cols);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

// ---------------------------------------------------------------- splitting

struct Split {
    Dataset train;
    Dataset validation;
};

/// Seeded partition into train/validation; both sides keep the original
/// row order. Validation gets round(fraction * n) rows, or round(fraction *
/// class size) per class when stratified.
Split split(const Dataset& data, double val_fraction, std::uint64_t seed, bool stratified);

// ---------------------------------------------------------------- synthetic

struct PlantedTruth {
    /// Ids whose labels were corrupted, ascending.
    std::vector<std::int64_t> flipped_ids;
};

struct BlobsParams {
    std::size_t n = 500;
    std::size_t input_dim = 2;
    std::size_t classes = 2;
    /// Minimum pairwise distance between class centers.
    double separation = 3.0;
    double flip_fraction = 0.0;
    /// Determines the centers.
    std::uint64_t seed = 0;
    /// Determines the samples and flips; defaults to `seed`. Use a different
    /// value with the same `seed` to draw a fresh set from the same clusters.
    std::optional<std::uint64_t> sample_seed;
    double cluster_std = 1.0;
};

struct Blobs {
    Dataset dataset;
    PlantedTruth truth;
    /// classes x input_dim
    Eigen::MatrixXd centers;
};

/// Gaussian clusters with balanced labels (sample i has class i % classes),
/// then floor(flip_fraction * n) samples relabelled to a uniformly random
/// wrong class.
Blobs synth_blobs(const BlobsParams& params);

// ---------------------------------------------------------------- misc files

void write_dropped_ids(const std::filesystem::path& path, std::span<const std::int64_t> ids);
std::vector<std::int64_t> read_dropped_ids(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace dropkit
