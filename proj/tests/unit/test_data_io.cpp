#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "dropkit/error.hpp"
#include "dropkit/io.hpp"
#include "dropkit/rng.hpp"
#include "dropkit/trainer.hpp"

using namespace dropkit;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dropkit_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void expect_config_error_mentions(const std::function<void()>& fn, const std::string& needle) {
    try {
        fn();
        FAIL() << "expected ConfigError mentioning '" << needle << "'";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
}

// IDX reader kept deliberately separate from the library's.
struct RawIdx {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;
};

RawIdx read_raw_idx(const std::vector<std::uint8_t>& b) {
    auto be32 = [&](std::size_t o) {
        return (std::uint32_t(b[o]) << 24) | (std::uint32_t(b[o + 1]) << 16) |
               (std::uint32_t(b[o + 2]) << 8) | std::uint32_t(b[o + 3]);
    };
    RawIdx r;
    r.magic = be32(0);
    const std::size_t ndim = b[3];
    for (std::size_t i = 0; i < ndim; ++i) r.dims.push_back(be32(4 + 4 * i));
    r.payload.assign(b.begin() + static_cast<long>(4 + 4 * ndim), b.end());
    return r;
}

std::uint64_t fnv(const std::vector<double>& v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double d : v) {
        const auto* p = reinterpret_cast<const unsigned char*>(&d);
        for (std::size_t i = 0; i < sizeof d; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace

TEST(CsvTest, ThreeRowsTwoFeatures) {
    const Dataset d = parse_csv("a,b,label\n1,2,0\n3.5,-4,1\n5,6e-1,0\n");
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.input_dim(), 2u);
    EXPECT_EQ(d.features()(1, 1), -4.0);
    EXPECT_EQ(d.features()(2, 1), 0.6);
    EXPECT_EQ(d.labels()[1], 1.0);
    EXPECT_EQ(d.ids(), (std::vector<std::int64_t>{0, 1, 2}));
    EXPECT_EQ(d.provenance(), Provenance::csv);
}

TEST(CsvTest, LabelColumnMayBeAnywhere) {
    const Dataset d = parse_csv("label,x\n1,0.5\n0,0.25\n");
    EXPECT_EQ(d.input_dim(), 1u);
    EXPECT_EQ(d.features()(0, 0), 0.5);
    EXPECT_EQ(d.labels()[0], 1.0);
}

TEST(CsvTest, QuotedFieldsAndCrlf) {
    const Dataset d = parse_csv("\"x\",\"label\"\r\n\"1.5\",2\r\n");
    EXPECT_EQ(d.features()(0, 0), 1.5);
    EXPECT_EQ(d.labels()[0], 2.0);
}

TEST(CsvTest, StringLabelsMapInSortedOrder) {
    std::vector<std::string> names;
    const Dataset d = parse_csv("x,label\n1,dog\n2,cat\n3,emu\n4,cat\n", {}, &names);
    EXPECT_EQ(names, (std::vector<std::string>{"cat", "dog", "emu"}));
    EXPECT_EQ(d.labels()[0], 1.0);
    EXPECT_EQ(d.labels()[1], 0.0);
    EXPECT_EQ(d.labels()[2], 2.0);
}

TEST(CsvTest, RealLabels) {
    CsvSchema s;
    s.label_kind = LabelKind::real;
    EXPECT_EQ(parse_csv("x,label\n1,-0.25\n", s).labels()[0], -0.25);
}

TEST(CsvTest, Errors) {
    expect_config_error_mentions([] { parse_csv("a,label\n"); }, "no data");
    expect_config_error_mentions([] { parse_csv(""); }, "empty");
    expect_config_error_mentions([] { parse_csv("a,label\n1,0\n2\n"); }, "line 3");
    expect_config_error_mentions([] { parse_csv("a,label\n1,0\nx,1\n"); }, "line 3");
    expect_config_error_mentions([] { parse_csv("a,b\n1,0\n"); }, "label");
    CsvSchema bounded;
    bounded.num_classes = 2;
    expect_config_error_mentions([&] { parse_csv("a,label\n1,0\n1,2\n", bounded); }, "line 3");
    CsvSchema named;
    named.class_names = {"cat", "dog"};
    expect_config_error_mentions([&] { parse_csv("a,label\n1,cat\n1,cow\n", named); }, "line 3");
    expect_config_error_mentions([] { parse_csv("a,label\n1,1.5\n"); }, "line 2");
    EXPECT_THROW(load_csv("/nonexistent/file.csv"), ConfigError);
}

TEST(CsvTest, RoundTripIsBitIdentical) {
    Rng rng(5);
    FeatureMatrix f(40, 3);
    Eigen::VectorXd y(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) f(i, j) = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
        y[i] = static_cast<double>(rng.index(4));
    }
    const Dataset d(f, y);
    const auto dir = temp_dir("csv");
    save_csv(dir / "d.csv", d);
    const Dataset back = load_csv(dir / "d.csv");
    EXPECT_EQ(back.features(), d.features());
    EXPECT_EQ(back.labels(), d.labels());
}

TEST(IdxTest, SingleZeroImage) {
    const std::vector<std::uint8_t> pixels(28 * 28, 0);
    const auto images = encode_idx_images(pixels, 1, 28, 28);
    const auto labels = encode_idx_labels(std::vector<std::uint8_t>{7});
    const Dataset d = decode_idx(images, labels);
    EXPECT_EQ(d.size(), 1u);
    EXPECT_EQ(d.input_dim(), 784u);
    EXPECT_TRUE(d.features().isZero());
    EXPECT_EQ(d.labels()[0], 7.0);
}

TEST(IdxTest, MismatchedCountsAndMagic) {
    const std::vector<std::uint8_t> pixels(2 * 4, 9);
    const auto images = encode_idx_images(pixels, 2, 2, 2);
    const auto one_label = encode_idx_labels(std::vector<std::uint8_t>{1});
    EXPECT_THROW(decode_idx(images, one_label), ConfigError);
    EXPECT_THROW(decode_idx(one_label, one_label), ConfigError);
    auto truncated = images;
    truncated.pop_back();
    EXPECT_THROW(decode_idx(truncated, encode_idx_labels(std::vector<std::uint8_t>{1, 2})), ConfigError);
}

TEST(IdxTest, FilesMatchIndependentDecoder) {
    Rng rng(12);
    const std::uint32_t count = 5, rows = 28, cols = 28;
    std::vector<std::uint8_t> pixels(count * rows * cols), labels(count);
    for (auto& p : pixels) p = static_cast<std::uint8_t>(rng.index(256));
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.index(10));
    const auto dir = temp_dir("idx");
    const auto img_bytes = encode_idx_images(pixels, count, rows, cols);
    const auto lbl_bytes = encode_idx_labels(labels);
    std::ofstream(dir / "img", std::ios::binary).write(reinterpret_cast<const char*>(img_bytes.data()), static_cast<std::streamsize>(img_bytes.size()));
    std::ofstream(dir / "lbl", std::ios::binary).write(reinterpret_cast<const char*>(lbl_bytes.data()), static_cast<std::streamsize>(lbl_bytes.size()));

    const RawIdx raw = read_raw_idx(img_bytes);
    ASSERT_EQ(raw.magic, kIdxImageMagic);
    ASSERT_EQ(raw.dims, (std::vector<std::uint32_t>{count, rows, cols}));
    ASSERT_EQ(read_raw_idx(lbl_bytes).magic, kIdxLabelMagic);

    const Dataset d = load_idx(dir / "img", dir / "lbl");
    EXPECT_EQ(d.provenance(), Provenance::idx);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<double> expected(rows * cols), got(rows * cols);
        for (std::size_t k = 0; k < rows * cols; ++k) {
            expected[k] = raw.payload[i * rows * cols + k] / 255.0;
            got[k] = d.features()(i, static_cast<Eigen::Index>(k));
        }
        EXPECT_EQ(fnv(got), fnv(expected)) << "image " << i;
        EXPECT_EQ(d.labels()[i], labels[i]);
    }
}

TEST(SplitTest, SizesAndDeterminism) {
    FeatureMatrix f = FeatureMatrix::Random(10, 2);
    const Dataset d(f, Eigen::VectorXd::Zero(10));
    const Split a = split(d, 0.2, 4, false), b = split(d, 0.2, 4, false);
    EXPECT_EQ(a.train.size(), 8u);
    EXPECT_EQ(a.validation.size(), 2u);
    EXPECT_EQ(a.validation.ids(), b.validation.ids());
    std::set<std::int64_t> all(a.train.ids().begin(), a.train.ids().end());
    all.insert(a.validation.ids().begin(), a.validation.ids().end());
    EXPECT_EQ(all.size(), 10u);
}

TEST(SplitTest, StratifiedOnePerClass) {
    FeatureMatrix f = FeatureMatrix::Random(100, 2);
    Eigen::VectorXd y(100);
    for (int i = 0; i < 100; ++i) y[i] = i % 10;
    const Split s = split(Dataset(f, y), 0.1, 7, true);
    std::map<double, int> per_class;
    for (Eigen::Index i = 0; i < s.validation.labels().size(); ++i) ++per_class[s.validation.labels()[i]];
    EXPECT_EQ(per_class.size(), 10u);
    for (const auto& [label, count] : per_class) EXPECT_EQ(count, 1) << label;
}

TEST(SplitTest, RejectsEmptySide) {
    const Dataset d(FeatureMatrix::Random(5, 1), Eigen::VectorXd::Zero(5));
    EXPECT_THROW(split(d, 0.05, 0, false), ConfigError);
    EXPECT_THROW(split(d, 0.95, 0, false), ConfigError);
    EXPECT_THROW(split(d, 0.0, 0, false), ConfigError);
    EXPECT_THROW(split(d, 1.0, 0, false), ConfigError);
}

TEST(BlobsTest, FlipCountsAndDeterminism) {
    BlobsParams bp;
    bp.n = 500;
    bp.classes = 3;
    EXPECT_TRUE(synth_blobs(bp).truth.flipped_ids.empty());
    bp.flip_fraction = 0.1;
    const Blobs a = synth_blobs(bp), b = synth_blobs(bp);
    EXPECT_EQ(a.truth.flipped_ids.size(), 50u);
    EXPECT_EQ(a.truth.flipped_ids, b.truth.flipped_ids);
    EXPECT_EQ(a.dataset.features(), b.dataset.features());
    EXPECT_TRUE(std::is_sorted(a.truth.flipped_ids.begin(), a.truth.flipped_ids.end()));
    const std::set<std::int64_t> flipped(a.truth.flipped_ids.begin(), a.truth.flipped_ids.end());
    for (std::size_t i = 0; i < a.dataset.size(); ++i) {
        const bool wrong = a.dataset.labels()[static_cast<Eigen::Index>(i)] != static_cast<double>(i % 3);
        EXPECT_EQ(wrong, flipped.count(static_cast<std::int64_t>(i)) == 1);
    }
}

TEST(BlobsTest, CentersRespectSeparation) {
    BlobsParams bp;
    bp.classes = 5;
    bp.input_dim = 3;
    bp.separation = 4.0;
    const Blobs b = synth_blobs(bp);
    double closest = 1e300;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) closest = std::min(closest, (b.centers.row(i) - b.centers.row(j)).norm());
    EXPECT_GE(closest, 4.0 - 1e-12);
}

TEST(BlobsTest, RejectsBadParameters) {
    BlobsParams bp;
    bp.n = 2;
    bp.classes = 3;
    EXPECT_THROW(synth_blobs(bp), ConfigError);
    bp = {};
    bp.flip_fraction = 0.5;
    EXPECT_THROW(synth_blobs(bp), ConfigError);
}

TEST(BlobsTest, WideSeparationIsLearnable) {
    BlobsParams bp;
    bp.n = 300;
    bp.classes = 2;
    bp.separation = 10.0;
    const Blobs tr = synth_blobs(bp);
    bp.sample_seed = 77;
    const Blobs val = synth_blobs(bp);
    const auto spec = ModelSpec::logistic(2, 1e-3);
    const ParamVector p = train(spec, tr.dataset, {});
    EXPECT_GE(*evaluate(spec, p, val.dataset).accuracy, 0.99);
}

TEST(DatasetTest, InvariantsAreEnforced) {
    FeatureMatrix f(2, 1);
    f << 1, 2;
    EXPECT_THROW(Dataset(f, Eigen::VectorXd::Zero(2), std::vector<std::int64_t>{3, 3}), ConfigError);
    EXPECT_THROW(Dataset(FeatureMatrix(0, 1), Eigen::VectorXd(0)), ConfigError);
    f(1, 0) = NAN;
    EXPECT_THROW(Dataset(f, Eigen::VectorXd::Zero(2)), ConfigError);
}

TEST(DatasetTest, WithoutPreservesSurvivorOrder) {
    FeatureMatrix f(5, 1);
    f << 0, 1, 2, 3, 4;
    const Dataset d(f, Eigen::VectorXd::Zero(5), std::vector<std::int64_t>{10, 20, 30, 40, 50});
    const std::vector<std::int64_t> drop{40, 10};
    const Dataset r = d.without(drop);
    EXPECT_EQ(r.ids(), (std::vector<std::int64_t>{20, 30, 50}));
    EXPECT_EQ(r.features()(2, 0), 4.0);
    const std::vector<std::int64_t> everything{10, 20, 30, 40, 50};
    EXPECT_THROW(d.without(everything), ConfigError);
}

TEST(StandardizerTest, UsesTrainingStatistics) {
    FeatureMatrix a(3, 2), b(1, 2);
    a << 1, 10, 2, 10, 3, 10;
    b << 2, 11;
    const Dataset tr(a, Eigen::VectorXd::Zero(3)), va(b, Eigen::VectorXd::Zero(1));
    const auto st = Standardizer::fit(tr);
    const Dataset z = st.apply(tr);
    EXPECT_NEAR(z.features().col(0).mean(), 0.0, 1e-15);
    EXPECT_EQ(z.features()(1, 1), 0.0);  // constant column stays finite
    EXPECT_EQ(st.apply(va).features()(0, 0), 0.0);
}

TEST(FilesTest, DroppedIdsRoundTripAndAtomicWrite) {
    const auto dir = temp_dir("files");
    const std::vector<std::int64_t> ids{3, 17, 42};
    write_dropped_ids(dir / "ids.txt", ids);
    EXPECT_EQ(read_file(dir / "ids.txt"), "3\n17\n42\n");
    EXPECT_EQ(read_dropped_ids(dir / "ids.txt"), ids);
    write_file_atomic(dir / "x", "one");
    write_file_atomic(dir / "x", "two");
    EXPECT_EQ(read_file(dir / "x"), "two");
    EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 2);
}
