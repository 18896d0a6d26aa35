#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "dropkit/error.hpp"
#include "dropkit/model.hpp"
#include "dropkit/rng.hpp"
#include "oracles.hpp"

using namespace dropkit;

namespace {

Dataset one_row(std::initializer_list<double> x, double y) {
    FeatureMatrix f(1, static_cast<Eigen::Index>(x.size()));
    Eigen::Index i = 0;
    for (double v : x) f(0, i++) = v;
    return Dataset(f, Eigen::VectorXd::Constant(1, y));
}

Dataset labelled_rows(const ModelSpec& spec, std::size_t n, Rng& rng) {
    FeatureMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.input_dim));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = rng.normal();
        y[i] = is_classifier(spec.kind) ? static_cast<double>(rng.index(spec.output_dim)) : rng.normal();
    }
    return Dataset(f, y);
}

std::vector<ModelSpec> all_kinds() {
    return {ModelSpec::linear_mse(3, 0.1), ModelSpec::logistic(3, 0.05), ModelSpec::softmax(3, 4, 0.02),
            ModelSpec::mlp(3, 5, 3, Activation::tanh, 0.01),
            ModelSpec::mlp(3, 5, 3, Activation::relu, 0.01)};
}

}  // namespace

TEST(ModelSpecTest, ParamCountsFollowLayout) {
    EXPECT_EQ(param_count(ModelSpec::linear_mse(2)), 3u);
    EXPECT_EQ(param_count(ModelSpec::linear_mse(2, 0.0, false)), 2u);
    EXPECT_EQ(param_count(ModelSpec::logistic(4)), 10u);
    EXPECT_EQ(param_count(ModelSpec::softmax(4, 3)), 15u);
    EXPECT_EQ(param_count(ModelSpec::mlp(4, 5, 3)), 4u * 5 + 5 + 5 * 3 + 3);
}

TEST(ModelSpecTest, ValidateRejectsInconsistentSpecs) {
    ModelSpec s = ModelSpec::mlp(2, 0, 3);
    EXPECT_THROW(validate(s), ConfigError);
    s = ModelSpec::softmax(2, 3);
    s.l2_reg = -1;
    EXPECT_THROW(validate(s), ConfigError);
    s = ModelSpec::linear_mse(2);
    s.output_dim = 2;
    EXPECT_THROW(validate(s), ConfigError);
}

TEST(ModelSpecTest, NamesRoundTrip) {
    for (auto k : {ModelKind::linear_mse, ModelKind::logistic, ModelKind::softmax, ModelKind::mlp}) {
        EXPECT_EQ(parse_model_kind(to_string(k)), k);
    }
    EXPECT_THROW(parse_model_kind("cnn"), ConfigError);
}

TEST(LossTest, ZeroLogisticIsLn2) {
    const auto spec = ModelSpec::logistic(2);
    const auto d = one_row({0.3, -1.7}, 1);
    EXPECT_NEAR(loss(spec, ParamVector::Zero(6), d[0]), std::numbers::ln2, 1e-15);
}

TEST(LossTest, LinearExactFitIsZero) {
    const auto spec = ModelSpec::linear_mse(2, 0.0, false);
    const auto d = one_row({2, 3}, 2);
    const ParamVector w = (ParamVector(2) << 1, 0).finished();
    EXPECT_EQ(loss(spec, w, d[0]), 0.0);
    EXPECT_TRUE(grad(spec, w, d[0]).isZero());
}

TEST(LossTest, RegularizationTermIsHalfL2Norm) {
    const auto spec = ModelSpec::linear_mse(2, 0.5, false);
    const auto d = one_row({2, 3}, 2);
    const ParamVector w = (ParamVector(2) << 1, 0).finished();
    EXPECT_DOUBLE_EQ(loss(spec, w, d[0]), 0.25);
    EXPECT_EQ(data_loss(spec, w, d[0]), 0.0);
}

TEST(LossTest, MlpMatchesHandForwardPass) {
    Rng rng(42);
    for (auto act : {Activation::tanh, Activation::relu}) {
        const auto spec = ModelSpec::mlp(3, 4, 3, act, 0.01);
        const ParamVector p = oracle::random_vector(param_count(spec), rng, 0.7);
        const auto d = labelled_rows(spec, 5, rng);
        for (std::size_t i = 0; i < d.size(); ++i) {
            EXPECT_NEAR(loss(spec, p, d[i]), oracle::mlp_loss_by_hand(spec, p, d[i]), 1e-12);
        }
    }
}

TEST(LossTest, ShapeMismatchReportsDimensions) {
    const auto spec = ModelSpec::softmax(3, 2);
    const auto d = one_row({1, 2}, 0);
    try {
        loss(spec, ParamVector::Zero(8), d[0]);
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("input_dim 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("2 features"), std::string::npos) << msg;
    }
    EXPECT_THROW(loss(spec, ParamVector::Zero(7), one_row({1, 2, 3}, 0)[0]), ShapeError);
    EXPECT_THROW(loss(spec, ParamVector::Zero(8), one_row({1, 2, 3}, 2)[0]), ShapeError);
}

TEST(GradTest, ZeroLogisticIsHalfTimesFeatures) {
    const auto spec = ModelSpec::logistic(2);
    const auto d = one_row({0.4, -2.0}, 1);
    const ParamVector g = grad(spec, ParamVector::Zero(6), d[0]);
    // class 0 row gets +0.5 x, class 1 row gets -0.5 x; biases likewise
    const ParamVector expected = (ParamVector(6) << 0.2, -1.0, -0.2, 1.0, 0.5, -0.5).finished();
    EXPECT_LT(oracle::rel_err(g, expected), 1e-15);
}

TEST(GradTest, MatchesHandWrittenSoftmaxGradient) {
    Rng rng(3);
    const auto spec = ModelSpec::softmax(4, 3, 0.0);
    const auto d = labelled_rows(spec, 10, rng);
    const ParamVector p = oracle::random_vector(param_count(spec), rng);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_LT(oracle::rel_err(data_grad(spec, p, d[i]), oracle::softmax_data_grad(spec, p, d[i])), 1e-13);
    }
}

TEST(GradTest, FiniteDifferencesAllKinds) {
    Rng rng(11);
    for (const auto& spec : all_kinds()) {
        double worst = 0;
        for (int draw = 0; draw < 20; ++draw) {
            const auto d = labelled_rows(spec, 1, rng);
            const ParamVector p = oracle::random_vector(param_count(spec), rng, 0.5);
            const ParamVector g = grad(spec, p, d[0]);
            worst = std::max(worst, (g - oracle::fd_grad(spec, p, d[0])).norm() / (g.norm() + 1e-12));
        }
        EXPECT_LT(worst, 1e-5) << to_string(spec.kind);
    }
}

TEST(GradTest, DataGradExcludesRegularization) {
    Rng rng(5);
    const auto spec = ModelSpec::softmax(3, 3, 0.3);
    const auto d = labelled_rows(spec, 1, rng);
    const ParamVector p = oracle::random_vector(param_count(spec), rng);
    EXPECT_LT(oracle::rel_err(grad(spec, p, d[0]) - 0.3 * p, data_grad(spec, p, d[0])), 1e-14);
}

TEST(HvpTest, RankOneLinearExample) {
    const auto spec = ModelSpec::linear_mse(2, 0.0, false);
    const auto d = one_row({1, 0}, 0.7);
    const ParamVector v = (ParamVector(2) << 3, -5).finished();
    const ParamVector hv = hvp(spec, ParamVector::Zero(2), d, v, 0.0);
    EXPECT_EQ(hv[0], 3.0);
    EXPECT_EQ(hv[1], 0.0);
}

TEST(HvpTest, ZeroDirectionGivesZero) {
    Rng rng(8);
    for (const auto& spec : all_kinds()) {
        const auto d = labelled_rows(spec, 6, rng);
        const ParamVector p = oracle::random_vector(param_count(spec), rng);
        EXPECT_TRUE(hvp(spec, p, d, ParamVector::Zero(p.size()), 0.3).isZero());
    }
}

TEST(HvpTest, MlpMatchesFiniteDifferenceOfGradient) {
    Rng rng(21);
    const auto spec = ModelSpec::mlp(3, 6, 3, Activation::tanh, 0.01);
    const auto d = labelled_rows(spec, 10, rng);
    for (int draw = 0; draw < 10; ++draw) {
        const ParamVector p = oracle::random_vector(param_count(spec), rng, 0.5);
        const ParamVector v = oracle::random_vector(param_count(spec), rng);
        EXPECT_LT(oracle::rel_err(hvp(spec, p, d, v), oracle::fd_hvp(spec, p, d, v)), 1e-4);
    }
}

TEST(HvpTest, LinearModelsMatchDenseHessian) {
    Rng rng(4);
    const auto spec = ModelSpec::softmax(3, 3, 0.02);
    const auto d = labelled_rows(spec, 12, rng);
    const ParamVector p = oracle::random_vector(param_count(spec), rng);
    const Eigen::MatrixXd H = oracle::dense_softmax_hessian(spec, p, d, 0.1);
    const ParamVector v = oracle::random_vector(param_count(spec), rng);
    EXPECT_LT(oracle::rel_err(hvp(spec, p, d, v, 0.1), H * v), 1e-13);
}

TEST(HvpTest, SymmetricAndLinear) {
    Rng rng(99);
    for (const auto& spec : all_kinds()) {
        const auto d = labelled_rows(spec, 8, rng);
        for (int draw = 0; draw < 10; ++draw) {
            const ParamVector p = oracle::random_vector(param_count(spec), rng, 0.5);
            const ParamVector u = oracle::random_vector(param_count(spec), rng);
            const ParamVector v = oracle::random_vector(param_count(spec), rng);
            const double uhv = u.dot(hvp(spec, p, d, v, 0.01));
            const double vhu = v.dot(hvp(spec, p, d, u, 0.01));
            EXPECT_LT(std::abs(uhv - vhu) / (std::abs(uhv) + 1e-12), 1e-10) << to_string(spec.kind);

            const double a = rng.normal(), b = rng.normal();
            const ParamVector lhs = hvp(spec, p, d, a * u + b * v, 0.01);
            const ParamVector rhs = a * hvp(spec, p, d, u, 0.01) + b * hvp(spec, p, d, v, 0.01);
            EXPECT_LT(oracle::rel_err(lhs, rhs), 1e-10) << to_string(spec.kind);
        }
    }
}

TEST(HvpTest, ConvexKindsArePositiveDefinite) {
    Rng rng(12);
    for (const auto& spec : {ModelSpec::linear_mse(3, 0.01), ModelSpec::logistic(3, 0.01)}) {
        const auto d = labelled_rows(spec, 5, rng);
        const ParamVector p = oracle::random_vector(param_count(spec), rng, 2.0);
        for (int draw = 0; draw < 50; ++draw) {
            const ParamVector v = oracle::random_vector(param_count(spec), rng);
            EXPECT_GT(v.dot(hvp(spec, p, d, v, 0.0)), 0.0);
        }
    }
}

TEST(HvpTest, BatchHvpOverAllRowsEqualsUndampedHvp) {
    Rng rng(13);
    const auto spec = ModelSpec::mlp(2, 3, 2, Activation::tanh, 0.05);
    const auto d = labelled_rows(spec, 7, rng);
    const ParamVector p = oracle::random_vector(param_count(spec), rng);
    const ParamVector v = oracle::random_vector(param_count(spec), rng);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6};
    EXPECT_LT(oracle::rel_err(batch_hvp(spec, p, d, rows, v), hvp(spec, p, d, v)), 1e-14);
}

TEST(HvpTest, RejectsWrongDirectionLength) {
    const auto spec = ModelSpec::logistic(2);
    const auto d = one_row({1, 2}, 0);
    EXPECT_THROW(hvp(spec, ParamVector::Zero(6), d, ParamVector::Zero(5)), ShapeError);
}

TEST(MeanLossTest, AveragesPerSampleObjective) {
    Rng rng(2);
    const auto spec = ModelSpec::softmax(2, 3, 0.1);
    const auto d = labelled_rows(spec, 9, rng);
    const ParamVector p = oracle::random_vector(param_count(spec), rng);
    double acc = 0;
    for (std::size_t i = 0; i < d.size(); ++i) acc += loss(spec, p, d[i]);
    EXPECT_NEAR(mean_loss(spec, p, d), acc / 9, 1e-13);
}
