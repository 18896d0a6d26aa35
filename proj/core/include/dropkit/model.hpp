#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "dropkit/dataset.hpp"

namespace dropkit {

/// Flat parameter vector. Layout, layer by layer: weight matrix (row-major,
/// output x input) followed by the bias vector when the model has biases.
using ParamVector = Eigen::VectorXd;

enum class ModelKind { linear_mse, logistic, softmax, mlp };
enum class Activation { none, tanh, relu };

struct ModelSpec {
    ModelKind kind = ModelKind::softmax;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::size_t hidden_dim = 0;
    Activation activation = Activation::none;
    double l2_reg = 0.0;
    bool bias = true;

    static ModelSpec linear_mse(std::size_t input_dim, double l2_reg = 0.0, bool bias = true);
    /// Binary classifier, implemented as a two-class softmax.
    static ModelSpec logistic(std::size_t input_dim, double l2_reg = 0.0);
    static ModelSpec softmax(std::size_t input_dim, std::size_t classes, double l2_reg = 0.0);
    static ModelSpec mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes,
                         Activation activation = Activation::tanh, double l2_reg = 0.0);

    bool operator==(const ModelSpec&) const = default;
};

/// Throws ConfigError when the spec's fields are inconsistent.
void validate(const ModelSpec& spec);
std::size_t param_count(const ModelSpec& spec);
bool is_classifier(ModelKind kind);

std::string to_string(ModelKind kind);
std::string to_string(Activation act);
ModelKind parse_model_kind(const std::string& s);
Activation parse_activation(const std::string& s);

/// Per-sample objective, including the l2_reg * |params|^2 / 2 term.
double loss(const ModelSpec& spec, const ParamVector& params, const Sample& sample);
/// Per-sample loss without the regularization term.
double data_loss(const ModelSpec& spec, const ParamVector& params, const Sample& sample);

/// Exact gradient of loss().
ParamVector grad(const ModelSpec& spec, const ParamVector& params, const Sample& sample);
/// Exact gradient of data_loss().
ParamVector data_grad(const ModelSpec& spec, const ParamVector& params, const Sample& sample);

/// Per-sample Hessian of loss() applied to v.
ParamVector sample_hvp(const ModelSpec& spec, const ParamVector& params, const Sample& sample,
                       const ParamVector& v);

/// (H + damping I) v, with H the Hessian of the mean training objective.
ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                const ParamVector& v, double damping = 0.0);

/// Hessian of the mean objective over the rows at `positions`, applied to v.
ParamVector batch_hvp(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                      std::span<const std::size_t> positions, const ParamVector& v);

/// Mean objective gradient over the rows at `positions`.
ParamVector batch_grad(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                       std::span<const std::size_t> positions);

/// Mean objective over the whole dataset (regularization included).
double mean_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

/// Network output: logits for classifiers, the prediction for linear_mse.
Eigen::VectorXd forward(const ModelSpec& spec, const ParamVector& params,
                        std::span<const double> features);

}  // namespace dropkit
