#include "dropkit/model.hpp"

#include <cmath>
#include <sstream>

#include "dropkit/error.hpp"

namespace dropkit {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

Eigen::Index as_index(std::size_t n) { return static_cast<Eigen::Index>(n); }

// Offsets of each block inside the flat parameter vector.
struct Layout {
    Eigen::Index w1 = 0, b1 = 0, w2 = 0, b2 = 0, total = 0;
};

Layout layout_of(const ModelSpec& s) {
    Layout l;
    const auto in = as_index(s.input_dim), out = as_index(s.output_dim);
    const Eigen::Index with_bias = s.bias ? 1 : 0;
    if (s.kind == ModelKind::mlp) {
        const auto hid = as_index(s.hidden_dim);
        l.w1 = 0;
        l.b1 = hid * in;
        l.w2 = l.b1 + with_bias * hid;
        l.b2 = l.w2 + out * hid;
        l.total = l.b2 + with_bias * out;
    } else {
        l.w1 = 0;
        l.b1 = out * in;
        l.total = l.b1 + with_bias * out;
    }
    return l;
}

void check_inputs(const ModelSpec& spec, const ParamVector& params, const Sample& sample) {
    const auto expected = param_count(spec);
    if (static_cast<std::size_t>(params.size()) != expected ||
        sample.features.size() != spec.input_dim) {
        std::ostringstream msg;
        msg << "shape mismatch for " << to_string(spec.kind) << " model: expected "
            << expected << " params and input_dim " << spec.input_dim << ", got "
            << params.size() << " params and " << sample.features.size() << " features";
        throw ShapeError(msg.str());
    }
    if (is_classifier(spec.kind)) {
        const double y = sample.label;
        if (y < 0.0 || y != std::floor(y) || y >= static_cast<double>(spec.output_dim)) {
            std::ostringstream msg;
            msg << "label " << y << " of sample " << sample.id
                << " is not a class index below output_dim " << spec.output_dim;
            throw ShapeError(msg.str());
        }
    }
}

void check_direction(const ModelSpec& spec, const ParamVector& v) {
    if (static_cast<std::size_t>(v.size()) != param_count(spec)) {
        throw ShapeError("direction vector has length " + std::to_string(v.size()) +
                         ", expected " + std::to_string(param_count(spec)));
    }
}

// Output-layer head: loss value, its gradient w.r.t. the outputs z, and the
// data needed to apply the output Hessian.
struct Head {
    double loss = 0.0;
    Eigen::VectorXd g;  // dL/dz
    Eigen::VectorXd p;  // softmax probabilities (classifiers only)
};

Head make_head(ModelKind kind, const Eigen::VectorXd& z, double label) {
    Head h;
    if (kind == ModelKind::linear_mse) {
        const double r = z[0] - label;
        h.loss = 0.5 * r * r;
        h.g = Eigen::VectorXd::Constant(1, r);
        return h;
    }
    const double zmax = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - zmax).exp();
    const double sum = e.sum();
    h.p = e / sum;
    const auto y = static_cast<Eigen::Index>(label);
    h.loss = std::log(sum) + zmax - z[y];
    h.g = h.p;
    h.g[y] -= 1.0;
    return h;
}

// d2L/dz2 applied to u.
Eigen::VectorXd head_hessian_apply(ModelKind kind, const Head& h, const Eigen::VectorXd& u) {
    if (kind == ModelKind::linear_mse) return u;
    return h.p.cwiseProduct(u) - h.p * h.p.dot(u);
}

struct Activations {
    Eigen::VectorXd a;       // pre-activation
    Eigen::VectorXd h;       // activation output
    Eigen::VectorXd dact;    // sigma'(a)
    Eigen::VectorXd ddact;   // sigma''(a)
};

Activations activate(Activation act, Eigen::VectorXd a) {
    Activations r;
    r.a = std::move(a);
    const auto n = r.a.size();
    r.h.resize(n);
    r.dact.resize(n);
    r.ddact.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (act == Activation::tanh) {
            const double t = std::tanh(r.a[i]);
            r.h[i] = t;
            r.dact[i] = 1.0 - t * t;
            r.ddact[i] = -2.0 * t * (1.0 - t * t);
        } else {
            // relu: subgradient 0 at the kink
            const bool on = r.a[i] > 0.0;
            r.h[i] = on ? r.a[i] : 0.0;
            r.dact[i] = on ? 1.0 : 0.0;
            r.ddact[i] = 0.0;
        }
    }
    return r;
}

// Shared evaluation for one sample. Outputs are optional; the regularization
// term is included iff `with_reg`.
void evaluate(const ModelSpec& spec, const ParamVector& params, const Sample& sample,
              bool with_reg, double* loss_out, ParamVector* grad_out, const ParamVector* v,
              ParamVector* hvp_out) {
    check_inputs(spec, params, sample);
    const Layout L = layout_of(spec);
    const auto in = as_index(spec.input_dim), out = as_index(spec.output_dim);
    const ConstVecMap x(sample.features.data(), in);

    if (spec.kind != ModelKind::mlp) {
        const ConstMatMap W(params.data() + L.w1, out, in);
        Eigen::VectorXd z = W * x;
        if (spec.bias) z += params.segment(L.b1, out);
        const Head head = make_head(spec.kind, z, sample.label);

        if (loss_out) *loss_out = head.loss;
        if (grad_out) {
            grad_out->setZero(L.total);
            MatMap(grad_out->data() + L.w1, out, in).noalias() = head.g * x.transpose();
            if (spec.bias) grad_out->segment(L.b1, out) = head.g;
        }
        if (v && hvp_out) {
            const ConstMatMap V(v->data() + L.w1, out, in);
            Eigen::VectorXd dz = V * x;
            if (spec.bias) dz += v->segment(L.b1, out);
            const Eigen::VectorXd hz = head_hessian_apply(spec.kind, head, dz);
            hvp_out->setZero(L.total);
            MatMap(hvp_out->data() + L.w1, out, in).noalias() = hz * x.transpose();
            if (spec.bias) hvp_out->segment(L.b1, out) = hz;
        }
    } else {
        const auto hid = as_index(spec.hidden_dim);
        const ConstMatMap W1(params.data() + L.w1, hid, in);
        const ConstMatMap W2(params.data() + L.w2, out, hid);
        Eigen::VectorXd a1 = W1 * x;
        if (spec.bias) a1 += params.segment(L.b1, hid);
        const Activations act = activate(spec.activation, std::move(a1));
        Eigen::VectorXd z = W2 * act.h;
        if (spec.bias) z += params.segment(L.b2, out);
        const Head head = make_head(spec.kind, z, sample.label);

        if (loss_out) *loss_out = head.loss;
        // Backward pass.
        const Eigen::VectorXd gh = W2.transpose() * head.g;
        const Eigen::VectorXd ga1 = gh.cwiseProduct(act.dact);
        if (grad_out) {
            grad_out->setZero(L.total);
            MatMap(grad_out->data() + L.w1, hid, in).noalias() = ga1 * x.transpose();
            MatMap(grad_out->data() + L.w2, out, hid).noalias() = head.g * act.h.transpose();
            if (spec.bias) {
                grad_out->segment(L.b1, hid) = ga1;
                grad_out->segment(L.b2, out) = head.g;
            }
        }
        if (v && hvp_out) {
            // Forward-over-reverse R-operator pass along direction v.
            const ConstMatMap V1(v->data() + L.w1, hid, in);
            const ConstMatMap V2(v->data() + L.w2, out, hid);
            Eigen::VectorXd Ra1 = V1 * x;
            if (spec.bias) Ra1 += v->segment(L.b1, hid);
            const Eigen::VectorXd Rh = act.dact.cwiseProduct(Ra1);
            Eigen::VectorXd Rz = V2 * act.h + W2 * Rh;
            if (spec.bias) Rz += v->segment(L.b2, out);
            const Eigen::VectorXd Rg = head_hessian_apply(spec.kind, head, Rz);
            const Eigen::VectorXd Rgh = V2.transpose() * head.g + W2.transpose() * Rg;
            const Eigen::VectorXd Rga1 =
                Rgh.cwiseProduct(act.dact) + gh.cwiseProduct(act.ddact).cwiseProduct(Ra1);

            hvp_out->setZero(L.total);
            MatMap(hvp_out->data() + L.w1, hid, in).noalias() = Rga1 * x.transpose();
            MatMap(hvp_out->data() + L.w2, out, hid).noalias() =
                Rg * act.h.transpose() + head.g * Rh.transpose();
            if (spec.bias) {
                hvp_out->segment(L.b1, hid) = Rga1;
                hvp_out->segment(L.b2, out) = Rg;
            }
        }
    }

    if (with_reg && spec.l2_reg > 0.0) {
        if (loss_out) *loss_out += 0.5 * spec.l2_reg * params.squaredNorm();
        if (grad_out) *grad_out += spec.l2_reg * params;
        if (v && hvp_out) *hvp_out += spec.l2_reg * *v;
    }
}

}  // namespace

ModelSpec ModelSpec::linear_mse(std::size_t input_dim, double l2_reg, bool bias) {
    return ModelSpec{ModelKind::linear_mse, input_dim, 1, 0, Activation::none, l2_reg, bias};
}

ModelSpec ModelSpec::logistic(std::size_t input_dim, double l2_reg) {
    return ModelSpec{ModelKind::logistic, input_dim, 2, 0, Activation::none, l2_reg, true};
}

ModelSpec ModelSpec::softmax(std::size_t input_dim, std::size_t classes, double l2_reg) {
    return ModelSpec{ModelKind::softmax, input_dim, classes, 0, Activation::none, l2_reg, true};
}

ModelSpec ModelSpec::mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes,
                         Activation activation, double l2_reg) {
    return ModelSpec{ModelKind::mlp, input_dim, classes, hidden_dim, activation, l2_reg, true};
}

void validate(const ModelSpec& s) {
    if (s.input_dim == 0) throw ConfigError("model input_dim must be positive");
    if (s.output_dim == 0) throw ConfigError("model output_dim must be positive");
    if (!(s.l2_reg >= 0.0) || !std::isfinite(s.l2_reg)) {
        throw ConfigError("model l2_reg must be a finite non-negative number");
    }
    const bool is_mlp = s.kind == ModelKind::mlp;
    if (is_mlp != (s.hidden_dim > 0)) {
        throw ConfigError("hidden_dim must be positive for mlp models and zero otherwise");
    }
    if (is_mlp && s.activation == Activation::none) {
        throw ConfigError("mlp models need an activation (tanh or relu)");
    }
    if (!is_mlp && s.activation != Activation::none) {
        throw ConfigError("activation is only meaningful for mlp models");
    }
    if (s.kind == ModelKind::linear_mse && s.output_dim != 1) {
        throw ConfigError("linear-mse models have a single output");
    }
    if (s.kind == ModelKind::logistic && s.output_dim != 2) {
        throw ConfigError("logistic models have exactly two outputs");
    }
    if ((s.kind == ModelKind::softmax || is_mlp) && s.output_dim < 2) {
        throw ConfigError("softmax and mlp classifiers need at least two classes");
    }
}

std::size_t param_count(const ModelSpec& spec) {
    return static_cast<std::size_t>(layout_of(spec).total);
}

bool is_classifier(ModelKind kind) { return kind != ModelKind::linear_mse; }

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear_mse: return "linear-mse";
        case ModelKind::logistic: return "logistic";
        case ModelKind::softmax: return "softmax";
        case ModelKind::mlp: return "mlp";
    }
    return "unknown";
}

std::string to_string(Activation act) {
    switch (act) {
        case Activation::none: return "none";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& s) {
    if (s == "linear-mse") return ModelKind::linear_mse;
    if (s == "logistic") return ModelKind::logistic;
    if (s == "softmax") return ModelKind::softmax;
    if (s == "mlp") return ModelKind::mlp;
    throw ConfigError("unknown model kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "'");
}

double loss(const ModelSpec& spec, const ParamVector& params, const Sample& sample) {
    double l = 0.0;
    evaluate(spec, params, sample, true, &l, nullptr, nullptr, nullptr);
    return l;
}

double data_loss(const ModelSpec& spec, const ParamVector& params, const Sample& sample) {
    double l = 0.0;
    evaluate(spec, params, sample, false, &l, nullptr, nullptr, nullptr);
    return l;
}

ParamVector grad(const ModelSpec& spec, const ParamVector& params, const Sample& sample) {
    ParamVector g;
    evaluate(spec, params, sample, true, nullptr, &g, nullptr, nullptr);
    return g;
}

ParamVector data_grad(const ModelSpec& spec, const ParamVector& params, const Sample& sample) {
    ParamVector g;
    evaluate(spec, params, sample, false, nullptr, &g, nullptr, nullptr);
    return g;
}

ParamVector sample_hvp(const ModelSpec& spec, const ParamVector& params, const Sample& sample,
                       const ParamVector& v) {
    check_direction(spec, v);
    ParamVector out;
    evaluate(spec, params, sample, true, nullptr, nullptr, &v, &out);
    return out;
}

ParamVector batch_hvp(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                      std::span<const std::size_t> positions, const ParamVector& v) {
    check_direction(spec, v);
    if (positions.empty()) throw ConfigError("Hessian-vector product over an empty batch");
    ParamVector acc = ParamVector::Zero(v.size());
    ParamVector term;
    for (std::size_t pos : positions) {
        evaluate(spec, params, data.sample(pos), true, nullptr, nullptr, &v, &term);
        acc += term;
    }
    return acc / static_cast<double>(positions.size());
}

ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                const ParamVector& v, double damping) {
    check_direction(spec, v);
    if (data.size() == 0) throw ConfigError("Hessian-vector product over an empty dataset");
    ParamVector acc = ParamVector::Zero(v.size());
    ParamVector term;
    for (std::size_t i = 0; i < data.size(); ++i) {
        evaluate(spec, params, data.sample(i), true, nullptr, nullptr, &v, &term);
        acc += term;
    }
    acc /= static_cast<double>(data.size());
    if (damping != 0.0) acc += damping * v;
    return acc;
}

ParamVector batch_grad(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                       std::span<const std::size_t> positions) {
    if (positions.empty()) throw ConfigError("gradient over an empty batch");
    ParamVector acc = ParamVector::Zero(static_cast<Eigen::Index>(param_count(spec)));
    ParamVector term;
    for (std::size_t pos : positions) {
        evaluate(spec, params, data.sample(pos), false, nullptr, &term, nullptr, nullptr);
        acc += term;
    }
    acc /= static_cast<double>(positions.size());
    if (spec.l2_reg > 0.0) acc += spec.l2_reg * params;
    return acc;
}

double mean_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) sum += data_loss(spec, params, data.sample(i));
    double m = sum / static_cast<double>(data.size());
    if (spec.l2_reg > 0.0) m += 0.5 * spec.l2_reg * params.squaredNorm();
    return m;
}

Eigen::VectorXd forward(const ModelSpec& spec, const ParamVector& params,
                        std::span<const double> features) {
    Sample s{features, 0.0, 0};
    if (static_cast<std::size_t>(params.size()) != param_count(spec) ||
        features.size() != spec.input_dim) {
        check_inputs(spec, params, s);
    }
    const Layout L = layout_of(spec);
    const auto in = as_index(spec.input_dim), out = as_index(spec.output_dim);
    const ConstVecMap x(features.data(), in);
    if (spec.kind != ModelKind::mlp) {
        Eigen::VectorXd z = ConstMatMap(params.data() + L.w1, out, in) * x;
        if (spec.bias) z += params.segment(L.b1, out);
        return z;
    }
    const auto hid = as_index(spec.hidden_dim);
    Eigen::VectorXd a1 = ConstMatMap(params.data() + L.w1, hid, in) * x;
    if (spec.bias) a1 += params.segment(L.b1, hid);
    const Activations act = activate(spec.activation, std::move(a1));
    Eigen::VectorXd z = ConstMatMap(params.data() + L.w2, out, hid) * act.h;
    if (spec.bias) z += params.segment(L.b2, out);
    return z;
}

}  // namespace dropkit
