#pragma once

// Reference computations written independently of the library code paths.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "dropkit/dataset.hpp"
#include "dropkit/io.hpp"
#include "dropkit/model.hpp"
#include "dropkit/rng.hpp"

namespace oracle {

using dropkit::Dataset;
using dropkit::ModelSpec;
using dropkit::ParamVector;
using dropkit::Sample;

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / (b.norm() + 1e-12);
}

inline Eigen::VectorXd random_vector(std::size_t n, dropkit::Rng& rng, double scale = 1.0) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
    return v;
}

inline ParamVector fd_grad(const ModelSpec& spec, const ParamVector& params, const Sample& s,
                           double h = 1e-5) {
    ParamVector g(params.size());
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        ParamVector up = params, down = params;
        up[i] += h;
        down[i] -= h;
        g[i] = (dropkit::loss(spec, up, s) - dropkit::loss(spec, down, s)) / (2 * h);
    }
    return g;
}

inline ParamVector mean_grad(const ModelSpec& spec, const ParamVector& params, const Dataset& d) {
    ParamVector g = ParamVector::Zero(params.size());
    for (std::size_t i = 0; i < d.size(); ++i) g += dropkit::grad(spec, params, d[i]);
    return g / static_cast<double>(d.size());
}

inline ParamVector fd_hvp(const ModelSpec& spec, const ParamVector& params, const Dataset& d,
                          const ParamVector& v, double eps = 1e-4) {
    return (mean_grad(spec, params + eps * v, d) - mean_grad(spec, params - eps * v, d)) /
           (2 * eps);
}

/// True when some ReLU pre-activation changes sign between params - eps v and
/// params + eps v. The central difference is not a derivative estimate there.
inline bool stencil_crosses_kink(const ModelSpec& spec, const ParamVector& params, const Dataset& d,
                                 const ParamVector& v, double eps) {
    if (spec.kind != dropkit::ModelKind::mlp || spec.activation != dropkit::Activation::relu) return false;
    const auto H = static_cast<Eigen::Index>(spec.hidden_dim), I = static_cast<Eigen::Index>(spec.input_dim);
    for (Eigen::Index r = 0; r < d.features().rows(); ++r) {
        for (Eigen::Index h = 0; h < H; ++h) {
            double lo = params[H * I + h] - eps * v[H * I + h];
            double hi = params[H * I + h] + eps * v[H * I + h];
            for (Eigen::Index j = 0; j < I; ++j) {
                lo += (params[h * I + j] - eps * v[h * I + j]) * d.features()(r, j);
                hi += (params[h * I + j] + eps * v[h * I + j]) * d.features()(r, j);
            }
            if ((lo > 0) != (hi > 0)) return true;
        }
    }
    return false;
}

/// fd_hvp with the step shrunk by 10x until the stencil lies in one linear
/// region of every ReLU unit (down to 1e-9).
inline ParamVector fd_hvp_piecewise(const ModelSpec& spec, const ParamVector& params, const Dataset& d,
                                    const ParamVector& v) {
    double eps = 1e-4;
    while (eps > 1e-9 && stencil_crosses_kink(spec, params, d, v, eps)) eps /= 10;
    return fd_hvp(spec, params, d, v, eps);
}

/// Straight-line softmax of logits, no max shift needed for the small values used.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    Eigen::VectorXd e(z.size());
    double sum = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        e[i] = std::exp(z[i]);
        sum += e[i];
    }
    return e / sum;
}

/// Dense Hessian of the mean regularized cross-entropy for a linear softmax
/// model with bias, plus damping. Assembled entry by entry from
/// d2L/dW_ca dW_db = (p_c [c=d] - p_c p_d) x_a x_b.
inline Eigen::MatrixXd dense_softmax_hessian(const ModelSpec& spec, const ParamVector& params,
                                             const Dataset& d, double damping) {
    const std::size_t in = spec.input_dim, C = spec.output_dim;
    const std::size_t P = C * in + C;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(P, P);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Sample s = d[i];
        std::vector<double> xt(s.features.begin(), s.features.end());
        xt.push_back(1.0);  // bias input
        Eigen::VectorXd z(C);
        for (std::size_t c = 0; c < C; ++c) {
            double acc = params[C * in + c];
            for (std::size_t a = 0; a < in; ++a) acc += params[c * in + a] * xt[a];
            z[c] = acc;
        }
        const Eigen::VectorXd p = softmax(z);
        auto index = [&](std::size_t c, std::size_t a) { return a < in ? c * in + a : C * in + c; };
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t e = 0; e < C; ++e) {
                const double w = (c == e ? p[c] : 0.0) - p[c] * p[e];
                for (std::size_t a = 0; a <= in; ++a)
                    for (std::size_t b = 0; b <= in; ++b) H(index(c, a), index(e, b)) += w * xt[a] * xt[b];
            }
    }
    H /= static_cast<double>(d.size());
    H.diagonal().array() += spec.l2_reg + damping;
    return H;
}

/// Data-loss gradient of a linear softmax model with bias, written out by hand.
inline ParamVector softmax_data_grad(const ModelSpec& spec, const ParamVector& params,
                                     const Sample& s) {
    const std::size_t in = spec.input_dim, C = spec.output_dim;
    Eigen::VectorXd z(C);
    for (std::size_t c = 0; c < C; ++c) {
        double acc = params[C * in + c];
        for (std::size_t a = 0; a < in; ++a) acc += params[c * in + a] * s.features[a];
        z[c] = acc;
    }
    Eigen::VectorXd r = softmax(z);
    r[static_cast<Eigen::Index>(s.label)] -= 1.0;
    ParamVector g(C * in + C);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t a = 0; a < in; ++a) g[c * in + a] = r[c] * s.features[a];
        g[C * in + c] = r[c];
    }
    return g;
}

/// One-hidden-layer network evaluated with explicit loops.
inline double mlp_loss_by_hand(const ModelSpec& spec, const ParamVector& p, const Sample& s) {
    const std::size_t in = spec.input_dim, hid = spec.hidden_dim, out = spec.output_dim;
    const std::size_t w1 = 0, b1 = hid * in, w2 = b1 + hid, b2 = w2 + out * hid;
    std::vector<double> h(hid);
    for (std::size_t j = 0; j < hid; ++j) {
        double a = p[b1 + j];
        for (std::size_t k = 0; k < in; ++k) a += p[w1 + j * in + k] * s.features[k];
        h[j] = spec.activation == dropkit::Activation::tanh ? std::tanh(a) : std::max(a, 0.0);
    }
    Eigen::VectorXd z(out);
    for (std::size_t o = 0; o < out; ++o) {
        double acc = p[b2 + o];
        for (std::size_t j = 0; j < hid; ++j) acc += p[w2 + o * hid + j] * h[j];
        z[o] = acc;
    }
    const double nll = -std::log(softmax(z)[static_cast<Eigen::Index>(s.label)]);
    return nll + 0.5 * spec.l2_reg * p.squaredNorm();
}

/// Standardized binary blobs, the shape used by several solver tests.
inline Dataset binary_blobs(std::size_t n, std::size_t dim, std::uint64_t seed, double flip = 0.0) {
    dropkit::BlobsParams bp;
    bp.n = n;
    bp.input_dim = dim;
    bp.classes = 2;
    bp.separation = 2.0;
    bp.flip_fraction = flip;
    bp.seed = seed;
    const Dataset raw = dropkit::synth_blobs(bp).dataset;
    return dropkit::Standardizer::fit(raw).apply(raw);
}

}  // namespace oracle
