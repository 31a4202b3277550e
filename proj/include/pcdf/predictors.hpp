#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pcdf/errors.hpp"
#include "pcdf/params.hpp"
#include "pcdf/rng.hpp"
#include "pcdf/series.hpp"

namespace pcdf {

enum class PredictorKind { naive, linear, mlp };

inline const char* to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::naive: return "naive";
        case PredictorKind::linear: return "linear";
        case PredictorKind::mlp: return "mlp";
    }
    return "unknown";
}

inline PredictorKind predictor_kind_from_string(const std::string& s) {
    if (s == "naive") return PredictorKind::naive;
    if (s == "linear") return PredictorKind::linear;
    if (s == "mlp") return PredictorKind::mlp;
    throw ArgumentError("unknown predictor kind: " + s);
}

/// Single-channel forecaster operating in the compressed space.
///   naive  - repeats the last length-`period` block (no parameters)
///   linear - one affine map, output_len x input_len
///   mlp    - affine / ReLU / affine with configurable hidden width
struct PredictorParams {
    PredictorKind kind = PredictorKind::linear;
    std::size_t input_len = 0;
    std::size_t output_len = 0;
    std::size_t hidden = 64;   // mlp only
    std::size_t period = 1;    // naive only
    ParamVec params;

    static PredictorParams make(PredictorKind kind, std::size_t input_len, std::size_t output_len,
                                std::size_t hidden = 64, std::size_t period = 1) {
        if (input_len < 1 || output_len < 1)
            throw ArgumentError("PredictorParams: lengths must be >= 1");
        PredictorParams p;
        p.kind = kind;
        p.input_len = input_len;
        p.output_len = output_len;
        p.hidden = hidden;
        p.period = period;
        switch (kind) {
            case PredictorKind::naive:
                if (period < 1) throw ArgumentError("naive predictor: period must be >= 1");
                if (period > input_len)
                    throw ArgumentError("naive predictor: period exceeds input length");
                break;
            case PredictorKind::linear:
                p.params.add_group("w", output_len, input_len);
                p.params.add_group("b", output_len, 1);
                break;
            case PredictorKind::mlp:
                if (hidden < 1) throw ArgumentError("mlp predictor: hidden width must be >= 1");
                p.params.add_group("w1", hidden, input_len);
                p.params.add_group("b1", hidden, 1);
                p.params.add_group("w2", output_len, hidden);
                p.params.add_group("b2", output_len, 1);
                break;
        }
        return p;
    }

    /// Biases start tiny but nonzero: a zero-norm group can never leave the
    /// origin under scale-invariant clipping.
    void init_random(Rng& rng) {
        switch (kind) {
            case PredictorKind::naive: break;
            case PredictorKind::linear: {
                const double scale = 1.0 / std::sqrt(static_cast<double>(input_len));
                for (auto& v : params.group("w")) v = rng.normal() * scale;
                for (auto& v : params.group("b")) v = 1e-3 * rng.normal();
                break;
            }
            case PredictorKind::mlp: {
                const double s1 = 1.0 / std::sqrt(static_cast<double>(input_len));
                const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
                for (auto& v : params.group("w1")) v = rng.normal() * s1;
                for (auto& v : params.group("b1")) v = 1e-3 * rng.normal();
                for (auto& v : params.group("w2")) v = rng.normal() * s2;
                for (auto& v : params.group("b2")) v = 1e-3 * rng.normal();
                break;
            }
        }
    }
};

/// Forward-pass scratch kept for backpropagation.
struct PredictTrace {
    std::vector<double> hidden_pre;   // mlp: pre-activation
    std::vector<double> hidden_post;  // mlp: post-ReLU
    std::vector<double> output;
};

inline PredictTrace predict_traced(const PredictorParams& p, std::span<const double> history) {
    if (history.size() != p.input_len)
        throw ArgumentError("predict: history length does not match input_len");
    PredictTrace trace;
    switch (p.kind) {
        case PredictorKind::naive: {
            trace.output.resize(p.output_len);
            const std::size_t tau = p.period;
            for (std::size_t t = 0; t < p.output_len; ++t)
                trace.output[t] = history[p.input_len - tau + (t % tau)];
            break;
        }
        case PredictorKind::linear: {
            const auto w = p.params.group("w");
            const auto b = p.params.group("b");
            trace.output.resize(p.output_len);
            for (std::size_t o = 0; o < p.output_len; ++o) {
                double acc = b[o];
                for (std::size_t i = 0; i < p.input_len; ++i)
                    acc += w[o * p.input_len + i] * history[i];
                trace.output[o] = acc;
            }
            break;
        }
        case PredictorKind::mlp: {
            const auto w1 = p.params.group("w1");
            const auto b1 = p.params.group("b1");
            const auto w2 = p.params.group("w2");
            const auto b2 = p.params.group("b2");
            trace.hidden_pre.resize(p.hidden);
            trace.hidden_post.resize(p.hidden);
            for (std::size_t h = 0; h < p.hidden; ++h) {
                double acc = b1[h];
                for (std::size_t i = 0; i < p.input_len; ++i)
                    acc += w1[h * p.input_len + i] * history[i];
                trace.hidden_pre[h] = acc;
                trace.hidden_post[h] = acc > 0.0 ? acc : 0.0;
            }
            trace.output.resize(p.output_len);
            for (std::size_t o = 0; o < p.output_len; ++o) {
                double acc = b2[o];
                for (std::size_t h = 0; h < p.hidden; ++h)
                    acc += w2[o * p.hidden + h] * trace.hidden_post[h];
                trace.output[o] = acc;
            }
            break;
        }
    }
    return trace;
}

inline std::vector<double> predict(const PredictorParams& p, std::span<const double> history) {
    return predict_traced(p, history).output;
}

/// Backward through the predictor: accumulates parameter gradients into
/// `grad` (same manifest as p.params) and returns d loss / d history.
inline std::vector<double> predict_backward(const PredictorParams& p,
                                            std::span<const double> history,
                                            const PredictTrace& trace,
                                            std::span<const double> d_output, ParamVec& grad) {
    std::vector<double> d_history(p.input_len, 0.0);
    switch (p.kind) {
        case PredictorKind::naive: {
            const std::size_t tau = p.period;
            for (std::size_t t = 0; t < p.output_len; ++t)
                d_history[p.input_len - tau + (t % tau)] += d_output[t];
            break;
        }
        case PredictorKind::linear: {
            const auto w = p.params.group("w");
            auto gw = grad.group("w");
            auto gb = grad.group("b");
            for (std::size_t o = 0; o < p.output_len; ++o) {
                gb[o] += d_output[o];
                for (std::size_t i = 0; i < p.input_len; ++i) {
                    gw[o * p.input_len + i] += d_output[o] * history[i];
                    d_history[i] += d_output[o] * w[o * p.input_len + i];
                }
            }
            break;
        }
        case PredictorKind::mlp: {
            const auto w1 = p.params.group("w1");
            const auto w2 = p.params.group("w2");
            auto gw1 = grad.group("w1");
            auto gb1 = grad.group("b1");
            auto gw2 = grad.group("w2");
            auto gb2 = grad.group("b2");
            std::vector<double> d_hidden(p.hidden, 0.0);
            for (std::size_t o = 0; o < p.output_len; ++o) {
                gb2[o] += d_output[o];
                for (std::size_t h = 0; h < p.hidden; ++h) {
                    gw2[o * p.hidden + h] += d_output[o] * trace.hidden_post[h];
                    d_hidden[h] += d_output[o] * w2[o * p.hidden + h];
                }
            }
            for (std::size_t h = 0; h < p.hidden; ++h) {
                if (trace.hidden_pre[h] <= 0.0) continue;  // ReLU subgradient at 0 is 0
                gb1[h] += d_hidden[h];
                for (std::size_t i = 0; i < p.input_len; ++i) {
                    gw1[h * p.input_len + i] += d_hidden[h] * history[i];
                    d_history[i] += d_hidden[h] * w1[h * p.input_len + i];
                }
            }
            break;
        }
    }
    return d_history;
}

// ---------------------------------------------------------------------------
// Composite training loss.
// ---------------------------------------------------------------------------

/// Per-term loss values. `regulation` and `latent` are the raw (unweighted)
/// terms; total = prediction + alpha*regulation + beta*latent.
struct LossBreakdown {
    double prediction = 0.0;
    double regulation = 0.0;
    double latent = 0.0;
    double total = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
};

/// prediction = mean squared error; regulation = (sum |residual| - sum X_hat)^2
/// over all window elements; latent = (phi_Y - phi_Y_hat)^2 on the compressed-
/// space means.
inline LossBreakdown loss(const Matrix& x_hat, const Matrix& x, const Matrix& residual_out,
                          double phi_y, double phi_y_hat, double alpha, double beta) {
    if (!x_hat.same_shape(x) || !x_hat.same_shape(residual_out))
        throw ArgumentError("loss: shape mismatch");
    const auto count = static_cast<double>(x_hat.rows() * x_hat.cols());
    if (count == 0.0) throw ArgumentError("loss: empty matrices");

    LossBreakdown out;
    out.alpha = alpha;
    out.beta = beta;
    double abs_residual = 0.0, sum_pred = 0.0;
    for (std::size_t t = 0; t < x_hat.rows(); ++t) {
        for (std::size_t c = 0; c < x_hat.cols(); ++c) {
            const double diff = x_hat(t, c) - x(t, c);
            out.prediction += diff * diff;
            abs_residual += std::abs(residual_out(t, c));
            sum_pred += x_hat(t, c);
        }
    }
    out.prediction /= count;
    const double reg = abs_residual - sum_pred;
    out.regulation = reg * reg;
    const double lat = phi_y - phi_y_hat;
    out.latent = lat * lat;
    out.total = out.prediction + alpha * out.regulation + beta * out.latent;
    return out;
}

/// Scale-invariant clipping: g <- g * min(1, clip_alpha*||w|| / ||g||).
/// Zero gradient passes through; zero weights force a zero gradient. The norm
/// is computed under max-abs scaling so very large finite gradients clip to
/// the bound instead of overflowing to a zero factor.
inline std::vector<double> clip_gradient(std::span<const double> g, std::span<const double> w,
                                         double clip_alpha) {
    if (g.size() != w.size()) throw ArgumentError("clip_gradient: length mismatch");
    if (clip_alpha <= 0.0) throw ArgumentError("clip_gradient: clip_alpha must be positive");
    double g_max = 0.0;
    for (double v : g) g_max = std::max(g_max, std::abs(v));
    double w_norm = 0.0;
    for (double v : w) w_norm += v * v;
    w_norm = std::sqrt(w_norm);
    std::vector<double> out(g.begin(), g.end());
    if (g_max == 0.0) return out;
    if (w_norm == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return out;
    }
    double scaled = 0.0;
    for (double v : g) {
        const double s = v / g_max;
        scaled += s * s;
    }
    const double g_norm = g_max * std::sqrt(scaled);
    const double bound = clip_alpha * w_norm;
    if (g_norm > bound) {
        // factor = bound/g_norm, applied in overflow-safe order
        for (auto& v : out) v = (v / g_max) * (bound / std::sqrt(scaled));
    }
    return out;
}

/// In-place variant used by the training loop.
inline void clip_gradient_inplace(std::span<double> g, std::span<const double> w,
                                  double clip_alpha) {
    const auto clipped = clip_gradient(g, w, clip_alpha);
    std::copy(clipped.begin(), clipped.end(), g.begin());
}

}  // namespace pcdf
