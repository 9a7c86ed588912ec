// ssl.hpp - self-supervised representation learning over encoded flows:
// stochastic augmentations, a dense rectifier encoder with projection head
// and auxiliary heads, the contrastive / mask / temporal losses with exact
// hand-derived gradients, and seeded mini-batch training
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "flowguard/dataset.hpp"
#include "flowguard/errors.hpp"
#include "flowguard/matrix.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

constexpr double kNormEpsilon = 1e-12;

struct DenseLayer {
    Matrix w;              // out x in
    std::vector<double> b; // out

    std::size_t in_dim() const { return w.cols; }
    std::size_t out_dim() const { return w.rows; }
};

inline DenseLayer make_layer(std::size_t out, std::size_t in) {
    DenseLayer l;
    l.w = Matrix(out, in);
    l.b.assign(out, 0.0);
    return l;
}

/// Dense encoder E: rectifier on hidden layers, identity on the output
/// layer, so embeddings are unconstrained reals.
struct EncoderParams {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }

    void validate_chaining() const {
        if (layers.empty()) throw DimensionMismatch("encoder: no layers");
        for (std::size_t l = 0; l + 1 < layers.size(); ++l)
            if (layers[l].out_dim() != layers[l + 1].in_dim())
                throw DimensionMismatch("encoder: layer dims do not chain");
        for (const auto& l : layers)
            if (l.b.size() != l.out_dim())
                throw DimensionMismatch("encoder: bias length mismatch");
    }
};

struct ProjectionParams {
    DenseLayer layer; // m -> p
};

struct AuxHeads {
    DenseLayer mask_decoder;       // m -> d'
    DenseLayer temporal_predictor; // m -> m
};

struct AugmentationConfig {
    double noise_sigma = 0.1;
    double mask_prob = 0.3;

    void validate() const {
        if (noise_sigma < 0.0) throw BadConfig("noise_sigma must be >= 0");
        if (mask_prob < 0.0 || mask_prob > 1.0) throw BadConfig("mask_prob must be in [0,1]");
    }
};

struct SSLConfig {
    double tau = 0.5;
    double lambda_c = 1.0;
    double lambda_m = 0.5;
    double lambda_t = 0.5;
    std::size_t batch_size = 64;
    std::size_t epochs = 30;
    double learning_rate = 0.05; // 0 is allowed: a zero step trains nothing
    double momentum = 0.9;
    std::uint64_t seed = 1;
    // architecture: d' -> hidden -> embed, projection embed -> proj
    std::size_t hidden_dim = 64;
    std::size_t embed_dim = 32;
    std::size_t proj_dim = 16;

    void validate() const {
        if (tau <= 0.0) throw BadConfig("tau must be > 0");
        if (lambda_c < 0 || lambda_m < 0 || lambda_t < 0)
            throw BadConfig("loss weights must be >= 0");
        if (lambda_c + lambda_m + lambda_t <= 0.0)
            throw BadConfig("at least one loss weight must be positive");
        if (batch_size < 2) throw BadConfig("batch_size must be >= 2");
        if (learning_rate < 0.0) throw BadConfig("learning_rate must be >= 0");
        if (momentum < 0.0 || momentum >= 1.0) throw BadConfig("momentum must be in [0,1)");
        if (proj_dim < 2) throw BadConfig("proj_dim must be >= 2");
        if (embed_dim < 1 || hidden_dim < 1) throw BadConfig("layer dims must be >= 1");
    }
};

// ---- augmentation ----

struct AugmentedViews {
    std::vector<double> view1; // jittered, clipped back into [0,1]
    std::vector<double> view2; // masked
    std::vector<bool> mask2;   // true where view2 was zeroed
};

// draw order is fixed (all jitter draws, then all mask draws) so a given rng
// state always yields the same views
inline AugmentedViews augment(const std::vector<double>& x, const AugmentationConfig& cfg,
                              RngStream& rng) {
    cfg.validate();
    AugmentedViews out;
    out.view1.resize(x.size());
    out.view2.resize(x.size());
    out.mask2.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = x[i] + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0);
        out.view1[i] = std::min(1.0, std::max(0.0, v));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        bool masked = cfg.mask_prob > 0.0 && rng.uniform() < cfg.mask_prob;
        out.mask2[i] = masked;
        out.view2[i] = masked ? 0.0 : x[i];
    }
    return out;
}

struct BoolMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> v;

    BoolMatrix() = default;
    BoolMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0) {}
    bool at(std::size_t r, std::size_t c) const { return v[r * cols + c] != 0; }
    void set(std::size_t r, std::size_t c, bool x) { v[r * cols + c] = x ? 1 : 0; }
};

struct AugmentedBatch {
    Matrix x;     // originals, temporal order preserved
    Matrix view1; // jittered
    Matrix view2; // masked
    BoolMatrix mask;
};

inline AugmentedBatch make_augmented_batch(const Matrix& x, const AugmentationConfig& cfg,
                                           RngStream& rng) {
    AugmentedBatch batch;
    batch.x = x;
    batch.view1 = Matrix(x.rows, x.cols);
    batch.view2 = Matrix(x.rows, x.cols);
    batch.mask = BoolMatrix(x.rows, x.cols);
    std::vector<double> row(x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        std::copy(x.row(r), x.row(r) + x.cols, row.begin());
        auto views = augment(row, cfg, rng);
        for (std::size_t c = 0; c < x.cols; ++c) {
            batch.view1.at(r, c) = views.view1[c];
            batch.view2.at(r, c) = views.view2[c];
            batch.mask.set(r, c, views.mask2[c]);
        }
    }
    return batch;
}

// ---- dense forward/backward ----

inline Matrix dense_forward(const DenseLayer& l, const Matrix& x) {
    if (x.cols != l.in_dim()) throw DimensionMismatch("dense_forward: input width mismatch");
    Matrix y(x.rows, l.out_dim());
    for (std::size_t r = 0; r < x.rows; ++r) affine_row(l.w, l.b, x.row(r), y.row(r));
    return y;
}

// accumulates parameter grads, returns dL/dX
inline Matrix dense_backward(const DenseLayer& l, const Matrix& x, const Matrix& dy,
                             DenseLayer& grad) {
    Matrix dx(x.rows, l.in_dim());
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        const double* dyr = dy.row(r);
        double* dxr = dx.row(r);
        for (std::size_t o = 0; o < l.out_dim(); ++o) {
            const double g = dyr[o];
            grad.b[o] += g;
            double* gw = grad.w.row(o);
            const double* w = l.w.row(o);
            for (std::size_t i = 0; i < l.in_dim(); ++i) {
                gw[i] += g * xr[i];
                dxr[i] += g * w[i];
            }
        }
    }
    return dx;
}

struct EncoderCache {
    std::vector<Matrix> inputs; // input to each layer (inputs[0] = X)
    std::vector<Matrix> pre;    // pre-activation of each layer
};

inline Matrix encode_forward(const EncoderParams& enc, const Matrix& x,
                             EncoderCache* cache = nullptr) {
    enc.validate_chaining();
    if (x.cols != enc.input_dim())
        throw DimensionMismatch("encode_forward: expected " + std::to_string(enc.input_dim()) +
                                " input dims, got " + std::to_string(x.cols));
    Matrix a = x;
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        if (cache) cache->inputs.push_back(a);
        Matrix z = dense_forward(enc.layers[l], a);
        if (cache) cache->pre.push_back(z);
        if (l + 1 < enc.layers.size())
            for (double& v : z.data) v = std::max(0.0, v);
        a = std::move(z);
    }
    return a;
}

inline EncoderParams zeros_like(const EncoderParams& enc) {
    EncoderParams g;
    for (const auto& l : enc.layers) g.layers.push_back(make_layer(l.out_dim(), l.in_dim()));
    return g;
}

// accumulates into grads, returns dL/dX
inline Matrix encode_backward(const EncoderParams& enc, const EncoderCache& cache,
                              const Matrix& d_out, EncoderParams& grads) {
    Matrix g = d_out;
    for (std::size_t l = enc.layers.size(); l-- > 0;) {
        if (l + 1 < enc.layers.size()) {
            // rectifier: pass gradient only where pre-activation was positive
            const Matrix& pre = cache.pre[l];
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (pre.data[i] <= 0.0) g.data[i] = 0.0;
        }
        g = dense_backward(enc.layers[l], cache.inputs[l], g, grads.layers[l]);
    }
    return g;
}

// ---- losses ----

inline double cosine_sim(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw DimensionMismatch("cosine_sim: length mismatch");
    double uu = 0, vv = 0, uv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    return uv / (std::max(std::sqrt(uu), kNormEpsilon) * std::max(std::sqrt(vv), kNormEpsilon));
}

struct NtXentResult {
    double loss = 0.0;
    Matrix dz; // gradient w.r.t. the 2N x p embedding block
};

/// Normalized temperature-scaled cross entropy over N positive pairs.
/// Rows 2i and 2i+1 of z are the two views of instance i. Every row serves
/// as an anchor once; the denominator runs over all other rows (positive
/// included), matching the 1_[j != i] indicator. Loss is the mean over the
/// 2N anchor terms.
inline NtXentResult ntxent_loss(const Matrix& z, double tau) {
    const std::size_t k = z.rows; // 2N
    if (k < 2 || k % 2 != 0) throw DimensionMismatch("ntxent_loss: need 2N rows");
    if (tau <= 0.0) throw BadConfig("ntxent_loss: tau must be > 0");

    std::vector<double> norm(k);
    Matrix unit(k, z.cols);
    for (std::size_t i = 0; i < k; ++i) {
        double n2 = 0;
        const double* zi = z.row(i);
        for (std::size_t c = 0; c < z.cols; ++c) n2 += zi[c] * zi[c];
        norm[i] = std::sqrt(n2);
        if (norm[i] < kNormEpsilon)
            throw DegenerateEmbedding("ntxent_loss: zero-norm embedding row " +
                                      std::to_string(i));
        for (std::size_t c = 0; c < z.cols; ++c) unit.at(i, c) = zi[c] / norm[i];
    }

    Matrix sim(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0;
            for (std::size_t c = 0; c < z.cols; ++c) s += unit.at(i, c) * unit.at(j, c);
            sim.at(i, j) = s;
        }

    NtXentResult out;
    out.dz = Matrix(k, z.cols);
    const double inv_anchors = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t p = i ^ 1; // partner row
        double peak = -1e300;
        for (std::size_t j = 0; j < k; ++j)
            if (j != i) peak = std::max(peak, sim.at(i, j) / tau);
        double denom = 0;
        for (std::size_t j = 0; j < k; ++j)
            if (j != i) denom += std::exp(sim.at(i, j) / tau - peak);
        out.loss += inv_anchors * (-(sim.at(i, p) / tau) + peak + std::log(denom));

        for (std::size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            const double w = std::exp(sim.at(i, j) / tau - peak) / denom;
            const double coef = inv_anchors * (w - (j == p ? 1.0 : 0.0)) / tau;
            // d sim(i,j) / dz_i and / dz_j through the normalized vectors
            const double s = sim.at(i, j);
            for (std::size_t c = 0; c < z.cols; ++c) {
                out.dz.at(i, c) += coef * (unit.at(j, c) - s * unit.at(i, c)) / norm[i];
                out.dz.at(j, c) += coef * (unit.at(i, c) - s * unit.at(j, c)) / norm[j];
            }
        }
    }
    return out;
}

struct MaskLossResult {
    double loss = 0.0;
    Matrix dh;
    DenseLayer d_decoder;
};

/// Mean squared reconstruction error over the masked positions only. With
/// nothing masked the loss and every gradient are zero by convention.
inline MaskLossResult mask_loss(const AuxHeads& heads, const Matrix& h, const Matrix& x_orig,
                                const BoolMatrix& mask) {
    if (h.rows != x_orig.rows || mask.rows != h.rows || mask.cols != x_orig.cols)
        throw DimensionMismatch("mask_loss: shape mismatch");
    if (heads.mask_decoder.in_dim() != h.cols || heads.mask_decoder.out_dim() != x_orig.cols)
        throw DimensionMismatch("mask_loss: decoder shape mismatch");

    MaskLossResult out;
    out.dh = Matrix(h.rows, h.cols);
    out.d_decoder = make_layer(heads.mask_decoder.out_dim(), heads.mask_decoder.in_dim());

    std::size_t masked = 0;
    for (std::uint8_t m : mask.v) masked += m;
    if (masked == 0) return out;

    Matrix recon = dense_forward(heads.mask_decoder, h);
    Matrix d_recon(recon.rows, recon.cols);
    const double inv = 1.0 / static_cast<double>(masked);
    for (std::size_t r = 0; r < recon.rows; ++r)
        for (std::size_t c = 0; c < recon.cols; ++c)
            if (mask.at(r, c)) {
                const double diff = recon.at(r, c) - x_orig.at(r, c);
                out.loss += inv * diff * diff;
                d_recon.at(r, c) = 2.0 * inv * diff;
            }
    out.dh = dense_backward(heads.mask_decoder, h, d_recon, out.d_decoder);
    return out;
}

struct TemporalLossResult {
    double loss = 0.0;
    Matrix dh;
    DenseLayer d_predictor;
};

/// Next-step prediction over a contiguous temporal window: mean squared
/// error between predictor(h_t) and a target matrix whose row t is the
/// step-ahead embedding. The target is a constant of the computation, so no
/// gradient flows into h_{t+1} (stop-gradient); callers that need a pure
/// function for finite-difference checking pass the frozen target
/// explicitly.
inline TemporalLossResult temporal_loss(const AuxHeads& heads, const Matrix& h,
                                        const Matrix& target) {
    if (h.rows < 2) throw WindowTooShort("temporal_loss: need at least 2 rows");
    if (heads.temporal_predictor.in_dim() != h.cols ||
        heads.temporal_predictor.out_dim() != h.cols)
        throw DimensionMismatch("temporal_loss: predictor shape mismatch");
    if (target.rows != h.rows - 1 || target.cols != h.cols)
        throw DimensionMismatch("temporal_loss: target shape mismatch");

    TemporalLossResult out;
    out.dh = Matrix(h.rows, h.cols);
    out.d_predictor = make_layer(h.cols, h.cols);

    Matrix inputs(h.rows - 1, h.cols);
    for (std::size_t t = 0; t + 1 < h.rows; ++t)
        std::copy(h.row(t), h.row(t) + h.cols, inputs.row(t));
    Matrix pred = dense_forward(heads.temporal_predictor, inputs);

    Matrix d_pred(pred.rows, pred.cols);
    const double inv = 1.0 / static_cast<double>(pred.rows * pred.cols);
    for (std::size_t t = 0; t < pred.rows; ++t)
        for (std::size_t c = 0; c < pred.cols; ++c) {
            const double diff = pred.at(t, c) - target.at(t, c);
            out.loss += inv * diff * diff;
            d_pred.at(t, c) = 2.0 * inv * diff;
        }
    Matrix d_inputs = dense_backward(heads.temporal_predictor, inputs, d_pred, out.d_predictor);
    for (std::size_t t = 0; t < d_inputs.rows; ++t)
        for (std::size_t c = 0; c < h.cols; ++c) out.dh.at(t, c) = d_inputs.at(t, c);
    return out;
}

inline Matrix step_ahead_target(const Matrix& h) {
    if (h.rows < 2) throw WindowTooShort("temporal_loss: need at least 2 rows");
    Matrix target(h.rows - 1, h.cols);
    for (std::size_t t = 1; t < h.rows; ++t)
        std::copy(h.row(t), h.row(t) + h.cols, target.row(t - 1));
    return target;
}

inline TemporalLossResult temporal_loss(const AuxHeads& heads, const Matrix& h) {
    return temporal_loss(heads, h, step_ahead_target(h));
}

// ---- joint objective ----

struct SSLGrads {
    EncoderParams encoder;
    ProjectionParams projection;
    AuxHeads heads;
};

inline SSLGrads zero_grads(const EncoderParams& enc, const ProjectionParams& proj,
                           const AuxHeads& heads) {
    SSLGrads g;
    g.encoder = zeros_like(enc);
    g.projection.layer = make_layer(proj.layer.out_dim(), proj.layer.in_dim());
    g.heads.mask_decoder =
        make_layer(heads.mask_decoder.out_dim(), heads.mask_decoder.in_dim());
    g.heads.temporal_predictor =
        make_layer(heads.temporal_predictor.out_dim(), heads.temporal_predictor.in_dim());
    return g;
}

namespace detail {
inline void axpy_layer(DenseLayer& dst, const DenseLayer& src, double a) {
    for (std::size_t i = 0; i < dst.w.data.size(); ++i) dst.w.data[i] += a * src.w.data[i];
    for (std::size_t i = 0; i < dst.b.size(); ++i) dst.b[i] += a * src.b[i];
}
} // namespace detail

inline void axpy(SSLGrads& dst, const SSLGrads& src, double a) {
    for (std::size_t l = 0; l < dst.encoder.layers.size(); ++l)
        detail::axpy_layer(dst.encoder.layers[l], src.encoder.layers[l], a);
    detail::axpy_layer(dst.projection.layer, src.projection.layer, a);
    detail::axpy_layer(dst.heads.mask_decoder, src.heads.mask_decoder, a);
    detail::axpy_layer(dst.heads.temporal_predictor, src.heads.temporal_predictor, a);
}

inline void scale(SSLGrads& g, double a) {
    auto s = [a](DenseLayer& l) {
        for (double& v : l.w.data) v *= a;
        for (double& v : l.b) v *= a;
    };
    for (auto& l : g.encoder.layers) s(l);
    s(g.projection.layer);
    s(g.heads.mask_decoder);
    s(g.heads.temporal_predictor);
}

struct SSLComponent {
    double loss = 0.0;
    SSLGrads grads;
};

struct SSLLossResult {
    double total = 0.0;
    double contrastive = 0.0;
    double mask = 0.0;
    double temporal = 0.0;
    SSLGrads grads;
};

/// Joint objective: lambda_c * contrastive + lambda_m * mask + lambda_t *
/// temporal, for losses and gradients alike. Component gradients must cover
/// the same parameter set.
inline SSLLossResult ssl_loss(const SSLComponent& contrastive, const SSLComponent& mask,
                              const SSLComponent& temporal, const SSLConfig& cfg) {
    SSLLossResult out;
    out.contrastive = contrastive.loss;
    out.mask = mask.loss;
    out.temporal = temporal.loss;
    out.total = cfg.lambda_c * contrastive.loss + cfg.lambda_m * mask.loss +
                cfg.lambda_t * temporal.loss;
    out.grads = contrastive.grads;
    scale(out.grads, cfg.lambda_c);
    axpy(out.grads, mask.grads, cfg.lambda_m);
    axpy(out.grads, temporal.grads, cfg.lambda_t);
    return out;
}

/// Full forward/backward for one augmented batch. The augmentations are
/// inputs, not draws, so the result is a pure function of the parameters --
/// that is what makes finite-difference checking possible. For the same
/// reason a frozen temporal target may be supplied; by default the target
/// is the current step-ahead embedding (stop-gradient semantics either
/// way).
inline SSLLossResult ssl_batch_grad(const EncoderParams& enc, const ProjectionParams& proj,
                                    const AuxHeads& heads, const AugmentedBatch& batch,
                                    const SSLConfig& cfg, bool use_temporal,
                                    const Matrix* frozen_temporal_target = nullptr) {
    const std::size_t b = batch.x.rows;

    SSLComponent c_contrastive{0.0, zero_grads(enc, proj, heads)};
    SSLComponent c_mask{0.0, zero_grads(enc, proj, heads)};
    SSLComponent c_temporal{0.0, zero_grads(enc, proj, heads)};

    EncoderCache cache1, cache2;
    Matrix h1 = encode_forward(enc, batch.view1, &cache1);
    Matrix h2 = encode_forward(enc, batch.view2, &cache2);

    if (cfg.lambda_c > 0.0) {
        Matrix stacked(2 * b, h1.cols);
        for (std::size_t r = 0; r < b; ++r) {
            std::copy(h1.row(r), h1.row(r) + h1.cols, stacked.row(2 * r));
            std::copy(h2.row(r), h2.row(r) + h2.cols, stacked.row(2 * r + 1));
        }
        Matrix z = dense_forward(proj.layer, stacked);
        NtXentResult nt = ntxent_loss(z, cfg.tau);
        c_contrastive.loss = nt.loss;
        Matrix d_stacked =
            dense_backward(proj.layer, stacked, nt.dz, c_contrastive.grads.projection.layer);
        Matrix dh1(b, h1.cols), dh2(b, h2.cols);
        for (std::size_t r = 0; r < b; ++r) {
            std::copy(d_stacked.row(2 * r), d_stacked.row(2 * r) + h1.cols, dh1.row(r));
            std::copy(d_stacked.row(2 * r + 1), d_stacked.row(2 * r + 1) + h2.cols,
                      dh2.row(r));
        }
        encode_backward(enc, cache1, dh1, c_contrastive.grads.encoder);
        encode_backward(enc, cache2, dh2, c_contrastive.grads.encoder);
    }

    if (cfg.lambda_m > 0.0) {
        MaskLossResult ml = mask_loss(heads, h2, batch.x, batch.mask);
        c_mask.loss = ml.loss;
        c_mask.grads.heads.mask_decoder = ml.d_decoder;
        encode_backward(enc, cache2, ml.dh, c_mask.grads.encoder);
    }

    if (use_temporal && cfg.lambda_t > 0.0) {
        EncoderCache cache0;
        Matrix h0 = encode_forward(enc, batch.x, &cache0);
        TemporalLossResult tl = frozen_temporal_target
                                    ? temporal_loss(heads, h0, *frozen_temporal_target)
                                    : temporal_loss(heads, h0);
        c_temporal.loss = tl.loss;
        c_temporal.grads.heads.temporal_predictor = tl.d_predictor;
        encode_backward(enc, cache0, tl.dh, c_temporal.grads.encoder);
    }

    return ssl_loss(c_contrastive, c_mask, c_temporal, cfg);
}

// ---- training ----

struct SSLModel {
    EncoderParams encoder;
    ProjectionParams projection;
    AuxHeads heads;
};

inline SSLModel init_ssl_model(std::size_t input_dim, const SSLConfig& cfg) {
    SSLModel m;
    auto init_layer = [&](std::size_t out, std::size_t in, std::uint64_t tag) {
        DenseLayer l = make_layer(out, in);
        auto rng = derive_stream(cfg.seed, "ssl.init", tag);
        const double scale = std::sqrt(2.0 / static_cast<double>(in));
        for (double& w : l.w.data) w = scale * rng.normal();
        // small positive bias keeps fully-masked rows away from the exact
        // zero embedding that the contrastive loss rejects
        for (double& b : l.b) b = 0.01;
        return l;
    };
    m.encoder.layers.push_back(init_layer(cfg.hidden_dim, input_dim, 0));
    m.encoder.layers.push_back(init_layer(cfg.embed_dim, cfg.hidden_dim, 1));
    m.projection.layer = init_layer(cfg.proj_dim, cfg.embed_dim, 2);
    m.heads.mask_decoder = init_layer(input_dim, cfg.embed_dim, 3);
    m.heads.temporal_predictor = init_layer(cfg.embed_dim, cfg.embed_dim, 4);
    return m;
}

struct TrainSSLResult {
    SSLModel model;
    std::vector<double> loss_curve; // mean batch loss per epoch
};

inline TrainSSLResult train_ssl(const EncodedMatrix& data, const SSLConfig& cfg,
                                const AugmentationConfig& aug = {}) {
    cfg.validate();
    aug.validate();
    const std::size_t n = data.n_rows();
    const std::size_t d = data.n_dims();
    if (n < cfg.batch_size)
        throw InsufficientData("train_ssl: fewer rows than batch_size");
    const bool use_temporal = cfg.lambda_t > 0.0;
    if (use_temporal && !data.row_order_is_temporal)
        throw NotTemporal("train_ssl: lambda_t > 0 but data has no temporal order");
    if (cfg.embed_dim >= d)
        throw DimensionMismatch("train_ssl: embed_dim must be smaller than input width");

    TrainSSLResult out;
    out.model = init_ssl_model(d, cfg);
    SSLGrads velocity =
        zero_grads(out.model.encoder, out.model.projection, out.model.heads);

    const std::size_t n_batches = n / cfg.batch_size;
    std::vector<std::size_t> order(use_temporal ? n_batches : n);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto apply_update = [&](const SSLGrads& g) {
        // classic momentum: v <- mu v - lr g; theta <- theta + v
        auto upd = [&](DenseLayer& p, DenseLayer& v, const DenseLayer& gl) {
            for (std::size_t i = 0; i < p.w.data.size(); ++i) {
                v.w.data[i] = cfg.momentum * v.w.data[i] - cfg.learning_rate * gl.w.data[i];
                p.w.data[i] += v.w.data[i];
            }
            for (std::size_t i = 0; i < p.b.size(); ++i) {
                v.b[i] = cfg.momentum * v.b[i] - cfg.learning_rate * gl.b[i];
                p.b[i] += v.b[i];
            }
        };
        for (std::size_t l = 0; l < out.model.encoder.layers.size(); ++l)
            upd(out.model.encoder.layers[l], velocity.encoder.layers[l], g.encoder.layers[l]);
        upd(out.model.projection.layer, velocity.projection.layer, g.projection.layer);
        upd(out.model.heads.mask_decoder, velocity.heads.mask_decoder, g.heads.mask_decoder);
        upd(out.model.heads.temporal_predictor, velocity.heads.temporal_predictor,
            g.heads.temporal_predictor);
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order_rng = derive_stream(cfg.seed, "ssl.epoch", epoch);
        shuffle(order, order_rng);
        double epoch_loss = 0.0;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            Matrix xb(cfg.batch_size, d);
            if (use_temporal) {
                // contiguous window so h_{t+1} really is the next flow
                const std::size_t start = order[bi] * cfg.batch_size;
                for (std::size_t r = 0; r < cfg.batch_size; ++r)
                    std::copy(data.values.row(start + r), data.values.row(start + r) + d,
                              xb.row(r));
            } else {
                for (std::size_t r = 0; r < cfg.batch_size; ++r) {
                    const std::size_t src = order[bi * cfg.batch_size + r];
                    std::copy(data.values.row(src), data.values.row(src) + d, xb.row(r));
                }
            }
            auto aug_rng = derive_stream(cfg.seed, "ssl.augment", epoch, bi);
            AugmentedBatch batch = make_augmented_batch(xb, aug, aug_rng);
            SSLLossResult res = ssl_batch_grad(out.model.encoder, out.model.projection,
                                               out.model.heads, batch, cfg, use_temporal);
            apply_update(res.grads);
            epoch_loss += res.total;
        }
        out.loss_curve.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return out;
}

} // namespace flowguard
