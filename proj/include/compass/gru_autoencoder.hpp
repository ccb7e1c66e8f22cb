#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "compass/error.hpp"
#include "compass/preprocess.hpp"
#include "compass/rng.hpp"

namespace compass {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatMap = Eigen::Map<MatrixXd>;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;

inline constexpr std::size_t kEncoderHidden = 16;
inline constexpr std::size_t kLatentDim = 8;
inline constexpr std::size_t kDecoderHidden = 16;

struct TrainConfig {
    int epochs = 160;
    double learning_rate = 0.0005;
    double weight_decay = 1e-4;
    double clip_norm = 1.0;
    double dropout_rate = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 1; // sequences per Adam step, 0 = full batch
    std::uint64_t rng_seed = 42;

    void validate() const
    {
        require(epochs >= 1, "epochs must be >= 1");
        require(learning_rate > 0, "learning rate must be > 0");
        require(weight_decay >= 0, "weight decay must be >= 0");
        require(clip_norm > 0, "clip norm must be > 0");
        require(dropout_rate >= 0 && dropout_rate < 1, "dropout rate must lie in [0, 1)");
        require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "adam betas must lie in [0, 1)");
        require(epsilon > 0, "adam epsilon must be > 0");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c)
{
    j = {{"epochs", c.epochs},         {"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
         {"clip_norm", c.clip_norm},   {"dropout_rate", c.dropout_rate},   {"beta1", c.beta1},
         {"beta2", c.beta2},           {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
         {"rng_seed", c.rng_seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c)
{
    auto get = [&](const char* k, auto& field) {
        if (j.contains(k))
            j.at(k).get_to(field);
    };
    get("epochs", c.epochs);
    get("learning_rate", c.learning_rate);
    get("weight_decay", c.weight_decay);
    get("clip_norm", c.clip_norm);
    get("dropout_rate", c.dropout_rate);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("epsilon", c.epsilon);
    get("batch_size", c.batch_size);
    get("rng_seed", c.rng_seed);
}

// ---------------------------------------------------------------------------
// Parameter layout: every tensor lives in one flat buffer (column-major blocks)
// ---------------------------------------------------------------------------

struct TensorSlot {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 1;
    std::size_t fan_in = 0; // 0 marks a bias
};

struct GruSlots {
    std::size_t in = 0, hid = 0;
    std::size_t wz, wr, wh, uz, ur, uh, bz, br, bh;
};

struct ParamLayout {
    std::size_t n_features = 0;
    GruSlots enc1, enc2, dec;
    std::size_t init_w, init_b, out_w, out_b;
    std::vector<TensorSlot> slots;
    std::size_t total = 0;

    explicit ParamLayout(std::size_t nf = 1) : n_features(nf)
    {
        auto add = [&](std::string name, std::size_t r, std::size_t c, std::size_t fan_in) {
            slots.push_back({std::move(name), total, r, c, fan_in});
            total += r * c;
            return slots.back().offset;
        };
        auto gru = [&](const std::string& p, std::size_t in, std::size_t hid) {
            GruSlots g;
            g.in = in;
            g.hid = hid;
            g.wz = add(p + ".W_update", hid, in, in);
            g.wr = add(p + ".W_reset", hid, in, in);
            g.wh = add(p + ".W_candidate", hid, in, in);
            g.uz = add(p + ".U_update", hid, hid, hid);
            g.ur = add(p + ".U_reset", hid, hid, hid);
            g.uh = add(p + ".U_candidate", hid, hid, hid);
            g.bz = add(p + ".b_update", hid, 1, 0);
            g.br = add(p + ".b_reset", hid, 1, 0);
            g.bh = add(p + ".b_candidate", hid, 1, 0);
            return g;
        };
        enc1 = gru("encoder1", nf, kEncoderHidden);
        enc2 = gru("encoder2", kEncoderHidden, kLatentDim);
        init_w = add("decoder_init.W", kDecoderHidden, kLatentDim, kLatentDim);
        init_b = add("decoder_init.b", kDecoderHidden, 1, 0);
        dec = gru("decoder", kLatentDim, kDecoderHidden);
        out_w = add("output.W", nf, kDecoderHidden, kDecoderHidden);
        out_b = add("output.b", nf, 1, 0);
    }
};

/// Flat parameter (or gradient) buffer with typed views.
struct AutoencoderParams {
    ParamLayout layout;
    std::vector<double> data;

    AutoencoderParams() : AutoencoderParams(1) {}
    explicit AutoencoderParams(std::size_t n_features) : layout(n_features), data(layout.total, 0.0) {}

    std::size_t n_features() const noexcept { return layout.n_features; }

    ConstMatMap mat(std::size_t off, std::size_t r, std::size_t c) const
    {
        return ConstMatMap(data.data() + off, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    MatMap mat(std::size_t off, std::size_t r, std::size_t c)
    {
        return MatMap(data.data() + off, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    ConstVecMap vec(std::size_t off, std::size_t n) const
    {
        return ConstVecMap(data.data() + off, static_cast<Eigen::Index>(n));
    }
    VecMap vec(std::size_t off, std::size_t n) { return VecMap(data.data() + off, static_cast<Eigen::Index>(n)); }

    friend bool operator==(const AutoencoderParams& a, const AutoencoderParams& b) { return a.data == b.data; }
};

/// Uniform(+-1/sqrt(fan_in)) weights, zero biases.
inline AutoencoderParams init_params(std::size_t n_features, std::uint64_t seed)
{
    AutoencoderParams p(n_features);
    CounterRng rng(seed, 0x1417);
    for (const auto& s : p.layout.slots) {
        if (s.fan_in == 0)
            continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
        for (std::size_t i = 0; i < s.rows * s.cols; ++i)
            p.data[s.offset + i] = rng.uniform(-bound, bound);
    }
    return p;
}

// ---------------------------------------------------------------------------
// GRU cell
// ---------------------------------------------------------------------------

inline double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

struct GruStep {
    VectorXd x, h_prev, z, r, c, h;
};

/// h' = (1 - z) * h + z * c with update gate z, reset gate r, candidate c.
inline GruStep gru_forward(const AutoencoderParams& p, const GruSlots& g, const VectorXd& x, const VectorXd& h_prev)
{
    require(static_cast<std::size_t>(x.size()) == g.in && static_cast<std::size_t>(h_prev.size()) == g.hid,
            "gru_cell: dimension mismatch");
    GruStep s;
    s.x = x;
    s.h_prev = h_prev;
    s.z = (p.mat(g.wz, g.hid, g.in) * x + p.mat(g.uz, g.hid, g.hid) * h_prev + p.vec(g.bz, g.hid)).unaryExpr(&logistic);
    s.r = (p.mat(g.wr, g.hid, g.in) * x + p.mat(g.ur, g.hid, g.hid) * h_prev + p.vec(g.br, g.hid)).unaryExpr(&logistic);
    const VectorXd rh = s.r.cwiseProduct(h_prev);
    s.c = (p.mat(g.wh, g.hid, g.in) * x + p.mat(g.uh, g.hid, g.hid) * rh + p.vec(g.bh, g.hid))
              .unaryExpr([](double v) { return std::tanh(v); });
    s.h = (VectorXd::Ones(s.z.size()) - s.z).cwiseProduct(h_prev) + s.z.cwiseProduct(s.c);
    return s;
}

inline VectorXd gru_cell(const AutoencoderParams& p, const GruSlots& g, const VectorXd& x, const VectorXd& h_prev)
{
    return gru_forward(p, g, x, h_prev).h;
}

/// Accumulates parameter gradients for one step; returns (dx, dh_prev).
inline std::pair<VectorXd, VectorXd> gru_backward(const AutoencoderParams& p, const GruSlots& g, const GruStep& s,
                                                  const VectorXd& dh, AutoencoderParams& grad)
{
    const auto hid = g.hid, in = g.in;
    const VectorXd dc = dh.cwiseProduct(s.z);
    const VectorXd dz = dh.cwiseProduct(s.c - s.h_prev);
    VectorXd dh_prev = dh.cwiseProduct(VectorXd::Ones(hid) - s.z);

    const VectorXd dah = dc.cwiseProduct(VectorXd::Ones(hid) - s.c.cwiseProduct(s.c));
    const VectorXd rh = s.r.cwiseProduct(s.h_prev);
    grad.mat(g.wh, hid, in).noalias() += dah * s.x.transpose();
    grad.mat(g.uh, hid, hid).noalias() += dah * rh.transpose();
    grad.vec(g.bh, hid) += dah;
    VectorXd dx = p.mat(g.wh, hid, in).transpose() * dah;
    const VectorXd drh = p.mat(g.uh, hid, hid).transpose() * dah;
    const VectorXd dr = drh.cwiseProduct(s.h_prev);
    dh_prev += drh.cwiseProduct(s.r);

    const VectorXd daz = dz.cwiseProduct(s.z.cwiseProduct(VectorXd::Ones(hid) - s.z));
    const VectorXd dar = dr.cwiseProduct(s.r.cwiseProduct(VectorXd::Ones(hid) - s.r));
    grad.mat(g.wz, hid, in).noalias() += daz * s.x.transpose();
    grad.mat(g.uz, hid, hid).noalias() += daz * s.h_prev.transpose();
    grad.vec(g.bz, hid) += daz;
    grad.mat(g.wr, hid, in).noalias() += dar * s.x.transpose();
    grad.mat(g.ur, hid, hid).noalias() += dar * s.h_prev.transpose();
    grad.vec(g.br, hid) += dar;
    dx.noalias() += p.mat(g.wz, hid, in).transpose() * daz + p.mat(g.wr, hid, in).transpose() * dar;
    dh_prev.noalias() += p.mat(g.uz, hid, hid).transpose() * daz + p.mat(g.ur, hid, hid).transpose() * dar;
    return {dx, dh_prev};
}

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

/// One trajectory: the first `length` rows of a (T x n_features) row-major block.
struct SequenceView {
    std::span<const double> data;
    std::size_t n_features = 0;
    std::size_t length = 0;

    VectorXd step(std::size_t t) const
    {
        return ConstVecMap(data.data() + t * n_features, static_cast<Eigen::Index>(n_features));
    }
};

/// Valid timesteps must form a prefix of the row.
inline SequenceView sequence_view(const FeatureSequence& fs, std::size_t s, std::size_t length = 0)
{
    std::size_t valid = 0;
    for (std::size_t t = 0; t < fs.max_fractions; ++t) {
        if (fs.is_valid(s, t)) {
            require(t == valid, "sequence mask must mark a prefix of timesteps");
            ++valid;
        }
    }
    require(valid >= 1, "sequence has no valid timesteps");
    if (length == 0)
        length = valid;
    require(length <= valid, "requested prefix longer than the sequence");
    return {fs.row(s), fs.n_features, length};
}

/// Per-timestep inverted-dropout multipliers on encoder layer-1 outputs.
using DropoutMask = std::vector<VectorXd>;

inline DropoutMask sample_dropout(std::size_t length, double rate, CounterRng& rng)
{
    DropoutMask m(length, VectorXd::Ones(kEncoderHidden));
    if (rate <= 0.0)
        return m;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (auto& v : m)
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    return m;
}

struct ForwardCache {
    std::vector<GruStep> enc1, enc2, dec;
    VectorXd latent;
    VectorXd dec_h0;
    std::vector<VectorXd> outputs;
};

inline VectorXd encode_cached(const AutoencoderParams& p, const SequenceView& seq, const DropoutMask* dropout,
                              ForwardCache* cache)
{
    require(seq.length >= 1, "encode: zero valid timesteps");
    require(seq.n_features == p.n_features(), "encode: feature width mismatch");
    const auto& L = p.layout;
    VectorXd h1 = VectorXd::Zero(kEncoderHidden), h2 = VectorXd::Zero(kLatentDim);
    for (std::size_t t = 0; t < seq.length; ++t) {
        auto s1 = gru_forward(p, L.enc1, seq.step(t), h1);
        h1 = s1.h;
        VectorXd y1 = dropout ? VectorXd(h1.cwiseProduct((*dropout)[t])) : h1;
        auto s2 = gru_forward(p, L.enc2, y1, h2);
        h2 = s2.h;
        if (cache) {
            cache->enc1.push_back(std::move(s1));
            cache->enc2.push_back(std::move(s2));
        }
    }
    if (cache)
        cache->latent = h2;
    return h2;
}

/// Latent embedding from the last valid timestep, inference mode.
inline VectorXd encode(const AutoencoderParams& p, const SequenceView& seq)
{
    return encode_cached(p, seq, nullptr, nullptr);
}

inline std::vector<VectorXd> decode_cached(const AutoencoderParams& p, const VectorXd& latent, std::size_t steps,
                                           ForwardCache* cache)
{
    require(steps >= 1, "decode: need at least one timestep");
    const auto& L = p.layout;
    const std::size_t nf = p.n_features();
    VectorXd h = (p.mat(L.init_w, kDecoderHidden, kLatentDim) * latent + p.vec(L.init_b, kDecoderHidden))
                     .unaryExpr([](double v) { return std::tanh(v); });
    if (cache)
        cache->dec_h0 = h;
    std::vector<VectorXd> out;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        auto s = gru_forward(p, L.dec, latent, h);
        h = s.h;
        out.push_back(p.mat(L.out_w, nf, kDecoderHidden) * h + p.vec(L.out_b, nf));
        if (cache)
            cache->dec.push_back(std::move(s));
    }
    if (cache)
        cache->outputs = out;
    return out;
}

inline std::vector<VectorXd> decode(const AutoencoderParams& p, const VectorXd& latent, std::size_t steps)
{
    return decode_cached(p, latent, steps, nullptr);
}

/// Mean squared error over valid (timestep, feature) entries only.
inline double masked_mse(std::span<const VectorXd> x, std::span<const VectorXd> x_hat, std::span<const std::uint8_t> mask)
{
    require(x.size() == x_hat.size() && x.size() == mask.size(), "masked_mse: shape mismatch");
    double sum = 0.0;
    std::size_t entries = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        require(x[t].size() == x_hat[t].size(), "masked_mse: shape mismatch");
        if (!mask[t])
            continue;
        sum += (x[t] - x_hat[t]).squaredNorm();
        entries += static_cast<std::size_t>(x[t].size());
    }
    require(entries > 0, "masked_mse: mask is all false");
    return sum / static_cast<double>(entries);
}

/// Inference-mode masked MSE of the encode-decode round trip.
inline double reconstruction_error(const AutoencoderParams& p, const SequenceView& seq)
{
    const auto out = decode(p, encode(p, seq), seq.length);
    std::vector<VectorXd> x;
    for (std::size_t t = 0; t < seq.length; ++t)
        x.push_back(seq.step(t));
    const std::vector<std::uint8_t> mask(seq.length, 1);
    return masked_mse(x, out, mask);
}

// ---------------------------------------------------------------------------
// Batch objective and exact gradient (backpropagation through time)
// ---------------------------------------------------------------------------

struct LossGrad {
    double loss = 0.0;
    AutoencoderParams grad;
};

/// Pooled masked MSE over a batch; dropout masks (one per sequence) are held fixed.
inline double batch_loss(const AutoencoderParams& p, std::span<const SequenceView> batch,
                         std::span<const DropoutMask> dropout)
{
    double sum = 0.0;
    std::size_t entries = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& seq = batch[b];
        const auto z = encode_cached(p, seq, dropout.empty() ? nullptr : &dropout[b], nullptr);
        const auto out = decode(p, z, seq.length);
        for (std::size_t t = 0; t < seq.length; ++t)
            sum += (out[t] - seq.step(t)).squaredNorm();
        entries += seq.length * seq.n_features;
    }
    require(entries > 0, "batch_loss: empty batch");
    return sum / static_cast<double>(entries);
}

inline LossGrad loss_and_gradient(const AutoencoderParams& p, std::span<const SequenceView> batch,
                                  std::span<const DropoutMask> dropout)
{
    const auto& L = p.layout;
    const std::size_t nf = p.n_features();
    LossGrad lg{0.0, AutoencoderParams(nf)};
    std::size_t entries = 0;
    for (const auto& seq : batch)
        entries += seq.length * seq.n_features;
    require(entries > 0, "loss_and_gradient: empty batch");
    const double inv = 1.0 / static_cast<double>(entries);
    auto& G = lg.grad;

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& seq = batch[b];
        const DropoutMask* drop = dropout.empty() ? nullptr : &dropout[b];
        ForwardCache fc;
        encode_cached(p, seq, drop, &fc);
        decode_cached(p, fc.latent, seq.length, &fc);

        // Decoder.
        VectorXd d_latent = VectorXd::Zero(kLatentDim);
        VectorXd dh = VectorXd::Zero(kDecoderHidden);
        for (std::size_t t = seq.length; t-- > 0;) {
            const VectorXd err = fc.outputs[t] - seq.step(t);
            lg.loss += err.squaredNorm() * inv;
            const VectorXd dout = 2.0 * inv * err;
            G.mat(L.out_w, nf, kDecoderHidden).noalias() += dout * fc.dec[t].h.transpose();
            G.vec(L.out_b, nf) += dout;
            dh.noalias() += p.mat(L.out_w, nf, kDecoderHidden).transpose() * dout;
            auto [dx, dhp] = gru_backward(p, L.dec, fc.dec[t], dh, G);
            d_latent += dx;
            dh = dhp;
        }
        const VectorXd dpre = dh.cwiseProduct(VectorXd::Ones(kDecoderHidden) - fc.dec_h0.cwiseProduct(fc.dec_h0));
        G.mat(L.init_w, kDecoderHidden, kLatentDim).noalias() += dpre * fc.latent.transpose();
        G.vec(L.init_b, kDecoderHidden) += dpre;
        d_latent.noalias() += p.mat(L.init_w, kDecoderHidden, kLatentDim).transpose() * dpre;

        // Encoder: the latent is layer-2's hidden state at the last valid step.
        VectorXd dh2 = d_latent;
        VectorXd dh1 = VectorXd::Zero(kEncoderHidden);
        for (std::size_t t = seq.length; t-- > 0;) {
            auto [dy1, dh2p] = gru_backward(p, L.enc2, fc.enc2[t], dh2, G);
            dh2 = dh2p;
            if (drop)
                dy1 = dy1.cwiseProduct((*drop)[t]);
            dh1 += dy1;
            auto [dx, dh1p] = gru_backward(p, L.enc1, fc.enc1[t], dh1, G);
            dh1 = dh1p;
        }
    }
    return lg;
}

// ---------------------------------------------------------------------------
// Optimisation
// ---------------------------------------------------------------------------

inline double global_norm(std::span<const double> g)
{
    double s = 0.0;
    for (double v : g)
        s += v * v;
    return std::sqrt(s);
}

/// Rescales so the global L2 norm does not exceed max_norm.
inline void clip_global_norm(std::span<double> grads, double max_norm = 1.0)
{
    const double n = global_norm(grads);
    if (n > max_norm) {
        const double scale = max_norm / n;
        for (auto& g : grads)
            g *= scale;
    }
}

struct AdamState {
    std::vector<double> m, v;
    long step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Adam with coupled (L2-in-gradient) weight decay and bias correction.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, const TrainConfig& cfg)
{
    require(params.size() == grads.size() && st.m.size() == params.size(), "adam_step: shape mismatch");
    for (double g : grads)
        if (!std::isfinite(g))
            throw NumericalError("adam_step: non-finite gradient");
    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + cfg.weight_decay * params[i];
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = st.m[i] / bc1, vhat = st.v[i] / bc2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

struct TrainResult {
    AutoencoderParams params;
    std::vector<double> loss_history; // per-epoch training objective (dropout active)
};

inline std::vector<SequenceView> all_views(const FeatureSequence& fs)
{
    std::vector<SequenceView> v;
    v.reserve(fs.size());
    for (std::size_t s = 0; s < fs.size(); ++s)
        v.push_back(sequence_view(fs, s));
    return v;
}

/// Deterministic training: initialisation, dropout masks and batch order all
/// come from counter streams keyed by the seed.
inline TrainResult train(const FeatureSequence& fs, const TrainConfig& cfg)
{
    cfg.validate();
    require(fs.size() >= 1, "train: no sequences");
    const auto views = all_views(fs);
    TrainResult res{init_params(fs.n_features, cfg.rng_seed), {}};
    AdamState st(res.params.data.size());
    const std::size_t bs = cfg.batch_size == 0 ? views.size() : std::min(cfg.batch_size, views.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        CounterRng rng(cfg.rng_seed, 0x100000 + static_cast<std::uint64_t>(epoch));
        std::vector<std::size_t> order(views.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        if (bs < views.size())
            shuffle(order, rng);
        double epoch_sum = 0.0;
        std::size_t epoch_entries = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            std::vector<SequenceView> batch;
            std::vector<DropoutMask> drops;
            std::size_t entries = 0;
            for (std::size_t k = start; k < std::min(start + bs, order.size()); ++k) {
                batch.push_back(views[order[k]]);
                drops.push_back(sample_dropout(batch.back().length, cfg.dropout_rate, rng));
                entries += batch.back().length * batch.back().n_features;
            }
            auto lg = loss_and_gradient(res.params, batch, drops);
            if (!std::isfinite(lg.loss))
                throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) + ": non-finite loss");
            epoch_sum += lg.loss * static_cast<double>(entries);
            epoch_entries += entries;
            clip_global_norm(lg.grad.data, cfg.clip_norm);
            adam_step(res.params.data, lg.grad.data, st, cfg);
        }
        res.loss_history.push_back(epoch_sum / static_cast<double>(epoch_entries));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

inline nlohmann::json params_to_json(const AutoencoderParams& p)
{
    nlohmann::json j;
    j["n_features"] = p.n_features();
    for (const auto& s : p.layout.slots)
        j["tensors"][s.name] = {{"rows", s.rows},
                                {"cols", s.cols},
                                {"values", std::vector<double>(p.data.begin() + static_cast<std::ptrdiff_t>(s.offset),
                                                               p.data.begin() + static_cast<std::ptrdiff_t>(s.offset + s.rows * s.cols))}};
    return j;
}

inline AutoencoderParams params_from_json(const nlohmann::json& j)
{
    try {
        AutoencoderParams p(j.at("n_features").get<std::size_t>());
        for (const auto& s : p.layout.slots) {
            const auto& t = j.at("tensors").at(s.name);
            require(t.at("rows").get<std::size_t>() == s.rows && t.at("cols").get<std::size_t>() == s.cols,
                    "model tensor " + s.name + " has the wrong shape");
            const auto vals = t.at("values").get<std::vector<double>>();
            require(vals.size() == s.rows * s.cols, "model tensor " + s.name + " has the wrong length");
            std::copy(vals.begin(), vals.end(), p.data.begin() + static_cast<std::ptrdiff_t>(s.offset));
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

} // namespace compass
