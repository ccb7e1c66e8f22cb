#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "compass/gru_autoencoder.hpp"
#include "compass/preprocess.hpp"

namespace compass {

struct ClassWeights {
    double negative = 1.0;
    double positive = 1.0;

    double operator()(int label) const noexcept { return label ? positive : negative; }
};

/// Balanced weights w_c = N / (2 N_c).
inline ClassWeights class_weights(std::span<const int> labels)
{
    std::size_t pos = 0;
    for (int y : labels)
        pos += y != 0;
    const std::size_t n = labels.size(), neg = n - pos;
    require(pos > 0 && neg > 0, "class_weights: training labels contain a single class");
    return {static_cast<double>(n) / (2.0 * static_cast<double>(neg)),
            static_cast<double>(n) / (2.0 * static_cast<double>(pos))};
}

struct LogRegConfig {
    double l2 = 1.0;
    double grad_tol = 1e-8;
    int max_iterations = 10000;
};

struct LogRegParams {
    VectorXd weights = VectorXd::Zero(kLatentDim);
    double intercept = 0.0;
    ScalerParams embedding_scaler; // identity when empty
    int iterations = 0;
    double final_grad_norm = 0.0;

    VectorXd standardize(const VectorXd& z) const
    {
        if (embedding_scaler.means.empty())
            return z;
        VectorXd out(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i)
            out[i] = scale_value(z[i], embedding_scaler.means[static_cast<std::size_t>(i)],
                                 embedding_scaler.stds[static_cast<std::size_t>(i)]);
        return out;
    }
};

namespace detail {

inline double softplus(double s) noexcept { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

struct LogRegProblem {
    std::span<const VectorXd> x;
    std::span<const int> y;
    ClassWeights cw;
    double l2;

    /// Weighted negative log-likelihood + (l2/2)|w|^2; theta = (w, b).
    double objective(const VectorXd& theta) const
    {
        const auto d = theta.size() - 1;
        double f = 0.5 * l2 * theta.head(d).squaredNorm();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = theta.head(d).dot(x[i]) + theta[d];
            f += cw(y[i]) * (softplus(s) - (y[i] ? s : 0.0));
        }
        return f;
    }

    VectorXd gradient(const VectorXd& theta) const
    {
        const auto d = theta.size() - 1;
        VectorXd g = VectorXd::Zero(theta.size());
        g.head(d) = l2 * theta.head(d);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = theta.head(d).dot(x[i]) + theta[d];
            const double r = cw(y[i]) * (logistic(s) - (y[i] ? 1.0 : 0.0));
            g.head(d) += r * x[i];
            g[d] += r;
        }
        return g;
    }
};

} // namespace detail

/// L2-regularised, class-balanced logistic regression by gradient descent with
/// Armijo backtracking. The intercept is not penalised.
inline LogRegParams fit_logistic(std::span<const VectorXd> x, std::span<const int> y, const LogRegConfig& cfg = {},
                                 const VectorXd* init = nullptr)
{
    require(x.size() == y.size() && x.size() >= 2, "fit_logistic: need at least 2 labelled samples");
    const auto d = x.front().size();
    detail::LogRegProblem prob{x, y, class_weights(y), cfg.l2};
    VectorXd theta = init ? *init : VectorXd::Zero(d + 1);
    require(theta.size() == d + 1, "fit_logistic: initial point has the wrong size");
    double f = prob.objective(theta);
    VectorXd g = prob.gradient(theta);
    // The step only ever shrinks; the slack absorbs round-off in f near the optimum.
    double step = 1.0;
    int it = 0;
    for (; it < cfg.max_iterations && g.norm() >= cfg.grad_tol; ++it) {
        const double gg = g.squaredNorm();
        const double slack = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
        VectorXd cand = theta - step * g;
        double fc = prob.objective(cand);
        while (fc > f - 0.5 * step * gg + slack && step > 1e-12) {
            step *= 0.5;
            cand = theta - step * g;
            fc = prob.objective(cand);
        }
        theta = std::move(cand);
        f = fc;
        g = prob.gradient(theta);
    }
    if (g.norm() >= cfg.grad_tol)
        throw NumericalError("logistic regression did not converge: gradient norm " + std::to_string(g.norm()) +
                             " after " + std::to_string(it) + " iterations");
    LogRegParams p;
    p.weights = theta.head(d);
    p.intercept = theta[d];
    p.iterations = it;
    p.final_grad_norm = g.norm();
    return p;
}

/// Fits the embedding standardiser on the given (training) embeddings, then the classifier.
inline LogRegParams fit_classifier(std::span<const VectorXd> embeddings, std::span<const int> labels,
                                   const LogRegConfig& cfg = {})
{
    require(!embeddings.empty(), "fit_classifier: no embeddings");
    FeatureMatrix m;
    for (const auto& z : embeddings)
        m.emplace_back(z.data(), z.data() + z.size());
    const auto scaler = fit_scaler(m);
    LogRegParams tmp;
    tmp.embedding_scaler = scaler;
    std::vector<VectorXd> std_z;
    for (const auto& z : embeddings)
        std_z.push_back(tmp.standardize(z));
    auto p = fit_logistic(std_z, labels, cfg);
    p.embedding_scaler = scaler;
    return p;
}

/// logistic(w . standardize(z) + b).
inline double predict_proba(const VectorXd& z, const LogRegParams& p)
{
    return logistic(p.weights.dot(p.standardize(z)) + p.intercept);
}

struct RiskTrajectory {
    SequenceId id;
    std::vector<double> probabilities; // p_1..p_T
    double p_final = 0.0;              // == p_T
};

/// Encodes prefixes 1..t (inference mode) so p_t never sees fractions after t.
inline RiskTrajectory predict_trajectory(const SequenceId& id, const SequenceView& seq, const AutoencoderParams& ae,
                                         const LogRegParams& clf)
{
    require(seq.length >= 1, "predict_trajectory: empty sequence");
    RiskTrajectory rt{id, {}, 0.0};
    for (std::size_t t = 1; t <= seq.length; ++t) {
        SequenceView prefix{seq.data, seq.n_features, t};
        rt.probabilities.push_back(predict_proba(encode(ae, prefix), clf));
    }
    rt.p_final = rt.probabilities.back();
    return rt;
}

inline nlohmann::json classifier_to_json(const LogRegParams& p, const LogRegConfig& cfg)
{
    return {{"weights", std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size())},
            {"intercept", p.intercept},
            {"embedding_means", p.embedding_scaler.means},
            {"embedding_stds", p.embedding_scaler.stds},
            {"l2", cfg.l2},
            {"iterations", p.iterations},
            {"final_grad_norm", p.final_grad_norm}};
}

} // namespace compass
