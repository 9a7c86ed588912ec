// classifier.hpp - the lightweight detection head: binary logistic
// regression fit by full-batch gradient descent with an l2 penalty
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "flowguard/errors.hpp"
#include "flowguard/matrix.hpp"

namespace flowguard {

struct ClassifierHyper {
    double learning_rate = 0.1;
    double l2_penalty = 0.0;
};

struct ClassifierParams {
    std::vector<double> weights; // one per selected embedding dim
    double bias = 0.0;
    ClassifierHyper hyper;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// numerically stable cross-entropy: softplus(z) - y*z
inline double logistic_term(double z, int y) {
    double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return sp - y * z;
}

/// Penalized training loss: mean cross-entropy + (l2/2)*||w||^2. The bias is
/// not penalized.
inline double logistic_loss(const std::vector<double>& w, double b, const Matrix& z,
                            const std::vector<int>& y, double l2) {
    double loss = 0.0;
    for (std::size_t r = 0; r < z.rows; ++r) {
        const double* x = z.row(r);
        double s = b;
        for (std::size_t c = 0; c < z.cols; ++c) s += w[c] * x[c];
        loss += logistic_term(s, y[r]);
    }
    loss /= static_cast<double>(z.rows);
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return loss + 0.5 * l2 * reg;
}

inline void logistic_grad(const std::vector<double>& w, double b, const Matrix& z,
                          const std::vector<int>& y, double l2,
                          std::vector<double>& dw, double& db) {
    dw.assign(w.size(), 0.0);
    db = 0.0;
    for (std::size_t r = 0; r < z.rows; ++r) {
        const double* x = z.row(r);
        double s = b;
        for (std::size_t c = 0; c < z.cols; ++c) s += w[c] * x[c];
        double resid = sigmoid(s) - y[r];
        for (std::size_t c = 0; c < z.cols; ++c) dw[c] += resid * x[c];
        db += resid;
    }
    const double inv_n = 1.0 / static_cast<double>(z.rows);
    for (std::size_t c = 0; c < w.size(); ++c) dw[c] = dw[c] * inv_n + l2 * w[c];
    db *= inv_n;
}

/// Deterministic fit: zero initialization, exactly 200 accepted iterations.
/// If an update would increase the penalized loss the step is halved and the
/// iteration retried (at most 10 halvings, then the update is skipped), so
/// the recorded loss curve is non-increasing. The seed parameter is part of
/// the interface contract; with zero initialization it draws nothing.
inline ClassifierParams train_classifier(const Matrix& z_s, const std::vector<int>& y,
                                         ClassifierHyper hyper, std::uint64_t /*seed*/ = 0,
                                         std::vector<double>* loss_curve = nullptr) {
    if (z_s.rows == 0 || z_s.rows != y.size())
        throw DimensionMismatch("train_classifier: rows/labels mismatch");
    bool has0 = false, has1 = false;
    for (int v : y) (v ? has1 : has0) = true;
    if (!has0 || !has1)
        throw SingleClassTraining("train_classifier: labels contain a single class");

    ClassifierParams p;
    p.weights.assign(z_s.cols, 0.0);
    p.hyper = hyper;

    constexpr int kIterations = 200;
    constexpr int kMaxHalvings = 10;
    double lr = hyper.learning_rate;
    double loss = logistic_loss(p.weights, p.bias, z_s, y, hyper.l2_penalty);
    if (loss_curve) loss_curve->push_back(loss);

    std::vector<double> dw, w_try;
    double db = 0.0;
    for (int it = 0; it < kIterations; ++it) {
        logistic_grad(p.weights, p.bias, z_s, y, hyper.l2_penalty, dw, db);
        double step = lr;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            w_try = p.weights;
            for (std::size_t c = 0; c < w_try.size(); ++c) w_try[c] -= step * dw[c];
            double b_try = p.bias - step * db;
            double loss_try = logistic_loss(w_try, b_try, z_s, y, hyper.l2_penalty);
            if (loss_try <= loss) {
                p.weights = w_try;
                p.bias = b_try;
                loss = loss_try;
                lr = step; // keep the working step for later iterations
                break;
            }
            step *= 0.5;
        }
        // all halvings exhausted leaves the iterate (and the loss) unchanged
        if (loss_curve) loss_curve->push_back(loss);
    }
    return p;
}

inline std::vector<double> predict_scores(const ClassifierParams& params, const Matrix& z_s) {
    if (z_s.cols != params.weights.size())
        throw DimensionMismatch("predict_scores: weight/feature width mismatch");
    std::vector<double> scores(z_s.rows);
    for (std::size_t r = 0; r < z_s.rows; ++r) {
        const double* x = z_s.row(r);
        double s = params.bias;
        for (std::size_t c = 0; c < z_s.cols; ++c) s += params.weights[c] * x[c];
        scores[r] = sigmoid(s);
    }
    return scores;
}

inline std::vector<int> scores_to_labels(const std::vector<double>& scores) {
    std::vector<int> labels(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) labels[i] = scores[i] >= 0.5 ? 1 : 0;
    return labels;
}

} // namespace flowguard
