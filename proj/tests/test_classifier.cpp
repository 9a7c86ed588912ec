#include <catch2/catch_amalgamated.hpp>

#include "fd_check.hpp"
#include "flowguard/classifier.hpp"
#include "flowguard/dataset.hpp"
#include "flowguard/rng.hpp"

using namespace flowguard;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

std::vector<int> random_labels(std::size_t n, RngStream& rng) {
    std::vector<int> y(n);
    bool saw0 = false, saw1 = false;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = rng.bernoulli(0.5) ? 1 : 0;
        (y[i] ? saw1 : saw0) = true;
    }
    if (!saw0) y[0] = 0;
    if (!saw1) y[n - 1] = 1;
    return y;
}

} // namespace

TEST_CASE("logistic gradient matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto rng = derive_stream(seed, "test.logistic");
        const std::size_t n = 4 + rng.uniform_index(6);
        const std::size_t d = 1 + rng.uniform_index(4);
        Matrix z = random_matrix(n, d, rng);
        auto y = random_labels(n, rng);
        const double l2 = rng.uniform() * 0.01;

        std::vector<double> theta(d + 1);
        for (double& v : theta) v = rng.normal() * 0.5;

        auto loss_of = [&](const std::vector<double>& t) {
            std::vector<double> w(t.begin(), t.begin() + d);
            return logistic_loss(w, t[d], z, y, l2);
        };
        std::vector<double> w(theta.begin(), theta.begin() + d);
        std::vector<double> dw;
        double db = 0.0;
        logistic_grad(w, theta[d], z, y, l2, dw, db);
        std::vector<double> analytic = dw;
        analytic.push_back(db);

        auto res = fdcheck::compare(loss_of, theta, analytic);
        REQUIRE(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("separable blobs train to high accuracy with monotone loss") {
    // 5 sigma per dim makes the Gaussian blobs linearly separable in
    // practice; at 3 sigma their overlap alone already exceeds the 1% budget
    auto data = synth_dataset(400, 2, 0, 5.0, 21);
    std::vector<double> curve;
    auto clf = train_classifier(data.matrix.values, data.matrix.labels, {0.3, 0.0}, 21, &curve);
    auto pred = scores_to_labels(predict_scores(clf, data.matrix.values));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == data.matrix.labels[i]) ++correct;
    REQUIRE(static_cast<double>(correct) / pred.size() >= 0.99);

    REQUIRE(curve.size() == 201); // initial loss + 200 iterations
    for (std::size_t i = 1; i < curve.size(); ++i) REQUIRE(curve[i] <= curve[i - 1]);
}

TEST_CASE("training loss stays monotone even with an oversized step") {
    auto data = synth_dataset(100, 2, 2, 2.0, 5);
    std::vector<double> curve;
    train_classifier(data.matrix.values, data.matrix.labels, {50.0, 1e-3}, 5, &curve);
    for (std::size_t i = 1; i < curve.size(); ++i) REQUIRE(curve[i] <= curve[i - 1]);
}

TEST_CASE("single-class labels abort training") {
    Matrix z(4, 2, 0.5);
    REQUIRE_THROWS_AS(train_classifier(z, {1, 1, 1, 1}, {0.1, 0.0}, 0), SingleClassTraining);
    REQUIRE_THROWS_AS(train_classifier(z, {0, 0, 0, 0}, {0.1, 0.0}, 0), SingleClassTraining);
}

TEST_CASE("zero learning rate trains nothing") {
    auto data = synth_dataset(50, 1, 1, 2.0, 3);
    auto clf = train_classifier(data.matrix.values, data.matrix.labels, {0.0, 0.0}, 3);
    for (double w : clf.weights) REQUIRE(w == 0.0);
    REQUIRE(clf.bias == 0.0);
    auto scores = predict_scores(clf, data.matrix.values);
    for (double s : scores) REQUIRE(s == 0.5);
}

TEST_CASE("predict_scores is the sigmoid of the linear score") {
    ClassifierParams p;
    p.weights = {10.0};
    p.bias = 0.0;
    Matrix z(1, 1);
    z.at(0, 0) = 1.0;
    auto s = predict_scores(p, z);
    REQUIRE(s[0] == Catch::Approx(0.9999546021312976).epsilon(1e-9));

    // monotone in the linear score
    Matrix z3(3, 1);
    z3.at(0, 0) = 0.1;
    z3.at(1, 0) = 0.2;
    z3.at(2, 0) = 0.3;
    auto s3 = predict_scores(p, z3);
    REQUIRE(s3[0] < s3[1]);
    REQUIRE(s3[1] < s3[2]);

    Matrix wrong(1, 2, 0.0);
    REQUIRE_THROWS_AS(predict_scores(p, wrong), DimensionMismatch);
}

TEST_CASE("training is deterministic") {
    auto data = synth_dataset(120, 3, 3, 1.0, 17);
    auto a = train_classifier(data.matrix.values, data.matrix.labels, {0.1, 1e-4}, 1);
    auto b = train_classifier(data.matrix.values, data.matrix.labels, {0.1, 1e-4}, 1);
    REQUIRE(a.weights == b.weights);
    REQUIRE(a.bias == b.bias);
}
