#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fd_check.hpp"
#include "flowguard/dataset.hpp"
#include "flowguard/ssl.hpp"

using namespace flowguard;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

SSLModel random_model(std::size_t d, std::size_t hidden, std::size_t embed, std::size_t proj,
                      std::uint64_t seed) {
    SSLConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.embed_dim = embed;
    cfg.proj_dim = proj;
    cfg.seed = seed;
    return init_ssl_model(d, cfg);
}

// flat parameter vector in a fixed order, for finite-difference checks
std::vector<double> pack(const SSLModel& m) {
    std::vector<double> theta;
    auto push = [&](const DenseLayer& l) {
        theta.insert(theta.end(), l.w.data.begin(), l.w.data.end());
        theta.insert(theta.end(), l.b.begin(), l.b.end());
    };
    for (const auto& l : m.encoder.layers) push(l);
    push(m.projection.layer);
    push(m.heads.mask_decoder);
    push(m.heads.temporal_predictor);
    return theta;
}

void unpack(SSLModel& m, const std::vector<double>& theta) {
    std::size_t k = 0;
    auto pull = [&](DenseLayer& l) {
        for (double& v : l.w.data) v = theta[k++];
        for (double& v : l.b) v = theta[k++];
    };
    for (auto& l : m.encoder.layers) pull(l);
    pull(m.projection.layer);
    pull(m.heads.mask_decoder);
    pull(m.heads.temporal_predictor);
    REQUIRE(k == theta.size());
}

std::vector<double> pack_grads(const SSLGrads& g) {
    SSLModel tmp;
    tmp.encoder = g.encoder;
    tmp.projection = g.projection;
    tmp.heads = g.heads;
    return pack(tmp);
}

} // namespace

TEST_CASE("augment identity, full mask, determinism") {
    std::vector<double> x{0.1, 0.5, 0.9, 0.3};
    {
        auto rng = derive_stream(1, "t");
        auto v = augment(x, {0.0, 0.0}, rng);
        REQUIRE(v.view1 == x);
        REQUIRE(v.view2 == x);
        for (bool b : v.mask2) REQUIRE_FALSE(b);
    }
    {
        auto rng = derive_stream(1, "t");
        auto v = augment(x, {0.0, 1.0}, rng);
        for (double val : v.view2) REQUIRE(val == 0.0);
        for (bool b : v.mask2) REQUIRE(b);
    }
    {
        auto r1 = derive_stream(7, "t");
        auto r2 = derive_stream(7, "t");
        auto a = augment(x, {0.2, 0.4}, r1);
        auto b = augment(x, {0.2, 0.4}, r2);
        REQUIRE(a.view1 == b.view1);
        REQUIRE(a.view2 == b.view2);
        REQUIRE(a.mask2 == b.mask2);
        for (double val : a.view1) {
            REQUIRE(val >= 0.0);
            REQUIRE(val <= 1.0);
        }
    }
}

TEST_CASE("encode_forward zero and identity layers") {
    EncoderParams zero;
    zero.layers = {make_layer(3, 4), make_layer(2, 3)};
    Matrix x(5, 4, 0.7);
    Matrix h = encode_forward(zero, x);
    REQUIRE(h.rows == 5);
    REQUIRE(h.cols == 2);
    for (double v : h.data) REQUIRE(v == 0.0);

    EncoderParams identity;
    identity.layers = {make_layer(4, 4)};
    for (std::size_t i = 0; i < 4; ++i) identity.layers[0].w.at(i, i) = 1.0;
    Matrix hx = encode_forward(identity, x);
    REQUIRE(hx.data == x.data);

    Matrix wrong(5, 3, 0.0);
    REQUIRE_THROWS_AS(encode_forward(zero, wrong), DimensionMismatch);
}

TEST_CASE("encoder input gradient matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto rng = derive_stream(seed, "test.encgrad");
        SSLModel model = random_model(5, 4, 3, 3, seed);
        Matrix x = random_matrix(3, 5, rng, 0.8);
        Matrix probe = random_matrix(3, 3, rng); // fixed linear readout of H

        auto loss_of_x = [&](const std::vector<double>& flat) {
            Matrix xi = x;
            xi.data = flat;
            Matrix h = encode_forward(model.encoder, xi);
            double s = 0;
            for (std::size_t i = 0; i < h.data.size(); ++i) s += h.data[i] * probe.data[i];
            return s;
        };
        EncoderCache cache;
        encode_forward(model.encoder, x, &cache);
        EncoderParams sink = zeros_like(model.encoder);
        Matrix dx = encode_backward(model.encoder, cache, probe, sink);
        auto res = fdcheck::compare(loss_of_x, x.data, dx.data);
        REQUIRE(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("cosine similarity fixtures") {
    REQUIRE(cosine_sim({1, 0}, {1, 0}) == Catch::Approx(1.0));
    REQUIRE(cosine_sim({1, 0}, {0, 1}) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(cosine_sim({1, 1}, {1, 0}) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
    REQUIRE(cosine_sim({0, 0}, {1, 0}) == 0.0); // epsilon-guarded zero vector
}

TEST_CASE("ntxent single pair is exactly zero") {
    auto rng = derive_stream(3, "test.nt1");
    for (int i = 0; i < 10; ++i) {
        Matrix z = random_matrix(2, 4, rng);
        auto res = ntxent_loss(z, 0.5);
        REQUIRE(res.loss == 0.0);
    }
}

TEST_CASE("ntxent two orthogonal pairs fixture") {
    Matrix z(4, 2);
    z.at(0, 0) = 1.0; // pair 0 view a
    z.at(1, 0) = 1.0; // pair 0 view b
    z.at(2, 1) = 1.0; // pair 1 view a
    z.at(3, 1) = 1.0; // pair 1 view b
    auto res = ntxent_loss(z, 1.0);
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
    REQUIRE(res.loss == Catch::Approx(expected).margin(1e-9));
    REQUIRE(expected == Catch::Approx(0.5514).margin(5e-5));
}

TEST_CASE("ntxent invariances") {
    auto rng = derive_stream(11, "test.ntinv");
    Matrix z = random_matrix(8, 3, rng);
    const double base = ntxent_loss(z, 0.7).loss;

    // swapping the two views of each pair leaves the mean loss unchanged
    Matrix swapped = z;
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t c = 0; c < 3; ++c)
            std::swap(swapped.at(2 * p, c), swapped.at(2 * p + 1, c));
    REQUIRE(ntxent_loss(swapped, 0.7).loss == Catch::Approx(base).margin(1e-9));

    // cosine similarity ignores a common positive rescaling
    Matrix scaled = z;
    for (double& v : scaled.data) v *= 2.5;
    REQUIRE(ntxent_loss(scaled, 0.7).loss == Catch::Approx(base).margin(1e-9));
}

TEST_CASE("ntxent rejects degenerate embeddings") {
    Matrix z(2, 3);
    z.at(0, 0) = 1.0; // second row stays zero
    REQUIRE_THROWS_AS(ntxent_loss(z, 0.5), DegenerateEmbedding);
}

TEST_CASE("ntxent gradient matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto rng = derive_stream(seed, "test.ntgrad");
        Matrix z = random_matrix(8, 3, rng);
        auto analytic = ntxent_loss(z, 0.5);
        auto loss_of = [&](const std::vector<double>& flat) {
            Matrix zi = z;
            zi.data = flat;
            return ntxent_loss(zi, 0.5).loss;
        };
        auto res = fdcheck::compare(loss_of, z.data, analytic.dz.data);
        REQUIRE(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("mask loss conventions") {
    auto rng = derive_stream(5, "test.mask");
    SSLModel model = random_model(4, 3, 2, 2, 5);
    Matrix h = random_matrix(3, 2, rng);
    Matrix x = random_matrix(3, 4, rng);

    BoolMatrix none(3, 4);
    auto empty = mask_loss(model.heads, h, x, none);
    REQUIRE(empty.loss == 0.0);
    for (double v : empty.dh.data) REQUIRE(v == 0.0);

    // a decoder that reproduces the originals on masked positions scores 0
    BoolMatrix m(3, 4);
    m.set(0, 1, true);
    m.set(2, 3, true);
    Matrix recon = dense_forward(model.heads.mask_decoder, h);
    Matrix x_match = x;
    x_match.at(0, 1) = recon.at(0, 1);
    x_match.at(2, 3) = recon.at(2, 3);
    auto perfect = mask_loss(model.heads, h, x_match, m);
    REQUIRE(perfect.loss == Catch::Approx(0.0).margin(1e-18));
}

TEST_CASE("mask loss gradient matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto rng = derive_stream(seed, "test.maskgrad");
        SSLModel model = random_model(4, 3, 2, 2, seed);
        Matrix h = random_matrix(3, 2, rng);
        Matrix x = random_matrix(3, 4, rng);
        BoolMatrix mask(3, 4);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 4; ++c) mask.set(r, c, rng.bernoulli(0.5));
        mask.set(0, 0, true); // never fully empty

        auto analytic = mask_loss(model.heads, h, x, mask);
        // theta = [h, decoder.w, decoder.b]
        std::vector<double> theta = h.data;
        const auto& dec = model.heads.mask_decoder;
        theta.insert(theta.end(), dec.w.data.begin(), dec.w.data.end());
        theta.insert(theta.end(), dec.b.begin(), dec.b.end());
        auto loss_of = [&](const std::vector<double>& t) {
            Matrix hi = h;
            std::copy(t.begin(), t.begin() + h.data.size(), hi.data.begin());
            SSLModel mi = model;
            std::size_t k = h.data.size();
            for (double& v : mi.heads.mask_decoder.w.data) v = t[k++];
            for (double& v : mi.heads.mask_decoder.b) v = t[k++];
            return mask_loss(mi.heads, hi, x, mask).loss;
        };
        std::vector<double> grad = analytic.dh.data;
        grad.insert(grad.end(), analytic.d_decoder.w.data.begin(),
                    analytic.d_decoder.w.data.end());
        grad.insert(grad.end(), analytic.d_decoder.b.begin(), analytic.d_decoder.b.end());
        auto res = fdcheck::compare(loss_of, theta, grad);
        REQUIRE(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("temporal loss conventions") {
    SSLModel model = random_model(4, 3, 2, 2, 9);
    Matrix h1(1, 2, 0.5);
    REQUIRE_THROWS_AS(temporal_loss(model.heads, h1), WindowTooShort);

    // identity predictor on a constant sequence predicts perfectly
    SSLModel id = model;
    id.heads.temporal_predictor = make_layer(2, 2);
    id.heads.temporal_predictor.w.at(0, 0) = 1.0;
    id.heads.temporal_predictor.w.at(1, 1) = 1.0;
    Matrix h(4, 2, 0.3);
    auto res = temporal_loss(id.heads, h);
    REQUIRE(res.loss == Catch::Approx(0.0).margin(1e-18));
}

TEST_CASE("temporal loss gradient matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto rng = derive_stream(seed, "test.tempgrad");
        SSLModel model = random_model(4, 3, 3, 2, seed);
        Matrix h = random_matrix(5, 3, rng);
        auto analytic = temporal_loss(model.heads, h);

        // the target is stop-gradient, so the checked function holds it at
        // its unperturbed value
        const Matrix target = step_ahead_target(h);
        std::vector<double> theta = h.data;
        const auto& p = model.heads.temporal_predictor;
        theta.insert(theta.end(), p.w.data.begin(), p.w.data.end());
        theta.insert(theta.end(), p.b.begin(), p.b.end());
        auto loss_of = [&](const std::vector<double>& t) {
            Matrix hi = h;
            std::copy(t.begin(), t.begin() + h.data.size(), hi.data.begin());
            SSLModel mi = model;
            std::size_t k = h.data.size();
            for (double& v : mi.heads.temporal_predictor.w.data) v = t[k++];
            for (double& v : mi.heads.temporal_predictor.b) v = t[k++];
            return temporal_loss(mi.heads, hi, target).loss;
        };
        std::vector<double> grad = analytic.dh.data;
        grad.insert(grad.end(), analytic.d_predictor.w.data.begin(),
                    analytic.d_predictor.w.data.end());
        grad.insert(grad.end(), analytic.d_predictor.b.begin(), analytic.d_predictor.b.end());
        auto res = fdcheck::compare(loss_of, theta, grad);
        REQUIRE(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("ssl_loss is the weighted combination") {
    SSLModel model = random_model(4, 3, 2, 2, 1);
    SSLComponent a{0.5, zero_grads(model.encoder, model.projection, model.heads)};
    SSLComponent b{0.2, zero_grads(model.encoder, model.projection, model.heads)};
    SSLComponent c{0.1, zero_grads(model.encoder, model.projection, model.heads)};
    SSLConfig cfg;
    cfg.lambda_c = 1.0;
    cfg.lambda_m = 0.5;
    cfg.lambda_t = 0.5;
    auto combined = ssl_loss(a, b, c, cfg);
    REQUIRE(combined.total == Catch::Approx(0.65));

    cfg.lambda_c = 1.0;
    cfg.lambda_m = 0.0;
    cfg.lambda_t = 0.0;
    REQUIRE(ssl_loss(a, b, c, cfg).total == Catch::Approx(a.loss));
}

TEST_CASE("joint ssl gradient matches finite differences end to end") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto rng = derive_stream(seed, "test.jointgrad");
        SSLModel model = random_model(5, 4, 3, 3, seed);
        SSLConfig cfg;
        cfg.tau = 0.5;
        cfg.lambda_c = 1.0;
        cfg.lambda_m = 0.5;
        cfg.lambda_t = 0.5;
        cfg.hidden_dim = 4;
        cfg.embed_dim = 3;
        cfg.proj_dim = 3;

        Matrix x(6, 5);
        for (double& v : x.data) v = rng.uniform();
        auto aug_rng = derive_stream(seed, "test.jointgrad.aug");
        AugmentedBatch batch = make_augmented_batch(x, {0.1, 0.4}, aug_rng);

        auto analytic = ssl_batch_grad(model.encoder, model.projection, model.heads, batch,
                                       cfg, true);
        // stop-gradient target frozen at the base parameters
        const Matrix target = step_ahead_target(encode_forward(model.encoder, batch.x));
        auto theta = pack(model);
        auto loss_of = [&](const std::vector<double>& t) {
            SSLModel mi = model;
            unpack(mi, t);
            return ssl_batch_grad(mi.encoder, mi.projection, mi.heads, batch, cfg, true,
                                  &target)
                .total;
        };
        auto res = fdcheck::compare(loss_of, theta, pack_grads(analytic.grads));
        REQUIRE(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("train_ssl zero learning rate leaves parameters at init") {
    auto data = synth_dataset(80, 3, 5, 1.0, 2);
    SSLConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.lambda_t = 0.0;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.hidden_dim = 6;
    cfg.embed_dim = 4;
    cfg.proj_dim = 3;
    cfg.seed = 2;
    auto trained = train_ssl(data.matrix, cfg);
    auto init = init_ssl_model(data.matrix.n_dims(), cfg);
    REQUIRE(pack(trained.model) == pack(init));
    REQUIRE(trained.loss_curve.size() == 3);
}

TEST_CASE("train_ssl improves the objective and is deterministic") {
    auto data = synth_dataset(300, 3, 5, 2.0, 4);
    SSLConfig cfg;
    cfg.lambda_t = 0.0;
    cfg.batch_size = 32;
    cfg.epochs = 15;
    cfg.learning_rate = 0.05;
    cfg.hidden_dim = 8;
    cfg.embed_dim = 4;
    cfg.proj_dim = 3;
    cfg.seed = 4;
    auto a = train_ssl(data.matrix, cfg);
    REQUIRE(a.loss_curve.size() == 15);
    REQUIRE(a.loss_curve.back() < a.loss_curve.front());

    auto b = train_ssl(data.matrix, cfg);
    REQUIRE(pack(a.model) == pack(b.model));
    REQUIRE(a.loss_curve == b.loss_curve);

    // embeddings have exactly embed_dim columns, strictly fewer than d'
    Matrix z = encode_forward(a.model.encoder, data.matrix.values);
    REQUIRE(z.cols == 4);
    REQUIRE(z.cols < data.matrix.n_dims());
}

TEST_CASE("train_ssl temporal handling") {
    auto data = synth_dataset(100, 2, 4, 1.0, 6);
    SSLConfig cfg;
    cfg.batch_size = 10;
    cfg.epochs = 2;
    cfg.hidden_dim = 5;
    cfg.embed_dim = 3;
    cfg.proj_dim = 2;
    cfg.lambda_t = 0.5;
    REQUIRE_THROWS_AS(train_ssl(data.matrix, cfg), NotTemporal);

    EncodedMatrix temporal = data.matrix;
    temporal.row_order_is_temporal = true;
    auto trained = train_ssl(temporal, cfg);
    REQUIRE(trained.loss_curve.size() == 2);

    cfg.batch_size = 500;
    REQUIRE_THROWS_AS(train_ssl(temporal, cfg), InsufficientData);
}

TEST_CASE("train_ssl enforces the compression regime") {
    auto data = synth_dataset(100, 2, 2, 1.0, 8); // d' = 4
    SSLConfig cfg;
    cfg.lambda_t = 0.0;
    cfg.batch_size = 10;
    cfg.epochs = 1;
    cfg.hidden_dim = 6;
    cfg.embed_dim = 4; // not smaller than d'
    cfg.proj_dim = 2;
    REQUIRE_THROWS_AS(train_ssl(data.matrix, cfg), DimensionMismatch);
}
