// pipeline.hpp - hybrid orchestration: embed the splits with the trained
// encoder, run the evolutionary subset/hyperparameter search, retrain the
// final classifier, and assemble the deployable bundle
#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "flowguard/artifacts.hpp"
#include "flowguard/classifier.hpp"
#include "flowguard/dataset.hpp"
#include "flowguard/qga.hpp"
#include "flowguard/ssl.hpp"

namespace flowguard {

inline EvaluationContext build_context(const EncoderParams& encoder,
                                       const EncodedMatrix& train, const EncodedMatrix& val,
                                       const FitnessWeights& weights, std::uint64_t seed) {
    EvaluationContext ctx;
    ctx.train_z = encode_forward(encoder, train.values);
    ctx.val_z = encode_forward(encoder, val.values);
    ctx.train_y = train.labels;
    ctx.val_y = val.labels;
    ctx.weights = weights;
    ctx.seed = seed;
    return ctx;
}

struct OptimizeReport {
    std::vector<double> trace;
    FitnessBreakdown best;
    std::size_t evaluations_used = 0;
    std::size_t generations_run = 0;
    std::size_t embedding_dim = 0;
    std::size_t subset_size = 0;
    std::vector<double> generation_seconds; // wall-clock, reported separately
    double search_seconds = 0.0;
    std::optional<double> oracle_fitness; // set when the oracle cross-check ran
};

struct OptimizeResult {
    ModelBundle bundle;
    OptimizeReport report;
};

/// Search for (S*, hyper*) on the train/val embeddings, then retrain the
/// classifier on train+val restricted to S* and package everything needed
/// for end-to-end prediction.
inline OptimizeResult optimize_pipeline(const EncodedMatrix& train, const EncodedMatrix& val,
                                        const EncoderParams& encoder,
                                        const NormalizerArtifact& norm,
                                        const QGAConfig& qga_cfg,
                                        const FitnessWeights& weights,
                                        const std::string& config_digest,
                                        bool run_oracle = false,
                                        const HyperGrids& grids = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    EvaluationContext ctx = build_context(encoder, train, val, weights, qga_cfg.seed);
    EvolveResult ev = evolve(qga_cfg, ctx, grids);
    MeasuredSolution best_sol = decode(ev.best.bits, ctx.m(), grids);

    // final classifier sees train+val; the recorded fitness stays the
    // search-time value so it can be re-derived from the same context
    Matrix joint(ctx.train_z.rows + ctx.val_z.rows, ctx.m());
    std::vector<int> joint_y;
    joint_y.reserve(joint.rows);
    for (std::size_t r = 0; r < ctx.train_z.rows; ++r) {
        std::copy(ctx.train_z.row(r), ctx.train_z.row(r) + ctx.m(), joint.row(r));
        joint_y.push_back(ctx.train_y[r]);
    }
    for (std::size_t r = 0; r < ctx.val_z.rows; ++r) {
        std::copy(ctx.val_z.row(r), ctx.val_z.row(r) + ctx.m(),
                  joint.row(ctx.train_z.rows + r));
        joint_y.push_back(ctx.val_y[r]);
    }
    Matrix joint_s = select_columns(joint, best_sol.subset);
    ClassifierParams clf = train_classifier(joint_s, joint_y, best_sol.hyper, qga_cfg.seed);

    OptimizeResult out;
    out.bundle.schema = norm.schema;
    out.bundle.norm = norm.params;
    out.bundle.encoder = encoder;
    out.bundle.subset = best_sol.subset;
    out.bundle.classifier = clf;
    out.bundle.provenance.seed = qga_cfg.seed;
    out.bundle.provenance.config_digest = config_digest;
    out.bundle.provenance.search_fitness = ev.best_detail;
    out.bundle.validate();

    out.report.trace = ev.trace;
    out.report.best = ev.best_detail;
    out.report.evaluations_used = ev.best.evaluations_used;
    out.report.generations_run = ev.generations_run;
    out.report.embedding_dim = ctx.m();
    out.report.subset_size = best_sol.subset.size();
    out.report.generation_seconds = ev.generation_seconds;
    if (run_oracle) out.report.oracle_fitness = exhaustive_oracle(ctx, grids).fitness;
    out.report.search_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct EndToEndResult {
    std::vector<int> labels;
    std::vector<double> scores;
    double rows_per_second = 0.0;
};

inline void check_schema_compatible(const FeatureSchema& expected, const FeatureSchema& got) {
    if (expected.dataset_id != got.dataset_id)
        throw SchemaMismatch("dataset_id '" + got.dataset_id + "' != bundle's '" +
                             expected.dataset_id + "'");
    if (expected.columns != got.columns)
        throw SchemaMismatch("column layout differs from the bundle's schema");
}

/// Raw rows straight through the deployed model: encode with the bundled
/// normalizer, embed, restrict to S*, score. Identical by construction to
/// chaining the individual operations.
inline EndToEndResult predict_end_to_end(const ModelBundle& bundle, const RawTable& rows) {
    bundle.validate();
    check_schema_compatible(bundle.schema, rows.schema);
    const auto t0 = std::chrono::steady_clock::now();
    EncodedMatrix enc = encode(rows, bundle.norm);
    Matrix z = encode_forward(bundle.encoder, enc.values);
    Matrix z_s = select_columns(z, bundle.subset);
    EndToEndResult out;
    out.scores = predict_scores(bundle.classifier, z_s);
    out.labels = scores_to_labels(out.scores);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.rows_per_second = secs > 0 ? static_cast<double>(rows.size()) / secs : 0.0;
    return out;
}

/// Same model applied to an already-encoded matrix (the artifact handoff
/// between pipeline stages). The feature-name layout must match what the
/// bundled schema + normalizer would produce.
inline EndToEndResult predict_encoded(const ModelBundle& bundle, const EncodedMatrix& data) {
    bundle.validate();
    if (data.feature_names != encoded_feature_names(bundle.schema, bundle.norm))
        throw SchemaMismatch("encoded matrix layout differs from the bundle's schema");
    const auto t0 = std::chrono::steady_clock::now();
    Matrix z = encode_forward(bundle.encoder, data.values);
    Matrix z_s = select_columns(z, bundle.subset);
    EndToEndResult out;
    out.scores = predict_scores(bundle.classifier, z_s);
    out.labels = scores_to_labels(out.scores);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.rows_per_second = secs > 0 ? static_cast<double>(data.n_rows()) / secs : 0.0;
    return out;
}

} // namespace flowguard
