// artifacts.hpp - versioned on-disk formats for SSL checkpoints and the
// deployable model bundle
#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flowguard/classifier.hpp"
#include "flowguard/dataset.hpp"
#include "flowguard/qga.hpp"
#include "flowguard/ssl.hpp"
#include "flowguard/textio.hpp"

namespace flowguard {

namespace detail {

inline void write_layer(std::ostream& out, const std::string& name, const DenseLayer& l) {
    out << "layer." << name << ".dims=" << l.out_dim() << "," << l.in_dim() << "\n";
    out << "layer." << name << ".w=" << join_doubles(l.w.data) << "\n";
    out << "layer." << name << ".b=" << join_doubles(l.b) << "\n";
}

struct LayerReader {
    std::map<std::string, std::string> lines;

    bool consume(const KvLine& kv) {
        if (kv.key.rfind("layer.", 0) != 0) return false;
        lines[kv.key.substr(6)] = kv.value;
        return true;
    }

    DenseLayer get(const std::string& name) const {
        auto dims_it = lines.find(name + ".dims");
        auto w_it = lines.find(name + ".w");
        auto b_it = lines.find(name + ".b");
        if (dims_it == lines.end() || w_it == lines.end() || b_it == lines.end())
            throw VersionMismatch("artifact missing layer '" + name + "'");
        auto dims = split_string(dims_it->second, ',');
        if (dims.size() != 2) throw BadConfig("bad layer dims for '" + name + "'");
        const auto out_dim = static_cast<std::size_t>(parse_double(dims[0], "out dim"));
        const auto in_dim = static_cast<std::size_t>(parse_double(dims[1], "in dim"));
        DenseLayer l = make_layer(out_dim, in_dim);
        auto w = parse_doubles(w_it->second);
        auto b = parse_doubles(b_it->second);
        if (w.size() != out_dim * in_dim || b.size() != out_dim)
            throw DimensionMismatch("layer '" + name + "' value count mismatch");
        l.w.data = std::move(w);
        l.b = std::move(b);
        return l;
    }
};

} // namespace detail

// ---- SSL checkpoint ----

struct Checkpoint {
    SSLModel model;
    SSLConfig config;
    std::size_t input_dim = 0;
};

inline void save_checkpoint(std::ostream& out, const SSLModel& model, const SSLConfig& cfg) {
    out << "# flowguard-checkpoint v1\n";
    out << "input_dim=" << model.encoder.input_dim() << "\n";
    out << "encoder_layers=" << model.encoder.layers.size() << "\n";
    out << "config.tau=" << fmt_double(cfg.tau) << "\n";
    out << "config.lambda_c=" << fmt_double(cfg.lambda_c) << "\n";
    out << "config.lambda_m=" << fmt_double(cfg.lambda_m) << "\n";
    out << "config.lambda_t=" << fmt_double(cfg.lambda_t) << "\n";
    out << "config.batch_size=" << cfg.batch_size << "\n";
    out << "config.epochs=" << cfg.epochs << "\n";
    out << "config.learning_rate=" << fmt_double(cfg.learning_rate) << "\n";
    out << "config.momentum=" << fmt_double(cfg.momentum) << "\n";
    out << "config.seed=" << cfg.seed << "\n";
    out << "config.hidden_dim=" << cfg.hidden_dim << "\n";
    out << "config.embed_dim=" << cfg.embed_dim << "\n";
    out << "config.proj_dim=" << cfg.proj_dim << "\n";
    for (std::size_t l = 0; l < model.encoder.layers.size(); ++l)
        detail::write_layer(out, "encoder" + std::to_string(l), model.encoder.layers[l]);
    detail::write_layer(out, "projection", model.projection.layer);
    detail::write_layer(out, "mask_decoder", model.heads.mask_decoder);
    detail::write_layer(out, "temporal_predictor", model.heads.temporal_predictor);
}

inline void save_checkpoint_file(const std::string& path, const SSLModel& model,
                                 const SSLConfig& cfg) {
    auto out = open_output(path);
    save_checkpoint(out, model, cfg);
}

inline Checkpoint load_checkpoint(std::istream& in, const std::string& path) {
    expect_magic(in, "# flowguard-checkpoint v1", path);
    Checkpoint ck;
    detail::LayerReader layers;
    std::size_t n_enc_layers = 2;
    std::string line;
    KvLine kv;
    while (std::getline(in, line)) {
        if (!parse_kv(line, kv)) continue;
        if (layers.consume(kv)) continue;
        if (kv.key == "input_dim")
            ck.input_dim = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        else if (kv.key == "encoder_layers")
            n_enc_layers = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        else if (kv.key == "config.tau")
            ck.config.tau = parse_double(kv.value, kv.key.c_str());
        else if (kv.key == "config.lambda_c")
            ck.config.lambda_c = parse_double(kv.value, kv.key.c_str());
        else if (kv.key == "config.lambda_m")
            ck.config.lambda_m = parse_double(kv.value, kv.key.c_str());
        else if (kv.key == "config.lambda_t")
            ck.config.lambda_t = parse_double(kv.value, kv.key.c_str());
        else if (kv.key == "config.batch_size")
            ck.config.batch_size = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        else if (kv.key == "config.epochs")
            ck.config.epochs = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        else if (kv.key == "config.learning_rate")
            ck.config.learning_rate = parse_double(kv.value, kv.key.c_str());
        else if (kv.key == "config.momentum")
            ck.config.momentum = parse_double(kv.value, kv.key.c_str());
        else if (kv.key == "config.seed")
            ck.config.seed = static_cast<std::uint64_t>(parse_double(kv.value, kv.key.c_str()));
        else if (kv.key == "config.hidden_dim")
            ck.config.hidden_dim = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        else if (kv.key == "config.embed_dim")
            ck.config.embed_dim = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        else if (kv.key == "config.proj_dim")
            ck.config.proj_dim = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        else
            throw BadConfig(path + ": unknown key '" + kv.key + "'");
    }
    for (std::size_t l = 0; l < n_enc_layers; ++l)
        ck.model.encoder.layers.push_back(layers.get("encoder" + std::to_string(l)));
    ck.model.projection.layer = layers.get("projection");
    ck.model.heads.mask_decoder = layers.get("mask_decoder");
    ck.model.heads.temporal_predictor = layers.get("temporal_predictor");

    ck.model.encoder.validate_chaining();
    if (ck.model.encoder.input_dim() != ck.input_dim)
        throw DimensionMismatch(path + ": encoder input does not match input_dim");
    const std::size_t m = ck.model.encoder.output_dim();
    if (ck.model.projection.layer.in_dim() != m ||
        ck.model.heads.mask_decoder.in_dim() != m ||
        ck.model.heads.mask_decoder.out_dim() != ck.input_dim ||
        ck.model.heads.temporal_predictor.in_dim() != m ||
        ck.model.heads.temporal_predictor.out_dim() != m)
        throw DimensionMismatch(path + ": head dims do not chain with encoder");
    return ck;
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
    auto in = open_input(path);
    return load_checkpoint(in, path);
}

// ---- model bundle ----

/// The deployable model: normalization + schema, encoder, selected subset
/// and trained classifier, with the provenance needed to reproduce it.
struct ModelBundle {
    FeatureSchema schema;
    NormalizationParams norm;
    EncoderParams encoder;
    std::vector<std::size_t> subset;
    ClassifierParams classifier;

    struct Provenance {
        std::uint64_t seed = 0;
        std::string config_digest;
        FitnessBreakdown search_fitness;
    } provenance;

    void validate() const {
        encoder.validate_chaining();
        const std::size_t m = encoder.output_dim();
        if (subset.empty()) throw InvalidDimensions("bundle: empty subset");
        for (std::size_t i : subset)
            if (i >= m) throw DimensionMismatch("bundle: subset index out of range");
        if (classifier.weights.size() != subset.size())
            throw DimensionMismatch("bundle: classifier width != subset size");
        if (encoded_feature_names(schema, norm).size() != encoder.input_dim())
            throw SchemaMismatch("bundle: encoder input width != encoded schema width");
    }
};

inline std::string serialize_bundle(const ModelBundle& b) {
    std::ostringstream out;
    out << "# flowguard-bundle v1\n";
    out << "seed=" << b.provenance.seed << "\n";
    out << "config_digest=" << b.provenance.config_digest << "\n";
    out << "fitness.value=" << fmt_double(b.provenance.search_fitness.value) << "\n";
    out << "fitness.accuracy=" << fmt_double(b.provenance.search_fitness.accuracy) << "\n";
    out << "fitness.fpr=" << fmt_double(b.provenance.search_fitness.fpr) << "\n";
    out << "fitness.cost=" << fmt_double(b.provenance.search_fitness.cost) << "\n";
    out << "encoder_layers=" << b.encoder.layers.size() << "\n";
    {
        std::string subset;
        for (std::size_t i = 0; i < b.subset.size(); ++i) {
            if (i) subset.push_back(',');
            subset += std::to_string(b.subset[i]);
        }
        out << "subset=" << subset << "\n";
    }
    // normalizer block, one prefixed line per entry
    {
        std::ostringstream norm;
        save_normalizer(norm, b.schema, b.norm);
        std::istringstream in(norm.str());
        std::string line;
        std::getline(in, line); // skip magic
        while (std::getline(in, line)) out << "norm." << line << "\n";
    }
    for (std::size_t l = 0; l < b.encoder.layers.size(); ++l)
        detail::write_layer(out, "encoder" + std::to_string(l), b.encoder.layers[l]);
    out << "classifier.weights=" << join_doubles(b.classifier.weights) << "\n";
    out << "classifier.bias=" << fmt_double(b.classifier.bias) << "\n";
    out << "classifier.learning_rate=" << fmt_double(b.classifier.hyper.learning_rate) << "\n";
    out << "classifier.l2_penalty=" << fmt_double(b.classifier.hyper.l2_penalty) << "\n";
    return out.str();
}

inline std::string bundle_digest(const ModelBundle& b) {
    return digest_hex(serialize_bundle(b));
}

inline void save_bundle_file(const std::string& path, const ModelBundle& b) {
    auto out = open_output(path);
    out << serialize_bundle(b);
}

inline ModelBundle load_bundle(std::istream& in, const std::string& path) {
    expect_magic(in, "# flowguard-bundle v1", path);
    ModelBundle b;
    detail::LayerReader layers;
    std::size_t n_enc_layers = 2;
    std::ostringstream norm_lines;
    norm_lines << "# flowguard-normalizer v1\n";
    std::string line;
    KvLine kv;
    while (std::getline(in, line)) {
        if (!parse_kv(line, kv)) continue;
        if (layers.consume(kv)) continue;
        if (kv.key == "encoder_layers") {
            n_enc_layers = static_cast<std::size_t>(parse_double(kv.value, kv.key.c_str()));
        } else if (kv.key.rfind("norm.", 0) == 0) {
            norm_lines << kv.key.substr(5) << "=" << kv.value << "\n";
        } else if (kv.key == "seed") {
            b.provenance.seed = static_cast<std::uint64_t>(parse_double(kv.value, "seed"));
        } else if (kv.key == "config_digest") {
            b.provenance.config_digest = kv.value;
        } else if (kv.key == "fitness.value") {
            b.provenance.search_fitness.value = parse_double(kv.value, kv.key.c_str());
        } else if (kv.key == "fitness.accuracy") {
            b.provenance.search_fitness.accuracy = parse_double(kv.value, kv.key.c_str());
        } else if (kv.key == "fitness.fpr") {
            b.provenance.search_fitness.fpr = parse_double(kv.value, kv.key.c_str());
        } else if (kv.key == "fitness.cost") {
            b.provenance.search_fitness.cost = parse_double(kv.value, kv.key.c_str());
        } else if (kv.key == "subset") {
            for (const auto& tok : split_string(kv.value, ','))
                if (!tok.empty())
                    b.subset.push_back(static_cast<std::size_t>(parse_double(tok, "subset")));
        } else if (kv.key.rfind("classifier.", 0) == 0) {
            if (kv.key == "classifier.weights")
                b.classifier.weights = parse_doubles(kv.value);
            else if (kv.key == "classifier.bias")
                b.classifier.bias = parse_double(kv.value, kv.key.c_str());
            else if (kv.key == "classifier.learning_rate")
                b.classifier.hyper.learning_rate = parse_double(kv.value, kv.key.c_str());
            else if (kv.key == "classifier.l2_penalty")
                b.classifier.hyper.l2_penalty = parse_double(kv.value, kv.key.c_str());
            else
                throw BadConfig(path + ": unknown key '" + kv.key + "'");
        } else {
            throw BadConfig(path + ": unknown key '" + kv.key + "'");
        }
    }
    {
        std::istringstream norm_in(norm_lines.str());
        NormalizerArtifact a = load_normalizer(norm_in, path);
        b.schema = std::move(a.schema);
        b.norm = std::move(a.params);
    }
    for (std::size_t l = 0; l < n_enc_layers; ++l)
        b.encoder.layers.push_back(layers.get("encoder" + std::to_string(l)));
    b.validate();
    return b;
}

inline ModelBundle load_bundle_file(const std::string& path) {
    auto in = open_input(path);
    return load_bundle(in, path);
}

} // namespace flowguard
