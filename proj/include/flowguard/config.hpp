// config.hpp - line-oriented key=value run configuration with dotted
// section prefixes; command-line flags override file values
#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>

#include "flowguard/dataset.hpp"
#include "flowguard/qga.hpp"
#include "flowguard/ssl.hpp"
#include "flowguard/textio.hpp"

namespace flowguard {

struct ConfigMap {
    std::map<std::string, std::string> values;

    static ConfigMap load_file(const std::string& path) {
        auto in = open_input(path);
        ConfigMap cfg;
        std::string line;
        KvLine kv;
        while (std::getline(in, line))
            if (parse_kv(line, kv)) cfg.values[kv.key] = kv.value;
        return cfg;
    }

    bool has(const std::string& key) const { return values.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values[key] = value; }

    double get_double(const std::string& key, double fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        try {
            return parse_double(it->second, key.c_str());
        } catch (const Error&) {
            throw BadConfig("config key '" + key + "' is not numeric: " + it->second);
        }
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) const {
        return static_cast<std::size_t>(get_double(key, static_cast<double>(fallback)));
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        return static_cast<std::uint64_t>(get_double(key, static_cast<double>(fallback)));
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        if (it->second == "1" || it->second == "true") return true;
        if (it->second == "0" || it->second == "false") return false;
        throw BadConfig("config key '" + key + "' must be 0/1/true/false");
    }
};

/// Assembled configuration for one pipeline run. Every subsystem seed is
/// derived from the single root seed with the stream-splitting rule, so a
/// run is reproducible end to end from (inputs, config, seed).
struct RunConfig {
    std::uint64_t seed = 1;
    SplitSpec split;
    SSLConfig ssl;
    AugmentationConfig aug;
    QGAConfig qga;
    FitnessWeights weights;

    static RunConfig from_map(const ConfigMap& m) {
        RunConfig c;
        c.seed = m.get_u64("seed", c.seed);
        c.split.train_fraction = m.get_double("split.train", c.split.train_fraction);
        c.split.val_fraction = m.get_double("split.val", c.split.val_fraction);
        c.split.test_fraction = m.get_double("split.test", c.split.test_fraction);
        c.split.stratified = m.get_bool("split.stratified", c.split.stratified);
        c.ssl.tau = m.get_double("ssl.tau", c.ssl.tau);
        c.ssl.lambda_c = m.get_double("ssl.lambda_c", c.ssl.lambda_c);
        c.ssl.lambda_m = m.get_double("ssl.lambda_m", c.ssl.lambda_m);
        c.ssl.lambda_t = m.get_double("ssl.lambda_t", c.ssl.lambda_t);
        c.ssl.batch_size = m.get_size("ssl.batch_size", c.ssl.batch_size);
        c.ssl.epochs = m.get_size("ssl.epochs", c.ssl.epochs);
        c.ssl.learning_rate = m.get_double("ssl.learning_rate", c.ssl.learning_rate);
        c.ssl.momentum = m.get_double("ssl.momentum", c.ssl.momentum);
        c.ssl.hidden_dim = m.get_size("ssl.hidden_dim", c.ssl.hidden_dim);
        c.ssl.embed_dim = m.get_size("ssl.embed_dim", c.ssl.embed_dim);
        c.ssl.proj_dim = m.get_size("ssl.proj_dim", c.ssl.proj_dim);
        c.aug.noise_sigma = m.get_double("aug.noise_sigma", c.aug.noise_sigma);
        c.aug.mask_prob = m.get_double("aug.mask_prob", c.aug.mask_prob);
        c.qga.population = m.get_size("qga.population", c.qga.population);
        c.qga.generations = m.get_size("qga.generations", c.qga.generations);
        c.qga.delta_theta_magnitude =
            m.get_double("qga.delta_theta", c.qga.delta_theta_magnitude);
        c.qga.stagnation_patience = m.get_size("qga.patience", c.qga.stagnation_patience);
        c.weights.w_acc = m.get_double("fitness.w_acc", c.weights.w_acc);
        c.weights.w_fpr = m.get_double("fitness.w_fpr", c.weights.w_fpr);
        c.weights.w_cost = m.get_double("fitness.w_cost", c.weights.w_cost);
        c.derive_seeds();
        return c;
    }

    // one root, one tag per subsystem
    void derive_seeds() {
        split.seed = splitmix64(seed ^ fnv1a64("split"));
        ssl.seed = splitmix64(seed ^ fnv1a64("ssl"));
        qga.seed = splitmix64(seed ^ fnv1a64("qga"));
    }

    std::string canonical_text() const {
        std::ostringstream out;
        out << "seed=" << seed << "\n";
        out << "split.train=" << fmt_double(split.train_fraction) << "\n";
        out << "split.val=" << fmt_double(split.val_fraction) << "\n";
        out << "split.test=" << fmt_double(split.test_fraction) << "\n";
        out << "split.stratified=" << (split.stratified ? 1 : 0) << "\n";
        out << "ssl.tau=" << fmt_double(ssl.tau) << "\n";
        out << "ssl.lambda_c=" << fmt_double(ssl.lambda_c) << "\n";
        out << "ssl.lambda_m=" << fmt_double(ssl.lambda_m) << "\n";
        out << "ssl.lambda_t=" << fmt_double(ssl.lambda_t) << "\n";
        out << "ssl.batch_size=" << ssl.batch_size << "\n";
        out << "ssl.epochs=" << ssl.epochs << "\n";
        out << "ssl.learning_rate=" << fmt_double(ssl.learning_rate) << "\n";
        out << "ssl.momentum=" << fmt_double(ssl.momentum) << "\n";
        out << "ssl.hidden_dim=" << ssl.hidden_dim << "\n";
        out << "ssl.embed_dim=" << ssl.embed_dim << "\n";
        out << "ssl.proj_dim=" << ssl.proj_dim << "\n";
        out << "aug.noise_sigma=" << fmt_double(aug.noise_sigma) << "\n";
        out << "aug.mask_prob=" << fmt_double(aug.mask_prob) << "\n";
        out << "qga.population=" << qga.population << "\n";
        out << "qga.generations=" << qga.generations << "\n";
        out << "qga.delta_theta=" << fmt_double(qga.delta_theta_magnitude) << "\n";
        out << "qga.patience=" << qga.stagnation_patience << "\n";
        out << "fitness.w_acc=" << fmt_double(weights.w_acc) << "\n";
        out << "fitness.w_fpr=" << fmt_double(weights.w_fpr) << "\n";
        out << "fitness.w_cost=" << fmt_double(weights.w_cost) << "\n";
        return out.str();
    }

    std::string digest() const { return digest_hex(canonical_text()); }
};

} // namespace flowguard
