// flowguard CLI: synth | preprocess | pretrain | optimize | evaluate | report
//
// Exit codes: 0 success, 2 config/validation error, 3 missing or unreadable
// input, 4 schema/version mismatch.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowguard/artifacts.hpp"
#include "flowguard/config.hpp"
#include "flowguard/dataset.hpp"
#include "flowguard/metrics.hpp"
#include "flowguard/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flowguard;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kMissingInput = 3;
constexpr int kSchemaError = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool json_out = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "root seed (overrides config)");
    cmd->add_flag("--json", args.json_out, "also print machine-readable output");
}

ConfigMap load_config(const CommonArgs& args) {
    ConfigMap map;
    if (!args.config_path.empty()) map = ConfigMap::load_file(args.config_path);
    if (args.seed) map.set("seed", std::to_string(*args.seed));
    return map;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw MissingInput("cannot create output directory '" + dir + "'");
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw MissingInput("input file '" + path + "' does not exist");
}

// timing sidecar; regenerated lines keep whatever the other stage wrote
void update_timings(const std::string& path, const std::string& key, double seconds) {
    std::map<std::string, std::string> entries;
    if (fs::exists(path)) {
        std::ifstream in(path);
        std::string line;
        KvLine kv;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#' && parse_kv(line, kv))
                entries[kv.key] = kv.value;
    }
    entries[key] = fmt_double(seconds);
    std::ofstream out(path);
    out << "# flowguard-timings v1\n";
    for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
}

json metrics_to_json(const MetricScores& s) {
    auto opt = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
    };
    return json{{"accuracy", opt(s.accuracy)},
                {"precision", opt(s.precision)},
                {"recall", opt(s.recall)},
                {"f1", opt(s.f1)},
                {"fpr", opt(s.fpr)}};
}

MetricScores metrics_from_json(const json& j) {
    MetricScores s;
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    s.accuracy = opt("accuracy");
    s.precision = opt("precision");
    s.recall = opt("recall");
    s.f1 = opt("f1");
    s.fpr = opt("fpr");
    return s;
}

// ---- synth ----

struct SynthArgs {
    CommonArgs common;
    std::size_t n = 2000;
    std::size_t informative = 4;
    std::size_t noise = 8;
    double sep = 3.0;
};

int cmd_synth(const SynthArgs& args) {
    ConfigMap map = load_config(args.common);
    RunConfig cfg = RunConfig::from_map(map);
    ensure_out_dir(args.common.out_dir);

    SynthData data = synth_dataset(args.n, args.informative, args.noise, args.sep, cfg.seed);
    const fs::path out(args.common.out_dir);
    save_matrix_file((out / "dataset.fm").string(), data.matrix);
    {
        auto f = open_output((out / "informative.idx").string());
        f << "# flowguard-informative v1\n";
        std::string idx;
        for (std::size_t i = 0; i < data.informative.size(); ++i) {
            if (i) idx.push_back(',');
            idx += std::to_string(data.informative[i]);
        }
        f << "indices=" << idx << "\n";
    }
    {
        auto norm = identity_normalizer("synth_d" + std::to_string(data.matrix.n_dims()),
                                        data.matrix.feature_names);
        auto f = open_output((out / "dataset.norm").string());
        save_normalizer(f, norm.schema, norm.params);
    }
    std::cout << "synth: wrote " << data.matrix.n_rows() << " rows x "
              << data.matrix.n_dims() << " dims to " << (out / "dataset.fm").string() << "\n";
    return kOk;
}

// ---- preprocess ----

struct PreprocessArgs {
    CommonArgs common;
    std::string data_path;
    std::string schema_path;
    bool no_header = false;
    bool no_pseudo_time = false;
};

int cmd_preprocess(const PreprocessArgs& args) {
    ConfigMap map = load_config(args.common);
    RunConfig cfg = RunConfig::from_map(map);
    require_file(args.data_path);
    require_file(args.schema_path);
    ensure_out_dir(args.common.out_dir);

    FeatureSchema schema = load_schema_file(args.schema_path);
    RawTable table = load_csv(args.data_path, schema, !args.no_header);

    const std::size_t label_col = schema.label_index();
    std::vector<int> labels(table.size());
    for (std::size_t i = 0; i < table.size(); ++i)
        labels[i] = schema.is_normal_label(table.rows[i][label_col]) ? 0 : 1;

    const bool pseudo_time = !args.no_pseudo_time;
    SplitIndices idx = split_indices(labels, pseudo_time, cfg.split);

    RawTable train;
    train.schema = schema;
    for (std::size_t i : idx.train) train.rows.push_back(table.rows[i]);
    NormalizationParams params = fit_normalizer(train);
    EncodedMatrix m = encode(table, params, pseudo_time);

    const fs::path out(args.common.out_dir);
    save_matrix_file((out / "dataset.fm").string(), m);
    {
        auto f = open_output((out / "dataset.norm").string());
        save_normalizer(f, schema, params);
    }
    std::cout << "preprocess: " << m.n_rows() << " rows, d'=" << m.n_dims()
              << " encoded dims (normalizer fitted on " << idx.train.size()
              << " training rows)\n";
    return kOk;
}

// ---- pretrain ----

struct PretrainArgs {
    CommonArgs common;
    std::string data_path;
    std::optional<double> lambda_t;
};

int cmd_pretrain(const PretrainArgs& args) {
    ConfigMap map = load_config(args.common);
    if (args.lambda_t) map.set("ssl.lambda_t", fmt_double(*args.lambda_t));
    RunConfig cfg = RunConfig::from_map(map);
    require_file(args.data_path);
    ensure_out_dir(args.common.out_dir);

    EncodedMatrix data = load_matrix_file(args.data_path);
    // lambda_t only applies to temporal data; an explicit nonzero value on
    // non-temporal data is a config error, the default silently drops to 0
    if (!data.row_order_is_temporal && cfg.ssl.lambda_t > 0.0) {
        if (map.has("ssl.lambda_t"))
            throw NotTemporal("ssl.lambda_t > 0 but the dataset has no temporal order");
        cfg.ssl.lambda_t = 0.0;
    }

    auto parts = split(data, cfg.split);
    const auto t0 = std::chrono::steady_clock::now();
    TrainSSLResult trained = train_ssl(parts.train, cfg.ssl, cfg.aug);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path out(args.common.out_dir);
    save_checkpoint_file((out / "encoder.ckpt").string(), trained.model, cfg.ssl);
    {
        auto f = open_output((out / "loss_curve.csv").string());
        f << "# flowguard-losscurve v1\n";
        f << "epoch,loss\n";
        for (std::size_t e = 0; e < trained.loss_curve.size(); ++e)
            f << e << "," << fmt_double(trained.loss_curve[e]) << "\n";
    }
    update_timings((out / "timings.txt").string(), "pretrain_seconds", seconds);
    std::cout << "pretrain: final objective "
              << (trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back()) << " after "
              << trained.loss_curve.size() << " epochs\n";
    return kOk;
}

// ---- optimize ----

struct OptimizeArgs {
    CommonArgs common;
    std::string data_path;
    std::string norm_path;
    std::string checkpoint_path;
    bool oracle = false;
};

int cmd_optimize(const OptimizeArgs& args) {
    ConfigMap map = load_config(args.common);
    RunConfig cfg = RunConfig::from_map(map);
    require_file(args.data_path);
    require_file(args.norm_path);
    require_file(args.checkpoint_path);
    ensure_out_dir(args.common.out_dir);

    EncodedMatrix data = load_matrix_file(args.data_path);
    NormalizerArtifact norm = load_normalizer_file(args.norm_path);
    Checkpoint ck = load_checkpoint_file(args.checkpoint_path);

    if (encoded_feature_names(norm.schema, norm.params) != data.feature_names)
        throw SchemaMismatch("normalizer does not describe this dataset artifact");
    if (ck.model.encoder.input_dim() != data.n_dims())
        throw SchemaMismatch("checkpoint encoder expects " +
                             std::to_string(ck.model.encoder.input_dim()) +
                             " dims, dataset has " + std::to_string(data.n_dims()));

    auto parts = split(data, cfg.split);
    OptimizeResult res =
        optimize_pipeline(parts.train, parts.val, ck.model.encoder, norm, cfg.qga,
                          cfg.weights, cfg.digest(), args.oracle);

    const fs::path out(args.common.out_dir);
    save_bundle_file((out / "model.bundle").string(), res.bundle);

    const auto& rep = res.report;
    std::string subset_str, bits_str, trace_str;
    for (std::size_t i = 0; i < res.bundle.subset.size(); ++i) {
        if (i) subset_str.push_back(',');
        subset_str += std::to_string(res.bundle.subset[i]);
    }
    {
        // reconstruct the final bitstring for the report
        std::vector<bool> bits(rep.embedding_dim + HyperGrids::n_bits(), false);
        for (std::size_t i : res.bundle.subset) bits[i] = true;
        // grid indices from the trained hyper
        HyperGrids grids;
        for (std::size_t g = 0; g < 4; ++g) {
            if (grids.learning_rate[g] == res.bundle.classifier.hyper.learning_rate) {
                bits[rep.embedding_dim] = (g & 2) != 0;
                bits[rep.embedding_dim + 1] = (g & 1) != 0;
            }
            if (grids.l2_penalty[g] == res.bundle.classifier.hyper.l2_penalty) {
                bits[rep.embedding_dim + 2] = (g & 2) != 0;
                bits[rep.embedding_dim + 3] = (g & 1) != 0;
            }
        }
        for (bool b : bits) bits_str.push_back(b ? '1' : '0');
    }
    for (std::size_t i = 0; i < rep.trace.size(); ++i) {
        if (i) trace_str.push_back(' ');
        trace_str += fmt_double(rep.trace[i]);
    }

    {
        auto f = open_output((out / "optimize_report.txt").string());
        f << "# flowguard-optimize-report v1\n";
        f << "embedding_dim=" << rep.embedding_dim << "\n";
        f << "subset_size=" << rep.subset_size << "\n";
        f << "subset=" << subset_str << "\n";
        f << "best_bits=" << bits_str << "\n";
        f << "fitness.value=" << fmt_double(rep.best.value) << "\n";
        f << "fitness.accuracy=" << fmt_double(rep.best.accuracy) << "\n";
        f << "fitness.fpr=" << fmt_double(rep.best.fpr) << "\n";
        f << "fitness.cost=" << fmt_double(rep.best.cost) << "\n";
        f << "evaluations_used=" << rep.evaluations_used << "\n";
        f << "generations_run=" << rep.generations_run << "\n";
        if (rep.oracle_fitness) {
            f << "oracle.fitness=" << fmt_double(*rep.oracle_fitness) << "\n";
            f << "oracle.gap=" << fmt_double(*rep.oracle_fitness - rep.best.value) << "\n";
        }
        f << "trace=" << trace_str << "\n";
    }
    {
        json j{{"format_version", 1},
               {"embedding_dim", rep.embedding_dim},
               {"subset_size", rep.subset_size},
               {"subset", res.bundle.subset},
               {"fitness",
                {{"value", rep.best.value},
                 {"accuracy", rep.best.accuracy},
                 {"fpr", rep.best.fpr},
                 {"cost", rep.best.cost}}},
               {"evaluations_used", rep.evaluations_used},
               {"generations_run", rep.generations_run},
               {"trace", rep.trace},
               {"bundle_digest", bundle_digest(res.bundle)}};
        if (rep.oracle_fitness) j["oracle_fitness"] = *rep.oracle_fitness;
        auto f = open_output((out / "optimize_report.json").string());
        f << j.dump(2) << "\n";
    }
    update_timings((out / "timings.txt").string(), "search_seconds", rep.search_seconds);
    {
        // per-generation wall clock is timing data, so it stays out of the
        // deterministic report artifacts
        std::string gens;
        for (std::size_t i = 0; i < rep.generation_seconds.size(); ++i) {
            if (i) gens.push_back(' ');
            gens += fmt_double(rep.generation_seconds[i]);
        }
        std::ofstream f((out / "timings.txt").string(), std::ios::app);
        f << "generation_seconds=" << gens << "\n";
    }

    std::cout << "optimize: fitness " << rep.best.value << " with " << rep.subset_size << "/"
              << rep.embedding_dim << " dims after " << rep.generations_run
              << " generations (" << rep.evaluations_used << " evaluations)\n";
    if (rep.oracle_fitness)
        std::cout << "optimize: oracle fitness " << *rep.oracle_fitness << " (gap "
                  << (*rep.oracle_fitness - rep.best.value) << ")\n";
    std::cout << "optimize: bundle digest " << bundle_digest(res.bundle) << "\n";
    return kOk;
}

// ---- evaluate ----

struct EvaluateArgs {
    CommonArgs common;
    std::string bundle_path;
    std::string data_path;
    std::string method = "flowguard";
};

int cmd_evaluate(const EvaluateArgs& args) {
    ConfigMap map = load_config(args.common);
    RunConfig cfg = RunConfig::from_map(map);
    require_file(args.bundle_path);
    require_file(args.data_path);
    ensure_out_dir(args.common.out_dir);

    ModelBundle bundle = load_bundle_file(args.bundle_path);
    EncodedMatrix data = load_matrix_file(args.data_path);
    auto parts = split(data, cfg.split);

    EndToEndResult pred = predict_encoded(bundle, parts.test);
    ConfusionCounts counts = confusion(parts.test.labels, pred.labels);
    MetricScores ms = scores(counts);

    RunRecord record;
    record.method = args.method;
    record.metrics = ms;
    const std::string table = render_table({record});

    const fs::path out(args.common.out_dir);
    {
        auto f = open_output((out / "metrics.txt").string());
        f << table;
    }
    json j{{"format_version", 1},
           {"method", args.method},
           {"n_rows", parts.test.n_rows()},
           {"counts",
            {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}}},
           {"metrics", metrics_to_json(ms)},
           {"subset_size", bundle.subset.size()},
           {"bundle_digest", bundle_digest(bundle)}};
    {
        auto f = open_output((out / "metrics.json").string());
        f << j.dump(2) << "\n";
    }
    std::cout << table;
    std::cout << "evaluate: " << parts.test.n_rows() << " rows at " << pred.rows_per_second
              << " rows/s\n";
    if (args.common.json_out) std::cout << j.dump(2) << "\n";
    return kOk;
}

// ---- report ----

struct ReportArgs {
    CommonArgs common;
    std::vector<std::string> inputs;
    std::string reference_path;
};

int cmd_report(const ReportArgs& args) {
    if (args.inputs.empty()) throw BadConfig("report: need at least one --in metrics.json");
    std::vector<RunRecord> records;
    for (const auto& path : args.inputs) {
        require_file(path);
        std::ifstream in(path);
        json j = json::parse(in);
        RunRecord r;
        r.method = j.value("method", "unknown");
        r.metrics = metrics_from_json(j.at("metrics"));
        const auto sidecar = fs::path(path).parent_path() / "timings.txt";
        if (fs::exists(sidecar)) {
            std::ifstream tin(sidecar);
            std::string line;
            KvLine kv;
            while (std::getline(tin, line)) {
                if (line.empty() || line[0] == '#' || !parse_kv(line, kv)) continue;
                if (kv.key == "pretrain_seconds")
                    r.pretrain_seconds = parse_double(kv.value, kv.key.c_str());
                if (kv.key == "search_seconds")
                    r.search_seconds = parse_double(kv.value, kv.key.c_str());
            }
        }
        records.push_back(std::move(r));
    }
    if (!args.reference_path.empty()) {
        // published comparison rows, percentages on disk; for side-by-side
        // context only, nothing is asserted against them
        require_file(args.reference_path);
        std::ifstream in(args.reference_path);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            auto cells = split_string(strip_cr(line), ',');
            if (cells.size() != 8 || cells[0].empty()) continue;
            RunRecord r;
            r.method = cells[0] + " [" + cells[1] + "]";
            r.metrics.accuracy = parse_double(cells[2], "accuracy") / 100.0;
            r.metrics.precision = parse_double(cells[3], "precision") / 100.0;
            r.metrics.recall = parse_double(cells[4], "recall") / 100.0;
            r.metrics.f1 = parse_double(cells[5], "f1") / 100.0;
            r.metrics.fpr = parse_double(cells[6], "fpr") / 100.0;
            r.search_seconds = parse_double(cells[7], "time");
            records.push_back(std::move(r));
        }
    }
    const std::string table = render_table(records);
    ensure_out_dir(args.common.out_dir);
    {
        auto f = open_output((fs::path(args.common.out_dir) / "report.txt").string());
        f << table;
    }
    json arr = json::array();
    for (const auto& r : records)
        arr.push_back({{"method", r.method},
                       {"metrics", metrics_to_json(r.metrics)},
                       {"pretrain_seconds", r.pretrain_seconds},
                       {"search_seconds", r.search_seconds}});
    {
        auto f = open_output((fs::path(args.common.out_dir) / "report.json").string());
        f << arr.dump(2) << "\n";
    }
    std::cout << table;
    if (args.common.json_out) std::cout << arr.dump(2) << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowguard: self-supervised flow embeddings with evolutionary "
                 "feature selection for intrusion detection"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a planted-feature dataset");
    synth_cmd->add_option("--n", synth_args.n, "number of rows");
    synth_cmd->add_option("--informative", synth_args.informative, "informative dims");
    synth_cmd->add_option("--noise", synth_args.noise, "noise dims");
    synth_cmd->add_option("--sep", synth_args.sep, "class separation in standard deviations");
    add_common(synth_cmd, synth_args.common);

    PreprocessArgs pre_args;
    auto* pre_cmd = app.add_subcommand("preprocess", "encode a raw traffic csv");
    pre_cmd->add_option("--data", pre_args.data_path, "csv file")->required();
    pre_cmd->add_option("--schema", pre_args.schema_path, "schema file")->required();
    pre_cmd->add_flag("--no-header", pre_args.no_header, "csv has no header row");
    pre_cmd->add_flag("--no-pseudo-time", pre_args.no_pseudo_time,
                      "do not treat file order as temporal order");
    add_common(pre_cmd, pre_args.common);

    PretrainArgs pretrain_args;
    auto* pretrain_cmd = app.add_subcommand("pretrain", "train the representation encoder");
    pretrain_cmd->add_option("--data", pretrain_args.data_path, "dataset artifact")
        ->required();
    pretrain_cmd->add_option("--lambda-t", pretrain_args.lambda_t,
                             "temporal loss weight (overrides config)");
    add_common(pretrain_cmd, pretrain_args.common);

    OptimizeArgs opt_args;
    auto* opt_cmd = app.add_subcommand("optimize", "search subsets and hyperparameters");
    opt_cmd->add_option("--data", opt_args.data_path, "dataset artifact")->required();
    opt_cmd->add_option("--norm", opt_args.norm_path, "normalizer artifact")->required();
    opt_cmd->add_option("--checkpoint", opt_args.checkpoint_path, "encoder checkpoint")
        ->required();
    opt_cmd->add_flag("--oracle", opt_args.oracle,
                      "also run the exhaustive oracle (small dims only)");
    add_common(opt_cmd, opt_args.common);

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "score a bundle on the test split");
    eval_cmd->add_option("--bundle", eval_args.bundle_path, "model bundle")->required();
    eval_cmd->add_option("--data", eval_args.data_path, "dataset artifact")->required();
    eval_cmd->add_option("--method", eval_args.method, "method name for the report row");
    add_common(eval_cmd, eval_args.common);

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "merge run records into a table");
    report_cmd->add_option("--in", report_args.inputs, "metrics.json files");
    report_cmd->add_option("--reference", report_args.reference_path,
                           "published comparison rows (csv)");
    add_common(report_cmd, report_args.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth_args);
        if (*pre_cmd) return cmd_preprocess(pre_args);
        if (*pretrain_cmd) return cmd_pretrain(pretrain_args);
        if (*opt_cmd) return cmd_optimize(opt_args);
        if (*eval_cmd) return cmd_evaluate(eval_args);
        if (*report_cmd) return cmd_report(report_args);
    } catch (const MissingInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kMissingInput;
    } catch (const EmptyFile& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kMissingInput;
    } catch (const SchemaMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSchemaError;
    } catch (const VersionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSchemaError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kOk;
}
