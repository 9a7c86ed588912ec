#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flowguard/textio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = FLOWGUARD_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// shared tiny-run config: small encoder so it fits the 10-dim synth data
fs::path write_config(const fs::path& dir) {
    fs::path cfg = dir / "run.cfg";
    std::ofstream out(cfg);
    out << "seed=7\n";
    out << "ssl.hidden_dim=12\n";
    out << "ssl.embed_dim=6\n";
    out << "ssl.proj_dim=4\n";
    out << "ssl.epochs=5\n";
    out << "ssl.batch_size=32\n";
    out << "qga.population=10\n";
    out << "qga.generations=12\n";
    return cfg;
}

} // namespace

TEST_CASE("synth writes deterministic artifacts and validates args") {
    auto dir_a = fresh_dir("fg_cli_synth_a");
    auto dir_b = fresh_dir("fg_cli_synth_b");
    const std::string flags = "synth --n 300 --informative 3 --noise 7 --sep 2.5 --seed 7";
    REQUIRE(run(flags + " --out " + dir_a.string()) == 0);
    REQUIRE(run(flags + " --out " + dir_b.string()) == 0);
    REQUIRE(fs::exists(dir_a / "dataset.fm"));
    REQUIRE(fs::exists(dir_a / "informative.idx"));
    REQUIRE(fs::exists(dir_a / "dataset.norm"));
    REQUIRE(read_file(dir_a / "dataset.fm") == read_file(dir_b / "dataset.fm"));
    REQUIRE(read_file(dir_a / "informative.idx") == read_file(dir_b / "informative.idx"));

    REQUIRE(run("synth --informative 0 --out " + dir_a.string()) == 2);
    REQUIRE(run("bogus-subcommand") == 2);
}

TEST_CASE("full pipeline chain on synthetic data") {
    auto dir = fresh_dir("fg_cli_chain");
    auto cfg = write_config(dir);
    const std::string base = " --config " + cfg.string() + " --out " + dir.string();

    REQUIRE(run("synth --n 300 --informative 3 --noise 7 --sep 2.5" + base) == 0);
    REQUIRE(run("pretrain --data " + (dir / "dataset.fm").string() + base) == 0);
    REQUIRE(fs::exists(dir / "encoder.ckpt"));
    // loss curve has exactly `epochs` entries
    const std::string curve = read_file(dir / "loss_curve.csv");
    REQUIRE(std::count(curve.begin(), curve.end(), '\n') == 2 + 5);

    REQUIRE(run("optimize --data " + (dir / "dataset.fm").string() + " --norm " +
                (dir / "dataset.norm").string() + " --checkpoint " +
                (dir / "encoder.ckpt").string() + base) == 0);
    REQUIRE(fs::exists(dir / "model.bundle"));
    REQUIRE(fs::exists(dir / "optimize_report.txt"));

    // report's final fitness equals the last trace entry
    {
        std::ifstream in(dir / "optimize_report.json");
        json rep = json::parse(in);
        auto trace = rep.at("trace").get<std::vector<double>>();
        REQUIRE(rep.at("fitness").at("value").get<double>() == trace.back());
    }

    REQUIRE(run("evaluate --bundle " + (dir / "model.bundle").string() + " --data " +
                (dir / "dataset.fm").string() + base + " --json") == 0);
    REQUIRE(fs::exists(dir / "metrics.txt"));
    {
        std::ifstream in(dir / "metrics.json");
        json m = json::parse(in);
        REQUIRE(m.at("format_version") == 1);
        REQUIRE(m.at("counts").contains("tp"));
        const double acc = m.at("metrics").at("accuracy").get<double>();
        REQUIRE(acc >= 0.0);
        REQUIRE(acc <= 1.0);
        // one-decimal percent from the json value appears in the text table
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.1f", acc * 100.0);
        REQUIRE(read_file(dir / "metrics.txt").find(buf) != std::string::npos);
    }

    REQUIRE(run("report --in " + (dir / "metrics.json").string() + " --out " +
                dir.string()) == 0);
    REQUIRE(read_file(dir / "report.txt").find("Training Time (s)") != std::string::npos);
    {
        std::ifstream in(dir / "report.json");
        json rows = json::parse(in);
        REQUIRE(rows.size() == 1);
        REQUIRE(rows[0].at("method") == "flowguard");
        // timings sidecar was picked up, so the time column is populated
        REQUIRE(rows[0].at("search_seconds").get<double>() > 0.0);
    }

    // published comparison rows render alongside, values never asserted
    const std::string reference = std::string(FLOWGUARD_SOURCE_DIR) +
                                  "/tests/fixtures/reference_results.csv";
    REQUIRE(run("report --in " + (dir / "metrics.json").string() + " --reference " +
                reference + " --out " + dir.string()) == 0);
    const std::string table = read_file(dir / "report.txt");
    REQUIRE(table.find("QGA-SSL (2025) [nsl_kdd]") != std::string::npos);
    REQUIRE(table.find("96.7") != std::string::npos);
}

TEST_CASE("optimize --oracle records the optimality gap") {
    auto dir = fresh_dir("fg_cli_oracle");
    auto cfg = write_config(dir);
    const std::string base = " --config " + cfg.string() + " --out " + dir.string();
    REQUIRE(run("synth --n 250 --informative 3 --noise 7 --sep 2.5" + base) == 0);
    REQUIRE(run("pretrain --data " + (dir / "dataset.fm").string() + base) == 0);
    REQUIRE(run("optimize --data " + (dir / "dataset.fm").string() + " --norm " +
                (dir / "dataset.norm").string() + " --checkpoint " +
                (dir / "encoder.ckpt").string() + " --oracle" + base) == 0);
    const std::string report = read_file(dir / "optimize_report.txt");
    REQUIRE(report.find("oracle.fitness=") != std::string::npos);
    REQUIRE(report.find("oracle.gap=") != std::string::npos);
    std::ifstream in(dir / "optimize_report.json");
    json rep = json::parse(in);
    REQUIRE(rep.at("oracle_fitness").get<double>() >=
            rep.at("fitness").at("value").get<double>() - 1e-12);
}

TEST_CASE("pipeline commands are idempotent in their artifacts") {
    auto dir1 = fresh_dir("fg_cli_idem1");
    auto dir2 = fresh_dir("fg_cli_idem2");
    for (const auto& dir : {dir1, dir2}) {
        auto cfg = write_config(dir);
        const std::string base = " --config " + cfg.string() + " --out " + dir.string();
        REQUIRE(run("synth --n 300 --informative 3 --noise 7 --sep 2.5" + base) == 0);
        REQUIRE(run("pretrain --data " + (dir / "dataset.fm").string() + base) == 0);
        REQUIRE(run("optimize --data " + (dir / "dataset.fm").string() + " --norm " +
                    (dir / "dataset.norm").string() + " --checkpoint " +
                    (dir / "encoder.ckpt").string() + base) == 0);
        REQUIRE(run("evaluate --bundle " + (dir / "model.bundle").string() + " --data " +
                    (dir / "dataset.fm").string() + base) == 0);
    }
    for (const char* name : {"dataset.fm", "dataset.norm", "encoder.ckpt", "loss_curve.csv",
                             "model.bundle", "optimize_report.txt", "optimize_report.json",
                             "metrics.txt", "metrics.json"})
        REQUIRE(read_file(dir1 / name) == read_file(dir2 / name));
}

TEST_CASE("lambda-t validation against non-temporal data") {
    auto dir = fresh_dir("fg_cli_lambdat");
    auto cfg = write_config(dir);
    const std::string base = " --config " + cfg.string() + " --out " + dir.string();
    REQUIRE(run("synth --n 200 --informative 2 --noise 8 --sep 2.0" + base) == 0);

    const std::string data = (dir / "dataset.fm").string();
    // default config: temporal loss silently disabled on non-temporal data
    REQUIRE(run("pretrain --data " + data + base) == 0);
    // explicit zero is fine
    REQUIRE(run("pretrain --data " + data + " --lambda-t 0" + base) == 0);
    // explicit positive value on non-temporal data is a config error
    REQUIRE(run("pretrain --data " + data + " --lambda-t 0.5" + base) == 2);
}

TEST_CASE("missing inputs and schema mismatches map to exit codes") {
    auto dir = fresh_dir("fg_cli_errors");
    auto cfg = write_config(dir);
    const std::string base = " --config " + cfg.string() + " --out " + dir.string();

    REQUIRE(run("pretrain --data " + (dir / "nope.fm").string() + base) == 3);
    REQUIRE(run("evaluate --bundle " + (dir / "nope.bundle").string() + " --data " +
                (dir / "nope.fm").string() + base) == 3);

    // build a valid bundle on 10-dim data, then evaluate against 6-dim data
    REQUIRE(run("synth --n 300 --informative 3 --noise 7 --sep 2.5" + base) == 0);
    REQUIRE(run("pretrain --data " + (dir / "dataset.fm").string() + base) == 0);
    REQUIRE(run("optimize --data " + (dir / "dataset.fm").string() + " --norm " +
                (dir / "dataset.norm").string() + " --checkpoint " +
                (dir / "encoder.ckpt").string() + base) == 0);
    auto other = fresh_dir("fg_cli_errors_other");
    REQUIRE(run("synth --n 200 --informative 2 --noise 4 --sep 2.0 --seed 9 --out " +
                other.string()) == 0);
    REQUIRE(run("evaluate --bundle " + (dir / "model.bundle").string() + " --data " +
                (other / "dataset.fm").string() + base) == 4);

    // corrupt the artifact version line
    auto bad = dir / "bad.fm";
    std::ofstream(bad) << "# flowguard-matrix v99\n";
    REQUIRE(run("pretrain --data " + bad.string() + base) == 4);
}

TEST_CASE("preprocess encodes a raw csv with a schema") {
    auto dir = fresh_dir("fg_cli_preprocess");
    auto cfg = write_config(dir);
    const std::string fixture = std::string(FLOWGUARD_SOURCE_DIR) +
                                "/tests/fixtures/nsl_kdd_20.csv";
    const std::string schema = std::string(FLOWGUARD_SOURCE_DIR) + "/schemas/nsl_kdd.schema";
    REQUIRE(run("preprocess --data " + fixture + " --schema " + schema + " --config " +
                cfg.string() + " --out " + dir.string()) == 0);
    REQUIRE(fs::exists(dir / "dataset.fm"));
    REQUIRE(fs::exists(dir / "dataset.norm"));
    const std::string fm = read_file(dir / "dataset.fm");
    REQUIRE(fm.find("# temporal=1") != std::string::npos);
}
