#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tpbs/density.hpp"
#include "tpbs/model_io.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(TPBS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Workspace {
    fs::path dir;

    Workspace() : dir(fs::temp_directory_path() / "tpbs_cli_test") {
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::ofstream csv(dir / "toy.csv");
        csv << "a,b,c,y\n";
        for (int i = 0; i < 60; ++i) {
            const double a = u(rng), b = u(rng), c = u(rng);
            csv << a << ',' << b << ',' << c << ',' << a * b + c << '\n';
        }
        write("m.json", R"({"name": "toy", "csv_path": "toy.csv", "target_column": "y", "task": "regression",
                            "counts": {"train": 30, "val": 15, "test": 15}, "seeds": [1, 2]})");
        write("train.json", R"({"manifest": "m.json", "split": 0,
                                "train": {"rank": 2, "num_basis": 5, "max_epochs": 40}})");
    }
    ~Workspace() { fs::remove_all(dir); }

    void write(const std::string& name, const std::string& text) const { std::ofstream(dir / name) << text; }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

nlohmann::json read_json(const std::string& path) {
    std::ifstream is(path);
    return nlohmann::json::parse(is);
}

}  // namespace

TEST_CASE("cli: train, eval, de and fit-density on a toy dataset") {
    Workspace w;
    REQUIRE(run("train --config " + w.path("train.json") + " --out " + w.path("run0")) == 0);
    REQUIRE(fs::exists(w.path("run0/model_best_val.tpbs")));
    const auto report = read_json(w.path("run0/report.json"));
    CHECK(report["best_val"]["test"].contains("relative_mse"));
    CHECK(report["curve"]["epoch"].size() == 40);
    const auto model = tpbs::load_model(w.path("run0/model_best_val.tpbs"));
    CHECK(model.input_dim() == 3);
    CHECK(model.rank() == 2);

    w.write("eval.json", R"({"manifest": "m.json", "models": ["run0/model_best_val.tpbs"], "num_missing": [0, 1],
                             "density": {"components": 1, "bins_per_dim": 4, "em_iters": 3}})");
    REQUIRE(run("eval --config " + w.path("eval.json") + " --out " + w.path("ev")) == 0);
    std::ifstream pred(w.path("ev/predictions.csv"));
    std::string header;
    std::getline(pred, header);
    CHECK(header.find("estimator") != std::string::npos);
    CHECK(fs::exists(w.path("ev/summary.csv")));

    CHECK(run("de --model " + w.path("run0/model_best_val.tpbs") + " --points " + w.path("toy.csv") +
              " --rho 0.1 --out " + w.path("de.json")) == 0);
    const auto de = read_json(w.path("de.json"));
    CHECK(de.contains("decomposition"));

    CHECK(run("fit-density --config " + w.path("eval.json") + " --out " + w.path("d.tpdf")) == 0);
    const auto d = tpbs::load_density(w.path("d.tpdf"));
    CHECK(d.input_dim() == 3);

    // Overrides reach the nested train block.
    CHECK(run("train --config " + w.path("train.json") + " --set train.max_epochs=3 --out " + w.path("run1")) == 0);
    CHECK(read_json(w.path("run1/report.json"))["curve"]["epoch"].size() == 3);
}

TEST_CASE("cli: exit codes") {
    Workspace w;
    CHECK(run("") == 2);
    CHECK(run("train --config " + w.path("missing.json")) == 3);
    w.write("bad.json", "{ not json");
    CHECK(run("train --config " + w.path("bad.json")) == 3);
    CHECK(run("train --config " + w.path("train.json") + " --set train.bogus=1 --out " + w.path("x")) == 2);
    CHECK(run("train --config " + w.path("train.json") + " --set train.h=0.5 --out " + w.path("x")) == 2);
    w.write("garbage.tpbs", "not a model");
    CHECK(run("de --model " + w.path("garbage.tpbs")) == 3);
    CHECK(run("selfcheck --scale small") == 0);
    CHECK(run("selfcheck --scale small --inject-sign-flip") == 5);
}
