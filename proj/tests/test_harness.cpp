#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fraclab/experiment.hpp"

using namespace fraclab;
using harness::ExperimentConfig;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {
json base_config(const std::string& outdir) {
    return json{{"params", {{"alpha", 1.5}, {"d", 2}, {"lambda", 5.0}}},
                {"grid", {{"Lt", 4.0}, {"Lx", 16.0}, {"Nt", 16}, {"Nx", 16}}},
                {"seed", 11},
                {"output_dir", outdir},
                {"experiments", json::array()}};
}
} // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("sha256 known vectors") {
    CHECK(harness::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(harness::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config validation names the offending field") {
    json bad = base_config("x");
    bad["params"]["alpha"] = 3.0;
    try {
        ExperimentConfig::parse(bad, "x");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("params.alpha") != std::string::npos);
    }
    json bad2 = base_config("x");
    bad2["grid"]["Nx"] = 48;
    CHECK_THROWS_AS(ExperimentConfig::parse(bad2, "x"), ConfigError);
    const fs::path scratch = fs::temp_directory_path() / "fraclab_harness_badtype";
    fs::remove_all(scratch);
    json bad3 = base_config(scratch.string());
    bad3["experiments"] = json::array({json{{"type", "warp"}}});
    ExperimentConfig cfg = ExperimentConfig::parse(bad3, scratch);
    CHECK_THROWS_AS(harness::run_experiment(cfg), ConfigError);
    fs::remove_all(scratch);
}

TEST_CASE("empty experiment list yields a manifest with only the config") {
    const fs::path dir = fs::temp_directory_path() / "fraclab_harness_empty";
    fs::remove_all(dir);
    ExperimentConfig cfg = ExperimentConfig::parse(base_config(dir.string()), dir);
    const fs::path manifest = harness::run_experiment(cfg);
    std::ifstream in(manifest);
    json m = json::parse(in);
    CHECK(m["artifacts"].size() == 1);
    CHECK(m["artifacts"][0]["name"] == "config_resolved.json");
    // report over it: empty summary (header only)
    const fs::path sum = harness::report(manifest);
    std::ifstream s(sum);
    std::string line, all;
    int lines = 0;
    while (std::getline(s, line)) {
        ++lines;
        all += line;
    }
    CHECK(lines == 1);
    fs::remove_all(dir);
}

TEST_CASE("reruns with identical config and seed are byte-identical") {
    json cfg_json = base_config("");
    cfg_json["experiments"] = json::array(
        {json{{"type", "kernel"}, {"gamma", 2.0}, {"tmin", 0.2}, {"tmax", 1.0}, {"xmax", 3.0}, {"grid_n", 5}},
         json{{"type", "sde"},
              {"drift", json{{"type", "bump"}, {"amplitude", 0.4}, {"radius", 1.5}}},
              {"n_cutoff", 4},
              {"T", 0.05},
              {"dt", 0.01},
              {"paths", 200},
              {"seed", 9}}});
    const fs::path d1 = fs::temp_directory_path() / "fraclab_rerun_1";
    const fs::path d2 = fs::temp_directory_path() / "fraclab_rerun_2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    json j1 = cfg_json;
    j1["output_dir"] = d1.string();
    json j2 = cfg_json;
    j2["output_dir"] = d2.string();
    const fs::path m1 = harness::run_experiment(ExperimentConfig::parse(j1, d1));
    const fs::path m2 = harness::run_experiment(ExperimentConfig::parse(j2, d2));
    std::ifstream f1(m1), f2(m2);
    json mj1 = json::parse(f1), mj2 = json::parse(f2);
    REQUIRE(mj1["artifacts"].size() == mj2["artifacts"].size());
    for (std::size_t i = 1; i < mj1["artifacts"].size(); ++i) {
        // skip config_resolved.json (embeds the differing output_dir)
        if (mj1["artifacts"][i]["name"] == "config_resolved.json") continue;
        CHECK(mj1["artifacts"][i]["sha256"] == mj2["artifacts"][i]["sha256"]);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("report aggregates module json into a summary") {
    const fs::path dir = fs::temp_directory_path() / "fraclab_harness_report";
    fs::remove_all(dir);
    json cfg_json = base_config(dir.string());
    cfg_json["experiments"] = json::array(
        {json{{"type", "kernel"}, {"gamma", 2.0}, {"tmin", 0.2}, {"tmax", 1.0}, {"xmax", 3.0}, {"grid_n", 5}}});
    const fs::path manifest = harness::run_experiment(ExperimentConfig::parse(cfg_json, dir));
    const fs::path sum = harness::report(manifest);
    std::ifstream s(sum);
    std::string body((std::istreambuf_iterator<char>(s)), std::istreambuf_iterator<char>());
    CHECK(body.find("kernel_report.json,kernel,c_hat") != std::string::npos);
    // a missing artifact is detected
    fs::remove(dir / "kernel_report.json");
    CHECK_THROWS_AS(harness::report(manifest), MissingArtifact);
    fs::remove_all(dir);
}

TEST_SUITE_END();
