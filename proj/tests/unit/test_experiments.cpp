/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qdaqp/experiments.hpp"
#include "qdaqp/serialization.hpp"

using namespace qdaqp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qdaqp_exp_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("every key reads back what was set") {
    ExperimentConfig cfg;
    cfg.set("data.columns", "7");
    cfg.set("adm.lambda", "4.5");
    cfg.set("model.kind", "ridge");
    cfg.set("adm.affiliate", "beyond");
    CHECK(cfg.get("data.columns") == "7");
    CHECK(cfg.get("adm.lambda") == "4.5");
    CHECK(cfg.get("model.kind") == "RIDGE");
    CHECK(cfg.get("adm.affiliate") == "beyond");
    CHECK(cfg.uniform.columns == 7);
    for (const auto& key : ExperimentConfig::keys()) CHECK_NOTHROW(cfg.get(key));
}

TEST_CASE("text form round trips") {
    ExperimentConfig cfg;
    cfg.set("seed", "42");
    cfg.set("data.noise_sd", "0.1");
    cfg.set("workload.agg", "SUM");
    cfg.set("workload.target", "2");
    std::istringstream in(cfg.to_text());
    const ExperimentConfig back = ExperimentConfig::parse(in);
    CHECK(back.to_text() == cfg.to_text());
    CHECK(back.seed == 42);
    CHECK(back.scenario.data.noise_sd == 0.1);
}

TEST_CASE("parse handles comments and reports bad lines") {
    std::istringstream in("# comment\n\nseed = 5  # trailing\n data.rows=100 \n");
    const ExperimentConfig cfg = ExperimentConfig::parse(in);
    CHECK(cfg.seed == 5);
    CHECK(cfg.get("data.rows") == "100");
    std::istringstream bad("just words\n");
    CHECK(kind_of([&] { ExperimentConfig::parse(bad); }) == ErrorKind::kConfig);
    CHECK(kind_of([] { ExperimentConfig::load("/nonexistent/qdaqp.cfg"); }) == ErrorKind::kConfig);
}

TEST_CASE("invalid values are configuration errors") {
    ExperimentConfig cfg;
    CHECK(kind_of([&] { cfg.set("no.such.key", "1"); }) == ErrorKind::kConfig);
    CHECK(kind_of([&] { cfg.set("data.rows", "many"); }) == ErrorKind::kConfig);
    CHECK(kind_of([&] { cfg.set("model.kind", "xgb"); }) == ErrorKind::kConfig);

    ExperimentConfig zero;
    zero.set("data.columns", "0");
    CHECK(kind_of([&] { zero.validate(); }) == ErrorKind::kConfig);
    ExperimentConfig h;
    h.set("cdm.h_multiplier", "2");
    CHECK(kind_of([&] { h.validate(); }) == ErrorKind::kConfig);
    ExperimentConfig missing;
    missing.set("data.path", "/nonexistent/data.csv");
    CHECK(kind_of([&] { missing.validate(); }) == ErrorKind::kConfig);
    CHECK_NOTHROW(ExperimentConfig{}.validate());
}

TEST_CASE("gen-data and gen-workload write their files deterministically") {
    const fs::path dir = scratch("gen");
    ExperimentConfig cfg;
    cfg.out = dir.string();
    cfg.set("data.kind", "uniform");
    cfg.set("data.columns", "4");
    cfg.set("data.rows", "500");
    cfg.set("workload.count", "30");
    const auto d1 = cmd_gen_data(cfg);
    REQUIRE(d1 == std::vector<std::string>{(dir / "data.csv").string()});
    const std::string first = slurp(dir / "data.csv");
    std::istringstream csv(first);
    const DataTable t = read_csv(csv);
    CHECK(t.columns() == 4);
    CHECK(t.rows() == 500);
    cmd_gen_data(cfg);
    CHECK(slurp(dir / "data.csv") == first);

    cmd_gen_workload(cfg);
    std::ifstream wl(dir / "workload.jsonl");
    const Workload w = read_workload_jsonl(wl, 4);
    CHECK(w.queries.size() == 30);
    fs::remove_all(dir);
}

TEST_CASE("bootstrap from a workload file") {
    const fs::path dir = scratch("boot");
    ExperimentConfig gen;
    gen.out = dir.string();
    gen.set("data.kind", "uniform");
    gen.set("data.columns", "3");
    gen.set("data.rows", "2000");
    gen.set("workload.count", "400");
    cmd_gen_data(gen);
    cmd_gen_workload(gen);

    ExperimentConfig cfg = gen;
    cfg.set("data.path", (dir / "data.csv").string());
    cfg.set("workload.path", (dir / "workload.jsonl").string());
    CHECK_NOTHROW(cfg.validate());
    const auto files = cmd_bootstrap(cfg);
    CHECK(files.size() == 2);
    const AnalystDevice dev = load_device(slurp(dir / "device.json"));
    CHECK(dev.codebook().size() >= 2);
    const auto summary = nlohmann::json::parse(slurp(dir / "bootstrap.json"));
    CHECK(summary.at("K").get<std::size_t>() == dev.codebook().size());
    fs::remove_all(dir);
}

TEST_CASE("drift experiment report") {
    ExperimentConfig cfg;
    const DriftReport r = run_drift_experiment(cfg);
    CHECK(r.t_drift_true == 66);
    REQUIRE(r.t_detect.has_value());
    CHECK(*r.t_detect >= 66);
    REQUIRE(r.t_finalize.has_value());
    CHECK(r.k_after > r.k_before);
    CHECK(r.stream.size() == 666);
    CHECK(r.post_error < 1.5 * r.pre_error);
    CHECK(r.ablation_error > 3.0 * r.pre_error);
    CHECK(r.ablation.oracle_calls() == 0);
}

TEST_CASE("run-drift summary schema") {
    const fs::path dir = scratch("drift");
    ExperimentConfig cfg;
    cfg.out = dir.string();
    cmd_run_drift(cfg);
    for (const char* f : {"metrics_adaptive.csv", "metrics_ablation.csv", "errors.csv", "summary.json"}) {
        CHECK(fs::exists(dir / f));
    }
    const auto s = nlohmann::json::parse(slurp(dir / "summary.json"));
    for (const char* k : {"t_drift_true", "t_D", "K_before", "K_after", "oracle_calls", "median_rel_error"}) {
        CHECK(s.contains(k));
    }
    fs::remove_all(dir);
}
