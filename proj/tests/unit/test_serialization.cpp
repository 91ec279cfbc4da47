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

#include "qdaqp/serialization.hpp"
#include "qdaqp/simulator.hpp"

using namespace qdaqp;

namespace {

const SpatialScenario& scenario() {
    static const SpatialScenario s{ScenarioConfig{}};
    return s;
}

const SpaceLayout& layout() {
    static const SpaceLayout l = space_layout(16);
    return l;
}

std::vector<QueryAnswerPair> toy_pairs() {
    std::vector<QueryAnswerPair> out;
    for (int i = 0; i < 30; ++i) out.push_back({{0.1 * i, std::sin(0.3 * i)}, 2.0 * i + std::cos(i)});
    return out;
}

}  // namespace

TEST_CASE("models round trip for every kind") {
    const auto data = toy_pairs();
    for (auto kind : {ModelKind::kRidge, ModelKind::kSgdLinear, ModelKind::kKnn}) {
        ModelSpec spec;
        spec.kind = kind;
        const TrainedModel m = train(spec, data);
        const TrainedModel back = model_from_json(model_to_json(m));
        CHECK(back.spec() == m.spec());
        for (const auto& p : data) CHECK(back.predict(p.query) == m.predict(p.query));
        CHECK(model_size_bytes(m) == model_to_json(m).dump().size());
    }
}

TEST_CASE("codebook round trip") {
    Codebook cb(2);
    cb.add({0.25, -1.0}, ClusterStats{3, 0.5, 0.01, 2.0});
    cb.add({1.0 / 3.0, 7.0}, ClusterStats{4, 1.5, 0.02, 3.0});
    const Codebook back = codebook_from_json(codebook_to_json(cb));
    REQUIRE(back.size() == 2);
    CHECK(back.dim() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(back.prototype(k) == cb.prototype(k));
        CHECK(back.stats(k).variance == cb.stats(k).variance);
        CHECK(back.stats(k).epe == cb.stats(k).epe);
        CHECK(back.stats(k).member_count == cb.stats(k).member_count);
    }
}

TEST_CASE("rejects foreign or future documents") {
    nlohmann::json j = codebook_to_json(Codebook(1));
    j["version"] = kFormatVersion + 1;
    CHECK_THROWS_AS(codebook_from_json(j), Error);
    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"format", "nope"}}), Error);
    try {
        load_device("{not json");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kIo);
    }
}

TEST_CASE("bootstrap is deterministic") {
    const AnalystDevice a = scenario().bootstrap(layout().base, 300, 11);
    const AnalystDevice b = scenario().bootstrap(layout().base, 300, 11);
    CHECK(dump_device(a) == dump_device(b));
    const AnalystDevice c = scenario().bootstrap(layout().base, 300, 12);
    CHECK(dump_device(a) != dump_device(c));
}

TEST_CASE("a device restored mid-session continues identically") {
    AnalystDevice live = scenario().bootstrap(layout().base, 300, 13);
    const auto novel = scenario().sample(layout().spaces[15], 500, 131);
    std::size_t i = 0;
    while (i < novel.size() && (live.mode() != EngineMode::kBuffering || live.oracle_calls() < 5)) {
        live.answer(novel[i].query, scenario().oracle());
        ++i;
    }
    REQUIRE(live.mode() == EngineMode::kBuffering);

    const std::string text = dump_device(live);
    AnalystDevice copy = load_device(text);
    CHECK(dump_device(copy) == text);
    CHECK(copy.mode() == EngineMode::kBuffering);
    CHECK(copy.session()->buffer().size() == live.session()->buffer().size());

    for (; i < novel.size(); ++i) {
        const AnswerResult a = live.answer(novel[i].query, scenario().oracle());
        const AnswerResult b = copy.answer(novel[i].query, scenario().oracle());
        CHECK(a.value == b.value);
        CHECK(a.provenance == b.provenance);
        CHECK(live.mode() == copy.mode());
    }
    CHECK(live.codebook().size() == copy.codebook().size());
    CHECK(dump_device(live) == dump_device(copy));
}
