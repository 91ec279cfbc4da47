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

#include "oracles.hpp"
#include "qdaqp/adm.hpp"

using namespace qdaqp;

namespace {

// One existing representative at the origin with unit sigma.
Codebook unit_codebook() {
    Codebook cb(2);
    ClusterStats st;
    st.variance = 1.0;
    st.member_count = 10;
    cb.add({0.0, 0.0}, st);
    return cb;
}

std::vector<QueryAnswerPair> pairs_of(std::size_t n) {
    std::vector<QueryAnswerPair> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({{double(i), 0.0}, double(i)});
    return out;
}

}  // namespace

TEST_CASE("sign step") {
    QueryVector w{0.0, 0.0};
    CHECK(sign_step(w, QueryVector{3.0, -2.0}, 0.1) == 2);
    CHECK(w[0] == doctest::Approx(0.1));
    CHECK(w[1] == doctest::Approx(-0.1));
    const QueryVector before = w;
    CHECK(sign_step(w, before, 0.5) == 0);
    CHECK(w == before);
}

TEST_CASE("forwarding rule") {
    const Codebook cb = unit_codebook();
    const AdmConfig cfg;  // lambda 3
    // w_new far to the right; the queries below are all closer to it than to the origin.
    const AdaptationSession s = AdaptationSession::anchored({4.0, 0.0});

    const RouteDecision inside = should_forward(cb, s, QueryVector{2.5, 0.0}, cfg);
    CHECK(inside.closest_is_new);
    CHECK(inside.kind == RouteKind::kLocal);
    CHECK(inside.serving == 0);

    const RouteDecision outside = should_forward(cb, s, QueryVector{4.0, 0.0}, cfg);
    CHECK(outside.closest_is_new);
    CHECK(outside.kind == RouteKind::kForward);

    // Closest to the converged representative: always local, whatever the distance.
    const AdaptationSession far = AdaptationSession::anchored({100.0, 0.0});
    const RouteDecision known = should_forward(cb, far, QueryVector{20.0, 0.0}, cfg);
    CHECK_FALSE(known.closest_is_new);
    CHECK(known.kind == RouteKind::kLocal);
    CHECK(known.rival_is_new);
}

TEST_CASE("ties go to the existing representative") {
    const Codebook cb = unit_codebook();
    const AdaptationSession s = AdaptationSession::anchored({10.0, 0.0});
    const RouteDecision r = should_forward(cb, s, QueryVector{5.0, 0.0}, AdmConfig{});
    CHECK_FALSE(r.closest_is_new);
    CHECK(r.kind == RouteKind::kLocal);
}

TEST_CASE("gamma follows one over one plus the buffer sizes") {
    AdaptationSession s = AdaptationSession::anchored({0.0, 0.0});
    CHECK(s.gamma() == 1.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 1);
    for (int i = 0; i < 30; ++i) {
        s.ingest_forwarded(QueryVector{g(rng), g(rng)}, 1.0);
        CHECK(s.gamma() * (1.0 + s.buffer().size() + s.affiliate_pairs()) == 1.0);
    }

    std::map<std::size_t, AffiliateTrack> aff;
    aff[7] = AffiliateTrack{{0.0, 0.0}, pairs_of(5)};
    const AdaptationSession r = AdaptationSession::restore({0.0, 0.0}, true, pairs_of(4), aff, 0.0);
    CHECK(r.gamma() == doctest::Approx(0.1));
}

TEST_CASE("forwarded queries move the prototype by one signed step") {
    AdaptationSession s = AdaptationSession::anchored({0.0, 0.0});
    s.ingest_forwarded(QueryVector{3.0, -2.0}, 4.0);
    // gamma was 1 for the first step.
    CHECK(s.w_new() == QueryVector{1.0, -1.0});
    CHECK(s.last_delta() == doctest::Approx(std::sqrt(2.0)));
    CHECK(s.gamma() == doctest::Approx(0.5));
    const QueryVector w = s.w_new();
    s.ingest_forwarded(w, 1.0);
    CHECK(s.w_new() == w);
    CHECK(s.last_delta() == 0.0);
}

TEST_CASE("provisional session adopts the first forwarded query") {
    AdaptationSession s = AdaptationSession::provisional({9.0, 9.0});
    CHECK_FALSE(s.is_anchored());
    s.ingest_forwarded(QueryVector{2.0, 3.0}, 1.0);
    CHECK(s.is_anchored());
    CHECK(s.w_new() == QueryVector{2.0, 3.0});
}

TEST_CASE("affiliate criterion") {
    const Codebook cb = unit_codebook();
    AdmConfig cfg;
    AdaptationSession s = AdaptationSession::anchored({50.0, 0.0});
    const double g0 = s.gamma();
    // Rival of (2, 0) over {origin, w_new} is w_new (far); use a query whose rival is the origin.
    CHECK(s.ingest_affiliate(1, QueryVector{26.0, 0.0}, 1.0, cb, cfg) == false);
    CHECK(s.affiliate_pairs() == 0);

    // With w_new closer than the origin the origin is the rival: 2.0 is within 3 sigma of it.
    AdaptationSession near = AdaptationSession::anchored({2.5, 0.0});
    CHECK(near.ingest_affiliate(1, QueryVector{2.0, 0.0}, 1.0, cb, cfg));
    CHECK(near.affiliate_pairs() == 1);
    CHECK(near.gamma() < g0);
    const double g1 = near.gamma();
    CHECK(near.ingest_affiliate(1, QueryVector{2.2, 0.0}, 1.0, cb, cfg));
    CHECK(near.gamma() < g1);
    CHECK(near.affiliates().at(1).pairs.size() == 2);
    CHECK_FALSE(near.ingest_affiliate(2, QueryVector{4.0, 0.0}, 1.0, cb, cfg));

    cfg.affiliate_criterion = AffiliateCriterion::kBeyondRadius;
    AdaptationSession inv = AdaptationSession::anchored({2.5, 0.0});
    CHECK(inv.ingest_affiliate(2, QueryVector{4.0, 0.0}, 1.0, cb, cfg));
    CHECK_FALSE(inv.ingest_affiliate(2, QueryVector{2.0, 0.0}, 1.0, cb, cfg));
}

TEST_CASE("convergence guard") {
    AdmConfig cfg;
    const AdaptationSession ok = AdaptationSession::restore({0.0}, true, pairs_of(20), {}, 0.007);
    CHECK(check_convergence(ok, cfg));
    const AdaptationSession few = AdaptationSession::restore({0.0}, true, pairs_of(19), {}, 0.0);
    CHECK_FALSE(check_convergence(few, cfg));
    const AdaptationSession moving = AdaptationSession::restore({0.0}, true, pairs_of(40), {}, 0.009);
    CHECK_FALSE(check_convergence(moving, cfg));
}

TEST_CASE("larger c converges sooner on the same stream") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<QueryVector> stream(5000);
    for (auto& q : stream) q = {g(rng), g(rng), g(rng)};
    auto buffered_until = [&](double c) {
        AdmConfig cfg;
        cfg.c = c;
        AdaptationSession s = AdaptationSession::anchored({3.0, 3.0, 3.0});
        for (const auto& q : stream) {
            s.ingest_forwarded(q, 0.0);
            if (check_convergence(s, cfg)) break;
        }
        return s.buffer().size();
    };
    const std::size_t loose = buffered_until(0.05);
    const std::size_t mid = buffered_until(0.008);
    const std::size_t tight = buffered_until(0.002);
    CHECK(loose < mid);
    CHECK(mid < tight);
}

TEST_CASE("sign iterate settles near the median of a skewed stream") {
    std::mt19937_64 rng(3);
    std::lognormal_distribution<double> ln(0.0, 1.0);
    AdaptationSession s = AdaptationSession::anchored({0.0, 0.0});
    std::vector<double> xs, ys;
    for (int i = 0; i < 10000; ++i) {
        const double a = ln(rng), b = 2.0 * ln(rng);
        xs.push_back(a);
        ys.push_back(b);
        s.ingest_forwarded(QueryVector{a, b}, 0.0);
    }
    const double mx = oracle::median(xs), my = oracle::median(ys);
    double ax = 0, ay = 0;
    for (double v : xs) ax += v;
    for (double v : ys) ay += v;
    ax /= xs.size();
    ay /= ys.size();
    CHECK(std::abs(s.w_new()[0] - mx) < std::abs(s.w_new()[0] - ax));
    CHECK(std::abs(s.w_new()[1] - my) < std::abs(s.w_new()[1] - ay));
}

TEST_CASE("forwarding fraction under Chebyshev") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<QueryVector> qs(20000);
    for (auto& q : qs) q = {g(rng), g(rng)};
    Codebook cb(2);
    cb.add({0.0, 0.0});
    cb.refresh_stats(qs);
    for (double lambda : {3.0, 4.0, 5.0}) {
        std::size_t out = 0;
        for (const auto& q : qs) out += beyond_radius(query_distance(q, cb.prototype(0)), cb.stats(0), lambda);
        CHECK(double(out) / qs.size() <= 1.0 / (lambda * lambda) + 0.02);
    }
}

TEST_CASE("finalize appends one representative per trained buffer") {
    Codebook cb = unit_codebook();
    ModelSpec spec;
    spec.kind = ModelKind::kRidge;
    std::vector<TrainedModel> models{TrainedModel::linear(spec, {0.0, 0.0}, 0.0)};
    AdmConfig cfg;

    std::vector<QueryAnswerPair> buf;
    for (int i = 0; i < 25; ++i) buf.push_back({{10.0 + 0.1 * i, 1.0 * (i % 3)}, 2.0 * i});
    const AdaptationSession plain = AdaptationSession::restore({10.0, 1.0}, true, buf, {}, 0.0);
    Codebook cb1 = cb;
    auto m1 = models;
    const FinalizeResult r1 = finalize(plain, cb1, m1, spec, cfg);
    CHECK(cb1.size() == 2);
    CHECK(m1.size() == 2);
    CHECK(r1.new_ids == std::vector<std::size_t>{1});
    CHECK(cb1.stats(1).member_count == 25);
    CHECK(cb1.prototype(1) == QueryVector{10.0, 1.0});

    std::map<std::size_t, AffiliateTrack> aff;
    aff[1] = AffiliateTrack{{20.0, 0.0}, std::vector<QueryAnswerPair>(buf.begin(), buf.begin() + 20)};
    aff[2] = AffiliateTrack{{30.0, 0.0}, buf};
    aff[3] = AffiliateTrack{{40.0, 0.0}, std::vector<QueryAnswerPair>(buf.begin(), buf.begin() + 5)};
    const AdaptationSession rich = AdaptationSession::restore({10.0, 1.0}, true, buf, aff, 0.0);
    Codebook cb2 = cb;
    auto m2 = models;
    const FinalizeResult r2 = finalize(rich, cb2, m2, spec, cfg);
    CHECK(cb2.size() == 4);
    CHECK(r2.finalized_affiliates == std::vector<std::size_t>{1, 2});

    const AdaptationSession early = AdaptationSession::restore({10.0, 1.0}, true, pairs_of(3), {}, 0.0);
    CHECK_THROWS_AS(finalize(early, cb2, m2, spec, cfg), Error);
}

TEST_CASE("holdout EPE") {
    ModelSpec spec;
    spec.kind = ModelKind::kRidge;
    spec.ridge_alpha = 1e-9;
    std::vector<QueryAnswerPair> exact;
    for (int i = 0; i < 40; ++i) exact.push_back({{double(i)}, 3.0 * i - 2.0});
    CHECK(estimate_epe(spec, exact) < 1e-6);
    CHECK_THROWS_AS(estimate_epe(spec, {}), Error);
}
