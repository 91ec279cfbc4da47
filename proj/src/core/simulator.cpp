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

#include "qdaqp/simulator.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

namespace qdaqp {

namespace {

using Rng = std::mt19937_64;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

SpatialScenario::SpatialScenario(ScenarioConfig cfg) : SpatialScenario(cfg, gen_spatial_table(cfg.data)) {}

SpatialScenario::SpatialScenario(ScenarioConfig cfg, DataTable table)
    : cfg_(std::move(cfg)), table_(std::move(table)), agg_{AggregateFunction::kAvg, 2} {
    if (table_.columns() < 3) fail(ErrorKind::kDimension, "scenario table needs x, y and value columns");
    cfg_.engine.validate();
    if (!(cfg_.range_fraction > 0.0) || !(cfg_.spread_fraction >= 0.0)) {
        fail(ErrorKind::kConfig, "scenario range and spread fractions must be positive");
    }
}

std::vector<LabeledQuery> SpatialScenario::sample(Point2 center, std::size_t n, std::uint64_t seed) const {
    if (n == 0) return {};
    ClusteredWorkloadConfig wc;
    wc.centers = std::vector<Point2>{center};
    wc.points_per_center = n;
    wc.center_spread_fraction = cfg_.spread_fraction;
    wc.range_fraction = cfg_.range_fraction;
    wc.range_floor = cfg_.range_floor;
    wc.stats_sample = 2000;
    wc.seed = seed;
    return gen_clustered_workload(table_, wc, agg_).workload.queries;
}

std::vector<LabeledQuery> SpatialScenario::sample_mix(std::span<const Point2> centers, std::size_t per_space,
                                                      std::uint64_t seed) const {
    ClusteredWorkloadConfig wc;
    wc.centers = std::vector<Point2>(centers.begin(), centers.end());
    wc.points_per_center = per_space;
    wc.center_spread_fraction = cfg_.spread_fraction;
    wc.range_fraction = cfg_.range_fraction;
    wc.range_floor = cfg_.range_floor;
    wc.stats_sample = 2000;
    wc.seed = seed;
    return gen_clustered_workload(table_, wc, agg_).workload.queries;
}

AnalystDevice SpatialScenario::bootstrap(std::span<const Point2> known, std::size_t per_space,
                                         std::uint64_t seed) const {
    const auto training = sample_mix(known, per_space, seed);
    EngineConfig ec = cfg_.engine;
    ec.seed = mix_seed(ec.seed, seed);
    return AnalystDevice::bootstrap(training, table_.domain(), ec);
}

Oracle SpatialScenario::oracle() const {
    return [this](const RangeQuery& q) { return execute_exact(table_, q, agg_); };
}

std::vector<Point2> space_grid(std::size_t count, double lo, double hi) {
    if (count == 0) return {};
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    const std::size_t rows = (count + cols - 1) / cols;
    std::vector<Point2> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = i / cols;
        const std::size_t c = i % cols;
        const double fx = cols > 1 ? static_cast<double>(c) / static_cast<double>(cols - 1) : 0.5;
        const double fy = rows > 1 ? static_cast<double>(r) / static_cast<double>(rows - 1) : 0.5;
        out.push_back({lo + fx * (hi - lo), lo + fy * (hi - lo)});
    }
    return out;
}

SpaceLayout space_layout(std::size_t k_spaces) {
    return {{{0.5e5, 0.5e5}, {1.5e5, 1.5e5}, {1.5e5, 0.5e5}}, space_grid(k_spaces, 3e5, 9e5)};
}

CentralSystem::CentralSystem(const DataTable& table, AggregateSpec agg) : table_(&table), agg_(agg) {
    validate_aggregate(agg_, table.columns());
}

double CentralSystem::execute(const RangeQuery& q) const { return execute_exact(*table_, q, agg_); }

std::size_t CentralSystem::log_execution(std::size_t round, std::size_t device, const RangeQuery& q, double y) {
    log_.push_back({round, device, q, y});
    return log_.size() - 1;
}

void FederationConfig::validate() const {
    if (n < 1) fail(ErrorKind::kConfig, "federation needs n >= 1 devices");
    if (k_spaces < 1) fail(ErrorKind::kConfig, "k_spaces must be >= 1");
    if (!(lambda > 0.0)) fail(ErrorKind::kConfig, "lambda must be positive");
    if (!(h_multiplier > 0.0)) fail(ErrorKind::kConfig, "h multiplier must be positive");
    if (!(c > 0.0)) fail(ErrorKind::kConfig, "c must be positive");
    if (workers < 1) fail(ErrorKind::kConfig, "workers must be >= 1");
}

double execution_rate_bound(double lambda, double beta, std::size_t n) {
    if (n < 1) fail(ErrorKind::kConfig, "bound needs n >= 1");
    return (1.0 / (lambda * lambda)) * (2.0 - std::pow(1.0 - beta, static_cast<double>(n - 1)));
}

namespace {

struct Executed {
    RangeQuery query;
    double y = 0.0;
};

/// Answers one scripted query for device i, collecting its executions.
void step_device(AnalystDevice& dev, const DeviceScript& script, std::size_t round, const CentralSystem& cs,
                 std::vector<Executed>& pending, bool& buffered, bool& active) {
    active = round < script.queries.size();
    buffered = false;
    if (!active) return;
    const LabeledQuery& lq = script.queries[round];
    Oracle oracle = [&](const RangeQuery& q) {
        const double y = cs.execute(q);
        pending.push_back({q, y});
        return y;
    };
    dev.answer(lq.query, oracle, lq.answer);
    buffered = dev.log().back().mode == EngineMode::kBuffering;
}

}  // namespace

FederationResult run_federation(const FederationConfig& cfg, std::vector<AnalystDevice>& devices,
                                std::span<const DeviceScript> scripts, CentralSystem& cs) {
    cfg.validate();
    if (devices.size() != cfg.n || scripts.size() != cfg.n) {
        fail(ErrorKind::kConfig, "federation needs exactly n devices and n scripts");
    }
    for (const auto& d : devices) {
        if (d.codebook().empty()) fail(ErrorKind::kState, "federation device is not bootstrapped");
        if (d.codebook().dim() != devices.front().codebook().dim() || d.domain() != devices.front().domain()) {
            fail(ErrorKind::kConfig, "federation devices disagree on the query space");
        }
    }
    for (auto& d : devices) {
        d.mutable_config().adm.lambda = cfg.lambda;
        d.mutable_config().adm.c = cfg.c;
        d.set_h_multiplier(cfg.h_multiplier);
    }
    std::vector<std::size_t> log_base(cfg.n), calls_base(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        log_base[i] = devices[i].log().size();
        calls_base[i] = devices[i].oracle_calls();
    }

    std::size_t total_rounds = 0;
    for (const auto& s : scripts) total_rounds = std::max(total_rounds, s.queries.size());

    FederationResult res;
    std::vector<std::vector<Executed>> pending(cfg.n);
    std::vector<char> buffered(cfg.n), active(cfg.n);

    auto after_round = [&](std::size_t round) {
        RoundStats rs;
        rs.round = round;
        for (std::size_t i = 0; i < cfg.n; ++i) {
            rs.active += active[i];
            rs.buffering += buffered[i];
        }
        for (std::size_t i = 0; i < cfg.n; ++i) {
            for (const auto& e : pending[i]) {
                cs.log_execution(round, i, e.query, e.y);
                ++rs.oracle_calls;
                for (std::size_t j = 0; j < cfg.n; ++j) {
                    if (j == i || devices[j].mode() != EngineMode::kBuffering) continue;
                    ++rs.affiliate_offers;
                    rs.affiliate_accepted += devices[j].offer_affiliate(i, e.query, e.y);
                }
            }
            pending[i].clear();
        }
        for (const auto& d : devices) rs.total_k += d.codebook().size();
        res.device_steps += rs.active;
        res.buffering_steps += rs.buffering;
        res.oracle_calls += rs.oracle_calls;
        res.affiliate_offers += rs.affiliate_offers;
        res.affiliate_accepted += rs.affiliate_accepted;
        const double steps = static_cast<double>(std::max<std::size_t>(res.device_steps, 1));
        rs.beta_hat = static_cast<double>(res.buffering_steps) / steps;
        rs.execution_rate = static_cast<double>(res.oracle_calls) / steps;
        res.rounds.push_back(rs);
    };

    const std::size_t workers = std::min(cfg.workers, cfg.n);
    if (workers <= 1) {
        for (std::size_t r = 0; r < total_rounds; ++r) {
            for (std::size_t i = 0; i < cfg.n; ++i) {
                bool b = false, a = false;
                step_device(devices[i], scripts[i], r, cs, pending[i], b, a);
                buffered[i] = b;
                active[i] = a;
            }
            after_round(r);
        }
    } else {
        std::size_t round = 0;
        std::exception_ptr error;
        std::mutex error_mu;
        auto on_barrier = [&]() noexcept {
            if (!error) {
                try {
                    after_round(round);
                } catch (...) {
                    error = std::current_exception();
                }
            }
            ++round;
        };
        std::barrier sync(static_cast<std::ptrdiff_t>(workers), on_barrier);
        auto work = [&](std::size_t w) {
            while (true) {
                const std::size_t r = round;
                if (r >= total_rounds || error) break;
                for (std::size_t i = w; i < cfg.n; i += workers) {
                    try {
                        bool b = false, a = false;
                        step_device(devices[i], scripts[i], r, cs, pending[i], b, a);
                        buffered[i] = b;
                        active[i] = a;
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!error) error = std::current_exception();
                    }
                }
                sync.arrive_and_wait();
            }
        };
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
        work(0);
        pool.clear();
        if (error) std::rethrow_exception(error);
    }

    const double steps = static_cast<double>(std::max<std::size_t>(res.device_steps, 1));
    res.beta_hat = static_cast<double>(res.buffering_steps) / steps;
    res.execution_rate = static_cast<double>(res.oracle_calls) / steps;
    res.bound = execution_rate_bound(cfg.lambda, res.beta_hat, cfg.n);

    for (std::size_t i = 0; i < cfg.n; ++i) {
        const AnalystDevice& d = devices[i];
        DeviceSummary s;
        s.final_k = d.codebook().size();
        for (std::size_t k = log_base[i]; k < d.log().size(); ++k) {
            if (d.log()[k].drift) s.detections.push_back(k - log_base[i]);
        }
        for (std::size_t dp : scripts[i].drift_points) {
            std::optional<std::size_t> delay;
            for (std::size_t t : s.detections) {
                if (t >= dp) {
                    delay = t - dp;
                    break;
                }
            }
            s.detection_delays.push_back(delay);
        }
        s.sessions = d.sessions();
        if (!s.sessions.empty()) {
            s.k_sequence.push_back(s.sessions.front().k_before);
            for (const auto& ss : s.sessions) s.k_sequence.push_back(ss.k_after);
        }
        for (std::size_t m = 1; m < s.k_sequence.size(); ++m) {
            s.k_ratios.push_back(static_cast<double>(s.k_sequence[m]) / static_cast<double>(s.k_sequence[m - 1]));
        }
        s.oracle_calls = d.oracle_calls() - calls_base[i];
        for (const auto& ss : s.sessions) s.affiliate_pairs += ss.affiliate_pairs;
        if (d.session()) s.affiliate_pairs += d.session()->affiliate_pairs();
        res.devices.push_back(std::move(s));
    }
    return res;
}

double measure_execution_rate(const FederationResult& result, std::size_t begin, std::size_t end) {
    end = std::min(end, result.rounds.size());
    std::size_t calls = 0, steps = 0;
    for (std::size_t r = begin; r < end; ++r) {
        calls += result.rounds[r].oracle_calls;
        steps += result.rounds[r].active;
    }
    return steps ? static_cast<double>(calls) / static_cast<double>(steps) : 0.0;
}

void write_round_stats_csv(std::ostream& out, const FederationResult& result) {
    out << "round,active,buffering,oracle_calls,affiliate_offers,affiliate_accepted,total_k,beta_hat,execution_rate\n";
    for (const auto& r : result.rounds) {
        out << r.round << ',' << r.active << ',' << r.buffering << ',' << r.oracle_calls << ','
            << r.affiliate_offers << ',' << r.affiliate_accepted << ',' << r.total_k << ',' << fmt(r.beta_hat)
            << ',' << fmt(r.execution_rate) << '\n';
    }
}

nlohmann::json federation_summary_json(const FederationConfig& cfg, const FederationResult& result) {
    using nlohmann::json;
    json devices = json::array();
    for (const auto& d : result.devices) {
        json delays = json::array();
        for (const auto& v : d.detection_delays) delays.push_back(v ? json(*v) : json(nullptr));
        json sessions = json::array();
        for (const auto& s : d.sessions) {
            sessions.push_back({{"opened_at", s.opened_at},
                                {"closed_at", s.closed_at},
                                {"forwarded", s.forwarded},
                                {"affiliate_pairs", s.affiliate_pairs},
                                {"affiliates", s.affiliate_sources.size()},
                                {"k_before", s.k_before},
                                {"k_after", s.k_after}});
        }
        devices.push_back({{"final_k", d.final_k},
                           {"detections", d.detections},
                           {"detection_delays", delays},
                           {"oracle_calls", d.oracle_calls},
                           {"affiliate_pairs", d.affiliate_pairs},
                           {"k_sequence", d.k_sequence},
                           {"k_ratios", d.k_ratios},
                           {"sessions", sessions}});
    }
    return {{"n", cfg.n},
            {"lambda", cfg.lambda},
            {"h_multiplier", cfg.h_multiplier},
            {"c", cfg.c},
            {"seed", cfg.seed},
            {"rounds", result.rounds.size()},
            {"device_steps", result.device_steps},
            {"oracle_calls", result.oracle_calls},
            {"affiliate_offers", result.affiliate_offers},
            {"affiliate_pairs", result.affiliate_accepted},
            {"beta_hat", result.beta_hat},
            {"execution_rate", result.execution_rate},
            {"execution_rate_bound", result.bound},
            {"devices", devices}};
}

std::vector<DeviceScript> make_drift_scripts(const SpatialScenario& scenario, std::size_t n,
                                             std::span<const Point2> known, std::span<const Point2> novel,
                                             const ScriptPlan& plan, std::uint64_t seed) {
    if (known.empty()) fail(ErrorKind::kConfig, "scripts need at least one known space");
    if (plan.drift_probability > 0.0 && novel.empty()) fail(ErrorKind::kConfig, "drift needs a novel space");
    if (!(plan.drift_window_lo >= 0.0 && plan.drift_window_lo <= plan.drift_window_hi &&
          plan.drift_window_hi <= 1.0)) {
        fail(ErrorKind::kConfig, "drift window must satisfy 0 <= lo <= hi <= 1");
    }
    std::vector<DeviceScript> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, i));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const bool drifts = unit(rng) < plan.drift_probability;
        std::size_t at = plan.rounds;
        Point2 target{};
        if (drifts) {
            const auto lo = static_cast<std::size_t>(plan.drift_window_lo * static_cast<double>(plan.rounds));
            const auto hi = static_cast<std::size_t>(plan.drift_window_hi * static_cast<double>(plan.rounds));
            at = std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng);
            target = novel[std::uniform_int_distribution<std::size_t>(0, novel.size() - 1)(rng)];
        }
        const std::size_t per_known = (at + known.size() - 1) / known.size();
        auto pre = scenario.sample_mix(known, per_known, mix_seed(seed, 1000 + i));
        pre.resize(std::min(pre.size(), at));
        out[i].queries = std::move(pre);
        if (drifts && at < plan.rounds) {
            out[i].drift_points.push_back(out[i].queries.size());
            auto post = scenario.sample(target, plan.rounds - at, mix_seed(seed, 2000 + i));
            out[i].queries.insert(out[i].queries.end(), post.begin(), post.end());
        }
    }
    return out;
}

ConvergenceResult measure_offline_convergence(const SpatialScenario& scenario, const ConvergenceConfig& cfg) {
    if (cfg.k_spaces < 1) fail(ErrorKind::kConfig, "k_spaces must be >= 1");
    if (cfg.probe_window < 1 || cfg.probe_trials < 1) fail(ErrorKind::kConfig, "probe window and trials must be >= 1");

    const auto [base, spaces] = space_layout(cfg.k_spaces);
    AnalystDevice dev = scenario.bootstrap(base, cfg.train_per_space, cfg.seed);
    const Oracle oracle = scenario.oracle();

    // Probe windows are fixed across l so the curve differences come from learning.
    std::vector<std::vector<std::vector<LabeledQuery>>> probes(cfg.k_spaces);
    for (std::size_t s = 0; s < cfg.k_spaces; ++s) {
        auto all = scenario.sample(spaces[s], cfg.probe_window * cfg.probe_trials, mix_seed(cfg.seed, 5000 + s));
        for (std::size_t t = 0; t < cfg.probe_trials; ++t) {
            probes[s].emplace_back(all.begin() + static_cast<std::ptrdiff_t>(t * cfg.probe_window),
                                   all.begin() + static_cast<std::ptrdiff_t>((t + 1) * cfg.probe_window));
        }
    }

    auto probe = [&](const AnalystDevice& d) {
        std::size_t fired = 0;
        for (std::size_t s = 0; s < cfg.k_spaces; ++s) {
            for (const auto& window : probes[s]) {
                AnalystDevice copy = d;
                copy.mutable_config().adapt = false;
                copy.reset_detector();
                bool hit = false;
                for (const auto& lq : window) {
                    copy.answer(lq.query, oracle);
                    if (copy.log().back().drift) {
                        hit = true;
                        break;
                    }
                }
                fired += hit;
            }
        }
        return static_cast<double>(fired) / static_cast<double>(cfg.k_spaces * cfg.probe_trials);
    };

    ConvergenceResult res;
    res.beta_hat.push_back(probe(dev));
    res.k_after.push_back(dev.codebook().size());
    for (std::size_t s = 0; s < cfg.k_spaces; ++s) {
        const auto stream = scenario.sample(spaces[s], cfg.max_phase, mix_seed(cfg.seed, 9000 + s));
        const std::size_t sessions_before = dev.sessions().size();
        const std::size_t calls_before = dev.oracle_calls();
        dev.reset_detector();
        for (const auto& lq : stream) {
            dev.answer(lq.query, oracle, lq.answer);
            if (dev.sessions().size() > sessions_before) break;
        }
        res.learned.push_back(dev.sessions().size() > sessions_before);
        res.phase_forwarded.push_back(dev.oracle_calls() - calls_before);
        res.beta_hat.push_back(probe(dev));
        res.k_after.push_back(dev.codebook().size());
    }
    return res;
}

void write_convergence_csv(std::ostream& out, const ConvergenceResult& result) {
    out << "l,beta_hat,beta_model,K,forwarded,learned\n";
    const double k = static_cast<double>(result.beta_hat.size() - 1);
    for (std::size_t l = 0; l < result.beta_hat.size(); ++l) {
        out << l << ',' << fmt(result.beta_hat[l]) << ',' << fmt(1.0 - static_cast<double>(l) / k) << ','
            << result.k_after[l] << ',' << (l ? result.phase_forwarded[l - 1] : 0) << ','
            << (l ? (result.learned[l - 1] ? 1 : 0) : 1) << '\n';
    }
}

AffiliateCycleResult run_affiliate_cycles(const SpatialScenario& scenario, const AffiliateCycleConfig& cfg) {
    if (cfg.n < 1 || cfg.cycles < 1) fail(ErrorKind::kConfig, "affiliate cycles need n >= 1 and cycles >= 1");
    if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) fail(ErrorKind::kConfig, "beta must lie in [0, 1]");

    const auto layout = space_layout(4);
    const std::vector<Point2>& known = layout.base;
    const std::vector<Point2>& novel = layout.spaces;
    const AnalystDevice base = scenario.bootstrap(known, cfg.train_per_space, cfg.seed);
    CentralSystem cs(scenario.table(), scenario.aggregate());

    FederationConfig fc;
    fc.n = cfg.n;
    fc.lambda = base.config().adm.lambda;
    fc.c = base.config().adm.c;
    fc.h_multiplier = base.config().cdm.h_multiplier;

    AffiliateCycleResult res;
    for (std::size_t cycle = 0; cycle < cfg.cycles; ++cycle) {
        Rng rng(mix_seed(cfg.seed, 77000 + cycle));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<DeviceScript> scripts(cfg.n);
        for (std::size_t i = 0; i < cfg.n; ++i) {
            const bool drifts = i == 0 || unit(rng) < cfg.beta;
            const std::uint64_t s = mix_seed(cfg.seed, cycle * 1000 + i);
            if (!drifts) {
                scripts[i].queries = scenario.sample_mix(known, (cfg.cycle_rounds + 1) / 2, s);
                scripts[i].queries.resize(cfg.cycle_rounds);
                continue;
            }
            scripts[i].queries = scenario.sample_mix(known, (cfg.known_prefix + 1) / 2, s);
            scripts[i].queries.resize(cfg.known_prefix);
            scripts[i].drift_points.push_back(cfg.known_prefix);
            const Point2 target = novel[std::uniform_int_distribution<std::size_t>(0, novel.size() - 1)(rng)];
            auto post = scenario.sample(target, cfg.cycle_rounds - cfg.known_prefix, mix_seed(s, 1));
            scripts[i].queries.insert(scripts[i].queries.end(), post.begin(), post.end());
        }
        std::vector<AnalystDevice> devices(cfg.n, base);
        run_federation(fc, devices, scripts, cs);
        const AnalystDevice& focal = devices[0];
        if (!focal.sessions().empty()) {
            res.affiliates.push_back(focal.sessions().front().affiliate_sources.size());
        } else {
            res.affiliates.push_back(focal.current_session().affiliate_sources.size());
        }
    }
    const double m = static_cast<double>(res.affiliates.size());
    res.mean = std::accumulate(res.affiliates.begin(), res.affiliates.end(), 0.0) / m;
    res.expected = cfg.beta * static_cast<double>(cfg.n - 1);
    res.tolerance = 3.0 * std::sqrt(cfg.beta * (1.0 - cfg.beta) * static_cast<double>(cfg.n - 1) / m);
    return res;
}

}  // namespace qdaqp
