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

#include "qdaqp/cdm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qdaqp {

double GammaParams::log_density(double x) const {
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double distance_error(double dist, const ClusterStats& stats, DistanceErrorForm form) {
    const double offset = std::max(0.0, dist - stats.min_dist);
    if (form == DistanceErrorForm::kInsideLog) return std::log1p(offset * stats.epe);
    return std::log1p(offset) * stats.epe;
}

double distance_error(std::span<const double> q, const QueryVector& w, const ClusterStats& stats,
                      DistanceErrorForm form) {
    return distance_error(query_distance(q, w), stats, form);
}

GammaParams fit_gamma(std::span<const double> samples) {
    std::size_t n = 0;
    double sum = 0.0;
    for (double x : samples) {
        if (x > 0.0 && std::isfinite(x)) {
            sum += x;
            ++n;
        }
    }
    if (n < 2) fail(ErrorKind::kDegenerate, "gamma fit needs at least two positive samples");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) {
        if (x > 0.0 && std::isfinite(x)) ss += (x - mean) * (x - mean);
    }
    const double var = ss / static_cast<double>(n);
    if (!(var > 1e-300) || !(var > 1e-14 * mean * mean)) {
        fail(ErrorKind::kDegenerate, "gamma fit sample has zero variance");
    }
    return {var / mean, mean * mean / var};
}

CusumDetector::CusumDetector(GammaParams p0, GammaParams p1, double sigma_u, double h)
    : p0_(p0), p1_(p1), sigma_u_(sigma_u) {
    for (const auto& g : {p0, p1}) {
        if (!(g.scale > 0.0 && g.shape > 0.0) || !std::isfinite(g.scale) || !std::isfinite(g.shape)) {
            fail(ErrorKind::kDegenerate, "gamma parameters must be positive and finite");
        }
    }
    set_h(h);
}

void CusumDetector::set_h(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::kConfig, "detection threshold h must be positive");
    h_ = h;
}

double CusumDetector::log_ratio(double u_tilde) const {
    const double x = std::max(u_tilde, kDensityFloor);
    return p1_.log_density(x) - p0_.log_density(x);
}

StepResult CusumDetector::step(double u_tilde) {
    const double s = log_ratio(u_tilde);
    g_ = std::max(g_ + s, 0.0);
    cum_ += s;
    if (cum_ < cum_min_) {
        cum_min_ = cum_;
        t_star_ = t_ + 1;
    }
    const bool drift = g_ > h_;
    if (drift && !t_detect_) t_detect_ = t_;
    ++t_;
    return {s, g_, drift};
}

void CusumDetector::reset() {
    g_ = 0.0;
    t_ = 0;
    t_detect_.reset();
    cum_ = 0.0;
    cum_min_ = 0.0;
    t_star_ = 0;
}

void CusumDetector::restore(double g, std::size_t t, std::optional<std::size_t> t_detect, double cum,
                            double cum_min, std::size_t t_star) {
    if (g < 0.0) fail(ErrorKind::kState, "CUSUM statistic cannot be negative");
    g_ = g;
    t_ = t;
    t_detect_ = t_detect;
    cum_ = cum;
    cum_min_ = cum_min;
    t_star_ = t_star;
}

std::vector<double> cusum_recursive(std::span<const double> s) {
    std::vector<double> g(s.size());
    double prev = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) {
        prev = std::max(prev + s[t], 0.0);
        g[t] = prev;
    }
    return g;
}

std::vector<double> cusum_batch(std::span<const double> s) {
    std::vector<double> g(s.size());
    double u = 0.0;
    double lo = 0.0;  // min over U_{-1}..U_t; the empty window keeps G at or above zero
    for (std::size_t t = 0; t < s.size(); ++t) {
        u += s[t];
        lo = std::min(lo, u);
        g[t] = u - lo;
    }
    return g;
}

CalibrationSamples calibration_samples(const Codebook& codebook, std::span<const QueryVector> queries,
                                       DistanceErrorForm form) {
    if (codebook.size() < 2) {
        fail(ErrorKind::kState, "detector calibration needs at least two representatives (found " +
                                    std::to_string(codebook.size()) + "); lower the vigilance");
    }
    CalibrationSamples out;
    out.expected.reserve(queries.size());
    out.novel.reserve(queries.size());
    for (const auto& q : queries) {
        const Assignment a = codebook.assign(q);
        out.expected.push_back(distance_error(a.closest_dist, codebook.stats(a.closest), form));
        out.novel.push_back(distance_error(a.rival_dist, codebook.stats(*a.rival), form));
    }
    return out;
}

CusumDetector calibrate(const Codebook& codebook, std::span<const QueryVector> queries, const CdmConfig& cfg) {
    if (!(cfg.h_multiplier > 0.0)) fail(ErrorKind::kConfig, "h multiplier must be positive");
    const CalibrationSamples samples = calibration_samples(codebook, queries, cfg.form);
    const GammaParams p0 = fit_gamma(samples.expected);
    const GammaParams p1 = fit_gamma(samples.novel);
    const double n = static_cast<double>(samples.expected.size());
    const double mean = std::accumulate(samples.expected.begin(), samples.expected.end(), 0.0) / n;
    double ss = 0.0;
    for (double u : samples.expected) ss += (u - mean) * (u - mean);
    const double sigma = std::sqrt(ss / n);
    return CusumDetector(p0, p1, sigma, cfg.h_multiplier * sigma);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) fail(ErrorKind::kDimension, "pearson needs equal lengths >= 2");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace qdaqp
