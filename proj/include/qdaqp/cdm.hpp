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

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qdaqp/quantizer.hpp"
#include "qdaqp/regressors.hpp"

namespace qdaqp {

/// Gamma distribution with scale e1 and shape e2.
struct GammaParams {
    double scale = 1.0;
    double shape = 1.0;

    double mean() const noexcept { return scale * shape; }
    double log_density(double x) const;
};

/// How the distance error combines the distance offset with the cluster EPE.
enum class DistanceErrorForm {
    kScaledLog,   // ln(1 + dd) * u
    kInsideLog,   // ln(1 + dd * u)
};

/// Distance-based error proxy for a query whose squared distance to a
/// prototype is `dist`. The offset dist - min_dist is clamped at zero.
double distance_error(double dist, const ClusterStats& stats, DistanceErrorForm form = DistanceErrorForm::kScaledLog);
double distance_error(std::span<const double> q, const QueryVector& w, const ClusterStats& stats,
                      DistanceErrorForm form = DistanceErrorForm::kScaledLog);

/// Method-of-moments gamma fit on the strictly positive samples
/// (population variance).
GammaParams fit_gamma(std::span<const double> samples);

inline constexpr double kDensityFloor = 1e-9;

struct CdmConfig {
    double h_multiplier = 3.0;  // h = h_multiplier * sigma_u
    DistanceErrorForm form = DistanceErrorForm::kScaledLog;
};

struct StepResult {
    double s = 0.0;
    double g = 0.0;
    bool drift = false;
};

/// Clamped likelihood-ratio CUSUM between the expected (p0) and novel (p1)
/// error distributions.
class CusumDetector {
public:
    CusumDetector() = default;
    CusumDetector(GammaParams p0, GammaParams p1, double sigma_u, double h);

    const GammaParams& p0() const noexcept { return p0_; }
    const GammaParams& p1() const noexcept { return p1_; }
    double sigma_u() const noexcept { return sigma_u_; }
    double h() const noexcept { return h_; }
    void set_h(double h);
    double g() const noexcept { return g_; }
    std::size_t t() const noexcept { return t_; }
    /// First step at which G exceeded h, if any.
    std::optional<std::size_t> detection_time() const noexcept { return t_detect_; }
    /// Index following the running minimum of the cumulative sum.
    std::size_t change_time_estimate() const noexcept { return t_star_; }

    double log_ratio(double u_tilde) const;
    StepResult step(double u_tilde);
    void reset();

    /// Restore a detector mid-stream.
    void restore(double g, std::size_t t, std::optional<std::size_t> t_detect, double cum, double cum_min,
                 std::size_t t_star);
    double cumulative() const noexcept { return cum_; }
    double cumulative_min() const noexcept { return cum_min_; }

private:
    GammaParams p0_;
    GammaParams p1_;
    double sigma_u_ = 0.0;
    double h_ = 1.0;
    double g_ = 0.0;
    std::size_t t_ = 0;
    std::optional<std::size_t> t_detect_;
    double cum_ = 0.0;
    double cum_min_ = 0.0;
    std::size_t t_star_ = 0;
};

/// Recursive clamp G_t = max(G_{t-1} + s_t, 0) over a whole sequence.
std::vector<double> cusum_recursive(std::span<const double> s);
/// Batch form G_t = U_t - min_{0<=tau<=t+1} U_{tau-1} with U_{-1} = 0. The
/// tau = t+1 term is the empty window and matches the clamp at zero.
std::vector<double> cusum_batch(std::span<const double> s);

struct CalibrationSamples {
    std::vector<double> expected;  // w.r.t. the closest prototype
    std::vector<double> novel;     // w.r.t. the rival prototype
};

CalibrationSamples calibration_samples(const Codebook& codebook, std::span<const QueryVector> queries,
                                       DistanceErrorForm form = DistanceErrorForm::kScaledLog);

/// Fits p0 on closest-prototype errors and p1 on rival errors; h defaults to
/// h_multiplier * sigma of the p0 sample.
CusumDetector calibrate(const Codebook& codebook, std::span<const QueryVector> queries, const CdmConfig& cfg = {});

/// Sample Pearson correlation (diagnostic only).
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace qdaqp
