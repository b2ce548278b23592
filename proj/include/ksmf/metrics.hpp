#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ksmf/field.hpp"
#include "ksmf/mincostflow.hpp"
#include "ksmf/noise.hpp"
#include "ksmf/pde.hpp"
#include "ksmf/sde.hpp"

namespace ksmf {

/// Max over aligned steps of the max over particles and coordinates of
/// |X - Y|. Throws on misaligned series.
double sup_distance(const std::vector<ParticleEnsemble>& xs,
                    const std::vector<ParticleEnsemble>& ys);

/// Exceedance estimate with a 95% score (Wilson) confidence interval.
struct TailEstimate {
    double threshold = 0.0;
    int replicas = 0;
    int exceedances = 0;
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
};

TailEstimate tail_probability(const std::vector<double>& sup_distances,
                              double threshold);

/// Weighted planar point set; weights must be positive.
struct WeightedPointSet {
    std::vector<Vec2> points;
    std::vector<double> weights;

    static WeightedPointSet uniform(std::vector<Vec2> pts);
    double total_mass() const;
};

/// Exact Wasserstein-1 with ground metric |x - y|_inf (the sup metric, not
/// Euclidean), via min-cost flow on the bipartite support graph. Combined
/// support is capped at 4096 points; callers subsample above that.
double wasserstein1(const WeightedPointSet& mu, const WeightedPointSet& nu);

/// m lattice-free draws from the grid density: cell multinomial plus
/// in-cell uniform jitter. draw_block decorrelates repeated draws.
std::vector<Vec2> draw_from_field(const DensityField& field, int m,
                                  const NoisePlan& noise,
                                  std::uint64_t draw_block);

/// Deterministic m-subset of the ensemble (partial Fisher-Yates on the
/// plan's subsample stream).
std::vector<Vec2> subsample_positions(const ParticleEnsemble& ensemble, int m,
                                      const NoisePlan& noise,
                                      std::uint64_t draw_block);

struct MarginalW1 {
    std::vector<double> values;  ///< one exact W1 per repeat
    double mean = 0.0;
    double spread = 0.0;  ///< max - min over repeats
};

/// W1 between m subsampled particles and m draws from the stored density
/// (the k = 1 marginal probe), repeated and averaged.
MarginalW1 marginal_w1(const ParticleEnsemble& ensemble,
                       const DensityField& field, int m,
                       const NoisePlan& noise, int repeats = 3);

/// Same-law control: both clouds drawn from the field.
MarginalW1 marginal_w1_control(const DensityField& field, int m,
                               const NoisePlan& noise, int repeats = 3);

struct LolnStatistic {
    double k_deviation = 0.0;   ///< sup_i |K^N_i(Y) - Kbar_i(Y)|_inf
    double l_deviation = 0.0;   ///< sup_i | |L^N_i| - |Lbar_i| |
    double l2_deviation = 0.0;  ///< same for the wider-cutoff majorant
    double k1_deviation = 0.0;  ///< sup_i |K1_i - K1bar_i|_inf (split set)
    bool has_split = false;
};

/// Law-of-large-numbers probe: deviations between the pairwise sums and
/// their mean-field convolutions against the stored density. The mean
/// field uses the full rho (the O(1/N) self-term the paper absorbs when
/// replacing E by E_(-i)). For N = 1 every deviation is zero by the
/// empty-sum convention.
class LolnProbe {
public:
    /// Field must carry its force cache. nu2 < nu enables the K1 branch.
    LolnProbe(const DensityField& field, const CutoffSpec& spec, double chi,
              std::optional<double> nu2 = std::nullopt);

    LolnStatistic statistic(const ParticleEnsemble& ensemble) const;

private:
    Vec2 bilinear(const std::vector<double>& gx, const std::vector<double>& gy,
                  Vec2 p) const;
    double bilinear_scalar(const std::vector<double>& g, Vec2 p) const;

    const DensityField& field_;
    CutoffSpec spec_;
    double chi_;
    std::optional<double> nu2_;
    std::vector<double> lbar_, l2bar_;      // chi (l * rho), chi (l2 * rho)
    std::vector<double> k1bar_x_, k1bar_y_; // (k - k2) * rho
};

/// Frequencies of the exceptional inequalities across replicas: the K
/// deviation against N^-(alpha+delta) and the majorant deviations against
/// the free constant C (diagnostics, not assertions).
struct ExceptionalSetFrequencies {
    double k_exceed = 0.0;
    double l_exceed = 0.0;
    double l2_exceed = 0.0;
    double k1_exceed = 0.0;
    int samples = 0;
};

ExceptionalSetFrequencies
exceptional_set_frequencies(const std::vector<LolnStatistic>& stats, double n,
                            double alpha, double constant = 1.0);

/// The proof-apparatus schedule: delta = (1/2)(1/2 - alpha),
/// C_N = 18 (log N)^(3/4), f_N(t) = max{4 / (t log N + (log N)^(-1/4)), 1}.
struct JSchedule {
    double n = 2.0;
    double alpha = 0.25;

    double delta() const { return 0.5 * (0.5 - alpha); }
    double c_n() const;
    double f(double t) const;
    double f_ceiling() const;  ///< f(0) = 4 (log N)^(1/4)
    void validate() const;
};

/// J^N_t on the record's diagnostic grid: the running sup over s <= t of
/// e^{C_N (T - s)} sup_{tau <= s} (N^alpha f_N(s - tau) d(tau, s) + N^-delta),
/// capped at 1. Monotone non-decreasing by construction.
struct JSeries {
    std::vector<double> times;
    std::vector<double> values;
};

JSeries j_process(const RunRecord& record, const JSchedule& schedule, double T);

/// p-norms of the heat kernel G(t, x) = (1/(2 pi t)) exp(-|x|^2 / (2 t))
/// and its gradient (closed Gaussian forms). p in [1, inf], t > 0.
struct HeatKernelNorms {
    double g_norm = 0.0;
    double grad_norm = 0.0;
};

HeatKernelNorms heat_kernel_norms(double t, double p);

/// ||G(t, . - x0) - G(t, . - y0)||_1 for |x0 - y0| = d (closed erf form).
double shifted_heat_kernel_l1(double t, double d);

} // namespace ksmf
