#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tscc {

class AnalysisError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Thermal averages of one disorder sample, one entry per ladder temperature.
struct SampleObservables {
    uint64_t index = 0;
    std::vector<std::array<double, 3>> chi0;
    std::vector<std::array<double, 3>> chik;
    std::vector<double> energy;
    std::vector<std::array<double, 3>> m2;
};

/// All usable samples of one (p, L) cell.
struct DisorderEnsemble {
    double p = 0;
    int L = 0;
    std::vector<double> temperatures;
    std::vector<SampleObservables> samples;
    uint32_t excluded = 0;

    /// Throws AnalysisError when a sample's tables do not match the temperature list.
    void validate() const;
};

/// Which sublattice susceptibilities enter the correlation length.
enum class Sublattice { Average, A, B, C };
const char *sublattice_name(Sublattice s);

struct BootstrapResult {
    double estimate = 0;  // statistic on the original sample
    double mean = 0;      // mean over resamples
    double sigma = 0;     // standard deviation over resamples
};

/// Statistic over a multiset of sample indices (with repetition).
using IndexStatistic = std::function<double(std::span<const uint32_t>)>;

/// Resamples n indices with replacement n_resample times. Resample r draws from its own stream
/// keyed by (seed, r), so the result does not depend on thread count.
BootstrapResult bootstrap(uint32_t n, const IndexStatistic &statistic, uint32_t n_resample = 500, uint64_t seed = 0);
BootstrapResult bootstrap(std::span<const double> samples, const std::function<double(std::span<const double>)> &statistic,
                          uint32_t n_resample = 500, uint64_t seed = 0);

/// xi_L / L against temperature.
struct Curve {
    int L = 0;
    std::vector<double> temperatures;
    std::vector<double> values;
    std::vector<double> sigmas;
};

/// Disorder-averaged chi(0) and chi(k_min) of a subset of samples, per temperature.
void averaged_susceptibilities(const DisorderEnsemble &ens, std::span<const uint32_t> subset, Sublattice mode,
                               std::vector<double> &chi0, std::vector<double> &chik);
/// xi_L / L from the ratio of disorder averages of a sample subset (all samples if empty).
std::vector<double> xi_over_L(const DisorderEnsemble &ens, Sublattice mode, std::span<const uint32_t> subset = {});

Curve xi_over_L_curve(const DisorderEnsemble &ens, Sublattice mode = Sublattice::Average, uint32_t n_resample = 500,
                      uint64_t seed = 0);

/// Fritsch-Carlson monotone piecewise-cubic Hermite interpolant.
class MonotoneCubic {
   public:
    MonotoneCubic(std::vector<double> x, std::vector<double> y);
    double operator()(double x) const;
    double lo() const {
        return x_.front();
    }
    double hi() const {
        return x_.back();
    }

   private:
    std::vector<double> x_, y_, d_;
};

struct CurveCrossing {
    bool found = false;
    double T = 0;
    uint32_t roots = 0;  // sign changes of the difference on the overlap
};

/// Root of the difference of the interpolated curves on their common temperature range. With several
/// roots, the one with the largest slope difference is returned. Throws AnalysisError without overlap.
CurveCrossing find_curve_crossing(const Curve &a, const Curve &b);

enum class CrossingStatus { Crossing, Marginal, NoCrossing };
const char *crossing_status_name(CrossingStatus s);

struct PairCrossing {
    int L1 = 0;
    int L2 = 0;
    bool found = false;
    double T = 0;
    double sigma = 0;
    double found_fraction = 0;
};

struct CrossingEstimate {
    double p = 0;
    CrossingStatus status = CrossingStatus::NoCrossing;
    double Tc = 0;
    double sigma_Tc = 0;
    /// Fraction of resamples in which the combined crossing exists.
    double found_fraction = 0;
    std::vector<PairCrossing> pairs;
    /// Crossing of the two largest sizes, reported separately to expose finite-size drift.
    std::optional<PairCrossing> largest_pair;
    std::optional<double> nu;
};

struct CrossingOptions {
    uint32_t n_resample = 500;
    uint64_t seed = 0;
    Sublattice mode = Sublattice::Average;
    /// Below this fraction of resamples with a crossing the estimate is marginal.
    double marginal_fraction = 0.8;
};

/// Crossing of xi_L/L for two or more sizes, with the error from bootstrapping disorder samples
/// through the whole procedure (each size resampled independently).
CrossingEstimate find_crossing(std::span<const DisorderEnsemble> ensembles, const CrossingOptions &opt = {});
/// Same for curves given directly; resamples perturb each point by a Gaussian of its sigma.
CrossingEstimate find_crossing(std::span<const Curve> curves, const CrossingOptions &opt = {});

struct BoundaryKnot {
    double p = 0;
    double Tc = 0;
    double sigma = 0;
};

/// Piecewise-linear T_c(p) through the knots.
class PhaseBoundary {
   public:
    explicit PhaseBoundary(std::vector<BoundaryKnot> knots);
    const std::vector<BoundaryKnot> &knots() const {
        return knots_;
    }
    double operator()(double p) const;
    double sigma(double p) const;
    double p_min() const {
        return knots_.front().p;
    }
    double p_max() const {
        return knots_.back().p;
    }

   private:
    std::vector<BoundaryKnot> knots_;
};

/// Uses every estimate with a crossing (marginal included); throws on duplicate p or no usable point.
PhaseBoundary build_phase_boundary(std::span<const CrossingEstimate> estimates);

struct ThresholdEstimate {
    double p_c = 0;
    double sigma = 0;
    double p_lo = 0;  // knots bracketing the root
    double p_hi = 0;
    uint32_t resamples = 0;
    uint32_t resamples_bracketed = 0;
    std::vector<BoundaryKnot> boundary;
};

class BracketError : public AnalysisError {
   public:
    using AnalysisError::AnalysisError;
};

/// Root of T_c(p) = T_N(p) by bisection on the piecewise-linear boundary (T_N(0) taken as 0). The
/// error comes from redrawing every knot from a Gaussian of its sigma.
ThresholdEstimate intersect_nishimori(const PhaseBoundary &boundary, uint32_t n_resample = 500, uint64_t seed = 0);

enum class CollapseStatus { Ok, Degenerate, AtBound };
const char *collapse_status_name(CollapseStatus s);

struct CollapseResult {
    double nu = 0;
    double residual = 0;
    CollapseStatus status = CollapseStatus::Ok;
};

/// Scatter of y_L against L^(1/nu) (T - T_c) between every pair of curves, by linear interpolation
/// in the scaling variable.
double collapse_residual(std::span<const Curve> curves, double Tc, double nu);
/// Minimizes collapse_residual over nu in [nu_min, nu_max]. Needs at least three sizes.
CollapseResult scaling_collapse(std::span<const Curve> curves, double Tc, double nu_min = 0.3, double nu_max = 5.0);

/// Crossing estimates from each single sublattice and from their average.
struct SensitivityReport {
    std::array<CrossingEstimate, 4> estimates;  // indexed by Sublattice
    /// Largest |Tc(P) - Tc(avg)| relative to the combined bootstrap error.
    double max_pull = 0;
    bool consistent = false;
};
SensitivityReport sublattice_sensitivity(std::span<const DisorderEnsemble> ensembles, const CrossingOptions &opt = {});

std::string crossing_svg(std::span<const Curve> curves, const CrossingEstimate &estimate, const std::string &title);
std::string phase_diagram_svg(const PhaseBoundary &boundary, const ThresholdEstimate *threshold);

}  // namespace tscc
