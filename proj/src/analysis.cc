#include "tscc/analysis.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tscc/model.h"
#include "tscc/observables.h"
#include "tscc/parallel.h"
#include "tscc/rng.h"

namespace tscc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<uint32_t> resample_indices(uint32_t n, uint64_t key, uint32_t r) {
    Stream s(hash_words({key, 0xB0075, r}));
    std::vector<uint32_t> idx(n);
    for (uint32_t &i : idx) {
        i = s.below(n);
    }
    return idx;
}

// Sample standard deviation of the finite entries; also returns how many there were.
double finite_sd(std::span<const double> xs, uint32_t *count = nullptr, double *mean_out = nullptr) {
    double sum = 0;
    uint32_t n = 0;
    for (double x : xs) {
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    }
    if (count) {
        *count = n;
    }
    double mean = n ? sum / n : kNaN;
    if (mean_out) {
        *mean_out = mean;
    }
    if (n < 2) {
        return 0.0;
    }
    // Identical values: the rounded mean would otherwise leave a spread of a few ulps.
    auto first = std::find_if(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
    if (std::all_of(first, xs.end(), [&](double x) { return !std::isfinite(x) || x == *first; })) {
        if (mean_out) {
            *mean_out = *first;
        }
        return 0.0;
    }
    double ss = 0;
    for (double x : xs) {
        if (std::isfinite(x)) {
            ss += (x - mean) * (x - mean);
        }
    }
    return std::sqrt(ss / (n - 1));
}

template <class F>
void parallel_for(uint32_t n, F &&body) {
    if (!in_parallel_region() && max_threads() > 1) {
        TSCC_OMP(parallel for schedule(dynamic, 4))
        for (int64_t r = 0; r < static_cast<int64_t>(n); ++r) {
            body(static_cast<uint32_t>(r));
        }
    } else {
        for (uint32_t r = 0; r < n; ++r) {
            body(r);
        }
    }
}

std::string format_temperatures(std::span<const double> ts) {
    std::ostringstream os;
    for (size_t k = 0; k < ts.size(); ++k) {
        os << (k ? ", " : "") << ts[k];
    }
    return os.str();
}

}  // namespace

void DisorderEnsemble::validate() const {
    if (temperatures.empty()) {
        throw AnalysisError("ensemble p=" + std::to_string(p) + " L=" + std::to_string(L) + " has no temperatures");
    }
    for (size_t k = 1; k < temperatures.size(); ++k) {
        if (!(temperatures[k] > temperatures[k - 1])) {
            throw AnalysisError("ensemble temperatures must be strictly increasing");
        }
    }
    size_t nt = temperatures.size();
    for (const SampleObservables &s : samples) {
        if (s.chi0.size() != nt || s.chik.size() != nt || s.energy.size() != nt || s.m2.size() != nt) {
            throw AnalysisError("sample " + std::to_string(s.index) + " of p=" + std::to_string(p) +
                                " L=" + std::to_string(L) + " has tables for a different temperature count");
        }
    }
}

const char *sublattice_name(Sublattice s) {
    switch (s) {
        case Sublattice::Average:
            return "average";
        case Sublattice::A:
            return "A";
        case Sublattice::B:
            return "B";
        case Sublattice::C:
            return "C";
    }
    return "?";
}

BootstrapResult bootstrap(uint32_t n, const IndexStatistic &statistic, uint32_t n_resample, uint64_t seed) {
    if (n < 2) {
        throw AnalysisError("bootstrap needs at least 2 samples (got " + std::to_string(n) + ")");
    }
    std::vector<uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    BootstrapResult out;
    out.estimate = statistic(all);
    std::vector<double> values(n_resample);
    parallel_for(n_resample, [&](uint32_t r) { values[r] = statistic(resample_indices(n, seed, r)); });
    out.sigma = finite_sd(values, nullptr, &out.mean);
    if (n_resample == 0) {
        out.mean = out.estimate;
    }
    return out;
}

BootstrapResult bootstrap(std::span<const double> samples, const std::function<double(std::span<const double>)> &statistic,
                          uint32_t n_resample, uint64_t seed) {
    return bootstrap(
        static_cast<uint32_t>(samples.size()),
        [&](std::span<const uint32_t> idx) {
            std::vector<double> xs(idx.size());
            for (size_t k = 0; k < idx.size(); ++k) {
                xs[k] = samples[idx[k]];
            }
            return statistic(xs);
        },
        n_resample, seed);
}

void averaged_susceptibilities(const DisorderEnsemble &ens, std::span<const uint32_t> subset, Sublattice mode,
                               std::vector<double> &chi0, std::vector<double> &chik) {
    size_t nt = ens.temperatures.size();
    chi0.assign(nt, 0.0);
    chik.assign(nt, 0.0);
    auto add = [&](const SampleObservables &s) {
        for (size_t t = 0; t < nt; ++t) {
            if (mode == Sublattice::Average) {
                chi0[t] += (s.chi0[t][0] + s.chi0[t][1] + s.chi0[t][2]) / 3.0;
                chik[t] += (s.chik[t][0] + s.chik[t][1] + s.chik[t][2]) / 3.0;
            } else {
                int c = static_cast<int>(mode) - 1;
                chi0[t] += s.chi0[t][c];
                chik[t] += s.chik[t][c];
            }
        }
    };
    size_t count = subset.empty() ? ens.samples.size() : subset.size();
    if (subset.empty()) {
        for (const SampleObservables &s : ens.samples) {
            add(s);
        }
    } else {
        for (uint32_t i : subset) {
            add(ens.samples[i]);
        }
    }
    for (size_t t = 0; t < nt; ++t) {
        chi0[t] /= static_cast<double>(count);
        chik[t] /= static_cast<double>(count);
    }
}

std::vector<double> xi_over_L(const DisorderEnsemble &ens, Sublattice mode, std::span<const uint32_t> subset) {
    if (ens.samples.empty()) {
        throw AnalysisError("ensemble p=" + std::to_string(ens.p) + " L=" + std::to_string(ens.L) + " has no samples");
    }
    std::vector<double> chi0, chik;
    averaged_susceptibilities(ens, subset, mode, chi0, chik);
    std::vector<double> out(chi0.size());
    for (size_t t = 0; t < out.size(); ++t) {
        out[t] = correlation_length(chi0[t], chik[t], ens.L).xi / ens.L;
    }
    return out;
}

Curve xi_over_L_curve(const DisorderEnsemble &ens, Sublattice mode, uint32_t n_resample, uint64_t seed) {
    ens.validate();
    uint32_t n = static_cast<uint32_t>(ens.samples.size());
    if (n < 2) {
        throw AnalysisError("p=" + std::to_string(ens.p) + " L=" + std::to_string(ens.L) + ": " + std::to_string(n) +
                            " sample(s) at temperatures " + format_temperatures(ens.temperatures) +
                            "; at least 2 are needed");
    }
    Curve c;
    c.L = ens.L;
    c.temperatures = ens.temperatures;
    c.values = xi_over_L(ens, mode);
    size_t nt = c.temperatures.size();
    std::vector<std::vector<double>> reps(n_resample);
    parallel_for(n_resample, [&](uint32_t r) { reps[r] = xi_over_L(ens, mode, resample_indices(n, seed, r)); });
    c.sigmas.resize(nt);
    std::vector<double> col(n_resample);
    for (size_t t = 0; t < nt; ++t) {
        for (uint32_t r = 0; r < n_resample; ++r) {
            col[r] = reps[r][t];
        }
        c.sigmas[t] = finite_sd(col);
    }
    return c;
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    size_t n = x_.size();
    if (n < 2 || y_.size() != n) {
        throw AnalysisError("interpolation needs at least two points with matching x and y");
    }
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]) || (i > 0 && !(x_[i] > x_[i - 1]))) {
            throw AnalysisError("interpolation knots must be finite with strictly increasing x");
        }
    }
    std::vector<double> h(n - 1), delta(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
        return;
    }
    for (size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] > 0) {
            double w1 = 2 * h[i] + h[i - 1];
            double w2 = h[i] + 2 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double m0, double m1) {
        double d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if (d * m0 <= 0) {
            return 0.0;
        }
        if (m0 * m1 < 0 && std::abs(d) > std::abs(3 * m0)) {
            return 3 * m0;
        }
        return d;
    };
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double MonotoneCubic::operator()(double x) const {
    if (x < x_.front() || x > x_.back()) {
        throw std::out_of_range("interpolation outside [" + std::to_string(x_.front()) + ", " +
                                std::to_string(x_.back()) + "]");
    }
    size_t i = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    i = std::clamp<size_t>(i, 1, x_.size() - 1) - 1;
    double h = x_[i + 1] - x_[i];
    double t = (x - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * d_[i + 1];
}

namespace {

MonotoneCubic finite_interpolant(const Curve &c) {
    std::vector<double> x, y;
    for (size_t k = 0; k < c.temperatures.size(); ++k) {
        if (std::isfinite(c.values[k])) {
            x.push_back(c.temperatures[k]);
            y.push_back(c.values[k]);
        }
    }
    if (x.size() < 2) {
        throw AnalysisError("curve for L=" + std::to_string(c.L) + " has fewer than two finite points");
    }
    return MonotoneCubic(std::move(x), std::move(y));
}

}  // namespace

CurveCrossing find_curve_crossing(const Curve &a, const Curve &b) {
    MonotoneCubic fa = finite_interpolant(a);
    MonotoneCubic fb = finite_interpolant(b);
    double lo = std::max(fa.lo(), fb.lo());
    double hi = std::min(fa.hi(), fb.hi());
    if (!(lo < hi)) {
        throw AnalysisError("curves for L=" + std::to_string(a.L) + " and L=" + std::to_string(b.L) +
                            " share no temperature range");
    }
    std::vector<double> grid{lo, hi};
    for (const Curve *c : {&a, &b}) {
        for (double t : c->temperatures) {
            if (t > lo && t < hi) {
                grid.push_back(t);
            }
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    auto diff = [&](double x) { return fa(x) - fb(x); };

    std::vector<double> roots;
    double d0 = diff(grid[0]);
    if (d0 == 0) {
        roots.push_back(grid[0]);
    }
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        double x0 = grid[k], x1 = grid[k + 1];
        double d1 = diff(x1);
        if (d1 == 0) {
            roots.push_back(x1);
        } else if (d0 != 0 && (d0 < 0) != (d1 < 0)) {
            double l = x0, r = x1, dl = d0;
            for (int it = 0; it < 200 && r - l > 1e-15 * std::max(1.0, std::abs(r)); ++it) {
                double m = 0.5 * (l + r);
                double dm = diff(m);
                if (dm == 0) {
                    l = r = m;
                    break;
                }
                if ((dm < 0) == (dl < 0)) {
                    l = m;
                    dl = dm;
                } else {
                    r = m;
                }
            }
            roots.push_back(0.5 * (l + r));
        }
        d0 = d1;
    }
    CurveCrossing out;
    out.roots = static_cast<uint32_t>(roots.size());
    if (roots.empty()) {
        return out;
    }
    double h = 1e-6 * (hi - lo);
    double best = -1;
    for (double x : roots) {
        double l = std::max(lo, x - h), r = std::min(hi, x + h);
        double slope = std::abs((diff(r) - diff(l)) / (r - l));
        if (slope > best) {
            best = slope;
            out.T = x;
        }
    }
    out.found = true;
    return out;
}

const char *crossing_status_name(CrossingStatus s) {
    switch (s) {
        case CrossingStatus::Crossing:
            return "crossing";
        case CrossingStatus::Marginal:
            return "marginal";
        case CrossingStatus::NoCrossing:
            return "no-crossing";
    }
    return "?";
}

namespace {

using CurveSet = std::vector<Curve>;

// Shared by both find_crossing overloads: `central` sorted by L, `resample(r)` gives the curves of
// resample r in the same order.
CrossingEstimate crossing_core(const CurveSet &central, const std::function<CurveSet(uint32_t)> &resample,
                               const CrossingOptions &opt) {
    size_t nc = central.size();
    if (nc < 2) {
        throw AnalysisError("a crossing needs at least two system sizes");
    }
    for (size_t i = 1; i < nc; ++i) {
        if (central[i].L == central[i - 1].L) {
            throw AnalysisError("duplicate system size L=" + std::to_string(central[i].L));
        }
    }
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < nc; ++i) {
        for (size_t j = i + 1; j < nc; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    size_t np = pairs.size();
    auto pair_roots = [&](const CurveSet &cs) {
        std::vector<double> out(np, kNaN);
        for (size_t k = 0; k < np; ++k) {
            CurveCrossing c = find_curve_crossing(cs[pairs[k].first], cs[pairs[k].second]);
            if (c.found) {
                out[k] = c.T;
            }
        }
        return out;
    };
    std::vector<double> central_roots = pair_roots(central);

    uint32_t nr = opt.n_resample;
    std::vector<std::vector<double>> reps(nr);
    parallel_for(nr, [&](uint32_t r) { reps[r] = pair_roots(resample(r)); });

    CrossingEstimate est;
    std::vector<double> weight(np, 1.0);
    bool all_positive = true;
    std::vector<double> col(nr);
    for (size_t k = 0; k < np; ++k) {
        PairCrossing pc;
        pc.L1 = central[pairs[k].first].L;
        pc.L2 = central[pairs[k].second].L;
        pc.found = std::isfinite(central_roots[k]);
        pc.T = central_roots[k];
        for (uint32_t r = 0; r < nr; ++r) {
            col[r] = reps[r][k];
        }
        uint32_t count = 0;
        double mean = kNaN;
        pc.sigma = finite_sd(col, &count, &mean);
        pc.found_fraction = nr ? static_cast<double>(count) / nr : (pc.found ? 1.0 : 0.0);
        if (!pc.found && count > 0) {
            pc.T = mean;
        }
        if (pc.sigma > 0) {
            weight[k] = 1.0 / (pc.sigma * pc.sigma);
        } else {
            all_positive = false;
        }
        est.pairs.push_back(pc);
    }
    if (!all_positive) {
        std::fill(weight.begin(), weight.end(), 1.0);
    }
    auto combine = [&](const std::vector<double> &roots) {
        double sw = 0, swx = 0;
        for (size_t k = 0; k < np; ++k) {
            if (std::isfinite(roots[k])) {
                sw += weight[k];
                swx += weight[k] * roots[k];
            }
        }
        return sw > 0 ? swx / sw : kNaN;
    };
    double central_tc = combine(central_roots);
    std::vector<double> combined(nr);
    for (uint32_t r = 0; r < nr; ++r) {
        combined[r] = combine(reps[r]);
    }
    uint32_t count = 0;
    double mean = kNaN;
    est.sigma_Tc = finite_sd(combined, &count, &mean);
    bool central_found = std::isfinite(central_tc);
    est.found_fraction = nr ? static_cast<double>(count) / nr : (central_found ? 1.0 : 0.0);
    if (!central_found && est.found_fraction < 0.5) {
        est.status = CrossingStatus::NoCrossing;
        est.Tc = kNaN;
    } else {
        est.status = central_found && est.found_fraction >= opt.marginal_fraction ? CrossingStatus::Crossing
                                                                                   : CrossingStatus::Marginal;
        est.Tc = central_found ? central_tc : mean;
    }
    est.largest_pair = est.pairs.back();
    return est;
}

std::vector<size_t> order_by_size(std::span<const int> sizes) {
    std::vector<size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return sizes[a] < sizes[b]; });
    return order;
}

}  // namespace

CrossingEstimate find_crossing(std::span<const DisorderEnsemble> ensembles, const CrossingOptions &opt) {
    if (ensembles.size() < 2) {
        throw AnalysisError("a crossing needs at least two system sizes");
    }
    std::vector<int> sizes;
    for (const DisorderEnsemble &e : ensembles) {
        e.validate();
        if (e.p != ensembles[0].p) {
            throw AnalysisError("ensembles for a crossing must share p");
        }
        if (e.samples.size() < 2) {
            throw AnalysisError("p=" + std::to_string(e.p) + " L=" + std::to_string(e.L) +
                                " needs at least 2 samples for the bootstrap");
        }
        sizes.push_back(e.L);
    }
    std::vector<size_t> order = order_by_size(sizes);
    CurveSet central;
    for (size_t i : order) {
        const DisorderEnsemble &e = ensembles[i];
        central.push_back({e.L, e.temperatures, xi_over_L(e, opt.mode), {}});
    }
    auto resample = [&](uint32_t r) {
        CurveSet cs;
        for (size_t rank = 0; rank < order.size(); ++rank) {
            const DisorderEnsemble &e = ensembles[order[rank]];
            uint32_t n = static_cast<uint32_t>(e.samples.size());
            cs.push_back({e.L, e.temperatures,
                          xi_over_L(e, opt.mode, resample_indices(n, hash_words({opt.seed, rank}), r)), {}});
        }
        return cs;
    };
    CrossingEstimate est = crossing_core(central, resample, opt);
    est.p = ensembles[0].p;
    return est;
}

CrossingEstimate find_crossing(std::span<const Curve> curves, const CrossingOptions &opt) {
    std::vector<int> sizes;
    for (const Curve &c : curves) {
        if (c.values.size() != c.temperatures.size() || (!c.sigmas.empty() && c.sigmas.size() != c.values.size())) {
            throw AnalysisError("curve for L=" + std::to_string(c.L) + " has inconsistent lengths");
        }
        sizes.push_back(c.L);
    }
    std::vector<size_t> order = order_by_size(sizes);
    CurveSet central;
    for (size_t i : order) {
        central.push_back(curves[i]);
    }
    auto resample = [&](uint32_t r) {
        CurveSet cs = central;
        for (size_t rank = 0; rank < cs.size(); ++rank) {
            Stream s(hash_words({opt.seed, rank, 0x5EED, r}));
            Curve &c = cs[rank];
            for (size_t k = 0; k < c.values.size(); ++k) {
                double sigma = c.sigmas.empty() ? 0.0 : c.sigmas[k];
                c.values[k] += sigma * s.normal();
            }
        }
        return cs;
    };
    return crossing_core(central, resample, opt);
}

PhaseBoundary::PhaseBoundary(std::vector<BoundaryKnot> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) {
        throw AnalysisError("phase boundary needs at least one point");
    }
    std::sort(knots_.begin(), knots_.end(), [](const BoundaryKnot &a, const BoundaryKnot &b) { return a.p < b.p; });
    for (size_t k = 0; k < knots_.size(); ++k) {
        if (!std::isfinite(knots_[k].p) || !std::isfinite(knots_[k].Tc)) {
            throw AnalysisError("phase boundary knots must be finite");
        }
        if (k > 0 && knots_[k].p == knots_[k - 1].p) {
            throw AnalysisError("duplicate p=" + std::to_string(knots_[k].p) + " in phase boundary");
        }
    }
}

namespace {

template <class F>
double interpolate_knots(const std::vector<BoundaryKnot> &knots, double p, F field) {
    if (p < knots.front().p || p > knots.back().p) {
        throw std::out_of_range("p=" + std::to_string(p) + " outside the boundary range [" +
                                std::to_string(knots.front().p) + ", " + std::to_string(knots.back().p) + "]");
    }
    for (size_t k = 0; k < knots.size(); ++k) {
        if (knots[k].p == p) {
            return field(knots[k]);
        }
    }
    size_t i = std::upper_bound(knots.begin(), knots.end(), p, [](double v, const BoundaryKnot &k) { return v < k.p; }) -
               knots.begin();
    const BoundaryKnot &a = knots[i - 1];
    const BoundaryKnot &b = knots[i];
    double t = (p - a.p) / (b.p - a.p);
    return (1 - t) * field(a) + t * field(b);
}

}  // namespace

double PhaseBoundary::operator()(double p) const {
    return interpolate_knots(knots_, p, [](const BoundaryKnot &k) { return k.Tc; });
}

double PhaseBoundary::sigma(double p) const {
    return interpolate_knots(knots_, p, [](const BoundaryKnot &k) { return k.sigma; });
}

PhaseBoundary build_phase_boundary(std::span<const CrossingEstimate> estimates) {
    std::vector<double> seen;
    std::vector<BoundaryKnot> knots;
    for (const CrossingEstimate &e : estimates) {
        if (std::find(seen.begin(), seen.end(), e.p) != seen.end()) {
            throw AnalysisError("duplicate p=" + std::to_string(e.p) + " among crossing estimates");
        }
        seen.push_back(e.p);
        if (e.status != CrossingStatus::NoCrossing && std::isfinite(e.Tc)) {
            knots.push_back({e.p, e.Tc, e.sigma_Tc});
        }
    }
    if (knots.empty()) {
        throw AnalysisError("no crossing estimate with a transition temperature");
    }
    return PhaseBoundary(std::move(knots));
}

namespace {

double nishimori_or_zero(double p) {
    return p <= 0 ? 0.0 : nishimori_temperature(p);
}

// First root of Tc(p) - T_N(p) over the knot intervals; nullopt when no interval brackets one.
std::optional<std::pair<double, size_t>> boundary_root(const std::vector<BoundaryKnot> &knots) {
    PhaseBoundary b(knots);
    const auto &ks = b.knots();
    auto g = [&](double p) { return b(p) - nishimori_or_zero(p); };
    for (size_t k = 0; k + 1 < ks.size(); ++k) {
        double g0 = g(ks[k].p), g1 = g(ks[k + 1].p);
        if (g0 == 0) {
            return std::make_pair(ks[k].p, k);
        }
        if (g1 == 0) {
            return std::make_pair(ks[k + 1].p, k);
        }
        if ((g0 < 0) != (g1 < 0)) {
            double l = ks[k].p, r = ks[k + 1].p, gl = g0;
            for (int it = 0; it < 200 && r - l > 1e-16; ++it) {
                double m = 0.5 * (l + r);
                double gm = g(m);
                if (gm == 0) {
                    return std::make_pair(m, k);
                }
                if ((gm < 0) == (gl < 0)) {
                    l = m;
                    gl = gm;
                } else {
                    r = m;
                }
            }
            return std::make_pair(0.5 * (l + r), k);
        }
    }
    return std::nullopt;
}

}  // namespace

ThresholdEstimate intersect_nishimori(const PhaseBoundary &boundary, uint32_t n_resample, uint64_t seed) {
    const auto &knots = boundary.knots();
    if (knots.size() < 2) {
        throw BracketError("boundary does not bracket threshold: need at least two points");
    }
    if (knots.front().p < 0 || knots.back().p >= 0.75) {
        throw AnalysisError("boundary p values must lie in [0, 0.75)");
    }
    auto root = boundary_root(knots);
    if (!root) {
        throw BracketError("boundary does not bracket threshold: T_c(p) - T_N(p) has no sign change on [" +
                           std::to_string(knots.front().p) + ", " + std::to_string(knots.back().p) + "]");
    }
    ThresholdEstimate out;
    out.p_c = root->first;
    out.p_lo = knots[root->second].p;
    out.p_hi = knots[root->second + 1].p;
    out.boundary = knots;
    out.resamples = n_resample;
    std::vector<double> roots(n_resample, kNaN);
    for (uint32_t r = 0; r < n_resample; ++r) {
        Stream s(hash_words({seed, 0x7E5, r}));
        std::vector<BoundaryKnot> ks = knots;
        for (BoundaryKnot &k : ks) {
            k.Tc += k.sigma * s.normal();
        }
        if (auto rr = boundary_root(ks)) {
            roots[r] = rr->first;
        }
    }
    out.sigma = finite_sd(roots, &out.resamples_bracketed);
    return out;
}

const char *collapse_status_name(CollapseStatus s) {
    switch (s) {
        case CollapseStatus::Ok:
            return "ok";
        case CollapseStatus::Degenerate:
            return "degenerate";
        case CollapseStatus::AtBound:
            return "at-bound";
    }
    return "?";
}

double collapse_residual(std::span<const Curve> curves, double Tc, double nu) {
    size_t nc = curves.size();
    std::vector<std::vector<double>> xs(nc);
    for (size_t i = 0; i < nc; ++i) {
        double scale = std::pow(static_cast<double>(curves[i].L), 1.0 / nu);
        for (double t : curves[i].temperatures) {
            xs[i].push_back(scale * (t - Tc));
        }
    }
    double sum = 0;
    uint64_t count = 0;
    for (size_t i = 0; i < nc; ++i) {
        for (size_t a = 0; a < xs[i].size(); ++a) {
            double x = xs[i][a];
            for (size_t j = 0; j < nc; ++j) {
                const auto &xj = xs[j];
                if (j == i || xj.size() < 2 || x < xj.front() || x > xj.back()) {
                    continue;
                }
                size_t k = std::upper_bound(xj.begin(), xj.end(), x) - xj.begin();
                k = std::clamp<size_t>(k, 1, xj.size() - 1);
                double t = (x - xj[k - 1]) / (xj[k] - xj[k - 1]);
                double y = (1 - t) * curves[j].values[k - 1] + t * curves[j].values[k];
                double d = curves[i].values[a] - y;
                sum += d * d;
                ++count;
            }
        }
    }
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::infinity();
}

CollapseResult scaling_collapse(std::span<const Curve> curves, double Tc, double nu_min, double nu_max) {
    std::vector<int> sizes;
    for (const Curve &c : curves) {
        sizes.push_back(c.L);
    }
    std::sort(sizes.begin(), sizes.end());
    if (std::unique(sizes.begin(), sizes.end()) - sizes.begin() < 3) {
        throw AnalysisError("scaling collapse needs at least three distinct sizes");
    }
    if (!(nu_min > 0) || !(nu_max > nu_min)) {
        throw AnalysisError("invalid nu search range");
    }
    const int grid = 240;
    std::vector<double> nus(grid + 1), res(grid + 1);
    for (int k = 0; k <= grid; ++k) {
        nus[k] = nu_min * std::pow(nu_max / nu_min, static_cast<double>(k) / grid);
        res[k] = collapse_residual(curves, Tc, nus[k]);
    }
    auto [mn, mx] = std::minmax_element(res.begin(), res.end());
    double scale = 0;
    uint64_t points = 0;
    for (const Curve &c : curves) {
        for (double y : c.values) {
            scale += y * y;
            ++points;
        }
    }
    scale = points ? scale / static_cast<double>(points) : 0.0;
    CollapseResult out;
    // Flat in nu, or every residual at rounding level: nothing to fit.
    if (!std::isfinite(*mn) || *mx - *mn <= 1e-12 * *mx || *mx <= 1e-24 * scale) {
        out.status = CollapseStatus::Degenerate;
        out.nu = kNaN;
        out.residual = *mn;
        return out;
    }
    int best = static_cast<int>(mn - res.begin());
    if (best == 0 || best == grid) {
        out.status = CollapseStatus::AtBound;
        out.nu = nus[best];
        out.residual = res[best];
        return out;
    }
    // Golden-section refinement between the neighbouring grid points.
    double a = nus[best - 1], b = nus[best + 1];
    const double g = 0.5 * (std::sqrt(5.0) - 1);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = collapse_residual(curves, Tc, c), fd = collapse_residual(curves, Tc, d);
    for (int it = 0; it < 100 && b - a > 1e-10 * b; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = collapse_residual(curves, Tc, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = collapse_residual(curves, Tc, d);
        }
    }
    out.nu = 0.5 * (a + b);
    out.residual = collapse_residual(curves, Tc, out.nu);
    return out;
}

SensitivityReport sublattice_sensitivity(std::span<const DisorderEnsemble> ensembles, const CrossingOptions &opt) {
    SensitivityReport rep;
    for (Sublattice m : {Sublattice::Average, Sublattice::A, Sublattice::B, Sublattice::C}) {
        CrossingOptions o = opt;
        o.mode = m;
        rep.estimates[static_cast<int>(m)] = find_crossing(ensembles, o);
    }
    const CrossingEstimate &avg = rep.estimates[0];
    rep.consistent = avg.status != CrossingStatus::NoCrossing;
    for (int k = 1; k < 4 && rep.consistent; ++k) {
        const CrossingEstimate &e = rep.estimates[k];
        if (e.status == CrossingStatus::NoCrossing) {
            rep.consistent = false;
            break;
        }
        double err = std::hypot(e.sigma_Tc, avg.sigma_Tc);
        double pull = err > 0 ? std::abs(e.Tc - avg.Tc) / err : (e.Tc == avg.Tc ? 0.0 : INFINITY);
        rep.max_pull = std::max(rep.max_pull, pull);
    }
    if (rep.consistent) {
        rep.consistent = rep.max_pull < 1.0;
    }
    return rep;
}

namespace {

const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

struct Frame {
    double x0, x1, y0, y1;
    double w = 640, h = 440, ml = 70, mr = 20, mt = 40, mb = 55;

    double X(double x) const {
        return ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    }
    double Y(double y) const {
        return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    }
};

void pad(double &lo, double &hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
}

void axes(std::ostringstream &os, const Frame &f, const std::string &title, const std::string &xl, const std::string &yl) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.w << "\" height=\"" << f.h
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << f.w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<rect x=\"" << f.ml << "\" y=\"" << f.mt << "\" width=\"" << f.w - f.ml - f.mr << "\" height=\""
       << f.h - f.mt - f.mb << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        double xv = f.x0 + (f.x1 - f.x0) * k / 5;
        double yv = f.y0 + (f.y1 - f.y0) * k / 5;
        os << "<text x=\"" << f.X(xv) << "\" y=\"" << f.h - f.mb + 16 << "\" text-anchor=\"middle\">"
           << std::round(xv * 1000) / 1000 << "</text>\n";
        os << "<text x=\"" << f.ml - 6 << "\" y=\"" << f.Y(yv) + 4 << "\" text-anchor=\"end\">"
           << std::round(yv * 1000) / 1000 << "</text>\n";
    }
    os << "<text x=\"" << f.w / 2 << "\" y=\"" << f.h - 12 << "\" text-anchor=\"middle\">" << xl << "</text>\n";
    os << "<text x=\"16\" y=\"" << f.h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << f.h / 2
       << ")\">" << yl << "</text>\n";
}

}  // namespace

std::string crossing_svg(std::span<const Curve> curves, const CrossingEstimate &est, const std::string &title) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const Curve &c : curves) {
        for (size_t k = 0; k < c.values.size(); ++k) {
            if (!std::isfinite(c.values[k])) {
                continue;
            }
            double s = c.sigmas.empty() ? 0 : c.sigmas[k];
            x0 = std::min(x0, c.temperatures[k]);
            x1 = std::max(x1, c.temperatures[k]);
            y0 = std::min(y0, c.values[k] - s);
            y1 = std::max(y1, c.values[k] + s);
        }
    }
    if (!std::isfinite(x0)) {
        x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    }
    pad(x0, x1);
    pad(y0, y1);
    Frame f{x0, x1, y0, y1};
    std::ostringstream os;
    axes(os, f, title, "T", "xi_L / L");
    if (est.status != CrossingStatus::NoCrossing && std::isfinite(est.Tc)) {
        double a = std::max(x0, est.Tc - est.sigma_Tc), b = std::min(x1, est.Tc + est.sigma_Tc);
        os << "<rect x=\"" << f.X(a) << "\" y=\"" << f.mt << "\" width=\"" << std::max(0.0, f.X(b) - f.X(a))
           << "\" height=\"" << f.h - f.mt - f.mb << "\" fill=\"#bbbbbb\" fill-opacity=\"0.4\"/>\n";
        os << "<line x1=\"" << f.X(est.Tc) << "\" x2=\"" << f.X(est.Tc) << "\" y1=\"" << f.mt << "\" y2=\""
           << f.h - f.mb << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    }
    for (size_t i = 0; i < curves.size(); ++i) {
        const Curve &c = curves[i];
        const char *col = kPalette[i % std::size(kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" points=\"";
        for (size_t k = 0; k < c.values.size(); ++k) {
            if (std::isfinite(c.values[k])) {
                os << f.X(c.temperatures[k]) << "," << f.Y(c.values[k]) << " ";
            }
        }
        os << "\"/>\n";
        for (size_t k = 0; k < c.values.size(); ++k) {
            if (!std::isfinite(c.values[k])) {
                continue;
            }
            double s = c.sigmas.empty() ? 0 : c.sigmas[k];
            double x = f.X(c.temperatures[k]);
            os << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << f.Y(c.values[k] - s) << "\" y2=\""
               << f.Y(c.values[k] + s) << "\" stroke=\"" << col << "\"/>";
            os << "<circle cx=\"" << x << "\" cy=\"" << f.Y(c.values[k]) << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
        }
        os << "<text x=\"" << f.w - f.mr - 8 << "\" y=\"" << f.mt + 16 + 16 * i << "\" text-anchor=\"end\" fill=\""
           << col << "\">L = " << c.L << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string phase_diagram_svg(const PhaseBoundary &boundary, const ThresholdEstimate *threshold) {
    const auto &ks = boundary.knots();
    double x0 = 0, x1 = ks.back().p * 1.1 + 1e-3;
    double y0 = 0, y1 = 0;
    for (const BoundaryKnot &k : ks) {
        y1 = std::max(y1, k.Tc + k.sigma);
    }
    y1 *= 1.1;
    Frame f{x0, x1, y0, y1};
    std::ostringstream os;
    axes(os, f, "phase boundary", "p", "T");
    os << "<polyline fill=\"none\" stroke=\"#2ca02c\" stroke-dasharray=\"6 3\" points=\"";
    for (int k = 1; k <= 200; ++k) {
        double p = x1 * k / 200;
        double t = nishimori_temperature(p);
        if (t <= y1) {
            os << f.X(p) << "," << f.Y(t) << " ";
        }
    }
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" points=\"";
    for (const BoundaryKnot &k : ks) {
        os << f.X(k.p) << "," << f.Y(k.Tc) << " ";
    }
    os << "\"/>\n";
    for (const BoundaryKnot &k : ks) {
        os << "<line x1=\"" << f.X(k.p) << "\" x2=\"" << f.X(k.p) << "\" y1=\"" << f.Y(k.Tc - k.sigma) << "\" y2=\""
           << f.Y(k.Tc + k.sigma) << "\" stroke=\"#1f77b4\"/>";
        os << "<circle cx=\"" << f.X(k.p) << "\" cy=\"" << f.Y(k.Tc) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    }
    if (threshold) {
        double p = threshold->p_c;
        os << "<line x1=\"" << f.X(p) << "\" x2=\"" << f.X(p) << "\" y1=\"" << f.mt << "\" y2=\"" << f.h - f.mb
           << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
        os << "<text x=\"" << f.X(p) + 4 << "\" y=\"" << f.mt + 14 << "\" fill=\"#d62728\">p_c = " << p << " +- "
           << threshold->sigma << "</text>\n";
    }
    os << "<text x=\"" << f.w - f.mr - 8 << "\" y=\"" << f.mt + 16
       << "\" text-anchor=\"end\" fill=\"#2ca02c\">Nishimori line</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace tscc
