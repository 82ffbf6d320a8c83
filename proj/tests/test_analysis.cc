#include <doctest.h>

#include <cmath>
#include <numeric>

#include "synthetic.h"
#include "tscc/analysis.h"
#include "tscc/model.h"
#include "tscc/parallel.h"
#include "tscc/rng.h"

using namespace tscc;
using testing::linspace;

namespace {

double mean_of(std::span<const double> xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

Curve line(int L, double slope, double Tc, double y0, std::vector<double> temps, double sigma = 0) {
    Curve c;
    c.L = L;
    c.temperatures = temps;
    for (double T : temps) {
        c.values.push_back(y0 + slope * (T - Tc));
        c.sigmas.push_back(sigma);
    }
    return c;
}

}  // namespace

TEST_CASE("bootstrap of constant input has zero spread") {
    std::vector<double> xs(50, 3.25);
    auto r = bootstrap(xs, mean_of, 200, 1);
    CHECK(r.estimate == 3.25);
    CHECK(r.mean == 3.25);
    CHECK(r.sigma == 0.0);
}

TEST_CASE("bootstrap error of a mean") {
    Stream rng(8);
    std::vector<double> xs(400);
    for (double &x : xs) {
        x = rng.normal();
    }
    auto r = bootstrap(xs, mean_of, 2000, 3);
    double sd = 0;
    double m = mean_of(xs);
    for (double x : xs) {
        sd += (x - m) * (x - m);
    }
    sd = std::sqrt(sd / (xs.size() - 1));
    CHECK(r.estimate == doctest::Approx(m));
    CHECK(r.sigma == doctest::Approx(sd / 20).epsilon(0.1));
    // Same seed, same answer; another seed differs.
    CHECK(bootstrap(xs, mean_of, 2000, 3).sigma == r.sigma);
    CHECK(bootstrap(xs, mean_of, 2000, 4).sigma != r.sigma);
    CHECK_THROWS_AS(bootstrap(std::vector<double>{1.0}, mean_of, 10, 0), AnalysisError);
}

TEST_CASE("two-sample bootstrap of the mean") {
    // Resamples of {1, 3}: means 1, 2, 2, 3 with equal weight, sd = sqrt(1/2).
    std::vector<double> xs{1.0, 3.0};
    auto r = bootstrap(xs, mean_of, 20000, 5);
    CHECK(r.sigma == doctest::Approx(std::sqrt(0.5)).epsilon(0.02));
}

TEST_CASE("bootstrap does not depend on the thread count") {
    std::vector<double> xs = linspace(0, 1, 37);
#ifdef _OPENMP
    omp_set_num_threads(4);
#endif
    auto a = bootstrap(xs, mean_of, 300, 2);
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    auto b = bootstrap(xs, mean_of, 300, 2);
    CHECK(a.sigma == b.sigma);
    CHECK(a.mean == b.mean);
}

TEST_CASE("monotone cubic interpolation") {
    MonotoneCubic lin({0, 1, 2, 4}, {1, 3, 5, 9});
    for (double x = 0; x <= 4; x += 0.1) {
        CHECK(lin(x) == doctest::Approx(1 + 2 * x));
    }
    // Step-like data: no overshoot between knots.
    MonotoneCubic step({0, 1, 2, 3, 4}, {0, 0, 1, 1, 1});
    double prev = -1;
    for (double x = 0; x <= 4; x += 0.01) {
        double y = step(x);
        CHECK(y >= prev - 1e-12);
        CHECK(y >= -1e-12);
        CHECK(y <= 1 + 1e-12);
        prev = y;
    }
    CHECK(step(1) == 0);
    CHECK(step(2) == 1);
}

TEST_CASE("straight lines crossing at 1.4") {
    auto temps = linspace(1.0, 2.0, 11);
    std::vector<Curve> curves{line(9, -0.2, 1.4, 0.5, temps), line(12, -0.35, 1.4, 0.5, temps),
                              line(18, -0.6, 1.4, 0.5, temps)};
    auto est = find_crossing(curves, {});
    CHECK(est.status == CrossingStatus::Crossing);
    CHECK(std::abs(est.Tc - 1.4) < 1e-6);
    CHECK(est.sigma_Tc == 0.0);
    CHECK(est.found_fraction == 1.0);
    REQUIRE(est.pairs.size() == 3);
    for (const auto &pc : est.pairs) {
        CHECK(pc.found);
        CHECK(std::abs(pc.T - 1.4) < 1e-6);
    }
    REQUIRE(est.largest_pair);
    CHECK(est.largest_pair->L1 == 12);
    CHECK(est.largest_pair->L2 == 18);
}

TEST_CASE("crossing off the temperature grid") {
    auto temps = linspace(1.0, 2.0, 9);
    std::vector<Curve> curves{line(9, -0.2, 1.4321, 0.5, temps), line(12, -0.5, 1.4321, 0.5, temps)};
    CHECK(std::abs(find_crossing(curves, {}).Tc - 1.4321) < 1e-6);
}

TEST_CASE("noisy lines give a finite error") {
    auto temps = linspace(1.0, 2.0, 11);
    std::vector<Curve> curves{line(9, -0.2, 1.4, 0.5, temps, 0.005), line(12, -0.35, 1.4, 0.5, temps, 0.005),
                              line(18, -0.6, 1.4, 0.5, temps, 0.005)};
    CrossingOptions opt;
    opt.n_resample = 400;
    auto est = find_crossing(curves, opt);
    CHECK(est.status == CrossingStatus::Crossing);
    CHECK(est.sigma_Tc > 0);
    CHECK(est.sigma_Tc < 0.05);
    CHECK(std::abs(est.Tc - 1.4) < 1e-6);
}

TEST_CASE("parallel lines have no crossing") {
    auto temps = linspace(1.0, 2.0, 11);
    std::vector<Curve> curves{line(9, -0.3, 1.4, 0.5, temps, 0.001), line(12, -0.3, 1.4, 0.6, temps, 0.001)};
    auto est = find_crossing(curves, {});
    CHECK(est.status == CrossingStatus::NoCrossing);
    CHECK(std::isnan(est.Tc));
    CHECK(est.found_fraction == 0.0);
}

TEST_CASE("a crossing at the edge of the range is marginal") {
    auto temps = linspace(1.0, 2.0, 11);
    std::vector<Curve> curves{line(9, -0.2, 1.995, 0.5, temps, 0.01), line(12, -0.3, 1.995, 0.5, temps, 0.01)};
    auto est = find_crossing(curves, {});
    CHECK(est.status == CrossingStatus::Marginal);
    CHECK(est.found_fraction < 0.8);
    CHECK(std::abs(est.Tc - 1.995) < 1e-6);
}

TEST_CASE("with several roots the steepest one wins") {
    auto temps = linspace(0.0, 3.0, 61);
    Curve a{9, temps, {}, {}}, b{12, temps, {}, {}};
    for (double T : temps) {
        a.values.push_back(std::sin(T));
        b.values.push_back(std::sin(T) + 0.1 * (T - 0.7) * (T - 2.4) * (T + 2));
    }
    auto c = find_curve_crossing(a, b);
    CHECK(c.found);
    CHECK(c.roots >= 2);
    // Slope of the difference is -0.459 at 0.7 and 0.748 at 2.4.
    CHECK(c.T == doctest::Approx(2.4).epsilon(1e-3));
}

TEST_CASE("curves without overlap are an error") {
    Curve a = line(9, -0.2, 1.4, 0.5, linspace(1.0, 1.5, 5));
    Curve b = line(12, -0.3, 1.4, 0.5, linspace(1.6, 2.0, 5));
    CHECK_THROWS_AS(find_curve_crossing(a, b), AnalysisError);
}

TEST_CASE("ensemble crossing recovers a planted transition") {
    auto temps = linspace(1.2, 2.2, 21);
    std::vector<DisorderEnsemble> ens{testing::planted_ensemble(0.0, 9, temps, 20, 1.65, 0.03, 1),
                                      testing::planted_ensemble(0.0, 12, temps, 20, 1.65, 0.03, 1),
                                      testing::planted_ensemble(0.0, 18, temps, 20, 1.65, 0.03, 1)};
    CrossingOptions opt;
    opt.n_resample = 200;
    auto est = find_crossing(ens, opt);
    CHECK(est.status == CrossingStatus::Crossing);
    CHECK(est.Tc == doctest::Approx(1.65).epsilon(1e-3));
    CHECK(est.sigma_Tc > 0);
    CHECK(std::abs(est.Tc - 1.65) < 3 * est.sigma_Tc + 1e-3);

    SUBCASE("input order does not matter") {
        std::vector<DisorderEnsemble> shuffled{ens[2], ens[0], ens[1]};
        auto e2 = find_crossing(shuffled, opt);
        CHECK(e2.Tc == est.Tc);
        CHECK(e2.sigma_Tc == est.sigma_Tc);
    }
    SUBCASE("relabeling sizes keeps the resampling streams") {
        auto renamed = ens;
        renamed[0].L = 6;
        renamed[1].L = 15;
        renamed[2].L = 24;
        auto e2 = find_crossing(renamed, opt);
        // Curves change with L through xi/L, but each size is resampled identically.
        CHECK(e2.found_fraction == doctest::Approx(est.found_fraction).epsilon(0.1));
        auto again = find_crossing(renamed, opt);
        CHECK(again.Tc == e2.Tc);
    }
    SUBCASE("per-sublattice report") {
        auto rep = sublattice_sensitivity(ens, opt);
        CHECK(rep.estimates[0].Tc == est.Tc);
        for (int k = 1; k < 4; ++k) {
            CHECK(rep.estimates[k].status != CrossingStatus::NoCrossing);
        }
        CHECK(std::isfinite(rep.max_pull));
    }
}

TEST_CASE("xi curve needs two samples and says where") {
    auto ens = testing::planted_ensemble(0.02, 9, {1.0, 1.5}, 1, 1.5, 0.0, 1);
    ens.samples.pop_back();
    try {
        xi_over_L_curve(ens);
        FAIL("expected AnalysisError");
    } catch (const AnalysisError &e) {
        std::string msg = e.what();
        CHECK(msg.find("L=9") != std::string::npos);
        CHECK(msg.find("1.5") != std::string::npos);
    }
    auto bad = testing::planted_ensemble(0.02, 9, {1.0, 1.5}, 2, 1.5, 0.0, 1);
    bad.samples[1].chik.pop_back();
    CHECK_THROWS_AS(bad.validate(), AnalysisError);
}

TEST_CASE("xi curve values match the planted form") {
    auto temps = linspace(1.0, 2.0, 5);
    auto ens = testing::planted_ensemble(0.0, 12, temps, 10, 1.5, 0.02, 4);
    Curve c = xi_over_L_curve(ens, Sublattice::Average, 100, 0);
    for (size_t k = 0; k < temps.size(); ++k) {
        CHECK(c.values[k] == doctest::Approx(testing::planted_xi_over_L(12, temps[k], 1.5)).epsilon(1e-10));
        CHECK(c.sigmas[k] > 0);
    }
}

TEST_CASE("phase boundary") {
    PhaseBoundary b({{0.04, 1.3, 0.02}, {0.0, 1.65, 0.01}, {0.05, 1.2, 0.03}});
    CHECK(b.p_min() == 0.0);
    CHECK(b.p_max() == 0.05);
    CHECK(b(0.02) == doctest::Approx(1.475));
    CHECK(b.sigma(0.045) == doctest::Approx(0.025));
    CHECK_THROWS(b(0.06));
    CHECK_THROWS_AS(PhaseBoundary({{0.01, 1.0, 0}, {0.01, 1.1, 0}}), AnalysisError);

    CrossingEstimate e1, e2, e3;
    e1.p = 0.0, e1.status = CrossingStatus::Crossing, e1.Tc = 1.65;
    e2.p = 0.03, e2.status = CrossingStatus::Marginal, e2.Tc = 1.4;
    e3.p = 0.06, e3.status = CrossingStatus::NoCrossing, e3.Tc = NAN;
    std::vector<CrossingEstimate> es{e1, e2, e3};
    auto pb = build_phase_boundary(es);
    CHECK(pb.knots().size() == 2);
    std::vector<CrossingEstimate> dup{e1, e1};
    CHECK_THROWS_AS(build_phase_boundary(dup), AnalysisError);
    std::vector<CrossingEstimate> none{e3};
    CHECK_THROWS_AS(build_phase_boundary(none), AnalysisError);
}

TEST_CASE("planted threshold is recovered") {
    const double pc = 0.055;
    std::vector<BoundaryKnot> knots;
    for (double p : {0.0, 0.02, 0.04, 0.048, 0.052, 0.06}) {
        knots.push_back({p, testing::planted_boundary(p, pc), 0.005});
    }
    auto th = intersect_nishimori(PhaseBoundary(knots), 500, 1);
    CHECK(std::abs(th.p_c - pc) < 1e-3);
    CHECK(th.p_lo == 0.052);
    CHECK(th.p_hi == 0.06);
    CHECK(th.sigma > 0);
    CHECK(th.sigma < 0.002);
    CHECK(th.resamples_bracketed == 500);

    for (auto &k : knots) {
        k.sigma = 0;
    }
    auto exact = intersect_nishimori(PhaseBoundary(knots), 50, 1);
    CHECK(exact.sigma == 0.0);
    CHECK(std::abs(exact.p_c - pc) < 1e-6);
}

TEST_CASE("boundary that never meets the Nishimori line") {
    std::vector<BoundaryKnot> knots{{0.0, 1.65, 0.01}, {0.02, 1.6, 0.01}, {0.03, 1.55, 0.01}};
    CHECK_THROWS_AS(intersect_nishimori(PhaseBoundary(knots)), BracketError);
    CHECK_THROWS_AS(intersect_nishimori(PhaseBoundary({{0.0, 1.65, 0.0}})), BracketError);
}

TEST_CASE("scaling collapse finds the planted exponent") {
    auto temps = linspace(1.3, 2.0, 29);
    std::vector<Curve> curves;
    for (int L : {9, 12, 18, 24}) {
        Curve c{L, temps, {}, {}};
        for (double T : temps) {
            c.values.push_back(testing::planted_xi_over_L(L, T, 1.65, 1.5));
        }
        curves.push_back(c);
    }
    auto r = scaling_collapse(curves, 1.65);
    CHECK(r.status == CollapseStatus::Ok);
    CHECK(r.nu == doctest::Approx(1.5).epsilon(0.01));
    CHECK(collapse_residual(curves, 1.65, 1.5) < collapse_residual(curves, 1.65, 1.0));

    auto bounded = scaling_collapse(curves, 1.65, 2.0, 4.0);
    CHECK(bounded.status == CollapseStatus::AtBound);
    CHECK(bounded.nu == doctest::Approx(2.0));

    std::vector<Curve> flat = curves;
    for (auto &c : flat) {
        std::fill(c.values.begin(), c.values.end(), 0.4);
    }
    CHECK(scaling_collapse(flat, 1.65).status == CollapseStatus::Degenerate);
    std::vector<Curve> two(curves.begin(), curves.begin() + 2);
    CHECK_THROWS_AS(scaling_collapse(two, 1.65), AnalysisError);
}

TEST_CASE("svg output is well formed") {
    auto temps = linspace(1.0, 2.0, 11);
    std::vector<Curve> curves{line(9, -0.2, 1.4, 0.5, temps, 0.01), line(12, -0.35, 1.4, 0.5, temps, 0.01)};
    auto est = find_crossing(curves, {});
    std::string svg = crossing_svg(curves, est, "p=0");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    PhaseBoundary b({{0.0, 1.65, 0.01}, {0.06, 0.9, 0.02}});
    auto th = intersect_nishimori(b, 20, 0);
    std::string pd = phase_diagram_svg(b, &th);
    CHECK(pd.find("</svg>") != std::string::npos);
}
