#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsdelab/factories.hpp"

using namespace bsdelab;

namespace {

double y0_of(const Solution& s, const BSDEProblem& p) { return s.y[p.model.space->root()]; }

double pair_gap_h2_l2(const BSDEProblem& p, const Solution& a, const Solution& b) {
    const MartingaleModel& m = p.model;
    const FilteredSpace& sp = *m.space;
    ScalarAdapted dy(m.space, 0.0);
    VecPredictable dz(m.space, Vec(static_cast<std::size_t>(m.dim)));
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) dy[id] = a.y[id] - b.y[id];
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) dz[id] = a.z[id] - b.z[id];
    return norm_h2(dy, m.q_process, 0.0) + norm_l2m(dz, m.q_process, m.m_factor, 0.0);
}

}  // namespace

TEST_CASE("m-Lipschitz estimator") {
    Rng rng(3);
    RandomModelSpec spec;
    spec.max_depth = 5;
    const RandomModel rm = make_random_model(rng, spec);

    SUBCASE("constants have slope zero") {
        const LipschitzReport rep = verify_m_lipschitz(make_constant_generator(4.2), rm.model, 200, 1);
        CHECK(rep.estimate == 0.0);
        CHECK_FALSE(rep.violated);
    }
    SUBCASE("g = 2y is recovered exactly") {
        Generator g("2y", 2.0, [](const GenContext&, double y, const Vec&) { return 2.0 * y; });
        const LipschitzReport rep = verify_m_lipschitz(g, rm.model, 300, 2);
        CHECK(rep.estimate == doctest::Approx(2.0).epsilon(1e-12));
        CHECK_FALSE(rep.violated);
    }
    SUBCASE("an understated constant is flagged") {
        Generator g("bad", 0.1, [](const GenContext&, double y, const Vec&) { return 2.0 * y; });
        CHECK(verify_m_lipschitz(g, rm.model, 300, 3).violated);
    }
}

TEST_CASE("lambda-admissible driver: estimate equals the declared constant") {
    BlockSpaceSpec bs;
    bs.steps = 6;
    bs.cont_branching = 2;
    bs.jump = JumpLayout::Kind::Default;
    bs.lambda = {0.5};
    const BlockSpace blk = build_block_space(bs);
    const MartingaleModel model = assemble_block_model(
        build_brownian_proxy(blk.space, 1, 1.0, &blk.layout),
        build_default_martingale(blk.space, blk.lambda_per_step, &blk.layout));
    const Generator g = make_lambda_admissible_generator(0.0, 0.0, 0.7, 1, 2);
    const LipschitzReport rep = verify_m_lipschitz(g, model, 600, 7);
    CHECK(rep.declared == doctest::Approx(0.7));
    CHECK(rep.estimate == doctest::Approx(0.7).epsilon(1e-9));
    CHECK_FALSE(rep.violated);
}

TEST_CASE("exact solver: constant payoff, zero driver") {
    Rng rng(5);
    RandomModelSpec spec;
    spec.max_depth = 6;
    const RandomModel rm = make_random_model(rng, spec);
    const FilteredSpace& sp = *rm.model.space;
    BSDEProblem p = make_problem(rm.model, make_zero_generator(),
                                 std::vector<double>(sp.leaves().size(), 2.5));
    const Solution s = solve_backward_exact(p);
    CHECK(s.pathwise_residual < 1e-12);
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) CHECK(s.y[id] == doctest::Approx(2.5).epsilon(1e-14));
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) CHECK(s.z[id].max_abs() < 1e-12);
}

TEST_CASE("exact solver: discount oracle and order-one convergence") {
    for (int steps : {10, 20, 40, 80, 160}) {
        SpacePtr sp = make_chain_space(1.0, steps);
        const MartingaleModel m = build_brownian_proxy(sp, 1, 0.0);
        BSDEProblem p = make_problem(m, make_discount_generator(0.1),
                                     std::vector<double>(1, 1.0));
        const Solution s = solve_backward_exact(p);
        const double dt = 1.0 / steps;
        // implicit one-step recursion solves y_k (1 + r dt) = y_{k+1}
        CHECK(y0_of(s, p) == doctest::Approx(std::pow(1.0 + 0.1 * dt, -steps)).epsilon(1e-12));
        CHECK(std::fabs(y0_of(s, p) - std::exp(-0.1)) <= 2.0 / steps);
    }
}

TEST_CASE("exact solver: g = 1 integrates the clock") {
    SpacePtr sp = make_uniform_space(1.0, 8, 2);
    const MartingaleModel m = build_brownian_proxy(sp, 1, 1.0);
    BSDEProblem p = make_problem(m, make_constant_generator(1.0),
                                 std::vector<double>(sp->leaves().size(), 0.0));
    const Solution s = solve_backward_exact(p);
    CHECK(y0_of(s, p) == doctest::Approx(1.0).epsilon(1e-13));
    for (int k = 0; k <= 8; ++k)
        for (NodeId id : sp->slice(k))
            CHECK(s.y[id] == doctest::Approx(1.0 - sp->time_of(id)).epsilon(1e-13));
}

TEST_CASE("exact solver refuses L dQ >= 1") {
    SpacePtr sp = make_uniform_space(1.0, 5, 2);
    const MartingaleModel m = build_brownian_proxy(sp, 1, 1.0);
    BSDEProblem p = make_problem(m, make_discount_generator(20.0),
                                 std::vector<double>(sp->leaves().size(), 1.0));
    CHECK_THROWS_WITH_AS(solve_backward_exact(p), doctest::Contains("refine the grid"),
                         std::invalid_argument);
}

TEST_CASE("exact solver: pathwise identity on random problems") {
    Rng rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        BSDEProblem p = make_random_problem(rng);
        const Solution s = solve_backward_exact(p);
        CHECK(s.pathwise_residual < 1e-10);
    }
}

TEST_CASE("transform_shift") {
    Rng rng(9);

    SUBCASE("deterministic ramp: eta~ = 1 - T and Y_t = t") {
        SpacePtr sp = make_uniform_space(1.0, 5, 2);
        const MartingaleModel m = build_brownian_proxy(sp, 1, 1.0);
        ScalarAdapted ramp(sp, 0.0);
        for (int k = 0; k <= 5; ++k)
            for (NodeId id : sp->slice(k)) ramp[id] = sp->time_of(id);
        BSDEProblem p = make_problem(m, make_zero_generator(),
                                     std::vector<double>(sp->leaves().size(), 1.0), ramp);
        const BSDEProblem shifted = transform_shift(p);
        for (double v : shifted.eta) CHECK(v == doctest::Approx(0.0));
        const Solution st = solve_backward_exact(shifted);
        const Solution s = solve_backward_exact(p);
        for (int k = 0; k <= 5; ++k)
            for (NodeId id : sp->slice(k)) {
                CHECK(st.y[id] == doctest::Approx(0.0).epsilon(1e-14));
                CHECK(s.y[id] == doctest::Approx(sp->time_of(id)).epsilon(1e-13));
            }
    }

    SUBCASE("round trip: solve shifted, map back, compare") {
        for (int trial = 0; trial < 8; ++trial) {
            BSDEProblem p = make_random_problem(rng);
            const Solution direct = solve_backward_exact(p);
            const BSDEProblem shifted = transform_shift(p);
            const Solution st = solve_backward_exact(shifted);
            const FilteredSpace& sp = *p.model.space;
            double worst = 0.0;
            for (int k = 0; k <= sp.n_steps(); ++k)
                for (NodeId id : sp.slice(k))
                    worst = std::max(worst,
                                     std::fabs(st.y[id] + p.adjustment[id] - direct.y[id]));
            for (int k = 0; k < sp.n_steps(); ++k)
                for (NodeId id : sp.slice(k))
                    worst = std::max(worst, (st.z[id] - direct.z[id]).max_abs());
            CHECK(worst < 1e-10);
        }
    }
}

TEST_CASE("picard_map basics") {
    Rng rng(11);
    RandomModelSpec spec;
    spec.max_depth = 6;
    const RandomModel rm = make_random_model(rng, spec);
    const FilteredSpace& sp = *rm.model.space;
    const std::vector<double> eta = make_random_eta(rng, rm.model, 1.0);
    const auto n = static_cast<std::size_t>(rm.model.dim);

    SUBCASE("zero driver: Y is the martingale closure") {
        BSDEProblem p = make_problem(rm.model, make_zero_generator(), eta);
        const ScalarAdapted closure = martingale_closure(rm.model.space, eta);
        const Solution s =
            picard_map(p, ScalarAdapted(rm.model.space, 0.0), VecPredictable(rm.model.space, Vec(n)));
        for (int k = 0; k <= sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k))
                CHECK(s.y[id] == doctest::Approx(closure[id]).epsilon(1e-13));
        CHECK(s.pathwise_residual < 1e-12);
    }

    SUBCASE("unit driver adds the remaining clock") {
        BSDEProblem p = make_problem(rm.model, make_constant_generator(1.0), eta);
        const ScalarAdapted closure = martingale_closure(rm.model.space, eta);
        const Solution s =
            picard_map(p, ScalarAdapted(rm.model.space, 0.0), VecPredictable(rm.model.space, Vec(n)));
        for (int k = 0; k <= sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k))
                CHECK(s.y[id] ==
                      doctest::Approx(closure[id] + rm.model.c_q - rm.model.q_process[id])
                          .epsilon(1e-12));
    }

    SUBCASE("the exact solution is a fixed point") {
        BSDEProblem p = make_problem(rm.model, make_random_generator(rng, rm.model, 0.6), eta);
        const Solution exact = solve_backward_exact(p);
        const Solution mapped = picard_map(p, exact.y, exact.z);
        double worst = 0.0;
        for (int k = 0; k <= sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) worst = std::max(worst, std::fabs(mapped.y[id] - exact.y[id]));
        for (int k = 0; k < sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k))
                worst = std::max(worst, (mapped.z[id] - exact.z[id]).max_abs());
        CHECK(worst < 1e-10);
    }

    SUBCASE("rejects problems with a live adjustment") {
        ScalarAdapted d(rm.model.space, 0.5);
        BSDEProblem p = make_problem(rm.model, make_zero_generator(), eta, d);
        CHECK_THROWS_WITH_AS(
            picard_map(p, ScalarAdapted(rm.model.space, 0.0), VecPredictable(rm.model.space, Vec(n))),
            doctest::Contains("transform_shift"), std::invalid_argument);
    }
}

TEST_CASE("picard_iterate: zero driver settles immediately") {
    Rng rng(13);
    RandomModelSpec spec;
    spec.max_depth = 5;
    const RandomModel rm = make_random_model(rng, spec);
    BSDEProblem p = make_problem(rm.model, make_zero_generator(),
                                 make_random_eta(rng, rm.model, 1.0));
    const PicardResult pr = picard_iterate(p, 4.0, 10, 1e-12);
    CHECK(pr.trace.converged);
    CHECK(pr.trace.iterations <= 2);  // first map lands on the fixed point
    CHECK(pr.solution.pathwise_residual < 1e-11);
}

TEST_CASE("picard_iterate agrees with the exact solver") {
    Rng rng(17);
    for (int trial = 0; trial < 8; ++trial) {
        BSDEProblem p = make_random_problem(rng);
        const Solution exact = solve_backward_exact(p);
        const PicardResult pr = picard_iterate(p, 8.0, 80, 1e-13);
        CHECK(pr.trace.converged);
        CHECK(pair_gap_h2_l2(p, pr.solution, exact) < 1e-8);
        CHECK(pr.solution.pathwise_residual < 1e-10);
    }
}

TEST_CASE("picard contraction ratios respect the explicit bound when it bites") {
    // The estimate transfers to the discrete weighted norms only while
    // beta dQ stays moderate, so a bound below 1 requires a small Lipschitz
    // constant: beta = 2 * 1158 L^2 (C_Q + 1) and dQ = C_Q / steps.
    Rng rng(19);
    for (double lips : {0.04, 0.06}) {
        BlockSpaceSpec bs;
        bs.T = 0.5;
        bs.steps = 12;
        bs.cont_branching = 2;
        bs.randomize_probs = true;
        const BlockSpace blk = build_block_space(bs, &rng);
        const MartingaleModel model = build_brownian_proxy(blk.space, 1, 1.0, &blk.layout);
        Vec zc(1);
        zc[0] = lips;
        BSDEProblem p = make_problem(model,
                                     make_custom_polynomial_generator({0.2, lips * 0.5}, zc, 5.0),
                                     make_random_eta(rng, model, 1.0));
        const double l_hat = p.generator.declared_lipschitz();
        const double beta = 2.0 * 1158.0 * l_hat * l_hat * (model.c_q + 1.0);
        CHECK(beta * model.c_q / bs.steps < 1.0);  // discretization regime is sane
        const PicardResult pr = picard_iterate(p, beta, 30, 1e-30);
        CHECK(pr.trace.theoretical_bound == doctest::Approx(0.5));
        CHECK(pr.trace.bound_respected);
        REQUIRE(pr.trace.ratios_sq.size() >= 3);
        for (double r : pr.trace.ratios_sq) CHECK(r <= 0.5 + 1e-12);
        const double floor_val = 1e-12 * pr.trace.delta_norms.front();
        for (std::size_t i = 0; i + 1 < pr.trace.delta_norms.size(); ++i) {
            if (pr.trace.delta_norms[i + 1] <= floor_val) break;  // roundoff tail
            CHECK(pr.trace.delta_norms[i + 1] <=
                  pr.trace.delta_norms[i] * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("picard non-convergence is reported, not silent") {
    Rng rng(23);
    RandomModelSpec spec;
    spec.max_depth = 5;
    const RandomModel rm = make_random_model(rng, spec);
    BSDEProblem p = make_problem(rm.model, make_random_generator(rng, rm.model, 0.6),
                                 make_random_eta(rng, rm.model, 1.0));
    const PicardResult pr = picard_iterate(p, 8.0, 1, 1e-15);
    CHECK_FALSE(pr.trace.converged);
    CHECK(pr.trace.iterations == 1);
}

TEST_CASE("a priori estimate") {
    Rng rng(29);

    SUBCASE("identical problems sit at zero") {
        BSDEProblem p = make_random_problem(rng);
        const Solution s = solve_backward_exact(p);
        const AprioriReport rep = apriori_check(p, p, s, s);
        CHECK(rep.lhs < 1e-20);
        CHECK(rep.pass);
    }

    SUBCASE("epsilon shift of a linear problem moves Y0 by at most e^{L C_Q} eps") {
        SpacePtr sp = make_uniform_space(1.0, 8, 2);
        const MartingaleModel m = build_brownian_proxy(sp, 1, 1.0);
        const double eps = 1e-2;
        BSDEProblem p1 = make_problem(m, make_discount_generator(0.4),
                                      std::vector<double>(sp->leaves().size(), 1.0));
        BSDEProblem p2 = p1;
        for (double& v : p2.eta) v += eps;
        const Solution s1 = solve_backward_exact(p1);
        const Solution s2 = solve_backward_exact(p2);
        const double gap = std::fabs(y0_of(s1, p1) - y0_of(s2, p2));
        CHECK(gap <= std::exp(0.4 * 1.0) * eps);
        CHECK(gap > 0.0);
        const AprioriReport rep = apriori_check(p1, p2, s1, s2);
        CHECK(rep.pass);
    }

    SUBCASE("randomized pairs never violate the bound") {
        for (int trial = 0; trial < 15; ++trial) {
            RandomModelSpec ms;
            ms.max_depth = 6;
            RandomModel rm = make_random_model(rng, ms);
            BSDEProblem p1 = make_problem(rm.model, make_random_generator(rng, rm.model, 0.8),
                                          make_random_eta(rng, rm.model, 1.0),
                                          make_random_adjustment(rng, rm.model,
                                                                 AdjustmentKind::FiniteVariation, 0.5));
            BSDEProblem p2 = make_problem(rm.model, make_random_generator(rng, rm.model, 0.8),
                                          make_random_eta(rng, rm.model, 1.0),
                                          make_random_adjustment(rng, rm.model,
                                                                 AdjustmentKind::FiniteVariation, 0.5));
            const Solution s1 = solve_backward_exact(p1);
            const Solution s2 = solve_backward_exact(p2);
            CHECK(apriori_check(p1, p2, s1, s2).pass);
        }
    }

    SUBCASE("stability ladder") {
        BSDEProblem p = make_random_problem(rng);
        for (double eps : {1e-3, 1e-2, 1e-1}) {
            const StabilityReport rep = stability_check(p, eps);
            CHECK(rep.pass);
            CHECK(rep.gap <= rep.bound);
        }
    }
}

TEST_CASE("uniqueness: exact and Picard routes coincide in H2 + L2(M)") {
    Rng rng(31);
    for (int trial = 0; trial < 6; ++trial) {
        BSDEProblem p = make_random_problem(rng);
        const Solution exact = solve_backward_exact(p);
        const PicardResult pr = picard_iterate(p, 10.0, 80, 1e-13);
        REQUIRE(pr.trace.converged);
        CHECK(pair_gap_h2_l2(p, exact, pr.solution) < 1e-8);
    }
}
