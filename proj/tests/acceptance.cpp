// Acceptance suite: one case per criterion, each printing a PASS/FAIL line.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsdelab/factories.hpp"
#include "bsdelab/runner.hpp"

using namespace bsdelab;

namespace {

void verdict(int criterion, bool pass, const char* what) {
    std::printf("ACCEPTANCE %2d %s: %s\n", criterion, pass ? "PASS" : "FAIL", what);
    std::fflush(stdout);
    CHECK_MESSAGE(pass, "criterion ", criterion, ": ", what);
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

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

RandomProblemSpec desk_spec() {
    RandomProblemSpec spec;
    spec.model.min_depth = 4;
    spec.model.max_depth = 10;
    spec.model.max_cont_dims = 2;   // n <= 3 with one jump component
    spec.model.node_budget = 40000; // keeps 50 problems well under the budget
    spec.lipschitz_cap = 0.8;
    return spec;
}

}  // namespace

TEST_CASE("criterion 1: pathwise solution identity on 50 seeded problems") {
    const double t0 = now_seconds();
    Rng rng(1001);
    double worst = 0.0;
    int max_n = 0, max_branch = 0, max_depth = 0;
    for (int trial = 0; trial < 50; ++trial) {
        BSDEProblem p = make_random_problem(rng, desk_spec());
        const Solution s = solve_backward_exact(p);
        worst = std::max(worst, s.pathwise_residual);
        max_n = std::max(max_n, p.model.dim);
        max_depth = std::max(max_depth, p.model.space->n_steps());
        for (int k = 0; k < p.model.space->n_steps(); ++k)
            for (NodeId id : p.model.space->slice(k))
                max_branch = std::max(max_branch,
                                      static_cast<int>(p.model.space->node(id).children.size()));
    }
    const double elapsed = now_seconds() - t0;
    CHECK(max_n <= 3);
    CHECK(max_branch <= 4);
    CHECK(max_depth <= 10);
    std::printf("  [1] worst defect %.3e over 50 problems in %.2fs (n<=%d, branching<=%d)\n",
                worst, elapsed, max_n, max_branch);
    verdict(1, worst < 1e-10 && elapsed < 10.0,
            "one-step defect of the backward identity < 1e-10 on 50 seeded problems, < 10 s");
}

TEST_CASE("criterion 2: Picard solution matches the exact solver in H2 + L2(M)") {
    Rng rng(1002);
    double worst = 0.0;
    bool all_converged = true;
    for (int trial = 0; trial < 20; ++trial) {
        RandomProblemSpec spec = desk_spec();
        spec.model.max_depth = 8;
        BSDEProblem p = make_random_problem(rng, spec);
        const Solution exact = solve_backward_exact(p);
        const PicardResult pr = picard_iterate(p, 10.0, 100, 1e-13);
        all_converged = all_converged && pr.trace.converged;
        worst = std::max(worst, pair_gap_h2_l2(p, pr.solution, exact));
    }
    std::printf("  [2] worst ||dY||_H2 + ||dZ||_L2(M) gap %.3e over 20 problems\n", worst);
    verdict(2, all_converged && worst < 1e-8,
            "Picard fixed point equals the exact solution within 1e-8 on 20 seeded problems");
}

TEST_CASE("criterion 3: measured contraction ratios respect the explicit bound") {
    Rng rng(1003);
    bool all_ok = true;
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 6; ++trial) {
        const double lips = 0.04 + 0.008 * trial;
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
                                     make_custom_polynomial_generator({0.3, 0.5 * lips}, zc, 5.0),
                                     make_random_eta(rng, model, 1.0));
        const double l_hat = p.generator.declared_lipschitz();
        const double beta = 2.0 * 1158.0 * l_hat * l_hat * (model.c_q + 1.0);
        const PicardResult pr = picard_iterate(p, beta, 30, 1e-30);
        REQUIRE(pr.trace.theoretical_bound < 1.0);
        all_ok = all_ok && pr.trace.bound_respected && !pr.trace.ratios_sq.empty();
        const double floor_val = 1e-12 * pr.trace.delta_norms.front();
        for (double r : pr.trace.ratios_sq) worst_ratio = std::max(worst_ratio, r);
        for (std::size_t i = 0; i + 1 < pr.trace.delta_norms.size(); ++i) {
            if (pr.trace.delta_norms[i + 1] <= floor_val) break;
            all_ok = all_ok &&
                     pr.trace.delta_norms[i + 1] <= pr.trace.delta_norms[i] * (1.0 + 1e-12);
        }
    }
    std::printf("  [3] worst measured squared ratio %.3e against bound 0.5\n", worst_ratio);
    verdict(3, all_ok && worst_ratio <= 0.5 + 1e-12,
            "whenever 1158/beta L^2 (C_Q+1) < 1, measured Picard ratios stay below it, "
            "with geometric decay");
}

TEST_CASE("criterion 4: linear closed form and the martingale check") {
    Rng rng(1004);
    double worst_diff = 0.0, worst_lemma = 0.0;
    int jump_blocks = 0;
    for (int trial = 0; trial < 20; ++trial) {
        RandomModelSpec ms;
        ms.max_depth = 7;
        RandomLinearProblem lp = make_random_linear_problem(rng, ms);
        const MartingaleModel& m = lp.rm.model;
        if (m.dim > m.k_continuous) ++jump_blocks;
        BSDEProblem p =
            make_problem(m, generator_from_coefficients(lp.coeffs), lp.eta, lp.adjustment);
        const Solution exact = solve_backward_exact(p);
        const LinearClosedForm cf = linear_solution(m, lp.coeffs, lp.eta, lp.adjustment, false);
        REQUIRE(cf.gamma_form);
        const FilteredSpace& sp = *m.space;
        for (int k = 0; k <= sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k))
                worst_diff = std::max(worst_diff, std::fabs(cf.solution.y[id] - exact.y[id]));
        worst_lemma = std::max(
            worst_lemma,
            lemma51_martingale_check(m, cf.bundle, cf.solution.y, lp.coeffs.b).residual);
    }
    std::printf("  [4] worst closed-form gap %.3e, worst martingale residual %.3e, "
                "%d/20 with jump blocks\n", worst_diff, worst_lemma, jump_blocks);
    verdict(4, worst_diff < 1e-9 && worst_lemma < 1e-10 && jump_blocks >= 3,
            "explicit linear solution equals the exact solver within 1e-9 and its "
            "martingale residual stays below 1e-10");
}

TEST_CASE("criterion 5: discount example converges at first order") {
    const double t0 = now_seconds();
    bool all = true;
    std::printf("  [5] steps   Y0            |err|       bound\n");
    for (int steps : {10, 20, 40, 80, 160}) {
        SpacePtr sp = make_chain_space(1.0, steps);
        const MartingaleModel m = build_brownian_proxy(sp, 1, 0.0);
        BSDEProblem p =
            make_problem(m, make_discount_generator(0.1), std::vector<double>(1, 1.0));
        const Solution s = solve_backward_exact(p);
        const double err = std::fabs(s.y[sp->root()] - std::exp(-0.1));
        std::printf("  [5] %5d   %.9f   %.3e   %.3e\n", steps, s.y[sp->root()], err,
                    2.0 / steps);
        all = all && err <= 2.0 / steps;
    }
    const double elapsed = now_seconds() - t0;
    verdict(5, all && elapsed < 1.0,
            "discount ladder satisfies |Y0 - e^{-0.1}| <= 2/steps for steps in 10..160, < 1 s");
}

TEST_CASE("criterion 6: a priori estimate sweep and stability ladder") {
    Rng rng(1006);
    int violations = 0;
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        RandomModelSpec ms;
        ms.max_depth = 6;
        RandomModel rm = make_random_model(rng, ms);
        BSDEProblem p1 =
            make_problem(rm.model, make_random_generator(rng, rm.model, 0.8),
                         make_random_eta(rng, rm.model, 1.0),
                         make_random_adjustment(rng, rm.model, AdjustmentKind::FiniteVariation, 0.5));
        BSDEProblem p2 =
            make_problem(rm.model, make_random_generator(rng, rm.model, 0.8),
                         make_random_eta(rng, rm.model, 1.0),
                         make_random_adjustment(rng, rm.model, AdjustmentKind::FiniteVariation, 0.5));
        const Solution s1 = solve_backward_exact(p1);
        const Solution s2 = solve_backward_exact(p2);
        const AprioriReport rep = apriori_check(p1, p2, s1, s2);
        if (!rep.pass) ++violations;
        worst_ratio = std::max(worst_ratio, rep.ratio);
    }
    bool ladder = true;
    RandomProblemSpec ps = desk_spec();
    ps.model.max_depth = 6;
    BSDEProblem base = make_random_problem(rng, ps);
    for (double eps : {1e-3, 1e-2, 1e-1}) {
        const StabilityReport rep = stability_check(base, eps);
        ladder = ladder && rep.pass;
        std::printf("  [6] eps %.0e: |Y1_0 - Y2_0| = %.3e <= %.3e\n", eps, rep.gap, rep.bound);
    }
    std::printf("  [6] %d violations in 100 trials, worst lhs/(C J) = %.3e\n", violations,
                worst_ratio);
    verdict(6, violations == 0 && ladder,
            "lhs <= 8 e^{beta C_Q} J with beta = 2L+2L^2+2 across 100 trials, and the "
            "eps-stability ladder holds");
}

TEST_CASE("criterion 7: comparison sweep and the single-default scenario") {
    Rng rng(1007);
    int violations = 0;
    double worst_gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const ComparisonScenario sc = make_ordered_scenario(rng);
        const ComparisonReport rep = verify_comparison(sc.p1, sc.p2, sc.zeta);
        if (!(rep.hypotheses_pass && rep.min_gap >= -1e-10)) ++violations;
        worst_gap = std::min(worst_gap, rep.min_gap);
    }
    bool remark_ok = true;
    for (double psi : {-0.5, 0.0, 1.0}) {
        const ComparisonScenario sc = make_single_default_scenario(rng, psi);
        const ComparisonReport rep = verify_comparison(sc.p1, sc.p2, sc.zeta);
        remark_ok = remark_ok && rep.hypotheses_pass && rep.comparison_holds;
    }
    std::printf("  [7] %d violations in 200 trials, most negative gap %.3e\n", violations,
                worst_gap);
    verdict(7, violations == 0 && remark_ok,
            "200 hypothesis-satisfying pairs give min gap >= -1e-10; the single-default "
            "scenario passes for psi in {-0.5, 0, 1}");
}

TEST_CASE("criterion 8: strict comparison") {
    Rng rng(1008);
    bool equalities = true, gaps = true;
    for (int trial = 0; trial < 25; ++trial) {
        const ComparisonScenario eq = make_equality_scenario(rng);
        const ComparisonReport rep = verify_strict_comparison(eq.p1, eq.p2, eq.zeta);
        equalities = equalities && rep.strict_preconditions && rep.strict_holds &&
                     rep.max_abs_gap <= 1e-10 && rep.max_leaf_gap <= 1e-10;
    }
    for (int trial = 0; trial < 25; ++trial) {
        const ComparisonScenario sc = make_leaf_gap_scenario(rng, 0.25);
        const ComparisonReport rep = verify_strict_comparison(sc.p1, sc.p2, sc.zeta);
        gaps = gaps && rep.hypotheses_pass && rep.comparison_holds && rep.y0_gap > 0.0;
    }
    verdict(8, equalities && gaps,
            "Y1_0 = Y2_0 forces node-wise equality and eta1 = eta2; a positive-probability "
            "leaf gap forces Y1_0 > Y2_0");
}

TEST_CASE("criterion 9: representation property on canonical trees") {
    Rng rng(1009);
    double worst_resid = 0.0, worst_unique = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        RandomModelSpec ms;
        ms.max_depth = 7;
        const RandomModel rm = make_random_model(rng, ms);
        const MartingaleModel& m = rm.model;
        const ScalarAdapted n = martingale_closure(m.space, make_random_eta(rng, m, 1.0));
        const RepresentationResult rep = represent_martingale(m, n);
        worst_resid = std::max(worst_resid, rep.residual);

        // second route, honestly different: Gaussian elimination on the
        // child-difference system where the step has full rank, and the
        // minimum-norm solution *shifted along the null space* where it does
        // not -- the pseudo-norm must not see the shift
        const FilteredSpace& sp = *m.space;
        const auto dim = static_cast<std::size_t>(m.dim);
        VecPredictable ztilde(m.space, Vec(dim));
        for (int k = 0; k < sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) {
                const auto& kids = sp.node(id).children;
                std::vector<double> targets(kids.size());
                for (std::size_t i = 0; i < kids.size(); ++i) targets[i] = n[kids[i]] - n[id];
                Mat gram(dim, dim);
                Vec rhs(dim);
                for (std::size_t i = 0; i < kids.size(); ++i) {
                    const Vec inc = m.paths[kids[i]] - m.paths[id];
                    gram.add_outer(inc, sp.node(kids[i]).trans_prob);
                    rhs += (sp.node(kids[i]).trans_prob * targets[i]) * inc;
                }
                const SymEig eig = eigensym(gram);
                const bool full_rank = eig.values[0] > 1e-10 * std::max(eig.values[dim - 1], 1e-300);
                if (full_rank && kids.size() == dim + 1) {
                    // eliminate against the first child's equation
                    std::vector<std::vector<double>> a(dim, std::vector<double>(dim + 1));
                    const Vec base = m.paths[kids[0]] - m.paths[id];
                    for (std::size_t r = 0; r < dim; ++r) {
                        const Vec d = m.paths[kids[r + 1]] - m.paths[id];
                        for (std::size_t c = 0; c < dim; ++c) a[r][c] = d[c] - base[c];
                        a[r][dim] = targets[r + 1] - targets[0];
                    }
                    for (std::size_t col = 0; col < dim; ++col) {
                        std::size_t piv = col;
                        for (std::size_t r = col + 1; r < dim; ++r)
                            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
                        std::swap(a[col], a[piv]);
                        for (std::size_t r = 0; r < dim; ++r) {
                            if (r == col) continue;
                            const double f = a[r][col] / a[col][col];
                            for (std::size_t c = col; c <= dim; ++c) a[r][c] -= f * a[col][c];
                        }
                    }
                    for (std::size_t c = 0; c < dim; ++c) ztilde[id][c] = a[c][dim] / a[c][c];
                } else {
                    ztilde[id] = solve_psd_min_norm(gram, rhs);
                    for (std::size_t j = 0; j < dim; ++j)
                        if (eig.values[j] <= 1e-10 * std::max(eig.values[dim - 1], 1e-300))
                            for (std::size_t i = 0; i < dim; ++i)
                                ztilde[id][i] += rng.uniform(-3.0, 3.0) * eig.vectors(i, j);
                }
            }
        VecPredictable diff(m.space, Vec(static_cast<std::size_t>(m.dim)));
        for (int k = 0; k < sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) diff[id] = rep.integrand[id] - ztilde[id];
        worst_unique =
            std::max(worst_unique, norm_l2m(diff, m.q_process, m.m_factor, 0.0));
    }
    std::printf("  [9] worst representation residual %.3e, worst uniqueness gap %.3e\n",
                worst_resid, worst_unique);
    verdict(9, worst_resid < 1e-10 && worst_unique < 1e-9,
            "representation residual < 1e-10 for 50 terminal variables and two solve "
            "routes agree in the L2(M) pseudo-norm");
}

TEST_CASE("criterion 10: determinism of the runner") {
    namespace fs = std::filesystem;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    const std::string base =
        "experiment = compare\nseed = 4242\ntrials = 8\ncompare.scenario = ordered\n";
    const fs::path o1 = fs::temp_directory_path() / "bsdelab_acc_det1";
    const fs::path o2 = fs::temp_directory_path() / "bsdelab_acc_det2";
    fs::remove_all(o1);
    fs::remove_all(o2);
    RunConfig c1 = RunConfig::parse_string(base);
    RunConfig c2 = RunConfig::parse_string(base);
    c1.set("out", o1.string());
    c2.set("out", o2.string());
    const RunResult r1 = run_experiment(c1);
    const RunResult r2 = run_experiment(c2);
    const bool ok = r1.exit_code == 0 && r2.exit_code == 0 &&
                    fnv1a64(slurp(o1 / "results.csv")) == fnv1a64(slurp(o2 / "results.csv")) &&
                    fnv1a64(slurp(o1 / "compare_detail.csv")) ==
                        fnv1a64(slurp(o2 / "compare_detail.csv")) &&
                    r1.run_id == r2.run_id;
    verdict(10, ok, "identical config + seed reproduce hash-identical CSV bodies");
}
