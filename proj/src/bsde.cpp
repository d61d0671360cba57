#include "bsdelab/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bsdelab/rng.hpp"

namespace bsdelab {

namespace {

void check_problem_shape(const BSDEProblem& p) {
    if (!p.generator.valid()) throw std::invalid_argument("problem has no generator");
    if (p.eta.size() != p.model.space->leaves().size())
        throw std::invalid_argument("eta must supply one value per leaf");
    if (p.adjustment.empty()) throw std::invalid_argument("adjustment process missing");
    for (double v : p.eta)
        if (!std::isfinite(v)) throw std::invalid_argument("eta must be finite");
}

double max_dq(const MartingaleModel& model) {
    const FilteredSpace& sp = *model.space;
    double m = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) m = std::max(m, model.dq(id));
    return m;
}

}  // namespace

BSDEProblem make_problem(MartingaleModel model, Generator generator, std::vector<double> eta) {
    ScalarAdapted zero(model.space, 0.0);
    return make_problem(std::move(model), std::move(generator), std::move(eta), std::move(zero));
}

BSDEProblem make_problem(MartingaleModel model, Generator generator, std::vector<double> eta,
                         ScalarAdapted adjustment) {
    BSDEProblem p{std::move(model), std::move(generator), std::move(eta), std::move(adjustment)};
    check_problem_shape(p);
    return p;
}

Solution solve_backward_exact(const BSDEProblem& problem, const SolverOptions& opts) {
    check_problem_shape(problem);
    const MartingaleModel& model = problem.model;
    const FilteredSpace& sp = *model.space;
    const double lips = problem.generator.declared_lipschitz();
    const double worst_dq = max_dq(model);
    if (lips * worst_dq >= 1.0)
        throw std::invalid_argument(
            "solve_backward_exact: L * dQ = " + std::to_string(lips * worst_dq) +
            " >= 1; refine the grid until the one-step equation is a contraction");

    Solution sol;
    sol.y = ScalarAdapted(model.space, 0.0);
    sol.z = VecPredictable(model.space, Vec(static_cast<std::size_t>(model.dim)));

    const auto& leaves = sp.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) sol.y[leaves[i]] = problem.eta[i];

    const ScalarAdapted& D = problem.adjustment;
    double worst_defect = 0.0;

    for (int k = sp.n_steps() - 1; k >= 0; --k) {
        for (NodeId id : sp.slice(k)) {
            const auto& children = sp.node(id).children;
            double ey = 0.0, ed = 0.0;
            for (NodeId c : children) {
                const double p = sp.node(c).trans_prob;
                ey += p * sol.y[c];
                ed += p * (D[c] - D[id]);
            }
            // centered targets: the z-part of the one-step identity does not
            // depend on the unknown y
            std::vector<double> targets(children.size());
            for (std::size_t i = 0; i < children.size(); ++i)
                targets[i] = sol.y[children[i]] - ey - (D[children[i]] - D[id] - ed);
            double rep_resid = 0.0;
            const Vec z = step_representation(model, id, targets, &rep_resid);
            sol.z[id] = z;

            const GenContext ctx{&model, id};
            const double dq = model.dq(id);
            const double base = ey - ed;
            double y = base;
            double theta = opts.damping;
            double prev_gap = std::numeric_limits<double>::infinity();
            for (int it = 0;; ++it) {
                const double fy = base + problem.generator(ctx, y, z) * dq;
                const double gap = std::fabs(fy - y);
                if (gap <= opts.tol * (1.0 + std::fabs(fy))) {
                    y = fy;
                    break;
                }
                if (it >= opts.max_inner)
                    throw std::runtime_error("solve_backward_exact: inner iteration stalled at node " +
                                             std::to_string(id));
                if (gap > prev_gap) theta = std::max(0.125, theta * 0.5);
                prev_gap = gap;
                y += theta * (fy - y);
            }
            sol.y[id] = y;

            const double g_final = problem.generator(ctx, y, z) * dq;
            for (std::size_t i = 0; i < children.size(); ++i) {
                const NodeId c = children[i];
                const Vec dm = model.paths[c] - model.paths[id];
                const double defect =
                    y - sol.y[c] - g_final + z.dot(dm) + (D[c] - D[id]);
                worst_defect = std::max(worst_defect, std::fabs(defect));
            }
        }
    }
    sol.pathwise_residual = worst_defect;
    sol.norms = weighted_norms(sol.y, sol.z, model, 0.0);
    return sol;
}

BSDEProblem transform_shift(const BSDEProblem& problem) {
    check_problem_shape(problem);
    const ScalarAdapted D = problem.adjustment;
    const Generator& g = problem.generator;
    Generator shifted(g.name() + "~", g.declared_lipschitz(),
                      [g, D](const GenContext& ctx, double y, const Vec& z) {
                          return g(ctx, y + D[ctx.node], z);
                      });
    const auto& leaves = problem.model.space->leaves();
    std::vector<double> eta(problem.eta);
    for (std::size_t i = 0; i < leaves.size(); ++i) eta[i] -= D[leaves[i]];
    return make_problem(problem.model, std::move(shifted), std::move(eta));
}

Solution picard_map(const BSDEProblem& problem, const ScalarAdapted& w, const VecPredictable& v) {
    check_problem_shape(problem);
    const MartingaleModel& model = problem.model;
    const FilteredSpace& sp = *model.space;
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            if (std::fabs(problem.adjustment[id]) > 1e-14)
                throw std::invalid_argument("picard_map expects a shifted problem (D = 0); "
                                            "apply transform_shift first");

    // frozen driver values and the running integral of g dQ
    ScalarPredictable gstep(model.space, 0.0);
    ScalarAdapted running(model.space, 0.0);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const GenContext ctx{&model, id};
            gstep[id] = problem.generator(ctx, w[id], v[id]);
            for (NodeId c : sp.node(id).children)
                running[c] = running[id] + gstep[id] * model.dq(id);
        }

    const auto& leaves = sp.leaves();
    std::vector<double> closure_target(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i)
        closure_target[i] = problem.eta[i] + running[leaves[i]];
    const ScalarAdapted n_mart = martingale_closure(model.space, closure_target);

    Solution sol;
    sol.y = ScalarAdapted(model.space, 0.0);
    sol.z = VecPredictable(model.space, Vec(static_cast<std::size_t>(model.dim)));
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) sol.y[id] = n_mart[id] - running[id];

    double worst = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const auto& children = sp.node(id).children;
            std::vector<double> targets(children.size());
            for (std::size_t i = 0; i < children.size(); ++i)
                targets[i] = n_mart[children[i]] - n_mart[id];
            double rep_resid = 0.0;
            sol.z[id] = step_representation(model, id, targets, &rep_resid);
            if (rep_resid > 1e-9)
                throw std::runtime_error(
                    "picard_map: representation failed (PRP violation) at node " +
                    std::to_string(id) + ": residual " + std::to_string(rep_resid));
            const double g_dq = gstep[id] * model.dq(id);
            for (NodeId c : children) {
                const Vec dm = model.paths[c] - model.paths[id];
                const double defect = sol.y[id] - sol.y[c] - g_dq + sol.z[id].dot(dm);
                worst = std::max(worst, std::fabs(defect));
            }
        }
    sol.pathwise_residual = worst;
    sol.norms = weighted_norms(sol.y, sol.z, model, 0.0);
    return sol;
}

PicardResult picard_iterate(const BSDEProblem& problem, double beta, int max_iters, double tol) {
    if (!(beta > 0.0)) throw std::invalid_argument("picard_iterate: beta must be positive");
    check_problem_shape(problem);
    const MartingaleModel& model = problem.model;
    const FilteredSpace& sp = *model.space;
    const BSDEProblem shifted = transform_shift(problem);

    PicardTrace trace;
    trace.beta = beta;
    const double lips = problem.generator.declared_lipschitz();
    trace.theoretical_bound = 1158.0 / beta * lips * lips * (model.c_q + 1.0);

    ScalarAdapted w(model.space, 0.0);
    VecPredictable v(model.space, Vec(static_cast<std::size_t>(model.dim)));
    Solution current;

    for (int i = 0; i < max_iters; ++i) {
        current = picard_map(shifted, w, v);
        ScalarAdapted dy(model.space, 0.0);
        VecPredictable dz(model.space, Vec(static_cast<std::size_t>(model.dim)));
        for (int k = 0; k <= sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) dy[id] = current.y[id] - w[id];
        for (int k = 0; k < sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) dz[id] = current.z[id] - v[id];
        const double s2 = norm_s2(dy, model.q_process, beta);
        const double l2 = norm_l2m(dz, model.q_process, model.m_factor, beta);
        const double delta = std::sqrt(s2 * s2 + l2 * l2);
        trace.delta_norms.push_back(delta);
        trace.iterations = i + 1;
        w = current.y;
        v = current.z;
        if (delta < tol) {
            trace.converged = true;
            break;
        }
    }

    // squared-norm ratios of successive differences; ignore the roundoff tail
    const double floor_val =
        trace.delta_norms.empty() ? 0.0 : 1e-12 * std::max(1.0, trace.delta_norms.front());
    for (std::size_t i = 0; i + 1 < trace.delta_norms.size(); ++i) {
        if (trace.delta_norms[i] <= floor_val || trace.delta_norms[i + 1] <= floor_val) continue;
        const double r = trace.delta_norms[i + 1] / trace.delta_norms[i];
        trace.ratios_sq.push_back(r * r);
    }
    if (trace.theoretical_bound < 1.0)
        for (double r : trace.ratios_sq)
            if (r > trace.theoretical_bound + 1e-12) trace.bound_respected = false;

    // map back through the D-shift and report the residual of the original data
    Solution sol;
    sol.y = ScalarAdapted(model.space, 0.0);
    sol.z = v;
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) sol.y[id] = w[id] + problem.adjustment[id];
    double worst = 0.0;
    const ScalarAdapted& D = problem.adjustment;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const GenContext ctx{&model, id};
            const double g_dq = problem.generator(ctx, sol.y[id], sol.z[id]) * model.dq(id);
            for (NodeId c : sp.node(id).children) {
                const Vec dm = model.paths[c] - model.paths[id];
                const double defect =
                    sol.y[id] - sol.y[c] - g_dq + sol.z[id].dot(dm) + (D[c] - D[id]);
                worst = std::max(worst, std::fabs(defect));
            }
        }
    sol.pathwise_residual = worst;
    sol.norms = weighted_norms(sol.y, sol.z, model, 0.0);
    return PicardResult{std::move(sol), std::move(trace)};
}

LipschitzReport verify_m_lipschitz(const Generator& g, const MartingaleModel& model, int samples,
                                   std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("verify_m_lipschitz: samples must be >= 1");
    const FilteredSpace& sp = *model.space;
    std::vector<NodeId> interior;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) interior.push_back(id);

    Rng rng(seed);
    const auto n = static_cast<std::size_t>(model.dim);
    LipschitzReport report;
    report.declared = g.declared_lipschitz();

    for (int s = 0; s < samples; ++s) {
        const NodeId id = interior[rng.below(interior.size())];
        const GenContext ctx{&model, id};
        double y1 = rng.uniform(-3.0, 3.0), y2 = rng.uniform(-3.0, 3.0);
        Vec z1(n), z2(n);
        for (std::size_t j = 0; j < n; ++j) z1[j] = z2[j] = rng.uniform(-3.0, 3.0);
        switch (s % 3) {
            case 0:  // vary y only
                break;
            case 1: {  // vary a single z coordinate
                y2 = y1;
                if (n > 0) z2[rng.below(n)] += rng.uniform(-2.0, 2.0);
                break;
            }
            default:  // vary everything
                for (std::size_t j = 0; j < n; ++j) z2[j] = rng.uniform(-3.0, 3.0);
                break;
        }
        const Vec mdz = ctx.mz(z1 - z2);
        const double denom = std::fabs(y1 - y2) + mdz.norm();
        if (denom < 1e-14) continue;  // both gaps vanish, quotient undefined
        const double quotient = std::fabs(g(ctx, y1, z1) - g(ctx, y2, z2)) / denom;
        report.estimate = std::max(report.estimate, quotient);
    }
    report.violated = report.estimate > report.declared + 1e-9;
    return report;
}

AprioriReport apriori_check(const BSDEProblem& p1, const BSDEProblem& p2, const Solution& s1,
                            const Solution& s2) {
    require_same_space(*p1.model.space, *p2.model.space);
    if (p1.model.dim != p2.model.dim)
        throw std::invalid_argument("apriori_check: model dimensions differ");
    const MartingaleModel& model = p1.model;
    const FilteredSpace& sp = *model.space;

    ScalarAdapted y(model.space, 0.0), ymd(model.space, 0.0), dd(model.space, 0.0);
    VecPredictable z(model.space, Vec(static_cast<std::size_t>(model.dim)));
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            y[id] = s1.y[id] - s2.y[id];
            dd[id] = p1.adjustment[id] - p2.adjustment[id];
            ymd[id] = y[id] - dd[id];
        }
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) z[id] = s1.z[id] - s2.z[id];

    ScalarPredictable gdiff(model.space, 0.0);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const GenContext c1{&p1.model, id}, c2{&p2.model, id};
            gdiff[id] = p1.generator(c1, s2.y[id], s2.z[id]) - p2.generator(c2, s2.y[id], s2.z[id]);
        }

    double eta_term = 0.0;
    const auto& leaves = sp.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const double v = (p1.eta[i] - p2.eta[i]) - dd[leaves[i]];
        eta_term += sp.node(leaves[i]).prob * v * v;
    }

    AprioriReport rep;
    const double s2n = norm_s2(ymd, model.q_process, 0.0);
    const double h2n = norm_h2(y, model.q_process, 0.0);
    const double l2n = norm_l2m(z, model.q_process, model.m_factor, 0.0);
    rep.lhs = s2n * s2n + h2n * h2n + l2n * l2n;
    const double dh = norm_h2(dd, model.q_process, 0.0);
    const double gh = norm_h2(gdiff, model.q_process, 0.0);
    rep.j_value = eta_term + dh * dh + gh * gh;
    const double l1 = p1.generator.declared_lipschitz();
    rep.beta = 2.0 * l1 + 2.0 * l1 * l1 + 2.0;
    rep.constant = 8.0 * std::exp(rep.beta * model.c_q);
    rep.ratio = rep.j_value > 0.0 ? rep.lhs / (rep.constant * rep.j_value) : 0.0;
    rep.pass = rep.lhs <= rep.constant * rep.j_value + 1e-12;
    return rep;
}

StabilityReport stability_check(const BSDEProblem& problem, double eps, const SolverOptions& opts) {
    BSDEProblem shifted_eta = problem;
    for (double& v : shifted_eta.eta) v += eps;
    const Solution s1 = solve_backward_exact(problem, opts);
    const Solution s2 = solve_backward_exact(shifted_eta, opts);
    StabilityReport rep;
    rep.eps = eps;
    rep.gap = std::fabs(s1.y[problem.model.space->root()] - s2.y[problem.model.space->root()]);
    const double l1 = problem.generator.declared_lipschitz();
    const double beta = 2.0 * l1 + 2.0 * l1 * l1 + 2.0;
    rep.bound = 8.0 * std::exp(beta * problem.model.c_q) * std::fabs(eps);
    rep.pass = rep.gap <= rep.bound + 1e-12;
    return rep;
}

}  // namespace bsdelab
