#include "bsdelab/factories.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsdelab {

namespace {

int depth_for_budget(int branching, int want, std::size_t budget) {
    int depth = 1;
    std::size_t count = 1, layer = 1;
    while (depth < want) {
        layer *= static_cast<std::size_t>(branching);
        if (count + layer > budget) break;
        count += layer;
        ++depth;
    }
    return depth;
}

}  // namespace

RandomModel make_random_model(Rng& rng, const RandomModelSpec& spec) {
    JumpLayout::Kind kind = JumpLayout::Kind::None;
    if (spec.allow_jump) {
        switch (rng.below(3)) {
            case 0: kind = JumpLayout::Kind::None; break;
            case 1: kind = JumpLayout::Kind::Default; break;
            default: kind = JumpLayout::Kind::Poisson; break;
        }
    }
    int dims = rng.uniform_int(1, std::max(1, spec.max_cont_dims));
    if (kind != JumpLayout::Kind::None && spec.allow_pure_jump && rng.below(4) == 0)
        dims = 0;  // pure-jump model
    if (dims == 0 && kind == JumpLayout::Kind::None) dims = 1;

    BlockSpaceSpec bs;
    bs.jump = kind;
    bs.cont_branching = (dims == 0) ? 1 : dims + 1;
    const int branching = bs.cont_branching + (kind != JumpLayout::Kind::None ? 1 : 0);
    const int want = rng.uniform_int(spec.min_depth, spec.max_depth);
    bs.steps = depth_for_budget(std::max(branching, 2), want, spec.node_budget);
    bs.T = spec.T;
    bs.randomize_probs = true;
    if (kind != JumpLayout::Kind::None) {
        const double dt = spec.T / bs.steps;
        const double lam_max = 0.9 / dt;
        bs.lambda = {rng.uniform(0.2, std::min(0.9, lam_max))};
    }

    RandomModel out;
    out.block = build_block_space(bs, &rng);

    MartingaleModel cont = (dims > 0)
                               ? build_brownian_proxy(out.block.space, dims,
                                                      rng.uniform(0.6, 1.4), &out.block.layout)
                               : make_trivial_model(out.block.space);
    MartingaleModel jump = make_trivial_model(out.block.space);
    if (kind == JumpLayout::Kind::Default)
        jump = build_default_martingale(out.block.space, out.block.lambda_per_step,
                                        &out.block.layout);
    else if (kind == JumpLayout::Kind::Poisson)
        jump = build_poisson_martingale(out.block.space, out.block.lambda_per_step,
                                        &out.block.layout);
    out.model = assemble_block_model(cont, jump);
    return out;
}

std::vector<double> make_random_eta(Rng& rng, const MartingaleModel& model, double amplitude) {
    const FilteredSpace& sp = *model.space;
    const auto& leaves = sp.leaves();
    std::vector<double> eta(leaves.size());
    const bool pure_default =
        model.k_continuous == 0 && model.layout.kind == JumpLayout::Kind::Default;
    if (pure_default) {
        // measurable w.r.t. the default time only: the martingale is silent
        // after the jump, so richer payoffs would not be representable
        std::vector<double> by_state(static_cast<std::size_t>(sp.n_steps()) + 2);
        for (double& v : by_state) v = amplitude * rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            NodeId id = leaves[i];
            int tau_idx = sp.n_steps() + 1;  // no default
            while (id >= 0) {
                if (model.jump_state[id] > 0.5) tau_idx = sp.node(id).time_idx;
                id = sp.node(id).parent;
            }
            eta[i] = by_state[static_cast<std::size_t>(
                std::min(tau_idx, sp.n_steps() + 1))];
        }
        return eta;
    }
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        double m_sum = 0.0;
        for (std::size_t j = 0; j < static_cast<std::size_t>(model.dim); ++j)
            m_sum += model.paths[leaves[i]][j];
        eta[i] = amplitude * (std::tanh(m_sum) + 0.5 * rng.uniform(-1.0, 1.0));
    }
    return eta;
}

namespace {

bool is_pure_default(const MartingaleModel& model) {
    return model.k_continuous == 0 && model.layout.kind == JumpLayout::Kind::Default;
}

// default-time index of a node: 0 while alive, k when the jump happened at
// slice k (the whole information state of a pure-default filtration)
int tau_state(const MartingaleModel& model, NodeId id) {
    const FilteredSpace& sp = *model.space;
    if (model.jump_state.empty() || model.jump_state[id] < 0.5) return 0;
    int state = 0;
    NodeId cur = id;
    while (cur >= 0) {
        if (model.jump_state[cur] > 0.5) state = sp.node(cur).time_idx;
        cur = sp.node(cur).parent;
    }
    return state;
}

}  // namespace

ScalarAdapted make_random_adjustment(Rng& rng, const MartingaleModel& model, AdjustmentKind kind,
                                     double amplitude) {
    const FilteredSpace& sp = *model.space;
    ScalarAdapted d(model.space, 0.0);
    if (kind == AdjustmentKind::Zero) return d;
    auto draw = [&] {
        return kind == AdjustmentKind::Nonincreasing ? -amplitude * rng.uniform(0.0, 0.2)
                                                     : amplitude * rng.uniform(-0.2, 0.2);
    };
    d[sp.root()] = amplitude * rng.uniform(-0.3, 0.3);
    if (!is_pure_default(model)) {
        // the driving noise distinguishes every sibling, so per-child
        // increments are measurable as they stand
        for (int k = 0; k < sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k))
                for (NodeId c : sp.node(id).children) d[c] = d[id] + draw();
        return d;
    }
    // pure default: the path's whole information is (time, default time), so
    // the increment table is indexed by exactly that
    std::vector<std::vector<double>> table(static_cast<std::size_t>(sp.n_steps()));
    for (auto& row : table) {
        row.resize(static_cast<std::size_t>(sp.n_steps()) + 1);
        for (double& v : row) v = draw();
    }
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children)
                d[c] = d[id] + table[static_cast<std::size_t>(k)]
                                    [static_cast<std::size_t>(tau_state(model, c))];
    return d;
}

// Predictable scalar offsets, measurable for the model's own filtration.
ScalarPredictable make_random_offset(Rng& rng, const MartingaleModel& model, double lo, double hi) {
    const FilteredSpace& sp = *model.space;
    ScalarPredictable s(model.space, 0.0);
    if (!is_pure_default(model)) {
        for (int k = 0; k < sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) s[id] = rng.uniform(lo, hi);
        return s;
    }
    std::vector<std::vector<double>> table(static_cast<std::size_t>(sp.n_steps()));
    for (auto& row : table) {
        row.resize(static_cast<std::size_t>(sp.n_steps()) + 1);
        for (double& v : row) v = rng.uniform(lo, hi);
    }
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            s[id] = table[static_cast<std::size_t>(k)]
                         [static_cast<std::size_t>(tau_state(model, id))];
    return s;
}

Generator make_random_generator(Rng& rng, const MartingaleModel& model, double lipschitz_cap,
                                bool jump_slope) {
    const auto n = static_cast<std::size_t>(model.dim);
    const auto k = static_cast<std::size_t>(model.k_continuous);
    // budget split across the slopes keeps the declared constant under the cap
    const double budget = lipschitz_cap * rng.uniform(0.5, 1.0);
    const double a = budget * rng.uniform(-0.5, 0.5);
    Vec zc(n);
    for (std::size_t j = 0; j < (jump_slope ? n : k); ++j)
        zc[j] = budget * rng.uniform(-0.4, 0.4) / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)));
    std::vector<double> ycoef{rng.uniform(-0.5, 0.5), a};
    if (rng.below(2) == 0) ycoef.push_back(budget * rng.uniform(-0.02, 0.02));  // clamped quadratic
    Generator g = make_custom_polynomial_generator(ycoef, zc, 5.0);
    if (g.declared_lipschitz() > lipschitz_cap)
        throw std::logic_error("make_random_generator: cap exceeded");
    return g;
}

BSDEProblem make_random_problem(Rng& rng, const RandomProblemSpec& spec) {
    RandomModel rm = make_random_model(rng, spec.model);
    Generator g = make_random_generator(rng, rm.model, spec.lipschitz_cap, spec.jump_slope);
    std::vector<double> eta = make_random_eta(rng, rm.model, spec.eta_amplitude);
    ScalarAdapted d = make_random_adjustment(rng, rm.model, spec.adjustment, 1.0);
    return make_problem(std::move(rm.model), std::move(g), std::move(eta), std::move(d));
}

ComparisonScenario make_ordered_scenario(Rng& rng, const RandomModelSpec& spec) {
    RandomModel rm = make_random_model(rng, spec);
    const SpacePtr space = rm.model.space;

    // base driver without jump slopes, so delta carries only the ordered offset
    Generator g2 = make_random_generator(rng, rm.model, 0.6, /*jump_slope=*/false);
    const ScalarPredictable offset = make_random_offset(rng, rm.model, 0.0, 0.5);
    Generator g1(g2.name() + "+s", g2.declared_lipschitz(),
                 [g2, offset](const GenContext& ctx, double y, const Vec& z) {
                     return g2(ctx, y, z) + offset[ctx.node];
                 });

    std::vector<double> eta2 = make_random_eta(rng, rm.model, 1.0);
    std::vector<double> eta1 = eta2;
    {
        // a nonnegative, filtration-measurable bump
        const std::vector<double> bump = make_random_eta(rng, rm.model, 0.5);
        for (std::size_t i = 0; i < eta1.size(); ++i) eta1[i] += std::fabs(bump[i]);
    }

    ScalarAdapted d2 = make_random_adjustment(rng, rm.model, AdjustmentKind::FiniteVariation, 0.5);
    ScalarAdapted drop = make_random_adjustment(rng, rm.model, AdjustmentKind::Nonincreasing, 0.5);
    ScalarAdapted d1(space, 0.0);
    const FilteredSpace& sp = *space;
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) d1[id] = d2[id] + drop[id];

    ComparisonScenario sc{make_problem(rm.model, std::move(g1), std::move(eta1), std::move(d1)),
                          make_problem(rm.model, std::move(g2), std::move(eta2), std::move(d2)),
                          ZetaSpec{}};
    return sc;
}

ComparisonScenario make_single_default_scenario(Rng& rng, double psi, int steps) {
    BlockSpaceSpec bs;
    bs.T = 1.0;
    bs.steps = steps;
    bs.cont_branching = 2;
    bs.jump = JumpLayout::Kind::Default;
    bs.lambda = {rng.uniform(0.3, 0.7)};
    bs.randomize_probs = true;
    BlockSpace block = build_block_space(bs, &rng);
    MartingaleModel model = assemble_block_model(
        build_brownian_proxy(block.space, 1, 1.0, &block.layout),
        build_default_martingale(block.space, block.lambda_per_step, &block.layout));

    // driver with the intensity-weighted jump slope psi * lambda * z_d; its
    // m-Lipschitz constant runs through m^d, scanned over the live nodes
    const double a = rng.uniform(-0.3, 0.3);
    const double bw = rng.uniform(-0.3, 0.3);
    const FilteredSpace& sp = *block.space;
    double jump_lips = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double md = model.m_jump(id)(0, 0);
            if (md > 0.0)
                jump_lips = std::max(jump_lips, std::fabs(psi) * model.intensity[id] / md);
        }
    const double lips = std::max(std::fabs(a), std::hypot(bw, jump_lips));
    auto base = [a, bw, psi](const GenContext& ctx, double y, const Vec& z) {
        const Vec mz = ctx.mz(z);
        return a * y + bw * mz[0] + psi * ctx.lambda() * z[1];
    };
    Generator g2("single_default_base", lips, base);
    ScalarPredictable offset(block.space, 0.0);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) offset[id] = rng.uniform(0.0, 0.4);
    Generator g1("single_default_base+s", lips,
                 [base, offset](const GenContext& ctx, double y, const Vec& z) {
                     return base(ctx, y, z) + offset[ctx.node];
                 });

    std::vector<double> eta2 = make_random_eta(rng, model, 1.0);
    std::vector<double> eta1 = eta2;
    for (double& v : eta1) v += rng.uniform(0.0, 0.3);
    ScalarAdapted d(block.space, 0.0);

    ComparisonScenario sc{make_problem(model, std::move(g1), std::move(eta1), d),
                          make_problem(model, std::move(g2), std::move(eta2), d),
                          ZetaSpec{ZetaSpec::Kind::PsiSqrtLambda, psi}};
    return sc;
}

ComparisonScenario make_equality_scenario(Rng& rng, const RandomModelSpec& spec) {
    RandomModel rm = make_random_model(rng, spec);
    Generator g = make_random_generator(rng, rm.model, 0.6, /*jump_slope=*/false);
    std::vector<double> eta = make_random_eta(rng, rm.model, 1.0);
    ScalarAdapted d2 =
        make_random_adjustment(rng, rm.model, AdjustmentKind::FiniteVariation, 0.5);
    ScalarAdapted d1 = d2;  // equal up to a constant shift of D
    const double shift = rng.uniform(0.0, 1.0);
    const FilteredSpace& sp = *rm.model.space;
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) d1[id] += shift;

    ComparisonScenario sc{make_problem(rm.model, g, eta, std::move(d1)),
                          make_problem(rm.model, g, eta, std::move(d2)), ZetaSpec{}};
    return sc;
}

ComparisonScenario make_leaf_gap_scenario(Rng& rng, double eps, const RandomModelSpec& spec) {
    RandomModelSpec adjusted = spec;
    adjusted.allow_pure_jump = false;  // a single-leaf bump needs the full filtration
    RandomModel rm = make_random_model(rng, adjusted);
    Generator g = make_random_generator(rng, rm.model, 0.6, /*jump_slope=*/false);
    std::vector<double> eta2 = make_random_eta(rng, rm.model, 1.0);
    std::vector<double> eta1 = eta2;
    eta1[rng.below(eta1.size())] += eps;
    ScalarAdapted d(rm.model.space, 0.0);
    ComparisonScenario sc{make_problem(rm.model, g, std::move(eta1), d),
                          make_problem(rm.model, g, std::move(eta2), d), ZetaSpec{}};
    return sc;
}

RandomLinearProblem make_random_linear_problem(Rng& rng, const RandomModelSpec& spec,
                                               double coeff_cap) {
    RandomLinearProblem out{make_random_model(rng, spec), {}, {}, {}};
    const MartingaleModel& model = out.rm.model;
    const auto k = static_cast<std::size_t>(model.k_continuous);
    const auto nj = static_cast<std::size_t>(model.dim - model.k_continuous);
    Vec c(k), d(nj);
    for (std::size_t j = 0; j < k; ++j) c[j] = coeff_cap * rng.uniform(-0.5, 0.5);
    for (std::size_t j = 0; j < nj; ++j) d[j] = coeff_cap * rng.uniform(-0.5, 0.5);
    out.coeffs = make_constant_coefficients(model, coeff_cap * rng.uniform(-0.6, 0.6),
                                            rng.uniform(-0.5, 0.5), c, d);
    out.eta = make_random_eta(rng, model, 1.0);
    out.adjustment = make_random_adjustment(rng, model, AdjustmentKind::FiniteVariation, 0.5);
    return out;
}

}  // namespace bsdelab
