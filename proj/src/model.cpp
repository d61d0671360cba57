#include "bsdelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bsdelab {

namespace {

ScalarAdapted clock_process(const SpacePtr& sp) {
    ScalarAdapted q(sp, 0.0);
    for (int k = 0; k <= sp->n_steps(); ++k)
        for (NodeId id : sp->slice(k)) q[id] = sp->time_of(id);
    return q;
}

std::vector<double> broadcast_lambda(const FilteredSpace& sp, const std::vector<double>& lam) {
    const auto steps = static_cast<std::size_t>(sp.n_steps());
    if (lam.size() == 1) return std::vector<double>(steps, lam[0]);
    if (lam.size() != steps)
        throw std::invalid_argument("lambda schedule must have one entry per step");
    return lam;
}

}  // namespace

JumpLayout layout_last_child(const FilteredSpace& sp, JumpLayout::Kind kind) {
    JumpLayout lay;
    lay.kind = kind;
    lay.jump_child.assign(sp.n_nodes(), -1);
    lay.post_jump.assign(sp.n_nodes(), 0);
    if (kind == JumpLayout::Kind::None) return lay;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const bool post = lay.post_jump[static_cast<std::size_t>(id)] != 0;
            if (post) {
                for (NodeId c : sp.node(id).children)
                    lay.post_jump[static_cast<std::size_t>(c)] = 1;
                continue;
            }
            const NodeId j = sp.node(id).children.back();
            lay.jump_child[static_cast<std::size_t>(id)] = j;
            if (kind == JumpLayout::Kind::Default)
                lay.post_jump[static_cast<std::size_t>(j)] = 1;
        }
    return lay;
}

ModelDiagnostics validate_model(const MartingaleModel& model) {
    const FilteredSpace& sp = *model.space;
    ModelDiagnostics d;
    d.q_increment_spread = predictable_increment_spread(model.q_process);
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) d.q_max = std::max(d.q_max, model.q_process[id]);
    const auto n = static_cast<std::size_t>(model.dim);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            Vec mean(n);
            Mat second(n, n);
            for (NodeId c : sp.node(id).children) {
                const Vec inc = model.paths[c] - model.paths[id];
                mean += sp.node(c).trans_prob * inc;
                second.add_outer(inc, sp.node(c).trans_prob);
            }
            d.martingale_residual = std::max(d.martingale_residual, mean.max_abs());
            const Mat& mf = model.m_factor[id];
            Mat target = mf.multiply(mf.transposed());
            target *= model.dq(id);
            d.eq_factorization = std::max(d.eq_factorization, (second - target).max_abs());
            for (int i = 0; i < model.k_continuous; ++i)
                for (int j = model.k_continuous; j < model.dim; ++j)
                    d.cross_block = std::max(
                        d.cross_block, std::fabs(second(static_cast<std::size_t>(i),
                                                        static_cast<std::size_t>(j))));
        }
    return d;
}

MartingaleModel build_brownian_proxy(SpacePtr space, int dims, double scale,
                                     const JumpLayout* layout) {
    if (dims < 1) throw std::invalid_argument("build_brownian_proxy: dims must be >= 1");
    const FilteredSpace& sp = *space;
    MartingaleModel model;
    model.space = space;
    model.dim = dims;
    model.k_continuous = dims;
    model.paths = VecAdapted(space, Vec(static_cast<std::size_t>(dims)));
    model.m_factor = MatPredictable(space, Mat());
    model.q_process = clock_process(space);
    model.c_q = sp.horizon();

    const auto nd = static_cast<std::size_t>(dims);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double dt = sp.dt(id);
            model.m_factor[id] = scale * Mat::identity(nd);

            // survival branches host the frame; a marked jump branch gets zero
            std::vector<NodeId> surv;
            NodeId jump_child = -1;
            if (layout && layout->has_jump_branch(id))
                jump_child = layout->jump_child[static_cast<std::size_t>(id)];
            for (NodeId c : sp.node(id).children)
                if (c != jump_child) surv.push_back(c);
            if (scale == 0.0) {  // constant martingale, no frame needed
                for (NodeId c : sp.node(id).children) model.paths[c] = model.paths[id];
                continue;
            }
            if (static_cast<int>(surv.size()) < dims + 1)
                throw std::invalid_argument("build_brownian_proxy: branching too small at node " +
                                            std::to_string(id) + " (need >= dims+1 live branches)");

            std::vector<double> w(surv.size());
            double wsum = 0.0;
            for (std::size_t i = 0; i < surv.size(); ++i) {
                w[i] = sp.node(surv[i]).trans_prob;
                wsum += w[i];
            }
            const double target = scale * scale * dt;

            // weighted Gram-Schmidt against the constant vector and prior frames;
            // Vandermonde seeds keep the columns affinely independent
            std::vector<std::vector<double>> frame(nd, std::vector<double>(surv.size()));
            for (std::size_t j = 0; j < nd; ++j) {
                std::vector<double> u(surv.size());
                for (std::size_t i = 0; i < surv.size(); ++i)
                    u[i] = std::pow(static_cast<double>(i + 1), static_cast<double>(j + 1));
                double mean = 0.0;
                for (std::size_t i = 0; i < surv.size(); ++i) mean += w[i] * u[i];
                mean /= wsum;
                for (double& v : u) v -= mean;
                for (std::size_t prev = 0; prev < j; ++prev) {
                    double proj = 0.0;
                    for (std::size_t i = 0; i < surv.size(); ++i)
                        proj += w[i] * u[i] * frame[prev][i];
                    proj /= target;
                    for (std::size_t i = 0; i < surv.size(); ++i)
                        u[i] -= proj * frame[prev][i];
                }
                double nrm2 = 0.0;
                for (std::size_t i = 0; i < surv.size(); ++i) nrm2 += w[i] * u[i] * u[i];
                if (nrm2 <= 1e-300)
                    throw std::runtime_error("build_brownian_proxy: degenerate frame at node " +
                                             std::to_string(id));
                const double fac = std::sqrt(target / nrm2);
                for (std::size_t i = 0; i < surv.size(); ++i) frame[j][i] = u[i] * fac;
            }

            for (NodeId c : sp.node(id).children) model.paths[c] = model.paths[id];
            for (std::size_t i = 0; i < surv.size(); ++i)
                for (std::size_t j = 0; j < nd; ++j)
                    model.paths[surv[i]][j] += frame[j][i];
        }
    return model;
}

namespace {

MartingaleModel build_jump_martingale(SpacePtr space, const std::vector<double>& lambda_per_step,
                                      const JumpLayout* layout, JumpLayout::Kind kind) {
    const FilteredSpace& sp = *space;
    const std::vector<double> lam = broadcast_lambda(sp, lambda_per_step);
    JumpLayout lay = layout ? *layout : layout_last_child(sp, kind);
    if (lay.kind != kind) throw std::invalid_argument("jump layout kind mismatch");

    MartingaleModel model;
    model.space = space;
    model.dim = 1;
    model.k_continuous = 0;
    model.paths = VecAdapted(space, Vec(1));
    model.m_factor = MatPredictable(space, Mat(1, 1));
    model.q_process = clock_process(space);
    model.c_q = sp.horizon();
    model.intensity = ScalarPredictable(space, 0.0);
    model.jump_state = ScalarAdapted(space, 0.0);
    model.layout = lay;

    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double dt = sp.dt(id);
            if (!lay.has_jump_branch(id)) {
                for (NodeId c : sp.node(id).children) {
                    model.paths[c] = model.paths[id];
                    model.jump_state[c] = model.jump_state[id];
                }
                continue;
            }
            const double lam_k = lam[static_cast<std::size_t>(k)];
            if (!(lam_k * dt > 0.0) || lam_k * dt >= 1.0)
                throw std::invalid_argument("jump martingale: lambda*dt must lie in (0,1) "
                                            "(step " + std::to_string(k) + ")");
            const NodeId j = lay.jump_child[static_cast<std::size_t>(id)];
            const double p = sp.node(j).trans_prob;
            if (std::fabs(p - lam_k * dt) > 1e-9)
                throw std::invalid_argument(
                    "jump martingale: jump-branch probability " + std::to_string(p) +
                    " does not match lambda*dt at node " + std::to_string(id));
            // the tree's implied intensity keeps the compensation exact
            model.intensity[id] = p / dt;
            model.m_factor[id](0, 0) = std::sqrt(p * (1.0 - p) / dt);
            for (NodeId c : sp.node(id).children) {
                const double jump = (c == j) ? 1.0 : 0.0;
                model.paths[c] = model.paths[id];
                model.paths[c][0] += jump - p;
                model.jump_state[c] = model.jump_state[id] + jump;
            }
        }
    return model;
}

}  // namespace

MartingaleModel build_default_martingale(SpacePtr space, const std::vector<double>& lambda_per_step,
                                         const JumpLayout* layout) {
    return build_jump_martingale(std::move(space), lambda_per_step, layout,
                                 JumpLayout::Kind::Default);
}

MartingaleModel build_poisson_martingale(SpacePtr space, const std::vector<double>& lambda_per_step,
                                         const JumpLayout* layout) {
    return build_jump_martingale(std::move(space), lambda_per_step, layout,
                                 JumpLayout::Kind::Poisson);
}

MartingaleModel make_trivial_model(SpacePtr space) {
    MartingaleModel model;
    model.space = std::move(space);
    model.dim = 0;
    model.k_continuous = 0;
    model.paths = VecAdapted(model.space, Vec(0));
    model.m_factor = MatPredictable(model.space, Mat(0, 0));
    model.q_process = clock_process(model.space);
    model.c_q = model.space->horizon();
    return model;
}

MartingaleModel assemble_block_model(const MartingaleModel& cont, const MartingaleModel& jump) {
    if (cont.dim == 0 && jump.dim == 0) throw std::invalid_argument("assemble: both blocks empty");
    if (cont.dim == 0) {
        MartingaleModel out = jump;
        out.k_continuous = 0;
        return out;
    }
    if (jump.dim == 0) {
        MartingaleModel out = cont;
        out.k_continuous = cont.dim;
        return out;
    }
    require_same_space(*cont.space, *jump.space);
    const FilteredSpace& sp = *cont.space;
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            if (std::fabs(cont.q_process[id] - jump.q_process[id]) > 1e-12)
                throw std::invalid_argument("assemble: component Q processes differ");

    MartingaleModel model;
    model.space = cont.space;
    model.dim = cont.dim + jump.dim;
    model.k_continuous = cont.dim;
    model.q_process = cont.q_process;
    model.c_q = std::max(cont.c_q, jump.c_q);
    model.intensity = jump.intensity;
    model.jump_state = jump.jump_state;
    model.layout = jump.layout;

    const auto n = static_cast<std::size_t>(model.dim);
    model.paths = VecAdapted(model.space, Vec(n));
    model.m_factor = MatPredictable(model.space, Mat(n, n));
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            model.paths[id] = Vec::concat(cont.paths[id], jump.paths[id]);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            Mat m(n, n);
            m.set_block(0, 0, cont.m_factor[id]);
            m.set_block(static_cast<std::size_t>(cont.dim), static_cast<std::size_t>(cont.dim),
                        jump.m_factor[id]);
            model.m_factor[id] = m;
        }

    const ModelDiagnostics diag = validate_model(model);
    if (diag.cross_block > 1e-10)
        throw std::invalid_argument("assemble: cross-block covariation residual " +
                                    std::to_string(diag.cross_block));
    return model;
}

BlockSpace build_block_space(const BlockSpaceSpec& spec, Rng* rng) {
    std::vector<double> grid = spec.time_grid;
    if (grid.empty()) {
        if (spec.steps < 1) throw std::invalid_argument("build_block_space: steps must be >= 1");
        grid.resize(static_cast<std::size_t>(spec.steps) + 1);
        for (int k = 0; k <= spec.steps; ++k)
            grid[static_cast<std::size_t>(k)] = spec.T * k / spec.steps;
    }
    const int steps = static_cast<int>(grid.size()) - 1;
    std::vector<double> lam(static_cast<std::size_t>(steps), 0.0);
    if (spec.jump != JumpLayout::Kind::None) {
        if (spec.lambda.empty()) throw std::invalid_argument("build_block_space: lambda required");
        for (int k = 0; k < steps; ++k)
            lam[static_cast<std::size_t>(k)] =
                spec.lambda[spec.lambda.size() == 1 ? 0 : static_cast<std::size_t>(k)];
    }

    TreeBuilder b(grid);
    JumpLayout lay;
    lay.kind = spec.jump;
    lay.jump_child.assign(1, -1);
    lay.post_jump.assign(1, 0);

    std::vector<NodeId> frontier{0};
    for (int k = 0; k < steps; ++k) {
        const double dt = grid[static_cast<std::size_t>(k) + 1] - grid[static_cast<std::size_t>(k)];
        std::vector<NodeId> next;
        for (NodeId id : frontier) {
            const bool post = lay.post_jump[static_cast<std::size_t>(id)] != 0;
            const bool jump_active =
                (spec.jump == JumpLayout::Kind::Default && !post) ||
                spec.jump == JumpLayout::Kind::Poisson;
            const int n_surv = jump_active ? std::max(spec.cont_branching, 1)
                                           : std::max(spec.cont_branching, 2);
            double p_jump = 0.0;
            if (jump_active) {
                p_jump = lam[static_cast<std::size_t>(k)] * dt;
                if (!(p_jump > 0.0) || p_jump >= 1.0)
                    throw std::invalid_argument("build_block_space: lambda*dt must lie in (0,1)");
            }
            std::vector<double> w(static_cast<std::size_t>(n_surv), 1.0);
            if (spec.randomize_probs && rng)
                for (double& x : w) x = rng->uniform(0.25, 1.0);
            double wsum = 0.0;
            for (double x : w) wsum += x;
            for (double& x : w) x *= (1.0 - p_jump) / wsum;

            for (int i = 0; i < n_surv; ++i) {
                const NodeId c = b.add_child(id, w[static_cast<std::size_t>(i)]);
                next.push_back(c);
                lay.jump_child.resize(b.n_nodes(), -1);
                lay.post_jump.resize(b.n_nodes(), 0);
                lay.post_jump[static_cast<std::size_t>(c)] = post ? 1 : 0;
            }
            if (jump_active) {
                const NodeId c = b.add_child(id, p_jump);
                next.push_back(c);
                lay.jump_child.resize(b.n_nodes(), -1);
                lay.post_jump.resize(b.n_nodes(), 0);
                lay.jump_child[static_cast<std::size_t>(id)] = c;
                lay.post_jump[static_cast<std::size_t>(c)] =
                    (spec.jump == JumpLayout::Kind::Default) ? 1 : 0;
            }
        }
        frontier = std::move(next);
    }

    BlockSpace out;
    out.space = b.build();
    out.layout = std::move(lay);
    out.lambda_per_step = std::move(lam);
    return out;
}

Vec step_representation(const MartingaleModel& model, NodeId node,
                        const std::vector<double>& centered_child_targets,
                        double* out_residual, double* out_condition) {
    const FilteredSpace& sp = *model.space;
    const auto& children = sp.node(node).children;
    const auto n = static_cast<std::size_t>(model.dim);
    Mat gram(n, n);
    Vec rhs(n);
    std::vector<Vec> incs(children.size());
    for (std::size_t i = 0; i < children.size(); ++i) {
        const NodeId c = children[i];
        incs[i] = model.paths[c] - model.paths[node];
        const double p = sp.node(c).trans_prob;
        gram.add_outer(incs[i], p);
        rhs += (p * centered_child_targets[i]) * incs[i];
    }
    const Vec z = solve_psd_min_norm(gram, rhs);
    if (out_residual) {
        double worst = 0.0;
        for (std::size_t i = 0; i < children.size(); ++i)
            worst = std::max(worst, std::fabs(centered_child_targets[i] - z.dot(incs[i])));
        *out_residual = worst;
    }
    if (out_condition && n > 0) {
        const SymEig eig = eigensym(gram);
        const double top = eig.values[n - 1];
        double bottom = top;
        for (std::size_t i = 0; i < n; ++i)
            if (eig.values[i] > 1e-12 * std::max(top, 1e-300))
                bottom = std::min(bottom, eig.values[i]);
        *out_condition = (bottom > 0.0) ? top / bottom : 1.0;
    }
    return z;
}

RepresentationResult represent_martingale(const MartingaleModel& model,
                                          const ScalarAdapted& n_process, bool require_exact,
                                          double tol) {
    const FilteredSpace& sp = *model.space;
    require_same_space(sp, n_process.space());
    const double mart = martingale_residual(n_process);
    if (mart > 1e-9)
        throw std::invalid_argument("represent_martingale: input is not a martingale "
                                    "(residual " + std::to_string(mart) + ")");

    RepresentationResult out;
    out.integrand = VecPredictable(model.space, Vec(static_cast<std::size_t>(model.dim)));
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const auto& children = sp.node(id).children;
            std::vector<double> targets(children.size());
            for (std::size_t i = 0; i < children.size(); ++i)
                targets[i] = n_process[children[i]] - n_process[id];
            double resid = 0.0, cond = 1.0;
            out.integrand[id] = step_representation(model, id, targets, &resid, &cond);
            out.worst_condition = std::max(out.worst_condition, cond);
            if (resid > tol && require_exact)
                throw std::runtime_error(
                    "martingale representation failed (PRP violation) at node " +
                    std::to_string(id) + ": residual " + std::to_string(resid));
            out.residual = std::max(out.residual, resid);
        }
    return out;
}

}  // namespace bsdelab
