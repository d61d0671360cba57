#include "bsdelab/linear.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bsdelab {

LinearCoefficients make_constant_coefficients(const MartingaleModel& model, double a, double b,
                                              const Vec& c, const Vec& d) {
    const auto k = static_cast<std::size_t>(model.k_continuous);
    const auto nj = static_cast<std::size_t>(model.dim - model.k_continuous);
    if (c.size() != k || d.size() != nj)
        throw std::invalid_argument("coefficient blocks must match the model split");
    LinearCoefficients out;
    out.a = ScalarPredictable(model.space, a);
    out.b = ScalarPredictable(model.space, b);
    out.c = VecPredictable(model.space, c);
    out.d = VecPredictable(model.space, d);
    out.sup_a = std::fabs(a);
    out.sup_c = c.norm();
    out.sup_d = d.norm();
    return out;
}

LinearCoefficients make_coefficients(const MartingaleModel& model, ScalarPredictable a,
                                     ScalarPredictable b, VecPredictable c, VecPredictable d) {
    LinearCoefficients out;
    out.a = std::move(a);
    out.b = std::move(b);
    out.c = std::move(c);
    out.d = std::move(d);
    const FilteredSpace& sp = *model.space;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            out.sup_a = std::max(out.sup_a, std::fabs(out.a[id]));
            out.sup_c = std::max(out.sup_c, out.c[id].norm());
            out.sup_d = std::max(out.sup_d, out.d[id].norm());
        }
    return out;
}

Generator generator_from_coefficients(const LinearCoefficients& coeffs) {
    const double lips =
        std::max(coeffs.sup_a, std::sqrt(coeffs.sup_c * coeffs.sup_c + coeffs.sup_d * coeffs.sup_d));
    return Generator(
        "linear", lips, [coeffs](const GenContext& ctx, double y, const Vec& z) {
            const Vec mz = ctx.mz(z);
            const auto k = static_cast<std::size_t>(ctx.model->k_continuous);
            double acc = coeffs.a[ctx.node] * y + coeffs.b[ctx.node];
            const Vec& c = coeffs.c[ctx.node];
            const Vec& d = coeffs.d[ctx.node];
            for (std::size_t j = 0; j < c.size(); ++j) acc += c[j] * mz[j];
            for (std::size_t j = 0; j < d.size(); ++j) acc += d[j] * mz[k + j];
            return acc;
        });
}

ScalarAdapted stochastic_exponential(const ScalarAdapted& x) {
    const FilteredSpace& sp = x.space();
    ScalarAdapted e(x.space_ptr(), 0.0);
    e[sp.root()] = 1.0 + x[sp.root()];  // time-0 jump under X_{0-} = 0
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children) e[c] = e[id] * (1.0 + (x[c] - x[id]));
    return e;
}

namespace {

// dMhat over each step: c* inv(m^c) dM^c + d* inv(m^d) dM^d. Blockwise
// pseudo-inverse: where a jump block is singular its increments vanish, so
// the convention is exact rather than approximate.
double mhat_increment(const MartingaleModel& model, const LinearCoefficients& coeffs, NodeId node,
                      NodeId child, const Mat& alpha_c, const Mat& alpha_d) {
    const auto k = static_cast<std::size_t>(model.k_continuous);
    const Vec dm = model.paths[child] - model.paths[node];
    const Vec dmc = dm.head(k);
    const Vec dmd = dm.tail_from(k);
    double acc = 0.0;
    if (k > 0) acc += coeffs.c[node].dot(alpha_c.apply(dmc));
    if (dmd.size() > 0) acc += coeffs.d[node].dot(alpha_d.apply(dmd));
    return acc;
}

}  // namespace

ExponentialBundle build_exponential_bundle(const MartingaleModel& model,
                                           const LinearCoefficients& coeffs,
                                           const ScalarAdapted& d_process) {
    const FilteredSpace& sp = *model.space;
    require_same_space(sp, d_process.space());

    ExponentialBundle out;
    out.q_hat = ScalarAdapted(model.space, 0.0);
    out.m_hat = ScalarAdapted(model.space, 0.0);
    out.q = ScalarAdapted(model.space, 0.0);
    out.q_bar = ScalarPredictable(model.space, 0.0);
    out.a_process = ScalarAdapted(model.space, 0.0);
    out.q[sp.root()] = 1.0;

    ScalarAdapted joint(model.space, 0.0), split(model.space, 0.0);
    joint[sp.root()] = 1.0;
    split[sp.root()] = 1.0;
    out.min_jump = 0.0;

    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double dq = model.dq(id);
            const double adq = coeffs.a[id] * dq;
            if (adq >= 1.0)
                throw std::invalid_argument("build_exponential_bundle: a dQ = " +
                                            std::to_string(adq) +
                                            " >= 1; refine the grid for the implicit drift");
            const Mat alpha_c = pinv_psd(model.m_cont(id));
            const Mat alpha_d = pinv_psd(model.m_jump(id));

            // verify the pseudo-inverse convention is exact: a singular block
            // direction must carry no increment
            if (model.dim > model.k_continuous) {
                const Mat md = model.m_jump(id);
                const Mat proj = md.multiply(alpha_d);  // identity on the range of m^d
                for (NodeId c : sp.node(id).children) {
                    const Vec dmd = (model.paths[c] - model.paths[id])
                                        .tail_from(static_cast<std::size_t>(model.k_continuous));
                    const Vec back = proj.apply(dmd);
                    if ((back - dmd).max_abs() > 1e-8)
                        throw std::runtime_error(
                            "build_exponential_bundle: singular m with a live increment at node " +
                            std::to_string(id));
                }
            }

            out.q_bar[id] = out.q[id] / (1.0 - adq);
            double cross = 0.0;  // E_node[ dq dD ]
            for (NodeId c : sp.node(id).children) {
                const double dmh = mhat_increment(model, coeffs, id, c, alpha_c, alpha_d);
                out.min_jump = std::min(out.min_jump, dmh);
                const double factor = (1.0 + dmh) / (1.0 - adq);
                out.min_factor = std::min(out.min_factor, factor);
                out.q_hat[c] = out.q_hat[id] + adq;
                out.m_hat[c] = out.m_hat[id] + dmh;
                out.q[c] = out.q[id] * factor;
                joint[c] = joint[id] * (1.0 + adq + dmh);
                split[c] = split[id] * (1.0 + adq) * (1.0 + dmh);
                cross += sp.node(c).trans_prob * (out.q[c] - out.q[id]) *
                         (d_process[c] - d_process[id]);
            }
            for (NodeId c : sp.node(id).children)
                out.a_process[c] =
                    out.a_process[id] + out.q[id] * (d_process[c] - d_process[id]) + cross;
        }
    for (NodeId id : sp.leaves()) {
        out.split_discrepancy += sp.node(id).prob * std::fabs(split[id] - joint[id]);
        out.implicit_discrepancy += sp.node(id).prob * std::fabs(out.q[id] - joint[id]);
    }
    out.q_positive = out.min_factor > 0.0;
    return out;
}

LinearClosedForm linear_solution(const MartingaleModel& model, const LinearCoefficients& coeffs,
                                 const std::vector<double>& eta, const ScalarAdapted& d_process,
                                 bool require_gamma) {
    const FilteredSpace& sp = *model.space;
    if (eta.size() != sp.leaves().size())
        throw std::invalid_argument("linear_solution: eta must supply one value per leaf");

    LinearClosedForm out;
    out.bundle = build_exponential_bundle(model, coeffs, d_process);
    const ExponentialBundle& bd = out.bundle;

    // backward conditional expectations of q_T eta + int q_bar b dQ - dA
    ScalarAdapted w(model.space, 0.0);
    const auto& leaves = sp.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) w[leaves[i]] = bd.q[leaves[i]] * eta[i];
    for (int k = sp.n_steps() - 1; k >= 0; --k)
        for (NodeId id : sp.slice(k)) {
            double acc = 0.0, ea = 0.0;
            for (NodeId c : sp.node(id).children) {
                const double p = sp.node(c).trans_prob;
                acc += p * w[c];
                ea += p * (bd.a_process[c] - bd.a_process[id]);
            }
            w[id] = acc + bd.q_bar[id] * coeffs.b[id] * model.dq(id) - ea;
        }
    out.q_weighted = w;

    if (!bd.q_positive) {
        if (require_gamma)
            throw std::runtime_error("linear_solution: q hits zero (min jump " +
                                     std::to_string(bd.min_jump) +
                                     "); only the q-weighted form exists");
        return out;
    }

    out.gamma_form = true;
    Solution sol;
    sol.y = ScalarAdapted(model.space, 0.0);
    sol.z = VecPredictable(model.space, Vec(static_cast<std::size_t>(model.dim)));
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) sol.y[id] = w[id] / bd.q[id];

    const Generator g = generator_from_coefficients(coeffs);
    double worst = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const auto& children = sp.node(id).children;
            double ey = 0.0, ed = 0.0;
            for (NodeId c : children) {
                const double p = sp.node(c).trans_prob;
                ey += p * sol.y[c];
                ed += p * (d_process[c] - d_process[id]);
            }
            std::vector<double> targets(children.size());
            for (std::size_t i = 0; i < children.size(); ++i)
                targets[i] =
                    sol.y[children[i]] - ey - (d_process[children[i]] - d_process[id] - ed);
            sol.z[id] = step_representation(model, id, targets);
            const GenContext ctx{&model, id};
            const double g_dq = g(ctx, sol.y[id], sol.z[id]) * model.dq(id);
            for (NodeId c : children) {
                const Vec dm = model.paths[c] - model.paths[id];
                const double defect = sol.y[id] - sol.y[c] - g_dq + sol.z[id].dot(dm) +
                                      (d_process[c] - d_process[id]);
                worst = std::max(worst, std::fabs(defect));
            }
        }
    sol.pathwise_residual = worst;
    sol.norms = weighted_norms(sol.y, sol.z, model, 0.0);
    out.solution = std::move(sol);
    return out;
}

double closed_form_value_at(const MartingaleModel& model, const ExponentialBundle& bundle,
                            const LinearCoefficients& coeffs, const std::vector<double>& eta,
                            const ScalarAdapted& d_process, NodeId node) {
    const FilteredSpace& sp = *model.space;
    // direct enumeration over the subtree of `node`: conditional probabilities
    // are rebuilt from transition products, not read off cached node.prob
    std::vector<double> cond(sp.n_nodes(), 0.0);
    cond[static_cast<std::size_t>(node)] = 1.0;
    double acc = 0.0;
    const int k0 = sp.node(node).time_idx;
    for (int k = k0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double pc = cond[static_cast<std::size_t>(id)];
            if (pc == 0.0) continue;
            acc += pc * bundle.q_bar[id] * coeffs.b[id] * model.dq(id);
            double cross = 0.0;
            for (NodeId c : sp.node(id).children)
                cross += sp.node(c).trans_prob * (bundle.q[c] - bundle.q[id]) *
                         (d_process[c] - d_process[id]);
            acc -= pc * cross;
            for (NodeId c : sp.node(id).children) {
                const double pcc = pc * sp.node(c).trans_prob;
                cond[static_cast<std::size_t>(c)] = pcc;
                acc -= pcc * bundle.q[id] * (d_process[c] - d_process[id]);
            }
        }
    const auto& leaves = sp.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i)
        acc += cond[static_cast<std::size_t>(leaves[i])] * bundle.q[leaves[i]] * eta[i];
    return acc;
}

LemmaCheck lemma51_martingale_check(const MartingaleModel& model, const ExponentialBundle& bundle,
                                    const ScalarAdapted& y, const ScalarPredictable& b) {
    const FilteredSpace& sp = *model.space;
    ScalarAdapted mt(model.space, 0.0);
    ScalarAdapted intqb(model.space, 0.0);
    mt[sp.root()] = bundle.q[sp.root()] * y[sp.root()];
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children) {
                intqb[c] = intqb[id] + bundle.q_bar[id] * b[id] * model.dq(id);
                mt[c] = bundle.q[c] * y[c] - bundle.a_process[c] + intqb[c];
            }

    LemmaCheck out;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double defect = std::fabs(step_expectation(sp, id, mt) - mt[id]);
            if (defect > out.residual) {
                out.residual = defect;
                out.worst_node = id;
            }
        }

    ScalarAdapted run(model.space, 0.0);
    run[sp.root()] = std::fabs(mt[sp.root()]);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children)
                run[c] = std::max(run[id], std::fabs(mt[c]));
    for (NodeId id : sp.leaves()) out.sup_abs += sp.node(id).prob * run[id];
    return out;
}

SupermartingaleCheck supermartingale_check(const MartingaleModel& model,
                                           const ExponentialBundle& bundle,
                                           const ScalarAdapted& d_process) {
    const FilteredSpace& sp = *model.space;
    SupermartingaleCheck out;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            double ea = 0.0, phi_p = 0.0;
            for (NodeId c : sp.node(id).children) {
                const double p = sp.node(c).trans_prob;
                ea += p * (bundle.a_process[c] - bundle.a_process[id]);
                phi_p += p * bundle.q[c] * (d_process[c] - d_process[id]);
            }
            out.max_conditional_mean = std::max(out.max_conditional_mean, ea);
            out.phi_p_max_increment = std::max(out.phi_p_max_increment, phi_p);
            out.compensated_residual = std::max(out.compensated_residual, std::fabs(ea - phi_p));
        }
    return out;
}

}  // namespace bsdelab
