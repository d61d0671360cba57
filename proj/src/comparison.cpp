#include "bsdelab/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "bsdelab/serialize.hpp"

namespace bsdelab {

namespace {

constexpr double kGateTol = 1e-14;   // indicator gate for difference quotients
constexpr double kHypTol = 1e-12;
constexpr double kGapTol = 1e-10;

Vec mixed_head_tail(const Vec& head_src, const Vec& tail_src, std::size_t k) {
    // first k coordinates from head_src, rest from tail_src
    Vec out(head_src.size());
    for (std::size_t j = 0; j < k; ++j) out[j] = head_src[j];
    for (std::size_t j = k; j < head_src.size(); ++j) out[j] = tail_src[j];
    return out;
}

}  // namespace

VecPredictable build_zeta(const MartingaleModel& model, const ZetaSpec& spec) {
    const FilteredSpace& sp = *model.space;
    const auto nj = static_cast<std::size_t>(model.dim - model.k_continuous);
    VecPredictable zeta(model.space, Vec(nj));
    if (spec.kind == ZetaSpec::Kind::Zero || nj == 0) return zeta;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double lam = model.intensity.empty() ? 0.0 : model.intensity[id];
            const double md = model.m_jump(id)(0, 0);
            if (lam > 0.0 && md > 0.0) zeta[id][0] = spec.psi * lam / md;
        }
    return zeta;
}

LinearizationBundle linearize(const BSDEProblem& p1, const BSDEProblem& p2, const Solution& s1,
                              const Solution& s2, const VecPredictable& zeta) {
    require_same_space(*p1.model.space, *p2.model.space);
    const MartingaleModel& model = p1.model;
    const FilteredSpace& sp = *model.space;
    const auto k = static_cast<std::size_t>(model.k_continuous);
    const auto n = static_cast<std::size_t>(model.dim);

    LinearizationBundle out;
    out.a = ScalarPredictable(model.space, 0.0);
    out.c = VecPredictable(model.space, Vec(k));
    out.delta = ScalarPredictable(model.space, 0.0);
    out.zeta = zeta;
    out.b = ScalarPredictable(model.space, 0.0);

    for (int s = 0; s < sp.n_steps(); ++s)
        for (NodeId id : sp.slice(s)) {
            const GenContext ctx{&model, id};
            const double y1 = s1.y[id], y2 = s2.y[id];
            const Vec& z1 = s1.z[id];
            const Vec& z2 = s2.z[id];

            const double ygap = y1 - y2;
            if (std::fabs(ygap) > kGateTol)
                out.a[id] = (p1.generator(ctx, y1, z1) - p1.generator(ctx, y2, z1)) / ygap;

            const Mat& m = model.m_factor[id];
            const Mat minv = pinv_psd(m);
            const Vec zt1 = m.apply(z1);
            const Vec zt2 = m.apply(z2);

            // coordinate-wise quotients in the (m z) variables: coordinates
            // below j come from zt2, above j (jump block included) from zt1
            for (std::size_t j = 0; j < k; ++j) {
                const double gap = zt1[j] - zt2[j];
                if (std::fabs(gap) <= kGateTol) continue;
                Vec hi(n), lo(n);
                for (std::size_t i = 0; i < n; ++i) {
                    hi[i] = (i < j) ? zt2[i] : zt1[i];
                    lo[i] = (i <= j) ? zt2[i] : zt1[i];
                }
                const double ghat_hi = p1.generator(ctx, y2, minv.apply(hi));
                const double ghat_lo = p1.generator(ctx, y2, minv.apply(lo));
                out.c[id][j] = (ghat_hi - ghat_lo) / gap;
            }

            const Vec z_mixed = mixed_head_tail(z2, z1, k);  // (Z2^c, Z1^d)
            out.delta[id] = p1.generator(ctx, y2, z_mixed) -
                            p2.generator(GenContext{&p2.model, id}, y2, z2);

            double jump_term = 0.0;
            if (n > k) {
                const Vec zd = (model.m_jump(id))
                                   .apply((z1 - z2).tail_from(k));
                jump_term = zeta[id].dot(zd);
            }
            out.b[id] = out.delta[id] - jump_term;

            out.max_abs_a = std::max(out.max_abs_a, std::fabs(out.a[id]));
            out.max_norm_c = std::max(out.max_norm_c, out.c[id].norm());
        }
    return out;
}

namespace {

LinearCoefficients coefficients_from_linearization(const MartingaleModel& model,
                                                   const LinearizationBundle& lin) {
    return make_coefficients(model, lin.a, lin.b, lin.c, lin.zeta);
}

ScalarAdapted difference_adjustment(const BSDEProblem& p1, const BSDEProblem& p2) {
    const FilteredSpace& sp = *p1.model.space;
    ScalarAdapted dd(p1.model.space, 0.0);
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) dd[id] = p1.adjustment[id] - p2.adjustment[id];
    return dd;
}

std::string dump_counterexample(const BSDEProblem& p1, const BSDEProblem& p2, const Solution& s1,
                                const Solution& s2, const ComparisonReport& rep) {
    nlohmann::json j;
    j["tree"] = nlohmann::json::parse(serialize_space(*p1.model.space));
    j["generator1"] = p1.generator.name();
    j["generator2"] = p2.generator.name();
    j["eta1"] = p1.eta;
    j["eta2"] = p2.eta;
    j["d1"] = nlohmann::json::parse(serialize_process(p1.adjustment));
    j["d2"] = nlohmann::json::parse(serialize_process(p2.adjustment));
    j["y1"] = nlohmann::json::parse(serialize_process(s1.y));
    j["y2"] = nlohmann::json::parse(serialize_process(s2.y));
    j["min_gap"] = rep.min_gap;
    j["min_gap_node"] = rep.min_gap_node;
    return j.dump();
}

}  // namespace

ComparisonReport check_hypotheses(const BSDEProblem& p1, const BSDEProblem& p2, const Solution& s1,
                                  const Solution& s2, const ZetaSpec& zeta_spec) {
    require_same_space(*p1.model.space, *p2.model.space);
    const MartingaleModel& model = p1.model;
    const FilteredSpace& sp = *model.space;

    ComparisonReport rep;
    const VecPredictable zeta = build_zeta(model, zeta_spec);
    rep.linearization = linearize(p1, p2, s1, s2, zeta);

    HypothesisItem pred{"g-predictable", true, -1, 0.0,
                        "step drivers are left-endpoint measurable by construction"};
    rep.hypotheses.push_back(pred);

    HypothesisItem dmono{"D-nonincreasing", true, -1,
                         std::numeric_limits<double>::infinity(), ""};
    const ScalarAdapted dd = difference_adjustment(p1, p2);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children) {
                const double slack = -(dd[c] - dd[id]);  // >= 0 when nonincreasing
                if (slack < dmono.margin) {
                    dmono.margin = slack;
                    dmono.witness = c;
                }
            }
    dmono.pass = dmono.margin >= -kHypTol;
    rep.hypotheses.push_back(dmono);

    HypothesisItem etaord{"eta-ordered", true, -1, std::numeric_limits<double>::infinity(), ""};
    const auto& leaves = sp.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const double slack = p1.eta[i] - p2.eta[i];
        if (slack < etaord.margin) {
            etaord.margin = slack;
            etaord.witness = leaves[i];
        }
    }
    etaord.pass = etaord.margin >= -kHypTol;
    rep.hypotheses.push_back(etaord);

    // jump condition and b >= 0 mu_Q-a.e. through the exponential bundle
    const LinearCoefficients coeffs = coefficients_from_linearization(model, rep.linearization);
    const ExponentialBundle bundle = build_exponential_bundle(model, coeffs, dd);

    HypothesisItem jump{"Mhat-jumps-above-minus-one", true, -1, bundle.min_jump + 1.0, ""};
    jump.pass = bundle.min_jump > -1.0 + kHypTol;
    rep.hypotheses.push_back(jump);

    HypothesisItem bsign{"b-nonnegative", true, -1, std::numeric_limits<double>::infinity(), ""};
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            if (!(model.dq(id) > 0.0)) continue;  // mu_Q-null step
            const double v = rep.linearization.b[id];
            if (v < bsign.margin) {
                bsign.margin = v;
                bsign.witness = id;
            }
        }
    bsign.pass = bsign.margin >= -kHypTol;
    rep.hypotheses.push_back(bsign);

    rep.hypotheses_pass = true;
    for (const auto& h : rep.hypotheses) rep.hypotheses_pass = rep.hypotheses_pass && h.pass;

    rep.min_gap = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const double gap = s1.y[id] - s2.y[id];
            if (gap < rep.min_gap) {
                rep.min_gap = gap;
                rep.min_gap_node = id;
            }
            rep.max_abs_gap = std::max(rep.max_abs_gap, std::fabs(gap));
        }
    rep.y0_gap = s1.y[sp.root()] - s2.y[sp.root()];
    for (std::size_t i = 0; i < leaves.size(); ++i)
        rep.max_leaf_gap = std::max(rep.max_leaf_gap, std::fabs(p1.eta[i] - p2.eta[i]));
    return rep;
}

ComparisonReport verify_comparison(const BSDEProblem& p1, const BSDEProblem& p2,
                                   const ZetaSpec& zeta, const SolverOptions& opts) {
    const Solution s1 = solve_backward_exact(p1, opts);
    const Solution s2 = solve_backward_exact(p2, opts);
    ComparisonReport rep = check_hypotheses(p1, p2, s1, s2, zeta);
    if (!rep.hypotheses_pass) return rep;  // gaps still reported, assertion refused
    rep.asserted = true;
    rep.comparison_holds = rep.min_gap >= -kGapTol;
    if (!rep.comparison_holds)
        rep.counterexample_json = dump_counterexample(p1, p2, s1, s2, rep);
    return rep;
}

ComparisonReport verify_strict_comparison(const BSDEProblem& p1, const BSDEProblem& p2,
                                          const ZetaSpec& zeta, const SolverOptions& opts) {
    ComparisonReport rep = verify_comparison(p1, p2, zeta, opts);
    rep.strict_preconditions = rep.hypotheses_pass && std::fabs(rep.y0_gap) < 1e-12;
    if (rep.strict_preconditions)
        rep.strict_holds = rep.max_abs_gap <= kGapTol && rep.max_leaf_gap <= kGapTol;
    return rep;
}

ContinuousCaseReport continuous_case_condition(const BSDEProblem& p1, const BSDEProblem& p2,
                                               const Solution& s1, const Solution& s2) {
    const MartingaleModel& model = p1.model;
    if (model.k_continuous != model.dim)
        throw std::invalid_argument("continuous_case_condition: model has a jump block");
    const FilteredSpace& sp = *model.space;

    ContinuousCaseReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    const VecPredictable zeta = build_zeta(model, ZetaSpec{});
    const LinearizationBundle lin = linearize(p1, p2, s1, s2, zeta);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            if (!(model.dq(id) > 0.0)) continue;
            const GenContext c1{&p1.model, id}, c2{&p2.model, id};
            const double gd =
                p1.generator(c1, s2.y[id], s2.z[id]) - p2.generator(c2, s2.y[id], s2.z[id]);
            if (gd < rep.worst_margin) {
                rep.worst_margin = gd;
                rep.witness = id;
            }
            rep.max_b_mismatch = std::max(rep.max_b_mismatch, std::fabs(lin.b[id] - gd));
        }
    rep.reduced_condition = rep.worst_margin >= -kHypTol;
    return rep;
}

MuSplitReport mu_split_scan(const BSDEProblem& p1, const BSDEProblem& p2, const Solution& s1,
                            const Solution& s2, const ZetaSpec& zeta_spec) {
    const MartingaleModel& model = p1.model;
    const FilteredSpace& sp = *model.space;
    const auto k = static_cast<std::size_t>(model.k_continuous);
    const VecPredictable zeta = build_zeta(model, zeta_spec);
    const LinearizationBundle lin = linearize(p1, p2, s1, s2, zeta);

    MuSplitReport rep;
    rep.worst_b = std::numeric_limits<double>::infinity();
    for (int s = 0; s < sp.n_steps(); ++s)
        for (NodeId id : sp.slice(s)) {
            if (!(model.dq(id) > 0.0)) continue;
            const GenContext ctx{&model, id};
            const GenContext ctx2{&p2.model, id};
            const Vec z_mixed = mixed_head_tail(s2.z[id], s1.z[id], k);
            const double mu =
                p1.generator(ctx, s2.y[id], z_mixed) - p1.generator(ctx, s2.y[id], s2.z[id]);
            const double gd = p1.generator(ctx, s2.y[id], s2.z[id]) -
                              p2.generator(ctx2, s2.y[id], s2.z[id]);
            double jump_term = 0.0;
            if (static_cast<std::size_t>(model.dim) > k)
                jump_term =
                    zeta[id].dot(model.m_jump(id).apply((s1.z[id] - s2.z[id]).tail_from(k)));
            const bool premises = gd >= -kHypTol && (mu - jump_term) >= -kHypTol;
            if (!premises) continue;
            ++rep.premise_nodes;
            rep.worst_b = std::min(rep.worst_b, lin.b[id]);
            if (lin.b[id] < -kHypTol) ++rep.implication_failures;
        }
    if (rep.premise_nodes == 0) rep.worst_b = 0.0;
    return rep;
}

LinearizationConsistency linearization_consistency(const BSDEProblem& p1, const BSDEProblem& p2,
                                                   const Solution& s1, const Solution& s2,
                                                   const ZetaSpec& zeta_spec) {
    const MartingaleModel& model = p1.model;
    const FilteredSpace& sp = *model.space;
    const auto k = static_cast<std::size_t>(model.k_continuous);
    const VecPredictable zeta = build_zeta(model, zeta_spec);
    const LinearizationBundle lin = linearize(p1, p2, s1, s2, zeta);
    const ScalarAdapted dd = difference_adjustment(p1, p2);

    LinearizationConsistency out;
    for (int s = 0; s < sp.n_steps(); ++s)
        for (NodeId id : sp.slice(s)) {
            const double y = s1.y[id] - s2.y[id];
            const Vec z = s1.z[id] - s2.z[id];
            const Vec mz = model.m_factor[id].apply(z);
            double drift = lin.a[id] * y + lin.b[id];
            for (std::size_t j = 0; j < k; ++j) drift += lin.c[id][j] * mz[j];
            for (std::size_t j = k; j < static_cast<std::size_t>(model.dim); ++j)
                drift += lin.zeta[id][j - k] * mz[j];
            const double g_dq = drift * model.dq(id);
            for (NodeId c : sp.node(id).children) {
                const Vec dm = model.paths[c] - model.paths[id];
                const double defect = y - (s1.y[c] - s2.y[c]) - g_dq + z.dot(dm) +
                                      (dd[c] - dd[id]);
                out.pathwise_residual = std::max(out.pathwise_residual, std::fabs(defect));
            }
        }

    // reproduce the difference through the linear closed form
    const LinearCoefficients coeffs = coefficients_from_linearization(model, lin);
    std::vector<double> eta_diff(p1.eta.size());
    for (std::size_t i = 0; i < eta_diff.size(); ++i) eta_diff[i] = p1.eta[i] - p2.eta[i];
    const LinearClosedForm cf = linear_solution(model, coeffs, eta_diff, dd, false);
    if (!cf.gamma_form) {
        out.closed_form_gap = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    for (int s = 0; s <= sp.n_steps(); ++s)
        for (NodeId id : sp.slice(s))
            out.closed_form_gap = std::max(
                out.closed_form_gap, std::fabs(cf.solution.y[id] - (s1.y[id] - s2.y[id])));
    return out;
}

}  // namespace bsdelab
