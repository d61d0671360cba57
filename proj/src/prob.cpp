#include "bsdelab/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bsdelab {

std::vector<double> conditional_expectation(const FilteredSpace& sp,
                                            const std::vector<double>& values_on_slice_j,
                                            int slice_j, int slice_k) {
    if (slice_j < 0 || slice_j > sp.n_steps() || slice_k < 0 || slice_k > slice_j)
        throw std::invalid_argument("conditional_expectation: time index out of range");
    const auto& sj = sp.slice(slice_j);
    if (values_on_slice_j.size() != sj.size())
        throw std::invalid_argument("conditional_expectation: slice value count mismatch");

    // scatter to node-indexed storage, then average one slice at a time
    std::vector<double> cur(sp.n_nodes(), 0.0);
    for (std::size_t i = 0; i < sj.size(); ++i)
        cur[static_cast<std::size_t>(sj[i])] = values_on_slice_j[i];

    for (int k = slice_j - 1; k >= slice_k; --k) {
        for (NodeId id : sp.slice(k)) {
            double acc = 0.0;
            for (NodeId c : sp.node(id).children)
                acc += sp.node(c).trans_prob * cur[static_cast<std::size_t>(c)];
            cur[static_cast<std::size_t>(id)] = acc;
        }
    }
    const auto& sk = sp.slice(slice_k);
    std::vector<double> out(sk.size());
    for (std::size_t i = 0; i < sk.size(); ++i) out[i] = cur[static_cast<std::size_t>(sk[i])];
    return out;
}

std::vector<double> conditional_expectation(const ScalarAdapted& x, int slice_j, int slice_k) {
    const FilteredSpace& sp = x.space();
    if (slice_j < 0 || slice_j > sp.n_steps())
        throw std::invalid_argument("conditional_expectation: time index out of range");
    const auto& sj = sp.slice(slice_j);
    std::vector<double> vals(sj.size());
    for (std::size_t i = 0; i < sj.size(); ++i) vals[i] = x[sj[i]];
    return conditional_expectation(sp, vals, slice_j, slice_k);
}

ScalarAdapted martingale_closure(const SpacePtr& sp, const std::vector<double>& eta) {
    const auto& lv = sp->leaves();
    if (eta.size() != lv.size())
        throw std::invalid_argument("martingale_closure: leaf value count mismatch");
    ScalarAdapted n(sp, 0.0);
    for (std::size_t i = 0; i < lv.size(); ++i) n[lv[i]] = eta[i];
    for (int k = sp->n_steps() - 1; k >= 0; --k)
        for (NodeId id : sp->slice(k)) {
            double acc = 0.0;
            for (NodeId c : sp->node(id).children) acc += sp->node(c).trans_prob * n[c];
            n[id] = acc;
        }
    return n;
}

double step_expectation(const FilteredSpace& sp, NodeId node, const ScalarAdapted& x) {
    double acc = 0.0;
    for (NodeId c : sp.node(node).children) acc += sp.node(c).trans_prob * x[c];
    return acc;
}

double martingale_residual(const ScalarAdapted& x) {
    const FilteredSpace& sp = x.space();
    double worst = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            worst = std::max(worst, std::fabs(step_expectation(sp, id, x) - x[id]));
    return worst;
}

double martingale_residual(const VecAdapted& x) {
    const FilteredSpace& sp = x.space();
    double worst = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            Vec acc(x[id].size());
            for (NodeId c : sp.node(id).children) acc += sp.node(c).trans_prob * x[c];
            acc -= x[id];
            worst = std::max(worst, acc.max_abs());
        }
    return worst;
}

MatAdapted predictable_covariation(const VecAdapted& m_process) {
    const double resid = martingale_residual(m_process);
    if (resid > 1e-10)
        throw std::invalid_argument("predictable_covariation: input is not a martingale "
                                    "(conditional-mean residual " + std::to_string(resid) + ")");
    const FilteredSpace& sp = m_process.space();
    const std::size_t n = m_process[sp.root()].size();
    MatAdapted out(m_process.space_ptr(), Mat(n, n));
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            Mat inc(n, n);
            for (NodeId c : sp.node(id).children)
                inc.add_outer(m_process[c] - m_process[id], sp.node(c).trans_prob);
            for (NodeId c : sp.node(id).children) out[c] = out[id] + inc;
        }
    return out;
}

ScalarAdapted predictable_covariation(const ScalarAdapted& x) {
    const FilteredSpace& sp = x.space();
    ScalarAdapted out(x.space_ptr(), 0.0);
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            double inc = 0.0;
            for (NodeId c : sp.node(id).children) {
                const double d = x[c] - x[id];
                inc += sp.node(c).trans_prob * d * d;
            }
            for (NodeId c : sp.node(id).children) out[c] = out[id] + inc;
        }
    return out;
}

MatAdapted quadratic_covariation(const VecAdapted& m_process) {
    const FilteredSpace& sp = m_process.space();
    const std::size_t n = m_process[sp.root()].size();
    for (int k = 0; k <= sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            if (m_process[id].size() != n)
                throw std::invalid_argument("quadratic_covariation: dimension mismatch");
    MatAdapted out(m_process.space_ptr(), Mat(n, n));
    Mat j0(n, n);
    j0.add_outer(m_process[sp.root()], 1.0);  // time-0 jump, X_{0-} = 0
    out[sp.root()] = j0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children) {
                Mat inc(n, n);
                inc.add_outer(m_process[c] - m_process[id], 1.0);
                out[c] = out[id] + inc;
            }
    return out;
}

ScalarAdapted quadratic_covariation(const ScalarAdapted& x) {
    const FilteredSpace& sp = x.space();
    ScalarAdapted out(x.space_ptr(), 0.0);
    out[sp.root()] = x[sp.root()] * x[sp.root()];
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children) {
                const double d = x[c] - x[id];
                out[c] = out[id] + d * d;
            }
    return out;
}

DualProjection dual_predictable_projection(const ScalarAdapted& d_process) {
    const FilteredSpace& sp = d_process.space();
    DualProjection out;
    out.compensator = ScalarAdapted(d_process.space_ptr(), 0.0);
    out.martingale_part = ScalarAdapted(d_process.space_ptr(), 0.0);
    out.increments = ScalarPredictable(d_process.space_ptr(), 0.0);
    out.compensator[sp.root()] = d_process[sp.root()];
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            double inc = 0.0;
            for (NodeId c : sp.node(id).children)
                inc += sp.node(c).trans_prob * (d_process[c] - d_process[id]);
            out.increments[id] = inc;
            for (NodeId c : sp.node(id).children) {
                out.compensator[c] = out.compensator[id] + inc;
                out.martingale_part[c] = d_process[c] - out.compensator[c];
            }
        }
    return out;
}

double doleans_measure(const ScalarPredictable& indicator, const ScalarAdapted& q_process) {
    const FilteredSpace& sp = indicator.space();
    require_same_space(sp, q_process.space());
    double total = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            for (NodeId c : sp.node(id).children)
                if (q_process[c] - q_process[id] < -1e-14)
                    throw std::invalid_argument("doleans_measure: Q decreasing at node " +
                                                std::to_string(c));
            total += sp.node(id).prob * indicator[id] * dq_at(sp, q_process, id);
        }
    return total;
}

double dq_at(const FilteredSpace& sp, const ScalarAdapted& q_process, NodeId node) {
    return q_process[sp.node(node).children.front()] - q_process[node];
}

double predictable_increment_spread(const ScalarAdapted& q_process) {
    const FilteredSpace& sp = q_process.space();
    double worst = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            double lo = 0.0, hi = 0.0;
            bool first = true;
            for (NodeId c : sp.node(id).children) {
                const double d = q_process[c] - q_process[id];
                if (first) { lo = hi = d; first = false; }
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
            worst = std::max(worst, hi - lo);
        }
    return worst;
}

namespace {

void check_beta(double beta) {
    if (beta < 0.0) throw std::invalid_argument("weighted norms: beta must be nonnegative");
}

}  // namespace

double norm_s2(const ScalarAdapted& y, const ScalarAdapted& q_process, double beta) {
    check_beta(beta);
    const FilteredSpace& sp = y.space();
    // running path max from the root, then average over leaves
    ScalarAdapted run(y.space_ptr(), 0.0);
    const NodeId r = sp.root();
    run[r] = std::exp(beta * q_process[r]) * y[r] * y[r];
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            for (NodeId c : sp.node(id).children)
                run[c] = std::max(run[id], std::exp(beta * q_process[c]) * y[c] * y[c]);
    double acc = 0.0;
    for (NodeId id : sp.leaves()) acc += sp.node(id).prob * run[id];
    return std::sqrt(acc);
}

namespace {

template <class Proc>
double h2_impl(const Proc& x, const ScalarAdapted& q_process, double beta) {
    check_beta(beta);
    const FilteredSpace& sp = x.space();
    double acc = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k))
            acc += sp.node(id).prob * std::exp(beta * q_process[id]) * x[id] * x[id] *
                   dq_at(sp, q_process, id);
    return std::sqrt(acc);
}

}  // namespace

double norm_h2(const ScalarAdapted& x, const ScalarAdapted& q_process, double beta) {
    return h2_impl(x, q_process, beta);
}

double norm_h2(const ScalarPredictable& x, const ScalarAdapted& q_process, double beta) {
    return h2_impl(x, q_process, beta);
}

double norm_l2m(const VecPredictable& z, const ScalarAdapted& q_process,
                const MatPredictable& m_factor, double beta) {
    check_beta(beta);
    const FilteredSpace& sp = z.space();
    double acc = 0.0;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) {
            const Vec mz = m_factor[id].apply(z[id]);
            acc += sp.node(id).prob * std::exp(beta * q_process[id]) * mz.dot(mz) *
                   dq_at(sp, q_process, id);
        }
    return std::sqrt(acc);
}

NormReport weighted_norms(const ScalarAdapted& y, const VecPredictable& z,
                          const ScalarAdapted& q_process, const MatPredictable& m_factor,
                          double beta) {
    NormReport r;
    r.beta = beta;
    r.s2_beta = norm_s2(y, q_process, beta);
    r.h2_beta = norm_h2(y, q_process, beta);
    r.l2m_beta = norm_l2m(z, q_process, m_factor, beta);
    return r;
}

}  // namespace bsdelab
