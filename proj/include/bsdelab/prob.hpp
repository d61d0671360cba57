#ifndef BSDELAB_PROB_HPP
#define BSDELAB_PROB_HPP

#include <vector>

#include "bsdelab/process.hpp"

namespace bsdelab {

// --- exact conditional expectation -----------------------------------------

// E[X | G_k] for a variable given on slice j (values aligned with
// space.slice(j)), evaluated on slice k <= j; result aligned with
// space.slice(k). Throws on out-of-range indices.
std::vector<double> conditional_expectation(const FilteredSpace& sp,
                                            const std::vector<double>& values_on_slice_j,
                                            int slice_j, int slice_k);

// Same, reading the slice-j values off an adapted process.
std::vector<double> conditional_expectation(const ScalarAdapted& x, int slice_j, int slice_k);

// Martingale closure E[eta | G_t] for all t, eta given on the leaves
// (aligned with space.leaves()).
ScalarAdapted martingale_closure(const SpacePtr& sp, const std::vector<double>& eta);

// one-step E[ X_{k+1} | node ]
double step_expectation(const FilteredSpace& sp, NodeId node, const ScalarAdapted& x);

// max over non-terminal nodes of | E_node[ dX ] |  (martingale defect)
double martingale_residual(const ScalarAdapted& x);
double martingale_residual(const VecAdapted& x);

// --- covariations -----------------------------------------------------------

// Predictable covariation <M>: accumulated matrix process with <M>_0 = 0 and
// step increment E_node[ dM dM^* ] (identical across the node's children, the
// discrete form of predictability). Requires M to be a martingale: throws if
// the one-step conditional-mean residual exceeds 1e-10.
MatAdapted predictable_covariation(const VecAdapted& m_process);
ScalarAdapted predictable_covariation(const ScalarAdapted& x);

// Quadratic covariation [M]: pathwise sum of increment outer products,
// including the time-0 jump ([M]_0 = M_0 M_0^* under X_{0-} = 0).
MatAdapted quadratic_covariation(const VecAdapted& m_process);
ScalarAdapted quadratic_covariation(const ScalarAdapted& x);

// --- compensators -----------------------------------------------------------

struct DualProjection {
    ScalarAdapted compensator;       // D^p, accumulated, D^p_0 = D_0
    ScalarAdapted martingale_part;   // M^D = D - D^p, zero at the root
    ScalarPredictable increments;    // dD^p per step
};

// Dual predictable projection of an adapted finite-variation process:
// dD^p on (t_k, t_{k+1}] = E_{t_k}[ dD ]. D - D^p is a martingale (exactly,
// up to rounding); a nonincreasing D yields a nonincreasing D^p.
DualProjection dual_predictable_projection(const ScalarAdapted& d_process);

// --- Doleans measure --------------------------------------------------------

// mu_Q(A) = E[ int_0^T 1_A dQ ], A a per-step predictable indicator.
// Throws if Q decreases anywhere.
double doleans_measure(const ScalarPredictable& indicator, const ScalarAdapted& q_process);

// --- weighted norms ----------------------------------------------------------

struct NormReport {
    double beta = 0.0;
    double s2_beta = 0.0;   // sqrt E[ sup_t e^{beta Q_t} Y_t^2 ]
    double h2_beta = 0.0;   // sqrt E[ int e^{beta Q_t} Y_t^2 dQ_t ]
    double l2m_beta = 0.0;  // sqrt E[ int e^{beta Q_t} ||m_t Z_t||^2 dQ_t ]
};

// dQ integrals use left-endpoint evaluation; the sup includes terminal nodes.
double norm_s2(const ScalarAdapted& y, const ScalarAdapted& q_process, double beta);
double norm_h2(const ScalarAdapted& x, const ScalarAdapted& q_process, double beta);
double norm_h2(const ScalarPredictable& x, const ScalarAdapted& q_process, double beta);
double norm_l2m(const VecPredictable& z, const ScalarAdapted& q_process,
                const MatPredictable& m_factor, double beta);

NormReport weighted_norms(const ScalarAdapted& y, const VecPredictable& z,
                          const ScalarAdapted& q_process, const MatPredictable& m_factor,
                          double beta);

// Q increment over the step starting at `node` (first-child convention; the
// model validator checks the increment is the same for every child).
double dq_at(const FilteredSpace& sp, const ScalarAdapted& q_process, NodeId node);

// max spread of Q increments across children (0 for predictable increments)
double predictable_increment_spread(const ScalarAdapted& q_process);

}  // namespace bsdelab

#endif
