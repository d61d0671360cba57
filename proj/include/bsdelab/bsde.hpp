#ifndef BSDELAB_BSDE_HPP
#define BSDELAB_BSDE_HPP

#include <cstdint>
#include <vector>

#include "bsdelab/generator.hpp"
#include "bsdelab/model.hpp"

namespace bsdelab {

// The data triplet (g, eta, D): driver, terminal value on the leaves
// (aligned with space.leaves()), and the adapted adjustment process D.
struct BSDEProblem {
    MartingaleModel model;
    Generator generator;
    std::vector<double> eta;
    ScalarAdapted adjustment;
};

BSDEProblem make_problem(MartingaleModel model, Generator generator, std::vector<double> eta);
BSDEProblem make_problem(MartingaleModel model, Generator generator, std::vector<double> eta,
                         ScalarAdapted adjustment);

struct Solution {
    ScalarAdapted y;
    VecPredictable z;
    double pathwise_residual = 0.0;  // worst one-step defect of the backward identity
    NormReport norms;                // beta = 0 norms of (Y, Z)
};

struct SolverOptions {
    double tol = 1e-12;    // inner fixed-point tolerance
    int max_inner = 200;
    double damping = 1.0;  // halved adaptively if the inner map misbehaves
};

// Exact backward recursion: per slice, Z from the one-step representation
// system and Y from the implicit left-endpoint equation
//   y = E_k[Y_{k+1}] - E_k[dD] + g(t_k, y, z) dQ_k,
// solved by (damped) fixed-point iteration, a contraction when L dQ < 1.
// Refuses with guidance when declared_lipschitz * max dQ >= 1.
Solution solve_backward_exact(const BSDEProblem& problem, const SolverOptions& opts = {});

// The D-shift of the problem: data (g~, eta~, 0) with g~(t,y,z) = g(t,y+D_t,z)
// and eta~ = eta - D_T. Solutions map back via (Y, Z) = (Y~ + D, Z~).
BSDEProblem transform_shift(const BSDEProblem& problem);

// One application of the Picard map Psi to a frozen pair (w, v): solves the
// decoupled equation with driver g_t := g(t, w_t, v_t) through the martingale
// closure of eta + int g dQ and the representation of that martingale.
// Expects a shifted problem (D identically 0).
Solution picard_map(const BSDEProblem& problem, const ScalarAdapted& w, const VecPredictable& v);

struct PicardTrace {
    double beta = 0.0;
    // ||(y^i - y^{i-1}, z^i - z^{i-1})||_beta per iteration (norms, not squares)
    std::vector<double> delta_norms;
    // squared-norm ratios of successive differences, the quantity the
    // contraction estimate bounds; the loosest constant is asserted one-sided
    std::vector<double> ratios_sq;
    double theoretical_bound = 0.0;  // 1158 * beta^-1 * L^2 * (C_Q + 1)
    bool converged = false;
    int iterations = 0;
    bool bound_respected = true;     // vacuously true when the bound is >= 1
};

struct PicardResult {
    Solution solution;
    PicardTrace trace;
};

// Iterates Psi from (0,0) on the shifted problem until the beta-weighted
// difference norm drops below tol, then maps back through the D-shift.
// Non-convergence is reported in the trace, never silent.
PicardResult picard_iterate(const BSDEProblem& problem, double beta, int max_iters, double tol);

// --- m-Lipschitz verification -------------------------------------------------

struct LipschitzReport {
    double estimate = 0.0;  // max sampled difference quotient (a lower bound)
    double declared = 0.0;
    bool violated = false;  // estimate exceeds declared by more than 1e-9
};

// Samples (node, y1, y2, z1, z2) tuples, including y-only and single
// z-coordinate variations so linear slopes are recovered exactly.
LipschitzReport verify_m_lipschitz(const Generator& g, const MartingaleModel& model, int samples,
                                   std::uint64_t seed);

// --- a priori estimate (stability of solutions in the data) -------------------

struct AprioriReport {
    double lhs = 0.0;        // ||y - D||_S2^2 + ||y||_H2^2 + ||z||_L2(M)^2
    double j_value = 0.0;    // ||eta - D_T||^2 + ||D||_H2^2 + ||(g1-g2)(Y2,Z2)||_H2^2
    double beta = 0.0;       // 2 L1 + 2 L1^2 + 2
    double constant = 0.0;   // 8 e^{beta C_Q}
    double ratio = 0.0;      // lhs / (constant * j), 0 when j = 0
    bool pass = false;
};

AprioriReport apriori_check(const BSDEProblem& p1, const BSDEProblem& p2, const Solution& s1,
                            const Solution& s2);

struct StabilityReport {
    double eps = 0.0;
    double gap = 0.0;       // |Y1_0 - Y2_0| for eta2 = eta1 + eps
    double bound = 0.0;     // constant * eps
    bool pass = false;
};

StabilityReport stability_check(const BSDEProblem& problem, double eps,
                                const SolverOptions& opts = {});

}  // namespace bsdelab

#endif
