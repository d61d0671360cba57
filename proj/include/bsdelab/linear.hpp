#ifndef BSDELAB_LINEAR_HPP
#define BSDELAB_LINEAR_HPP

#include <vector>

#include "bsdelab/bsde.hpp"

namespace bsdelab {

// Coefficients of the linear driver g(t,y,z) = a y + b + c.(m^c z^c) + d.(m^d z^d).
struct LinearCoefficients {
    ScalarPredictable a;
    ScalarPredictable b;
    VecPredictable c;   // R^k per step
    VecPredictable d;   // R^{n-k} per step
    double sup_a = 0.0, sup_c = 0.0, sup_d = 0.0;  // recorded bounds
};

LinearCoefficients make_constant_coefficients(const MartingaleModel& model, double a, double b,
                                              const Vec& c, const Vec& d);
LinearCoefficients make_coefficients(const MartingaleModel& model, ScalarPredictable a,
                                     ScalarPredictable b, VecPredictable c, VecPredictable d);

// The assembled linear generator; declared Lipschitz max(sup|a|, sup||(c,d)||).
Generator generator_from_coefficients(const LinearCoefficients& coeffs);

// Discrete Doleans exponential: E_0 = 1 + X_0, dE = E_- dX exactly, i.e. the
// running product of (1 + dX). The continuum form exp(X - <X^c>/2) prod(...)
// is its refinement limit.
ScalarAdapted stochastic_exponential(const ScalarAdapted& x);

// The weight q, the drift/martingale integrators behind it, and the
// adjustment functional A = int q_- dD + <q, D>.
//
// The backward solver resolves the implicit left-endpoint equation, so the
// discrete q that reproduces it *exactly* has one-step factor
//     q_child / q_node = (1 + dMhat) / (1 - a dQ),
// the implicit-drift counterpart of E(Qhat + Mhat); both coincide in the
// refinement limit and the discrepancy between the two explicit discrete
// forms E(Qhat)E(Mhat) and E(Qhat+Mhat) is reported below. dQ-integrands
// against q use q_bar = E_node[q_child] = q/(1 - a dQ).
struct ExponentialBundle {
    ScalarAdapted q_hat;          // int a dQ
    ScalarAdapted m_hat;          // int c* inv(m^c) dM^c + d* inv(m^d) dM^d
    ScalarAdapted q;              // implicit-drift exponential, q_0 = 1
    ScalarPredictable q_bar;      // E_node[q_child]
    ScalarAdapted a_process;      // A, with A_0 = 0
    double min_jump = 0.0;        // min over steps of dMhat
    double min_factor = 1.0;      // min one-step factor of q
    bool q_positive = true;       // min_factor > 0 <=> min_jump > -1 (given a dQ < 1)
    double split_discrepancy = 0.0;     // E| E(Qhat)E(Mhat) - E(Qhat+Mhat) | at T
    double implicit_discrepancy = 0.0;  // E| q - E(Qhat+Mhat) | at T
};

// Throws when a dQ >= 1 somewhere (step too coarse for the implicit drift)
// or when a blockwise inverse of m is demanded with a nonvanishing increment.
ExponentialBundle build_exponential_bundle(const MartingaleModel& model,
                                           const LinearCoefficients& coeffs,
                                           const ScalarAdapted& d_process);

struct LinearClosedForm {
    ExponentialBundle bundle;
    ScalarAdapted q_weighted;   // the process q Y from the conditional-expectation identity
    bool gamma_form = false;    // q > 0 everywhere, so Y = (qY)/q is available
    Solution solution;          // populated iff gamma_form
};

// Explicit representation of the unique linear solution:
//   q_t Y_t = E[ q_T eta + int_t^T q_bar b dQ - (A_T - A_t) | G_t ].
// With require_gamma, refuses loudly when q hits zero instead of dividing.
LinearClosedForm linear_solution(const MartingaleModel& model, const LinearCoefficients& coeffs,
                                 const std::vector<double>& eta, const ScalarAdapted& d_process,
                                 bool require_gamma = true);

// Independent evaluation of the same conditional expectation by direct
// subtree enumeration (no backward recursion); used as a dual route in tests.
double closed_form_value_at(const MartingaleModel& model, const ExponentialBundle& bundle,
                            const LinearCoefficients& coeffs, const std::vector<double>& eta,
                            const ScalarAdapted& d_process, NodeId node);

struct LemmaCheck {
    double residual = 0.0;   // worst one-step conditional-mean defect of M~
    NodeId worst_node = -1;  // parent node where the defect peaks
    double sup_abs = 0.0;    // E[ sup |M~| ], the integrability surrogate
};

// M~_t = q_t Y_t - A_t + int_0^t q_bar b dQ must be a martingale.
LemmaCheck lemma51_martingale_check(const MartingaleModel& model, const ExponentialBundle& bundle,
                                    const ScalarAdapted& y, const ScalarPredictable& b);

struct SupermartingaleCheck {
    double max_conditional_mean = 0.0;   // max E_node[dA]; <= 0 under the hypotheses
    double phi_p_max_increment = 0.0;    // max increment of Phi^p
    double compensated_residual = 0.0;   // martingale defect of A - Phi^p
};

// The objects behind the comparison proof: Phi^p nonincreasing and A - Phi^p
// a martingale whenever D is nonincreasing and q stays positive.
SupermartingaleCheck supermartingale_check(const MartingaleModel& model,
                                           const ExponentialBundle& bundle,
                                           const ScalarAdapted& d_process);

}  // namespace bsdelab

#endif
