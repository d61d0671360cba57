#ifndef BSDELAB_FACTORIES_HPP
#define BSDELAB_FACTORIES_HPP

#include "bsdelab/comparison.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

// Seeded construction of models/problems for randomized sweeps. Canonical
// trees carry dims+1 surviving branches (plus one jump branch when a jump
// component is present), which is exactly the rank the representation
// property needs, so arbitrary square-integrable terminal values are
// representable. Pure-default trees are the one exception: after the default
// the tree keeps branching but the martingale is silent, so terminal values
// are drawn as functions of the default time there.

struct RandomModelSpec {
    int min_depth = 4;
    int max_depth = 8;
    int max_cont_dims = 2;
    bool allow_jump = true;
    bool allow_pure_jump = true;
    double T = 1.0;
    std::size_t node_budget = 60000;
};

struct RandomModel {
    BlockSpace block;
    MartingaleModel model;
};

RandomModel make_random_model(Rng& rng, const RandomModelSpec& spec = {});

std::vector<double> make_random_eta(Rng& rng, const MartingaleModel& model, double amplitude);

enum class AdjustmentKind { Zero, FiniteVariation, Nonincreasing };

// Adapted finite-variation process with seeded increments. On a pure-default
// model the post-default subtree carries no new information, so increments
// there are shared across siblings (anything finer would not be measurable
// w.r.t. the filtration the martingale generates, and the equation would have
// no pathwise solution).
ScalarAdapted make_random_adjustment(Rng& rng, const MartingaleModel& model, AdjustmentKind kind,
                                     double amplitude);

// Predictable scalar offset, measurable for the model's filtration (on a
// pure-default model it depends only on time and the default time).
ScalarPredictable make_random_offset(Rng& rng, const MartingaleModel& model, double lo, double hi);

// Random m-Lipschitz driver with declared constant <= lipschitz_cap; mixes
// affine terms in (y, m z) with an occasional clamped quadratic in y.
// jump_slope=false suppresses any dependence on the jump coordinates of z.
Generator make_random_generator(Rng& rng, const MartingaleModel& model, double lipschitz_cap,
                                bool jump_slope = true);

struct RandomProblemSpec {
    RandomModelSpec model;
    double lipschitz_cap = 0.8;
    double eta_amplitude = 1.0;
    AdjustmentKind adjustment = AdjustmentKind::FiniteVariation;
    bool jump_slope = true;
};

BSDEProblem make_random_problem(Rng& rng, const RandomProblemSpec& spec = {});

// --- comparison scenarios ------------------------------------------------------

struct ComparisonScenario {
    BSDEProblem p1;
    BSDEProblem p2;
    ZetaSpec zeta;
};

// Hypothesis-satisfying pair by construction: g1 = g2 + s with s >= 0
// predictable, g2 free of jump slopes, eta1 >= eta2, D1 - D2 nonincreasing.
ComparisonScenario make_ordered_scenario(Rng& rng, const RandomModelSpec& spec = {});

// Single-default scenario with the intensity-weighted jump slope psi lambda,
// zeta = psi sqrt(lambda): condition (iv) holds with equality in the jump
// term and b reduces to the nonnegative drift offset.
ComparisonScenario make_single_default_scenario(Rng& rng, double psi, int steps = 8);

// Equal problems up to a constant shift of D: solutions coincide everywhere,
// the strict-comparison equality case.
ComparisonScenario make_equality_scenario(Rng& rng, const RandomModelSpec& spec = {});

// eta1 = eta2 + eps on a single positive-probability leaf: the strict case's
// precondition must fail through Y1_0 > Y2_0.
ComparisonScenario make_leaf_gap_scenario(Rng& rng, double eps, const RandomModelSpec& spec = {});

// --- linear problems ------------------------------------------------------------

struct RandomLinearProblem {
    RandomModel rm;
    LinearCoefficients coeffs;
    std::vector<double> eta;
    ScalarAdapted adjustment;
};

RandomLinearProblem make_random_linear_problem(Rng& rng, const RandomModelSpec& spec = {},
                                               double coeff_cap = 0.8);

}  // namespace bsdelab

#endif
