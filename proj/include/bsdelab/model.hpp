#ifndef BSDELAB_MODEL_HPP
#define BSDELAB_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bsdelab/prob.hpp"
#include "bsdelab/process.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

// Which branch at each node carries the jump of a discontinuous component.
// Built by the block-space factory; the "last child of every live node"
// convention can derive it for hand-made trees.
struct JumpLayout {
    enum class Kind { None, Default, Poisson };
    Kind kind = Kind::None;
    std::vector<NodeId> jump_child;        // node-indexed, -1 where no jump branch
    std::vector<std::uint8_t> post_jump;   // node-indexed; 1 strictly after a default

    bool has_jump_branch(NodeId id) const {
        return kind != Kind::None && jump_child[static_cast<std::size_t>(id)] >= 0;
    }
};

// Derive the layout from the "last child is the jump branch" convention.
JumpLayout layout_last_child(const FilteredSpace& sp, JumpLayout::Kind kind);

// An n-dimensional square-integrable martingale together with its
// factorization data: <M> = int m m^* dQ step by step, exactly. The first
// k_continuous components are continuous-type, the rest jump-type; the two
// blocks have vanishing cross covariations.
struct MartingaleModel {
    SpacePtr space;
    int dim = 0;
    int k_continuous = 0;
    VecAdapted paths;          // M, R^n per node
    MatPredictable m_factor;   // symmetric PSD n x n per step
    ScalarAdapted q_process;   // nondecreasing, Q_0 = 0, predictable increments
    double c_q = 0.0;          // recorded bound on Q

    // jump metadata (empty for pure continuous models)
    ScalarPredictable intensity;   // effective per-step intensity, 0 after default
    ScalarAdapted jump_state;      // default indicator 1_{tau<=t}, or Poisson count
    JumpLayout layout;

    double dq(NodeId id) const { return dq_at(*space, q_process, id); }
    Mat m_cont(NodeId id) const {
        return m_factor[id].block(0, 0, static_cast<std::size_t>(k_continuous),
                                  static_cast<std::size_t>(k_continuous));
    }
    Mat m_jump(NodeId id) const {
        const auto nj = static_cast<std::size_t>(dim - k_continuous);
        return m_factor[id].block(static_cast<std::size_t>(k_continuous),
                                  static_cast<std::size_t>(k_continuous), nj, nj);
    }
};

struct ModelDiagnostics {
    double martingale_residual = 0.0;   // max one-step conditional mean of dM
    double eq_factorization = 0.0;      // max | E[dM dM^*] - m m^* dQ |
    double cross_block = 0.0;           // max | E[dM_i dM_j] |, i <= k < j
    double q_increment_spread = 0.0;    // predictability defect of Q
    double q_max = 0.0;
};

ModelDiagnostics validate_model(const MartingaleModel& model);

// --- canonical constructions -------------------------------------------------

// Discrete Brownian stand-in: increments with zero conditional mean and
// conditional covariance (scale^2 dt) I on every step, m = scale*I, Q_t = t.
// When `layout` marks a jump branch, the increments vanish on that child and
// the surviving branches carry a reweighted frame, so cross covariations with
// the jump component are exactly zero. Branching (excluding the jump child)
// must be at least dims+1.
MartingaleModel build_brownian_proxy(SpacePtr space, int dims, double scale,
                                     const JumpLayout* layout = nullptr);

// Compensated single-jump (default) martingale with per-step intensity
// lambda: M_t = 1_{tau<=t} - sum_{steps<=t^tau} p, where p is the jump
// branch's transition probability. Requires |p - lambda dt| <= 1e-9 on every
// live node and lambda dt in (0,1); the recorded intensity is the tree's
// implied p/dt, which keeps every martingale identity exact. m = sqrt(p(1-p)/dt).
MartingaleModel build_default_martingale(SpacePtr space, const std::vector<double>& lambda_per_step,
                                         const JumpLayout* layout = nullptr);

// Compensated Poisson proxy: same one-step algebra, but the jump branch never
// absorbs and jump_state counts the jumps along the path.
MartingaleModel build_poisson_martingale(SpacePtr space, const std::vector<double>& lambda_per_step,
                                         const JumpLayout* layout = nullptr);

// Stack a continuous-type and a jump-type model on the same space into one
// block model (block-diagonal m, k = continuous dimension). Either side may
// be trivial (dim 0). Throws if the cross one-step covariances exceed 1e-10.
MartingaleModel assemble_block_model(const MartingaleModel& cont, const MartingaleModel& jump);

MartingaleModel make_trivial_model(SpacePtr space);

// --- canonical block space ----------------------------------------------------

struct BlockSpaceSpec {
    double T = 1.0;
    int steps = 10;
    int cont_branching = 2;              // survival branches (>= dims+1 for a proxy)
    JumpLayout::Kind jump = JumpLayout::Kind::None;
    std::vector<double> lambda;          // per step, or one entry broadcast
    std::vector<double> time_grid;       // optional explicit grid (overrides T/steps)
    bool randomize_probs = false;        // random positive survival weights
};

struct BlockSpace {
    SpacePtr space;
    JumpLayout layout;
    std::vector<double> lambda_per_step;
};

BlockSpace build_block_space(const BlockSpaceSpec& spec, Rng* rng = nullptr);

// --- martingale representation -------------------------------------------------

struct RepresentationResult {
    VecPredictable integrand;    // Z with dN = Z^* dM on every step
    double residual = 0.0;       // max over nodes/children of |dN - Z^* dM|
    double worst_condition = 1.0;
};

// Per-node weighted least squares on the one-step system; exactly determined
// on canonical (n+1)-branching trees, minimum-norm on richer ones. When
// require_exact is set, throws naming the first node whose system is
// inconsistent beyond `tol` (a genuine representation-property failure).
RepresentationResult represent_martingale(const MartingaleModel& model, const ScalarAdapted& n_process,
                                          bool require_exact = true, double tol = 1e-10);

// One backward-step representation: given centered child targets (zero
// conditional mean), returns Z at `node` with per-child residual tracking.
Vec step_representation(const MartingaleModel& model, NodeId node,
                        const std::vector<double>& centered_child_targets,
                        double* out_residual = nullptr, double* out_condition = nullptr);

inline NormReport weighted_norms(const ScalarAdapted& y, const VecPredictable& z,
                                 const MartingaleModel& model, double beta) {
    return weighted_norms(y, z, model.q_process, model.m_factor, beta);
}

}  // namespace bsdelab

#endif
