#ifndef BSDELAB_GENERATOR_HPP
#define BSDELAB_GENERATOR_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bsdelab/model.hpp"

namespace bsdelab {

// Evaluation context handed to a generator at the left endpoint of a step.
struct GenContext {
    const MartingaleModel* model = nullptr;
    NodeId node = 0;

    double t() const { return model->space->time_of(node); }
    int time_idx() const { return model->space->node(node).time_idx; }
    // z mapped through the factor m (block-diagonal), the natural coordinates
    // for m-Lipschitz drivers
    Vec mz(const Vec& z) const { return model->m_factor[node].apply(z); }
    double lambda() const { return model->intensity.empty() ? 0.0 : model->intensity[node]; }
};

// Driver g(omega, t, y, z). Deterministic per (node, y, z); the declared
// m-Lipschitz constant is the solver's contraction budget and is checked by
// verify_m_lipschitz against sampled difference quotients.
class Generator {
public:
    using Fn = std::function<double(const GenContext&, double, const Vec&)>;

    Generator() = default;
    Generator(std::string name, double declared_lipschitz, Fn fn)
        : name_(std::move(name)), lipschitz_(declared_lipschitz), fn_(std::move(fn)) {}

    double operator()(const GenContext& ctx, double y, const Vec& z) const {
        return fn_(ctx, y, z);
    }
    double at_zero(const GenContext& ctx) const {
        return fn_(ctx, 0.0, Vec(static_cast<std::size_t>(ctx.model->dim)));
    }

    const std::string& name() const { return name_; }
    double declared_lipschitz() const { return lipschitz_; }
    bool valid() const { return static_cast<bool>(fn_); }

private:
    std::string name_;
    double lipschitz_ = 0.0;
    Fn fn_;
};

Generator make_zero_generator();
Generator make_constant_generator(double c);

// g = -rate * y
Generator make_discount_generator(double rate);

// g = a y + b + c . (m z)_cont + d . (m z)_jump  with constant coefficients
Generator make_linear_const_generator(double a, double b, const Vec& c, const Vec& d);

// Intensity-weighted driver: the jump slope runs through m^d (so it scales
// like sqrt(lambda) in the continuum), the classical single-default form.
// g = a y + bw * sum (m z)_cont + cj * sum (m z)_jump
Generator make_lambda_admissible_generator(double a, double bw, double cj, int k_continuous,
                                           int dim);

// Polynomial in y (evaluated on y clamped to [-clamp, clamp], which keeps the
// driver uniformly m-Lipschitz) plus a linear term in the (m z) coordinates.
Generator make_custom_polynomial_generator(const std::vector<double>& y_coeffs,
                                           const Vec& z_coeffs, double clamp);

}  // namespace bsdelab

#endif
