#include "bsdelab/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsdelab {

Generator make_zero_generator() {
    return Generator("zero", 0.0, [](const GenContext&, double, const Vec&) { return 0.0; });
}

Generator make_constant_generator(double c) {
    return Generator("constant", 0.0, [c](const GenContext&, double, const Vec&) { return c; });
}

Generator make_discount_generator(double rate) {
    return Generator("discount", std::fabs(rate),
                     [rate](const GenContext&, double y, const Vec&) { return -rate * y; });
}

Generator make_linear_const_generator(double a, double b, const Vec& c, const Vec& d) {
    double zn = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) zn += c[i] * c[i];
    for (std::size_t i = 0; i < d.size(); ++i) zn += d[i] * d[i];
    const double lips = std::max(std::fabs(a), std::sqrt(zn));
    return Generator("linear", lips, [a, b, c, d](const GenContext& ctx, double y, const Vec& z) {
        const Vec mz = ctx.mz(z);
        const int k = ctx.model->k_continuous;
        double acc = a * y + b;
        for (std::size_t j = 0; j < c.size(); ++j) acc += c[j] * mz[j];
        for (std::size_t j = 0; j < d.size(); ++j) acc += d[j] * mz[static_cast<std::size_t>(k) + j];
        return acc;
    });
}

Generator make_lambda_admissible_generator(double a, double bw, double cj, int k_continuous,
                                           int dim) {
    const double zn = std::sqrt(k_continuous * bw * bw + (dim - k_continuous) * cj * cj);
    const double lips = std::max(std::fabs(a), zn);
    return Generator("lambda_admissible", lips,
                     [a, bw, cj, k_continuous, dim](const GenContext& ctx, double y, const Vec& z) {
                         const Vec mz = ctx.mz(z);
                         double acc = a * y;
                         for (int j = 0; j < k_continuous; ++j)
                             acc += bw * mz[static_cast<std::size_t>(j)];
                         for (int j = k_continuous; j < dim; ++j)
                             acc += cj * mz[static_cast<std::size_t>(j)];
                         return acc;
                     });
}

Generator make_custom_polynomial_generator(const std::vector<double>& y_coeffs,
                                           const Vec& z_coeffs, double clamp) {
    if (!(clamp > 0.0)) throw std::invalid_argument("custom_polynomial: clamp must be positive");
    double y_slope = 0.0;
    for (std::size_t i = 1; i < y_coeffs.size(); ++i)
        y_slope += static_cast<double>(i) * std::fabs(y_coeffs[i]) *
                   std::pow(clamp, static_cast<double>(i - 1));
    const double lips = std::max(y_slope, z_coeffs.norm());
    return Generator("custom_polynomial", lips,
                     [y_coeffs, z_coeffs, clamp](const GenContext& ctx, double y, const Vec& z) {
                         const double yc = std::clamp(y, -clamp, clamp);
                         double acc = 0.0;
                         double pw = 1.0;
                         for (double coeff : y_coeffs) {
                             acc += coeff * pw;
                             pw *= yc;
                         }
                         const Vec mz = ctx.mz(z);
                         for (std::size_t j = 0; j < z_coeffs.size(); ++j) acc += z_coeffs[j] * mz[j];
                         return acc;
                     });
}

}  // namespace bsdelab
