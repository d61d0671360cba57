#include "bsdelab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bsdelab {

Vec& Vec::operator+=(const Vec& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o[i];
    return *this;
}

Vec& Vec::operator-=(const Vec& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o[i];
    return *this;
}

Vec& Vec::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

double Vec::dot(const Vec& o) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * o[i];
    return acc;
}

double Vec::norm() const { return std::sqrt(dot(*this)); }

double Vec::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

Vec Vec::head(std::size_t k) const {
    Vec h(k);
    for (std::size_t i = 0; i < k; ++i) h[i] = data_[i];
    return h;
}

Vec Vec::tail_from(std::size_t k) const {
    Vec t(data_.size() - k);
    for (std::size_t i = k; i < data_.size(); ++i) t[i - k] = data_[i];
    return t;
}

Vec Vec::concat(const Vec& a, const Vec& b) {
    Vec r(a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) r[a.size() + i] = b[i];
    return r;
}

Vec operator+(Vec a, const Vec& b) { return a += b; }
Vec operator-(Vec a, const Vec& b) { return a -= b; }
Vec operator*(double s, Vec a) { return a *= s; }

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::diag(const Vec& d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Mat& Mat::operator+=(const Mat& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Mat& Mat::operator-=(const Mat& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Mat& Mat::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Vec Mat::apply(const Vec& x) const {
    Vec y(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

Mat Mat::multiply(const Mat& o) const {
    Mat r(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += a * o(k, j);
        }
    return r;
}

Mat Mat::transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Mat Mat::block(std::size_t i0, std::size_t j0, std::size_t r, std::size_t c) const {
    Mat b(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
    return b;
}

void Mat::set_block(std::size_t i0, std::size_t j0, const Mat& b) {
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) (*this)(i0 + i, j0 + j) = b(i, j);
}

double Mat::frobenius() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

double Mat::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

bool Mat::is_symmetric(double tol) const {
    if (rows_ != cols_) return false;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            if (std::fabs((*this)(i, j) - (*this)(j, i)) > tol * (1.0 + max_abs())) return false;
    return true;
}

void Mat::add_outer(const Vec& x, double w) {
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) (*this)(i, j) += w * x[i] * x[j];
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator*(double s, Mat a) { return a *= s; }

namespace {

double offdiag_norm(const Mat& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) acc += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(acc);
}

}  // namespace

SymEig eigensym(const Mat& a_in, double tol) {
    const std::size_t n = a_in.rows();
    if (n != a_in.cols()) throw std::invalid_argument("eigensym: matrix not square");
    Mat a = a_in;
    Mat v = Mat::identity(n);
    const double scale = std::max(1.0, a.max_abs());

    for (int sweep = 0; sweep < 100 && offdiag_norm(a) > tol * scale; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= tol * scale * 1e-3) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double apj = a(p, j), aqj = a(q, j);
                    a(p, j) = c * apj - s * aqj;
                    a(q, j) = s * apj + c * aqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymEig out;
    out.values = Vec(n);
    out.vectors = Mat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

Mat matrix_sqrt_psd(const Mat& a) {
    if (!a.is_symmetric(1e-10)) throw std::invalid_argument("matrix_sqrt_psd: non-symmetric input");
    SymEig eig = eigensym(a);
    const std::size_t n = a.rows();
    const double scale = std::max(1.0, a.max_abs());
    Vec lam(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ev = eig.values[i];
        if (ev < -1e-12 * scale)
            throw std::invalid_argument("matrix_sqrt_psd: eigenvalue below -1e-12");
        lam[i] = std::sqrt(std::max(ev, 0.0));
    }
    Mat r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                acc += eig.vectors(i, k) * lam[k] * eig.vectors(j, k);
            r(i, j) = acc;
        }
    // symmetrize away rounding
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (r(i, j) + r(j, i));
            r(i, j) = r(j, i) = m;
        }
    return r;
}

Mat pinv_psd(const Mat& a, double rel_tol) {
    const std::size_t n = a.rows();
    if (n == 0) return Mat(0, 0);
    SymEig eig = eigensym(a);
    const double cutoff = rel_tol * std::max(1e-300, eig.values[n - 1]);
    Mat r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double ev = eig.values[k];
                if (ev > cutoff) acc += eig.vectors(i, k) * (1.0 / ev) * eig.vectors(j, k);
            }
            r(i, j) = acc;
        }
    return r;
}

Vec solve_psd_min_norm(const Mat& a, const Vec& b, double rel_tol) {
    return pinv_psd(a, rel_tol).apply(b);
}

}  // namespace bsdelab
