#ifndef BSDELAB_LINALG_HPP
#define BSDELAB_LINALG_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace bsdelab {

// Dense vector/matrix types for the small dimensions of this project (n <= 6).
// Everything is value-semantic; no external linear algebra dependency.

class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t n, double fill = 0.0) : data_(n, fill) {}
    Vec(std::initializer_list<double> vals) : data_(vals) {}

    static Vec unit(std::size_t n, std::size_t i) {
        Vec e(n);
        e[i] = 1.0;
        return e;
    }

    std::size_t size() const { return data_.size(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    Vec& operator+=(const Vec& o);
    Vec& operator-=(const Vec& o);
    Vec& operator*=(double s);

    double dot(const Vec& o) const;
    double norm() const;
    double max_abs() const;

    // coordinate blocks: first k entries / remaining entries
    Vec head(std::size_t k) const;
    Vec tail_from(std::size_t k) const;
    static Vec concat(const Vec& a, const Vec& b);

    const std::vector<double>& raw() const { return data_; }

private:
    std::vector<double> data_;
};

Vec operator+(Vec a, const Vec& b);
Vec operator-(Vec a, const Vec& b);
Vec operator*(double s, Vec a);

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat identity(std::size_t n);
    static Mat diag(const Vec& d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Mat& operator+=(const Mat& o);
    Mat& operator-=(const Mat& o);
    Mat& operator*=(double s);

    Vec apply(const Vec& x) const;          // A x
    Mat multiply(const Mat& o) const;       // A B
    Mat transposed() const;
    Mat block(std::size_t i0, std::size_t j0, std::size_t r, std::size_t c) const;
    void set_block(std::size_t i0, std::size_t j0, const Mat& b);

    double frobenius() const;
    double max_abs() const;
    bool is_symmetric(double tol = 1e-10) const;

    // rank-one update A += w * x x^T
    void add_outer(const Vec& x, double w);

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(double s, Mat a);

struct SymEig {
    Vec values;    // ascending
    Mat vectors;   // columns are eigenvectors
};

// Cyclic Jacobi sweeps; off-diagonal tolerance 1e-13 (relative to the matrix
// scale). Deterministic and dependency-free, adequate for n <= 6.
SymEig eigensym(const Mat& a, double tol = 1e-13);

// Unique symmetric PSD square root via eigendecomposition.
// Throws std::invalid_argument on non-symmetric input or an eigenvalue below
// -1e-12 (values in [-1e-12, 0) are clamped to 0).
Mat matrix_sqrt_psd(const Mat& a);

// Moore-Penrose inverse of a symmetric PSD matrix; eigenvalues below
// rel_tol * max-eigenvalue are treated as zero.
Mat pinv_psd(const Mat& a, double rel_tol = 1e-12);

// Minimum-norm solution of the PSD system A x = b (A from weighted normal
// equations). Uses the eigen-pseudo-inverse with the same cutoff as pinv_psd.
Vec solve_psd_min_norm(const Mat& a, const Vec& b, double rel_tol = 1e-12);

}  // namespace bsdelab

#endif
