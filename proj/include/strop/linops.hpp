#pragma once

#include <cstddef>
#include <vector>

namespace strop {

using Vec = std::vector<double>;

// Dense row-major matrix. Dimensions are fixed at construction and positive.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Mat identity(std::size_t n);

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);

// y = M x and y = M^T x.
Vec matvec(const Mat& m, const Vec& x);
Vec matvec_t(const Mat& m, const Vec& x);

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

double frobenius_norm(const Mat& m);

// Thin QR via Householder reflections: A (r x c, r >= c) = Q R with Q r x c,
// Q^T Q = I, R upper-triangular c x c with nonnegative diagonal (this sign
// convention makes the factorization unique and hence bit-reproducible).
// Throws RankDeficient when any diagonal of R falls below 1e-12 * ||A||_F.
struct QrResult {
    Mat q;
    Mat r;
};
QrResult thin_qr(const Mat& a);

// Singular values from a symmetric Jacobi eigen-decomposition of the smaller
// Gram matrix. Returned in descending order, length min(rows, cols).
Vec singular_values(const Mat& m);
double min_singular_value(const Mat& m);
double max_singular_value(const Mat& m);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
Vec jacobi_eigenvalues(const Mat& s);

// Plumbing.
Vec add_scaled(const Vec& x, double alpha, const Vec& y); // x + alpha * y
void axpy(double alpha, const Vec& x, Vec& y);            // y += alpha * x
void scale(Vec& v, double alpha);
bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

} // namespace strop
