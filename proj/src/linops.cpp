#include "strop/linops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "strop/errors.hpp"

namespace strop {

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw InvalidDimensions("matrix dimensions must be positive, got " +
                                std::to_string(rows) + " x " + std::to_string(cols));
    }
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("dot: lengths " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

Vec matvec(const Mat& m, const Vec& x) {
    if (x.size() != m.cols()) {
        throw DimensionMismatch("matvec: matrix cols " + std::to_string(m.cols()) +
                                " vs vector length " + std::to_string(x.size()));
    }
    Vec y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vec matvec_t(const Mat& m, const Vec& x) {
    if (x.size() != m.rows()) {
        throw DimensionMismatch("matvec_t: matrix rows " + std::to_string(m.rows()) +
                                " vs vector length " + std::to_string(x.size()));
    }
    Vec y(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += xi * r[j];
    }
    return y;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) {
        throw DimensionMismatch("matmul: inner dimensions " + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()));
    }
    Mat c(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (std::size_t l = 0; l < a.cols(); ++l) {
            const double ail = ar[l];
            const double* br = b.row(l);
            for (std::size_t j = 0; j < b.cols(); ++j) cr[j] += ail * br[j];
        }
    }
    return c;
}

Mat transpose(const Mat& m) {
    Mat t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
}

QrResult thin_qr(const Mat& a) {
    const std::size_t r = a.rows();
    const std::size_t c = a.cols();
    if (r < c) {
        throw DimensionMismatch("thin_qr: need rows >= cols, got " + std::to_string(r) +
                                " x " + std::to_string(c));
    }
    const double rank_tol = 1e-12 * frobenius_norm(a);

    Mat w = a; // working copy, reduced in place
    // Householder vectors; v[j] has length r - j.
    std::vector<Vec> vs(c);

    for (std::size_t j = 0; j < c; ++j) {
        double sigma = 0.0;
        for (std::size_t i = j; i < r; ++i) sigma += w(i, j) * w(i, j);
        sigma = std::sqrt(sigma);
        if (sigma == 0.0 || sigma < rank_tol) {
            throw RankDeficient("thin_qr: column " + std::to_string(j) +
                                " has pivot " + std::to_string(sigma) +
                                " below tolerance");
        }
        // alpha opposite in sign to the pivot avoids cancellation in v[0].
        const double alpha = (w(j, j) >= 0.0) ? -sigma : sigma;
        Vec v(r - j);
        v[0] = w(j, j) - alpha;
        for (std::size_t i = j + 1; i < r; ++i) v[i - j] = w(i, j);
        double vtv = 0.0;
        for (double e : v) vtv += e * e;

        // Apply I - 2 v v^T / (v^T v) to the trailing block.
        for (std::size_t q = j; q < c; ++q) {
            double s = 0.0;
            for (std::size_t i = j; i < r; ++i) s += v[i - j] * w(i, q);
            const double f = 2.0 * s / vtv;
            for (std::size_t i = j; i < r; ++i) w(i, q) -= f * v[i - j];
        }
        w(j, j) = alpha; // exact value; the loop above leaves rounding noise
        for (std::size_t i = j + 1; i < r; ++i) w(i, j) = 0.0;
        vs[j] = std::move(v);
    }

    Mat rr(c, c, 0.0);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = i; j < c; ++j) rr(i, j) = w(i, j);

    // Q = H_0 ... H_{c-1} applied to the first c columns of the identity.
    Mat q(r, c, 0.0);
    for (std::size_t j = 0; j < c; ++j) q(j, j) = 1.0;
    for (std::size_t j = c; j-- > 0;) {
        const Vec& v = vs[j];
        double vtv = 0.0;
        for (double e : v) vtv += e * e;
        for (std::size_t col = 0; col < c; ++col) {
            double s = 0.0;
            for (std::size_t i = j; i < r; ++i) s += v[i - j] * q(i, col);
            const double f = 2.0 * s / vtv;
            for (std::size_t i = j; i < r; ++i) q(i, col) -= f * v[i - j];
        }
    }

    // Fix signs so diag(R) >= 0; the factorization becomes unique.
    for (std::size_t j = 0; j < c; ++j) {
        if (rr(j, j) < 0.0) {
            for (std::size_t q2 = j; q2 < c; ++q2) rr(j, q2) = -rr(j, q2);
            for (std::size_t i = 0; i < r; ++i) q(i, j) = -q(i, j);
        }
    }
    return {std::move(q), std::move(rr)};
}

Vec jacobi_eigenvalues(const Mat& s_in) {
    if (s_in.rows() != s_in.cols()) {
        throw DimensionMismatch("jacobi_eigenvalues: matrix must be square");
    }
    const std::size_t n = s_in.rows();
    Mat s = s_in;
    if (n == 1) return {s(0, 0)};

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        double diag = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            diag += std::abs(s(p, p));
            for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        }
        off = std::sqrt(2.0 * off);
        if (off <= 1e-15 * std::max(diag, 1e-300)) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double spq = s(p, q);
                if (spq == 0.0) continue;
                const double theta = (s(q, q) - s(p, p)) / (2.0 * spq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(theta * theta + 1.0))
                                     : 1.0 / (theta - std::sqrt(theta * theta + 1.0));
                const double cth = 1.0 / std::sqrt(t * t + 1.0);
                const double sth = t * cth;
                // Rotate rows/columns p and q.
                for (std::size_t i = 0; i < n; ++i) {
                    const double sip = s(i, p);
                    const double siq = s(i, q);
                    s(i, p) = cth * sip - sth * siq;
                    s(i, q) = sth * sip + cth * siq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double spi = s(p, i);
                    const double sqi = s(q, i);
                    s(p, i) = cth * spi - sth * sqi;
                    s(q, i) = sth * spi + cth * sqi;
                }
            }
        }
    }
    Vec eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = s(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

Vec singular_values(const Mat& m) {
    // Gram matrix on the smaller side keeps the eigenproblem small.
    const bool tall = m.rows() >= m.cols();
    const std::size_t n = tall ? m.cols() : m.rows();
    Mat g(n, n, 0.0);
    if (tall) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < m.rows(); ++l) s += m(l, i) * m(l, j);
                g(i, j) = s;
                g(j, i) = s;
            }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double s = 0.0;
                const double* ri = m.row(i);
                const double* rj = m.row(j);
                for (std::size_t l = 0; l < m.cols(); ++l) s += ri[l] * rj[l];
                g(i, j) = s;
                g(j, i) = s;
            }
    }
    Vec eig = jacobi_eigenvalues(g);
    Vec sv(n);
    for (std::size_t i = 0; i < n; ++i) {
        sv[i] = std::sqrt(std::max(eig[n - 1 - i], 0.0));
    }
    return sv; // descending
}

double min_singular_value(const Mat& m) { return singular_values(m).back(); }

double max_singular_value(const Mat& m) { return singular_values(m).front(); }

Vec add_scaled(const Vec& x, double alpha, const Vec& y) {
    if (x.size() != y.size()) {
        throw DimensionMismatch("add_scaled: lengths " + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()));
    }
    Vec z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + alpha * y[i];
    return z;
}

void axpy(double alpha, const Vec& x, Vec& y) {
    if (x.size() != y.size()) {
        throw DimensionMismatch("axpy: lengths " + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(Vec& v, double alpha) {
    for (double& e : v) e *= alpha;
}

bool all_finite(const Vec& v) {
    for (double e : v)
        if (!std::isfinite(e)) return false;
    return true;
}

bool all_finite(const Mat& m) {
    for (double e : m.data())
        if (!std::isfinite(e)) return false;
    return true;
}

} // namespace strop
