#include "strop/problems.hpp"

#include <cmath>
#include <string>

#include "strop/errors.hpp"
#include "strop/rng.hpp"

namespace strop {

void FiniteSumProblem::check_index(std::size_t i) const {
    if (i >= sample_count()) {
        throw IndexOutOfRange("sample index " + std::to_string(i) + " out of range [0, " +
                              std::to_string(sample_count()) + ")");
    }
}

double FiniteSumProblem::value(const Vec& x) const {
    double s = 0.0;
    const std::size_t n = sample_count();
    for (std::size_t i = 0; i < n; ++i) s += sample_value(i, x);
    return s / static_cast<double>(n);
}

Vec FiniteSumProblem::gradient(const Vec& x) const {
    const std::size_t n = sample_count();
    Vec g(dim(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        Vec gi = sample_gradient(i, x);
        axpy(1.0, gi, g);
    }
    scale(g, 1.0 / static_cast<double>(n));
    return g;
}

Vec ConstraintMap::jac_vec(const Vec& x, const Vec& v) const {
    return matvec(jacobian(x), v);
}

Vec ConstraintMap::jac_tvec(const Vec& x, const Vec& y) const {
    return matvec_t(jacobian(x), y);
}

InterpolatingLeastSquares::InterpolatingLeastSquares(Mat a, Vec b, Vec x_star)
    : a_(std::move(a)), b_(std::move(b)), x_star_(std::move(x_star)) {
    if (b_.size() != a_.rows() || x_star_.size() != a_.cols()) {
        throw DimensionMismatch("least squares: inconsistent shapes");
    }
    row_sq_norms_.resize(a_.rows());
    for (std::size_t i = 0; i < a_.rows(); ++i) {
        const double* r = a_.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a_.cols(); ++j) s += r[j] * r[j];
        row_sq_norms_[i] = s;
    }
}

double InterpolatingLeastSquares::residual(std::size_t i, const Vec& x) const {
    check_index(i);
    if (x.size() != dim()) {
        throw DimensionMismatch("least squares: point length " + std::to_string(x.size()) +
                                " vs dim " + std::to_string(dim()));
    }
    const double* r = a_.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += r[j] * x[j];
    return s - b_[i];
}

double InterpolatingLeastSquares::sample_value(std::size_t i, const Vec& x) const {
    const double res = residual(i, x);
    return 0.5 * res * res;
}

Vec InterpolatingLeastSquares::sample_gradient(std::size_t i, const Vec& x) const {
    const double res = residual(i, x);
    Vec g(dim());
    const double* r = a_.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = res * r[j];
    return g;
}

InterpolatingLeastSquares make_interpolating_least_squares(std::size_t n, std::size_t d,
                                                           std::uint64_t seed) {
    if (d <= n) {
        throw InvalidDimensions("interpolating least squares needs d > n, got n = " +
                                std::to_string(n) + ", d = " + std::to_string(d));
    }
    if (n == 0) {
        throw InvalidDimensions("interpolating least squares needs n >= 1");
    }
    CounterRng rng(seed, RngStream::data);
    Mat a(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.next_gaussian();
    Vec x_star(d);
    for (std::size_t j = 0; j < d; ++j) x_star[j] = rng.next_gaussian();
    Vec b = matvec(a, x_star);
    return InterpolatingLeastSquares(std::move(a), std::move(b), std::move(x_star));
}

void SpikedDataSpec::validate() const {
    if (d == 0 || k == 0 || n == 0) {
        throw InvalidDimensions("spiked data: d, k, n must be positive");
    }
    if (k >= d) {
        throw InvalidDimensions("spiked data: need k < d, got k = " + std::to_string(k) +
                                ", d = " + std::to_string(d));
    }
    if (!(noise_sigma >= 0.0)) {
        throw InvalidDimensions("spiked data: noise_sigma must be >= 0");
    }
}

Mat spiked_data(const SpikedDataSpec& spec) {
    spec.validate();
    CounterRng rng(spec.seed, RngStream::data);

    Mat g(spec.d, spec.k);
    for (std::size_t i = 0; i < spec.d; ++i)
        for (std::size_t j = 0; j < spec.k; ++j) g(i, j) = rng.next_gaussian();
    Mat u = thin_qr(g).q;

    Mat z(spec.k, spec.n);
    for (std::size_t i = 0; i < spec.k; ++i)
        for (std::size_t j = 0; j < spec.n; ++j) z(i, j) = rng.next_gaussian();

    Mat x = matmul(u, z);
    if (spec.noise_sigma > 0.0) {
        for (std::size_t i = 0; i < spec.d; ++i)
            for (std::size_t j = 0; j < spec.n; ++j)
                x(i, j) += spec.noise_sigma * rng.next_gaussian();
    }
    return x;
}

SubspaceObjective::SubspaceObjective(const Mat& x_data, std::size_t k)
    : d_(x_data.rows()), k_(k) {
    if (k == 0 || k >= d_) {
        throw InvalidDimensions("subspace objective: need 1 <= k < d");
    }
    if (x_data.cols() == 0) {
        throw InvalidDimensions("subspace objective: need at least one data column");
    }
    columns_.resize(x_data.cols());
    for (std::size_t j = 0; j < x_data.cols(); ++j) {
        Vec col(d_);
        for (std::size_t i = 0; i < d_; ++i) col[i] = x_data(i, j);
        columns_[j] = std::move(col);
    }
}

double SubspaceObjective::sample_value(std::size_t j, const Vec& w) const {
    check_index(j);
    if (w.size() != dim()) {
        throw DimensionMismatch("subspace objective: point length " +
                                std::to_string(w.size()) + " vs dim " +
                                std::to_string(dim()));
    }
    const Vec& xj = columns_[j];
    // v = x_j - W (W^T x_j)
    Vec v = xj;
    for (std::size_t b = 0; b < k_; ++b) {
        const double* wb = w.data() + b * d_;
        double ub = 0.0;
        for (std::size_t a = 0; a < d_; ++a) ub += wb[a] * xj[a];
        for (std::size_t a = 0; a < d_; ++a) v[a] -= ub * wb[a];
    }
    double s = 0.0;
    for (double e : v) s += e * e;
    return s;
}

Vec SubspaceObjective::sample_gradient(std::size_t j, const Vec& w) const {
    check_index(j);
    if (w.size() != dim()) {
        throw DimensionMismatch("subspace objective: point length " +
                                std::to_string(w.size()) + " vs dim " +
                                std::to_string(dim()));
    }
    const Vec& xj = columns_[j];
    Vec u(k_);
    Vec v = xj;
    for (std::size_t b = 0; b < k_; ++b) {
        const double* wb = w.data() + b * d_;
        double ub = 0.0;
        for (std::size_t a = 0; a < d_; ++a) ub += wb[a] * xj[a];
        u[b] = ub;
    }
    for (std::size_t b = 0; b < k_; ++b) {
        const double* wb = w.data() + b * d_;
        for (std::size_t a = 0; a < d_; ++a) v[a] -= u[b] * wb[a];
    }
    Vec wv(k_); // W^T v
    for (std::size_t b = 0; b < k_; ++b) {
        const double* wb = w.data() + b * d_;
        double s = 0.0;
        for (std::size_t a = 0; a < d_; ++a) s += wb[a] * v[a];
        wv[b] = s;
    }
    // dF/dW = -2 (v u^T + x_j (W^T v)^T)
    Vec g(dim());
    for (std::size_t b = 0; b < k_; ++b) {
        double* gb = g.data() + b * d_;
        const double ub = u[b];
        const double wvb = wv[b];
        for (std::size_t a = 0; a < d_; ++a) {
            gb[a] = -2.0 * (v[a] * ub + xj[a] * wvb);
        }
    }
    return g;
}

OrthogonalityConstraint::OrthogonalityConstraint(std::size_t d, std::size_t k)
    : d_(d), k_(k) {
    if (d == 0 || k == 0 || k > d) {
        throw InvalidDimensions("orthogonality constraint: need 1 <= k <= d");
    }
}

std::size_t OrthogonalityConstraint::row_index(std::size_t p, std::size_t q) const {
    if (p > q || q >= k_) {
        throw IndexOutOfRange("constraint pair (" + std::to_string(p) + ", " +
                              std::to_string(q) + ") out of range");
    }
    // Row-major upper triangle: (0,0)..(0,k-1), (1,1)..(1,k-1), ...
    return p * k_ - p * (p + 1) / 2 + q;
}

Vec OrthogonalityConstraint::value(const Vec& w) const {
    if (w.size() != dim()) {
        throw DimensionMismatch("orthogonality constraint: point length " +
                                std::to_string(w.size()) + " vs dim " +
                                std::to_string(dim()));
    }
    Vec c(constraint_count());
    for (std::size_t p = 0; p < k_; ++p) {
        const double* wp = w.data() + p * d_;
        for (std::size_t q = p; q < k_; ++q) {
            const double* wq = w.data() + q * d_;
            double s = 0.0;
            for (std::size_t a = 0; a < d_; ++a) s += wp[a] * wq[a];
            if (p == q) s -= 1.0;
            c[row_index(p, q)] = s;
        }
    }
    return c;
}

Mat OrthogonalityConstraint::jacobian(const Vec& w) const {
    if (w.size() != dim()) {
        throw DimensionMismatch("orthogonality constraint: point length " +
                                std::to_string(w.size()) + " vs dim " +
                                std::to_string(dim()));
    }
    Mat j(constraint_count(), dim(), 0.0);
    // d(W^T W)_{pq} / dW_{ab} = W_{aq} [b == p] + W_{ap} [b == q]
    for (std::size_t p = 0; p < k_; ++p) {
        for (std::size_t q = p; q < k_; ++q) {
            double* row = j.row(row_index(p, q));
            const double* wp = w.data() + p * d_;
            const double* wq = w.data() + q * d_;
            for (std::size_t a = 0; a < d_; ++a) row[p * d_ + a] += wq[a];
            for (std::size_t a = 0; a < d_; ++a) row[q * d_ + a] += wp[a];
        }
    }
    return j;
}

Vec OrthogonalityConstraint::jac_vec(const Vec& w, const Vec& v) const {
    if (w.size() != dim() || v.size() != dim()) {
        throw DimensionMismatch("orthogonality jac_vec: bad lengths");
    }
    // J v = upper triangle of W^T V + V^T W.
    Vec out(constraint_count());
    for (std::size_t p = 0; p < k_; ++p) {
        const double* wp = w.data() + p * d_;
        const double* vp = v.data() + p * d_;
        for (std::size_t q = p; q < k_; ++q) {
            const double* wq = w.data() + q * d_;
            const double* vq = v.data() + q * d_;
            double s = 0.0;
            for (std::size_t a = 0; a < d_; ++a) s += wp[a] * vq[a] + vp[a] * wq[a];
            out[row_index(p, q)] = s;
        }
    }
    return out;
}

Vec OrthogonalityConstraint::jac_tvec(const Vec& w, const Vec& y) const {
    if (w.size() != dim() || y.size() != constraint_count()) {
        throw DimensionMismatch("orthogonality jac_tvec: bad lengths");
    }
    // J^T y = vec(W S) with S symmetric, S_pq = y_(p,q) off-diagonal and
    // S_pp = 2 y_(p,p) on the diagonal.
    Vec out(dim(), 0.0);
    for (std::size_t p = 0; p < k_; ++p) {
        for (std::size_t q = p; q < k_; ++q) {
            const double yv = y[row_index(p, q)];
            if (p == q) {
                const double* wp = w.data() + p * d_;
                double* op = out.data() + p * d_;
                for (std::size_t a = 0; a < d_; ++a) op[a] += 2.0 * yv * wp[a];
            } else {
                const double* wp = w.data() + p * d_;
                const double* wq = w.data() + q * d_;
                double* op = out.data() + p * d_;
                double* oq = out.data() + q * d_;
                for (std::size_t a = 0; a < d_; ++a) {
                    op[a] += yv * wq[a];
                    oq[a] += yv * wp[a];
                }
            }
        }
    }
    return out;
}

double OrthogonalityConstraint::orthogonality_error(const Vec& w) const {
    Vec c = value(w);
    double s = 0.0;
    for (std::size_t p = 0; p < k_; ++p) {
        for (std::size_t q = p; q < k_; ++q) {
            const double e = c[row_index(p, q)];
            s += (p == q) ? e * e : 2.0 * e * e;
        }
    }
    return std::sqrt(s);
}

SubspaceProblem make_subspace_problem(const Mat& x_data, std::size_t k) {
    SubspaceProblem sp;
    sp.objective = std::make_shared<SubspaceObjective>(x_data, k);
    sp.constraint = std::make_shared<OrthogonalityConstraint>(x_data.rows(), k);
    return sp;
}

Vec random_init(std::size_t d, std::size_t k, std::uint64_t seed, InitMode mode) {
    if (d == 0 || k == 0 || k > d) {
        throw InvalidDimensions("random_init: need 1 <= k <= d");
    }
    CounterRng rng(seed, RngStream::init);
    if (mode == InitMode::gaussian) {
        Vec x(d * k);
        for (double& e : x) e = rng.next_gaussian();
        return x;
    }
    Mat g(d, k);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < k; ++j) g(i, j) = rng.next_gaussian();
    Mat q = thin_qr(g).q;
    Vec x(d * k);
    for (std::size_t b = 0; b < k; ++b)
        for (std::size_t a = 0; a < d; ++a) x[b * d + a] = q(a, b);
    return x;
}

} // namespace strop
