#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "strop/linops.hpp"

namespace strop {

// Finite-sum objective f(x) = (1/n) sum_i f_i(x) with per-sample oracles.
class FiniteSumProblem {
public:
    virtual ~FiniteSumProblem() = default;

    virtual std::size_t sample_count() const = 0;
    virtual std::size_t dim() const = 0;

    virtual double sample_value(std::size_t i, const Vec& x) const = 0;
    virtual Vec sample_gradient(std::size_t i, const Vec& x) const = 0;

    // Full (deterministic) objective and gradient; defaults average samples.
    virtual double value(const Vec& x) const;
    virtual Vec gradient(const Vec& x) const;

    // Per-sample smoothness constants when known in closed form.
    virtual std::optional<Vec> per_sample_smoothness() const { return std::nullopt; }

protected:
    void check_index(std::size_t i) const;
};

// Smooth equality constraint map c : R^dim -> R^m.
class ConstraintMap {
public:
    virtual ~ConstraintMap() = default;

    virtual std::size_t constraint_count() const = 0; // m
    virtual std::size_t dim() const = 0;

    virtual Vec value(const Vec& x) const = 0;
    virtual Mat jacobian(const Vec& x) const = 0;

    // Jacobian-vector products; defaults materialize the Jacobian, structured
    // maps override with direct formulas.
    virtual Vec jac_vec(const Vec& x, const Vec& v) const;   // J(x) v
    virtual Vec jac_tvec(const Vec& x, const Vec& y) const;  // J(x)^T y
};

// Interpolating least squares: f_i(x) = (a_i^T x - b_i)^2 / 2 with b = A x*,
// so f and every f_i vanish at x*. Requires d > n (underdetermined rows), so
// the interpolation property holds with probability one.
class InterpolatingLeastSquares final : public FiniteSumProblem {
public:
    InterpolatingLeastSquares(Mat a, Vec b, Vec x_star);

    std::size_t sample_count() const override { return a_.rows(); }
    std::size_t dim() const override { return a_.cols(); }
    double sample_value(std::size_t i, const Vec& x) const override;
    Vec sample_gradient(std::size_t i, const Vec& x) const override;

    // L_i = ||a_i||^2 exactly (each f_i is a rank-one quadratic).
    std::optional<Vec> per_sample_smoothness() const override { return row_sq_norms_; }

    const Vec& x_star() const { return x_star_; }
    const Mat& design() const { return a_; }

private:
    double residual(std::size_t i, const Vec& x) const;

    Mat a_;
    Vec b_;
    Vec x_star_;
    Vec row_sq_norms_;
};

InterpolatingLeastSquares make_interpolating_least_squares(std::size_t n, std::size_t d,
                                                           std::uint64_t seed);

// Spiked-subspace data: X = U Z + noise_sigma * E, where U is a random d x k
// orthonormal basis, Z is k x n standard normal and E is d x n standard
// normal. Columns of X lie in span(U) exactly when noise_sigma = 0.
struct SpikedDataSpec {
    std::size_t d = 0;
    std::size_t k = 0;
    std::size_t n = 0;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

Mat spiked_data(const SpikedDataSpec& spec);

// Subspace fitting objective over W in R^{d x k}, flattened column-major:
// x[b*d + a] = W(a, b). Per-sample value f_j(W) = ||(I - W W^T) x_j||^2.
class SubspaceObjective final : public FiniteSumProblem {
public:
    SubspaceObjective(const Mat& x_data, std::size_t k);

    std::size_t sample_count() const override { return columns_.size(); }
    std::size_t dim() const override { return d_ * k_; }
    double sample_value(std::size_t j, const Vec& w) const override;
    Vec sample_gradient(std::size_t j, const Vec& w) const override;

    std::size_t ambient_dim() const { return d_; }
    std::size_t subspace_dim() const { return k_; }

private:
    std::size_t d_;
    std::size_t k_;
    std::vector<Vec> columns_; // data points x_j
};

// Orthonormality constraint c(W) = upper triangle (including diagonal) of
// W^T W - I, m = k(k+1)/2 entries. The full k x k vectorization would repeat
// each off-diagonal entry and lose Jacobian row independence; the triangular
// form keeps J full row rank at feasible points.
class OrthogonalityConstraint final : public ConstraintMap {
public:
    OrthogonalityConstraint(std::size_t d, std::size_t k);

    std::size_t constraint_count() const override { return k_ * (k_ + 1) / 2; }
    std::size_t dim() const override { return d_ * k_; }

    Vec value(const Vec& w) const override;
    Mat jacobian(const Vec& w) const override;
    Vec jac_vec(const Vec& w, const Vec& v) const override;
    Vec jac_tvec(const Vec& w, const Vec& y) const override;

    std::size_t ambient_dim() const { return d_; }
    std::size_t subspace_dim() const { return k_; }

    // Row index of constraint (p, q), p <= q, in row-major triangle order.
    std::size_t row_index(std::size_t p, std::size_t q) const;

    // ||W^T W - I||_F of the full k x k violation matrix (off-diagonal entries
    // counted twice, unlike norm2(value(w)) which counts them once).
    double orthogonality_error(const Vec& w) const;

private:
    std::size_t d_;
    std::size_t k_;
};

struct SubspaceProblem {
    std::shared_ptr<SubspaceObjective> objective;
    std::shared_ptr<OrthogonalityConstraint> constraint;
};

SubspaceProblem make_subspace_problem(const Mat& x_data, std::size_t k);

enum class InitMode { gaussian, orthonormal };

// Random starting point of length d*k (or d when k = 1 for flat problems).
// gaussian: i.i.d. standard normal entries. orthonormal: flattened Q factor of
// a Gaussian d x k matrix, so the orthogonality constraint holds at the start.
Vec random_init(std::size_t d, std::size_t k, std::uint64_t seed, InitMode mode);

} // namespace strop
