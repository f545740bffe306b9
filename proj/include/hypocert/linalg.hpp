// linalg.hpp — Complex dense linear algebra over an H-weighted inner product.
// Weights, skew/Hermitian splits, weighted adjoints and norms, Hermitian
// eigensolves and matrix exponentials. Substrate for everything else.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hypocert {

using Complex = std::complex<double>;
using Matrix  = Eigen::MatrixXcd;
using Vector  = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;

// Scale-aware tolerance used for every Hermiticity / Loewner-order decision.
inline constexpr double kHermTolFactor = 1e-10;
// Default threshold for strict-positivity decisions ("≥ κ·1" with κ > tol).
inline constexpr double kPositivityTolFactor = 1e-9;
// expm refuses norm scales where scaling-and-squaring accuracy degrades.
inline constexpr double kExpmNormBudget = 50.0;

inline double spectral_norm(const Matrix& A) {
    if (A.rows() == 0) return 0.0;
    return A.jacobiSvd().singularValues()(0);
}

// --------------------------- Weight ------------------------------------------
//
// Hermitian positive-definite H defining ⟨x, y⟩ = x*·H·y, with the principal
// square root and its inverse cached at construction.

class Weight {
public:
    static Weight identity(Eigen::Index n) { return Weight(n); }

    explicit Weight(Matrix H) : H_(std::move(H)) {
        if (H_.rows() != H_.cols() || H_.rows() == 0)
            throw std::invalid_argument("Weight: H must be square and nonempty");
        const double scale = H_.cwiseAbs().maxCoeff();
        if ((H_ - H_.adjoint()).cwiseAbs().maxCoeff() > kHermTolFactor * std::max(scale, 1.0))
            throw std::invalid_argument("Weight: H is not Hermitian");
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H_ + H_.adjoint()));
        if (es.info() != Eigen::Success)
            throw std::runtime_error("Weight: eigendecomposition of H failed");
        const RealVec& lam = es.eigenvalues();
        if (lam(0) <= kHermTolFactor * std::max(scale, 1.0))
            throw std::invalid_argument("Weight: H is not positive definite");
        const Matrix& U = es.eigenvectors();
        sqrt_h_     = U * lam.cwiseSqrt().asDiagonal() * U.adjoint();
        inv_sqrt_h_ = U * lam.cwiseSqrt().cwiseInverse().asDiagonal() * U.adjoint();
        identity_   = (H_ - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= 1e-14;
    }

    Eigen::Index dim() const { return H_.rows(); }
    const Matrix& H() const { return H_; }
    const Matrix& sqrt_h() const { return sqrt_h_; }
    const Matrix& inv_sqrt_h() const { return inv_sqrt_h_; }
    bool is_identity() const { return identity_; }

    // Conjugation into the standard frame: A ↦ √H·A·√H⁻¹ preserves the
    // spectrum and maps the weighted adjoint to the plain adjoint.
    Matrix to_standard(const Matrix& A) const {
        return identity_ ? A : Matrix(sqrt_h_ * A * inv_sqrt_h_);
    }
    Matrix from_standard(const Matrix& A) const {
        return identity_ ? A : Matrix(inv_sqrt_h_ * A * sqrt_h_);
    }

    Complex inner(const Vector& x, const Vector& y) const {
        return identity_ ? Complex(x.dot(y)) : Complex(x.dot(H_ * y));
    }
    double norm(const Vector& x) const { return std::sqrt(std::real(inner(x, x))); }

private:
    explicit Weight(Eigen::Index n)
        : H_(Matrix::Identity(n, n)),
          sqrt_h_(Matrix::Identity(n, n)),
          inv_sqrt_h_(Matrix::Identity(n, n)),
          identity_(true) {}

    Matrix H_, sqrt_h_, inv_sqrt_h_;
    bool identity_ = false;
};

inline void check_dims(const Matrix& A, const Weight& w, const char* who) {
    if (A.rows() != A.cols())
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
    if (A.rows() != w.dim())
        throw std::invalid_argument(std::string(who) + ": dimension mismatch with weight");
}

// Adjoint with respect to the weighted inner product: H⁻¹·A*·H.
inline Matrix weighted_adjoint(const Matrix& A, const Weight& w) {
    check_dims(A, w, "weighted_adjoint");
    if (w.is_identity()) return A.adjoint();
    return w.from_standard(w.to_standard(A).adjoint());
}

// Operator norm induced by the weighted vector norm: σ_max(√H·A·√H⁻¹).
inline double weighted_operator_norm(const Matrix& A, const Weight& w) {
    check_dims(A, w, "weighted_operator_norm");
    return spectral_norm(w.to_standard(A));
}

// ----------------------- Hermitian eigenproblems -----------------------------

struct HermitianEig {
    RealVec eigenvalues;   // ascending
    Matrix  eigenvectors;  // columns, H-orthonormal
};

// Eigensolve for an operator Hermitian w.r.t. the weight, reduced to a
// standard problem by √H conjugation. Throws when the input fails the
// Hermiticity check at the scale-aware tolerance.
inline HermitianEig hermitian_eig(const Matrix& M, const Weight& w) {
    check_dims(M, w, "hermitian_eig");
    Matrix Ms = w.to_standard(M);
    const double scale = std::max(Ms.cwiseAbs().maxCoeff(), 1.0);
    if ((Ms - Ms.adjoint()).cwiseAbs().maxCoeff() > kHermTolFactor * scale)
        throw std::invalid_argument("hermitian_eig: operator is not Hermitian w.r.t. the weight");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Ms + Ms.adjoint()));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eig: solver failed");
    HermitianEig out;
    out.eigenvalues  = es.eigenvalues();
    out.eigenvectors = w.is_identity() ? es.eigenvectors()
                                       : Matrix(w.inv_sqrt_h() * es.eigenvectors());
    return out;
}

inline double weighted_lambda_min(const Matrix& M, const Weight& w) {
    Matrix Ms = w.to_standard(M);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Ms + Ms.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double weighted_lambda_max(const Matrix& M, const Weight& w) {
    Matrix Ms = w.to_standard(M);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Ms + Ms.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

// Principal square root of a weighted-Hermitian PSD operator. Eigenvalues in
// [-tol, 0) are clamped to zero; anything more negative throws.
inline Matrix weighted_psd_sqrt(const Matrix& M, const Weight& w) {
    Matrix Ms = w.to_standard(M);
    const double scale = std::max(spectral_norm(Ms), 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Ms + Ms.adjoint()));
    RealVec lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < -kPositivityTolFactor * scale)
            throw std::invalid_argument("weighted_psd_sqrt: operator is not PSD");
        lam(i) = std::max(lam(i), 0.0);
    }
    Matrix root = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
    return w.from_standard(root);
}

// ----------------------- Matrix exponential ----------------------------------

// e^{A·t} by scaling-and-squaring with a Padé approximant whose order is
// picked from ‖A·t‖. Refuses ‖A‖·|t| > 50 where the result would be silently
// inaccurate at the 1e-12 contract.
inline Matrix expm(const Matrix& A, double t) {
    if (A.rows() != A.cols())
        throw std::invalid_argument("expm: matrix must be square");
    if (!std::isfinite(t)) throw std::invalid_argument("expm: t must be finite");
    if (A.rows() == 0) return A;
    const double budget = spectral_norm(A) * std::abs(t);
    if (budget > kExpmNormBudget)
        throw std::range_error("expm: ‖A‖·|t| = " + std::to_string(budget) +
                               " exceeds the supported range " + std::to_string(kExpmNormBudget));
    return Matrix(A * t).exp();
}

// e^{A·t} for arbitrary ‖A‖·t, evaluated as (e^{A·t/s})^s with s chosen to
// keep each factor inside the expm accuracy budget.
inline Matrix propagator(const Matrix& A, double t) {
    const double budget = spectral_norm(A) * std::abs(t);
    if (budget <= kExpmNormBudget) return expm(A, t);
    const int steps = static_cast<int>(std::ceil(budget / (0.8 * kExpmNormBudget)));
    Matrix chunk = expm(A, t / steps);
    Matrix out = Matrix::Identity(A.rows(), A.cols());
    Matrix base = chunk;
    int k = steps;
    while (k > 0) {  // square-and-multiply on the chunk propagator
        if (k & 1) out = out * base;
        k >>= 1;
        if (k > 0) base = base * base;
    }
    return out;
}

// ----------------------- Weighted operators -----------------------------------
//
// A square matrix C together with its skew/Hermitian split w.r.t. the weight:
//   C_S = (C − C^⋄)/2,  C_H = (C + C^⋄)/2,  C^⋄ = H⁻¹C*H.

struct WeightedOperator {
    Matrix C;
    Weight weight;
    Matrix skew;   // C_S, weighted-skew:      (C_S)^⋄ = −C_S
    Matrix herm;   // C_H, weighted-Hermitian: (C_H)^⋄ =  C_H
    bool accretive = false;
    double herm_lambda_min = 0.0;

    Eigen::Index dim() const { return C.rows(); }
    double norm_skew() const { return weighted_operator_norm(skew, weight); }
    double norm_herm() const { return weighted_operator_norm(herm, weight); }
    double norm() const { return weighted_operator_norm(C, weight); }

    // C_η = η·C_S + C_H, the mode-η member of the family.
    Matrix mode(double eta) const { return eta * skew + herm; }
};

// Split C into weighted skew and Hermitian parts; flags accretivity when the
// weighted λ_min of C_H clears −tol. tol < 0 picks the scale-aware default.
inline WeightedOperator split(const Matrix& C, Weight weight, double tol = -1.0) {
    check_dims(C, weight, "split");
    WeightedOperator op{C, std::move(weight), {}, {}, false, 0.0};
    Matrix adj = weighted_adjoint(C, op.weight);
    op.skew = 0.5 * (C - adj);
    op.herm = 0.5 * (C + adj);
    if (tol < 0.0) tol = kPositivityTolFactor * std::max(op.norm(), 1.0);
    op.herm_lambda_min = weighted_lambda_min(op.herm, op.weight);
    op.accretive = op.herm_lambda_min >= -tol;
    return op;
}

}  // namespace hypocert
