// index.hpp — Hypocoercivity index by three routes (two operator-sum variants
// and a Kalman-type rank condition) and the constructive certificate ladder
// κ → κ₁ → K → R → μ_R → σ.

#pragma once

#include "hypocert/linalg.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

namespace hypocert {

inline constexpr int kNotHypocoercive = -1;

// --------------------------- Index routes ------------------------------------

struct IndexReport {
    int m_hc = kNotHypocoercive;        // smallest m with λ_min(S_m) ≥ tol, S_m per the C_S-sum
    int m_hc_alt = kNotHypocoercive;    // same search on the C-sum variant
    int kalman_m = kNotHypocoercive;    // rank-condition route
    bool hypocoercive = false;
    std::vector<double> kappa_by_m;     // λ_min of Σ_{j≤m} (C_S^⋄)^j C_H C_S^j
    std::vector<double> kappa5_by_m;    // λ_min of Σ_{j≤m} C^j C_H (C^⋄)^j
    int max_m_searched = 0;
    double tol = 0.0;

    bool routes_agree() const { return m_hc == m_hc_alt && m_hc == kalman_m; }
};

// Kalman-type rank route: with B = principal square root of C_H and J = C_S,
// the index is the smallest m with [B, JB, …, JᵐB] of full row rank.
inline int index_by_kalman(const WeightedOperator& op, double rank_tol = -1.0) {
    if (!op.accretive)
        throw std::invalid_argument("index_by_kalman: operator is not accretive");
    if (rank_tol < 0.0) rank_tol = kPositivityTolFactor;
    const Eigen::Index n = op.dim();
    const Matrix Js = op.weight.to_standard(op.skew);
    Matrix Bs;
    {
        Matrix Hs = op.weight.to_standard(op.herm);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Hs + Hs.adjoint()));
        RealVec lam = es.eigenvalues().cwiseMax(0.0);
        Bs = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
    }
    Matrix stack(n, n * n);
    Matrix block = Bs;
    for (int m = 0; m < n; ++m) {
        stack.middleCols(m * n, n) = block;
        Eigen::JacobiSVD<Matrix> svd(stack.leftCols((m + 1) * n));
        const auto& sv = svd.singularValues();
        if (sv(0) > 0.0) {
            Eigen::Index rank = 0;
            while (rank < sv.size() && sv(rank) > rank_tol * sv(0)) ++rank;
            if (rank == n) return m;
        }
        block = Js * block;
    }
    return kNotHypocoercive;
}

// Both operator-sum routes, Loewner-tested against a scale-aware threshold.
// Searches m = 0..max_m (default: the space dimension, past which the Kalman
// chain cannot grow).
inline IndexReport index_by_sums(const WeightedOperator& op, int max_m = -1, double tol = -1.0) {
    if (!op.accretive)
        throw std::invalid_argument("index_by_sums: operator is not accretive");
    if (max_m < 0) max_m = static_cast<int>(op.dim());
    if (max_m < 1) throw std::invalid_argument("index_by_sums: max_m must be ≥ 1");
    if (tol < 0.0) tol = kPositivityTolFactor * std::max(op.norm(), 1.0);

    const Matrix Ss = op.weight.to_standard(op.skew);
    const Matrix Hs = op.weight.to_standard(op.herm);
    const Matrix Cs = op.weight.to_standard(op.C);

    IndexReport rep;
    rep.tol = tol;
    rep.max_m_searched = max_m;
    Matrix term6 = Hs, sum6 = Matrix::Zero(op.dim(), op.dim());
    Matrix term5 = Hs, sum5 = sum6;
    for (int m = 0; m <= max_m; ++m) {
        sum6 += term6;
        sum5 += term5;
        Eigen::SelfAdjointEigenSolver<Matrix> es6(0.5 * (sum6 + sum6.adjoint()), Eigen::EigenvaluesOnly);
        Eigen::SelfAdjointEigenSolver<Matrix> es5(0.5 * (sum5 + sum5.adjoint()), Eigen::EigenvaluesOnly);
        rep.kappa_by_m.push_back(es6.eigenvalues()(0));
        rep.kappa5_by_m.push_back(es5.eigenvalues()(0));
        if (rep.m_hc == kNotHypocoercive && rep.kappa_by_m.back() >= tol) rep.m_hc = m;
        if (rep.m_hc_alt == kNotHypocoercive && rep.kappa5_by_m.back() >= tol) rep.m_hc_alt = m;
        term6 = Ss.adjoint() * term6 * Ss;
        term5 = Cs * term5 * Cs.adjoint();
    }
    rep.kalman_m = index_by_kalman(op, tol / std::max(op.norm(), 1.0));
    rep.hypocoercive = rep.m_hc != kNotHypocoercive;
    return rep;
}

// κ(η) = λ_min of Σ_{j=0}^{m} (C_η^⋄)^j C_H C_η^j, the quantity whose infimum
// over 1 ≤ |η| ≤ R feeds μ_R.
inline double kappa_eta(const WeightedOperator& op, double eta, int m) {
    if (std::abs(eta) < 1.0)
        throw std::domain_error("kappa_eta: |eta| must be ≥ 1");
    if (m < 0) throw std::invalid_argument("kappa_eta: m must be ≥ 0");
    const Matrix Cs = op.weight.to_standard(op.mode(eta));
    const Matrix Hs = op.weight.to_standard(op.herm);
    Matrix term = Hs, sum = Matrix::Zero(op.dim(), op.dim());
    for (int j = 0; j <= m; ++j) {
        sum += term;
        term = Cs.adjoint() * term * Cs;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sum + sum.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

// --------------------------- η-polynomial form --------------------------------
//
// Σ_{j=0}^{m} (C_η^⋄)^j C_H C_η^j expanded in powers of η (standard frame).
// Coefficient p collects every word with exactly p skew factors. Used for the
// Lipschitz modulus of η ↦ λ_min and reusable as an exact evaluator.

struct EtaPolynomial {
    std::vector<Matrix> coeffs;  // degree 0..2m, standard frame
    std::vector<double> coeff_norms;

    Matrix evaluate(double eta) const {
        Matrix out = Matrix::Zero(coeffs[0].rows(), coeffs[0].cols());
        double p = 1.0;
        for (const auto& A : coeffs) {
            out += p * A;
            p *= eta;
        }
        return out;
    }
    double lambda_min(double eta) const {
        Matrix M = evaluate(eta);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }
    // Bound on |d/dη λ_min| for |η| ≤ b, via Weyl and term-wise differentiation.
    double lipschitz(double b) const {
        double lip = 0.0, p = 1.0;
        for (std::size_t k = 1; k < coeff_norms.size(); ++k) {
            lip += static_cast<double>(k) * coeff_norms[k] * p;
            p *= b;
        }
        return lip;
    }
};

namespace detail {

using MatrixPoly = std::vector<Matrix>;  // coefficients in ascending powers of η

inline MatrixPoly poly_mul(const MatrixPoly& a, const MatrixPoly& b) {
    MatrixPoly out(a.size() + b.size() - 1,
                   Matrix::Zero(a[0].rows(), a[0].cols()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            out[i + j] += a[i] * b[j];
    return out;
}

}  // namespace detail

inline EtaPolynomial eta_polynomial(const WeightedOperator& op, int m) {
    const Matrix Ss = op.weight.to_standard(op.skew);
    const Matrix Hs = op.weight.to_standard(op.herm);
    const Matrix I = Matrix::Identity(op.dim(), op.dim());
    // left = (−η·C_S + C_H)^j, right = (η·C_S + C_H)^j as η-polynomials
    detail::MatrixPoly left{I}, right{I};
    const detail::MatrixPoly dual{Hs, -Ss}, prim{Hs, Ss};
    EtaPolynomial out;
    out.coeffs.assign(2 * m + 1, Matrix::Zero(op.dim(), op.dim()));
    for (int j = 0; j <= m; ++j) {
        detail::MatrixPoly mid = detail::poly_mul(left, detail::MatrixPoly{Hs});
        detail::MatrixPoly full = detail::poly_mul(mid, right);
        for (std::size_t p = 0; p < full.size(); ++p) out.coeffs[p] += full[p];
        if (j < m) {
            left = detail::poly_mul(left, dual);
            right = detail::poly_mul(right, prim);
        }
    }
    out.coeff_norms.reserve(out.coeffs.size());
    for (const auto& A : out.coeffs) out.coeff_norms.push_back(spectral_norm(A));
    return out;
}

// --------------------------- Lemma-1(a) constant K ----------------------------
//
// Expands (C_η^⋄)^ℓ C_H C_η^ℓ over the 2^{2ℓ} words in the 2ℓ binomial slots;
// B_i sums the words with exactly i skew factors (i < 2ℓ). The uniform
// envelope K = 2m · max_{ℓ,i} ‖B_i‖ gives
//   ‖(C_η^⋄)^ℓ C_H C_η^ℓ − η^{2ℓ}(C_S^⋄)^ℓ C_H C_S^ℓ‖ ≤ K|η|^{2ℓ−1},  |η| ≥ 1.
inline double compute_K(const WeightedOperator& op, int m) {
    if (m < 0) throw std::invalid_argument("compute_K: m must be ≥ 0");
    if (m == 0) return 0.0;
    if (m > 12) throw std::invalid_argument("compute_K: word enumeration not practical for m > 12");
    const Matrix Ss = op.weight.to_standard(op.skew);
    const Matrix Hs = op.weight.to_standard(op.herm);
    double max_norm = 0.0;
    for (int ell = 1; ell <= m; ++ell) {
        const int slots = 2 * ell;
        std::vector<Matrix> by_power(slots, Matrix::Zero(op.dim(), op.dim()));
        for (std::uint64_t word = 0; word < (std::uint64_t(1) << slots); ++word) {
            int skew_count = 0;
            double sign = 1.0;
            Matrix prod = Matrix::Identity(op.dim(), op.dim());
            for (int s = 0; s < slots; ++s) {
                const bool is_skew = (word >> s) & 1;
                if (s == ell) prod = prod * Hs;  // the central C_H between the two blocks
                if (is_skew) {
                    ++skew_count;
                    if (s < ell) sign = -sign;  // factors of (−η·C_S + C_H)
                    prod = prod * Ss;
                } else {
                    prod = prod * Hs;
                }
            }
            if (skew_count == slots) continue;  // the η^{2ℓ} leading term is excluded
            if (slots == 0) continue;
            by_power[skew_count] += sign * prod;
        }
        for (const auto& B : by_power) max_norm = std::max(max_norm, spectral_norm(B));
    }
    return 2.0 * m * max_norm;
}

// --------------------------- Certified infimum --------------------------------

struct GridSpec {
    double step = -1.0;        // initial cell width; < 0 → (R−1)/64, integer-aligned
    double refine_tol = 1e-9;  // stop when sampled-min − certified-floor ≤ this (absolute)
    std::size_t max_evals = 500000;
};

struct InfimumResult {
    double sampled = std::numeric_limits<double>::infinity();    // best value seen
    double certified = -std::numeric_limits<double>::infinity(); // global lower bound
    double argmin = 0.0;
    std::size_t evals = 0;
    bool converged = false;
};

namespace detail {

struct Cell {
    double lo, hi, flo, fhi, lb;
    bool operator>(const Cell& o) const {
        return lb != o.lb ? lb > o.lb : lo > o.lo;
    }
};

// Minimize η ↦ λ_min(S(η)) over [1, R] with sign = ±1 selecting the branch
// η ∈ ±[1, R]. Adaptive bisection; every cell carries the Lipschitz floor
// min(f(a), f(b)) − Lip·(b−a)/2, so the returned `certified` value bounds the
// true infimum from below.
inline void infimum_on_branch(const EtaPolynomial& poly, double R, double sign,
                              const GridSpec& grid, InfimumResult& res) {
    auto f = [&](double x) { return poly.lambda_min(sign * x); };
    auto note = [&](double x, double v) {
        ++res.evals;
        if (v < res.sampled) {
            res.sampled = v;
            res.argmin = sign * x;
        }
    };

    if (R <= 1.0) {
        const double v = f(1.0);
        note(1.0, v);
        res.certified = std::min(res.certified == -std::numeric_limits<double>::infinity()
                                     ? v : res.certified, v);
        return;
    }

    // Initial partition: integer-aligned, no cell wider than `step`.
    double step = grid.step > 0.0 ? grid.step : (R - 1.0) / 64.0;
    std::vector<double> knots{1.0};
    for (double k = 2.0; k < R; k += 1.0) knots.push_back(k);
    knots.push_back(R);
    std::vector<double> pts;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        pts.push_back(knots[i]);
        const double w = knots[i + 1] - knots[i];
        const int sub = std::max(1, static_cast<int>(std::ceil(w / step)));
        for (int s = 1; s < sub; ++s) pts.push_back(knots[i] + w * s / sub);
    }
    pts.push_back(R);

    std::priority_queue<Cell, std::vector<Cell>, std::greater<Cell>> heap;
    std::vector<double> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        vals[i] = f(pts[i]);
        note(pts[i], vals[i]);
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double lip = poly.lipschitz(pts[i + 1]);
        heap.push({pts[i], pts[i + 1], vals[i], vals[i + 1],
                   std::min(vals[i], vals[i + 1]) - lip * (pts[i + 1] - pts[i]) / 2.0});
    }

    while (!heap.empty()) {
        const Cell cell = heap.top();
        if (res.sampled - cell.lb <= grid.refine_tol || res.evals >= grid.max_evals) break;
        heap.pop();
        if (cell.lb > res.sampled) continue;  // cannot contain the infimum
        const double mid = 0.5 * (cell.lo + cell.hi);
        const double fmid = f(mid);
        note(mid, fmid);
        const double lip_l = poly.lipschitz(mid), lip_r = poly.lipschitz(cell.hi);
        heap.push({cell.lo, mid, cell.flo, fmid,
                   std::min(cell.flo, fmid) - lip_l * (mid - cell.lo) / 2.0});
        heap.push({mid, cell.hi, fmid, cell.fhi,
                   std::min(fmid, cell.fhi) - lip_r * (cell.hi - mid) / 2.0});
    }
    const double floor = heap.empty() ? res.sampled : std::min(heap.top().lb, res.sampled);
    res.certified = res.certified == -std::numeric_limits<double>::infinity()
                        ? floor : std::min(res.certified, floor);
}

}  // namespace detail

// Certified infimum of λ_min(S(η)) over 1 ≤ |η| ≤ R (both signs).
inline InfimumResult certified_infimum(const EtaPolynomial& poly, double R,
                                       const GridSpec& grid = {}) {
    InfimumResult res;
    detail::infimum_on_branch(poly, R, +1.0, grid, res);
    detail::infimum_on_branch(poly, R, -1.0, grid, res);
    res.converged = res.sampled - res.certified <= grid.refine_tol;
    return res;
}

// --------------------------- Certificate --------------------------------------

struct HypoCertificate {
    int m_hc = 0;
    double kappa = 0.0;      // λ_min of the index-defining sum at m_HC
    double kappa1 = 0.0;     // κ/(m_HC+1)
    double K = 0.0;          // Lemma-1(a) envelope
    double R = 1.0;          // max(2K/κ₁, 1)
    double mu_R = 0.0;       // R^{−2m}·(sampled inf of κ(η) over 1 ≤ |η| ≤ R)
    double mu_R_certified = 0.0;  // same with the Lipschitz floor instead
    double sigma = 0.0;      // min(κ₁, 2μ_R)
    double sigma_certified = 0.0;
    double L = 0.0;          // ‖C_H‖ + ‖C_S‖, so ‖C_η‖ ≤ L|η|
    double inf_eta = 0.0;    // where the sampled infimum was attained
    std::size_t inf_evals = 0;
    bool inf_converged = false;

    int short_time_exponent() const { return 2 * m_hc + 1; }
};

// Assembles the full constant ladder from the proofs of Lemma 1 and
// Theorem 1(a). Throws if the operator is not hypocoercive within max_m.
inline HypoCertificate build_certificate(const WeightedOperator& op, const GridSpec& grid = {},
                                         int max_m = -1, double tol = -1.0) {
    IndexReport rep = index_by_sums(op, max_m, tol);
    if (!rep.hypocoercive)
        throw std::domain_error("build_certificate: operator is not hypocoercive");
    HypoCertificate cert;
    cert.m_hc = rep.m_hc;
    cert.kappa = rep.kappa_by_m[rep.m_hc];
    cert.kappa1 = cert.kappa / (rep.m_hc + 1);
    cert.K = compute_K(op, rep.m_hc);
    cert.R = std::max(2.0 * cert.K / cert.kappa1, 1.0);
    cert.L = op.norm_herm() + op.norm_skew();

    EtaPolynomial poly = eta_polynomial(op, rep.m_hc);
    InfimumResult inf = certified_infimum(poly, cert.R, grid);
    const double scale = std::pow(cert.R, 2.0 * rep.m_hc);
    cert.mu_R = inf.sampled / scale;
    cert.mu_R_certified = inf.certified / scale;
    cert.sigma = std::min(cert.kappa1, 2.0 * cert.mu_R);
    cert.sigma_certified = std::min(cert.kappa1, 2.0 * cert.mu_R_certified);
    cert.inf_eta = inf.argmin;
    cert.inf_evals = inf.evals;
    cert.inf_converged = inf.converged;
    return cert;
}

}  // namespace hypocert
