// lyapunov.hpp — The explicit per-mode Lyapunov operator P_η, its dissipation
// inequality against the constructive σ, and aggregation over a truncated
// mode family.

#pragma once

#include "hypocert/index.hpp"
#include "hypocert/linalg.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace hypocert {

// --------------------------- Mode families ------------------------------------

struct ModeFamily {
    WeightedOperator op;        // base split (C_S, C_H)
    std::vector<double> modes;  // E ⊂ ℝ\(−1,1), finite truncation

    static ModeFamily from_range(WeightedOperator op, int lo_abs, int hi_abs) {
        if (lo_abs < 1 || hi_abs < lo_abs)
            throw std::invalid_argument("ModeFamily: range must satisfy 1 ≤ lo ≤ hi");
        ModeFamily fam{std::move(op), {}};
        for (int k = lo_abs; k <= hi_abs; ++k) {
            fam.modes.push_back(static_cast<double>(k));
            fam.modes.push_back(static_cast<double>(-k));
        }
        return fam;
    }

    static ModeFamily from_list(WeightedOperator op, std::vector<double> etas) {
        for (double eta : etas)
            if (std::abs(eta) < 1.0)
                throw std::invalid_argument("ModeFamily: modes inside (−1, 1) are not allowed");
        return ModeFamily{std::move(op), std::move(etas)};
    }
};

// --------------------------- Per-mode blocks ----------------------------------

struct LyapunovBlock {
    double eta = 1.0;
    Matrix P;                    // Σ_{j≤m} η^{−2j} (C_η^⋄)^j C_η^j
    double lambda_min_P = 0.0;   // weighted; ≥ 1 up to tolerance
    double norm_P = 0.0;         // weighted operator norm
    double dissipation = 0.0;    // λ_min of P·C_η + C_η^⋄·P, weighted
};

// The Lyapunov block of the main construction. η = 1 with no rescaling is the
// bounded-case solution P = Σ (C^⋄)^j C^j.
inline LyapunovBlock build_P_eta(const WeightedOperator& op, double eta, int m) {
    if (std::abs(eta) < 1.0)
        throw std::domain_error("build_P_eta: |eta| must be ≥ 1");
    if (m < 0) throw std::invalid_argument("build_P_eta: m must be ≥ 0");
    const Matrix Cs = op.weight.to_standard(op.mode(eta));
    Matrix term = Matrix::Identity(op.dim(), op.dim());
    Matrix sum = term;
    for (int j = 1; j <= m; ++j) {
        term = Cs.adjoint() * term * Cs / (eta * eta);
        sum += term;
    }
    LyapunovBlock block;
    block.eta = eta;
    block.P = op.weight.from_standard(sum);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sum + sum.adjoint()), Eigen::EigenvaluesOnly);
    block.lambda_min_P = es.eigenvalues()(0);
    block.norm_P = es.eigenvalues()(es.eigenvalues().size() - 1);
    Matrix D = sum * Cs + Cs.adjoint() * sum;
    Eigen::SelfAdjointEigenSolver<Matrix> ed(0.5 * (D + D.adjoint()), Eigen::EigenvaluesOnly);
    block.dissipation = ed.eigenvalues()(0);
    return block;
}

struct DissipationCheck {
    bool pass = false;
    double margin = 0.0;  // dissipation − σ
};

// ⟨P_η x, −C_η x⟩ + ⟨−C_η x, P_η x⟩ ≤ −σ‖x‖² ⇔ λ_min(P C_η + C_η^⋄ P) ≥ σ.
inline DissipationCheck verify_dissipation(const LyapunovBlock& block, double sigma,
                                           double tol = 1e-9) {
    DissipationCheck out;
    out.margin = block.dissipation - sigma;
    out.pass = block.dissipation >= sigma - tol;
    return out;
}

// --------------------------- Family certificates -------------------------------

struct FamilyCertificate {
    std::vector<LyapunovBlock> blocks;
    double sigma_numeric = 0.0;       // min over modes of the dissipation λ_min
    double sigma_constructive = 0.0;  // σ from the HypoCertificate
    double norm_bound = 0.0;          // (m+1)·max(1, L^{2m}), uniform over modes
    double max_norm_P = 0.0;
    double min_lambda_min_P = 0.0;
    std::string mode_spec;
    bool uniform_norm_ok = false;
    bool pass = false;
};

// Builds every block of the truncated family, aggregates the numeric σ and
// cross-checks it against the constructive one, and confirms the uniform
// boundedness ‖P_η‖ ≤ (m+1)·max(1, L^{2m}).
inline FamilyCertificate certify_family(const ModeFamily& family, const HypoCertificate& cert,
                                        double truncation = -1.0) {
    if (family.modes.empty())
        throw std::invalid_argument("certify_family: empty mode set");
    FamilyCertificate fc;
    fc.sigma_constructive = cert.sigma;
    fc.norm_bound = (cert.m_hc + 1) * std::max(1.0, std::pow(cert.L, 2.0 * cert.m_hc));
    fc.sigma_numeric = std::numeric_limits<double>::infinity();
    fc.min_lambda_min_P = std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    for (double eta : family.modes) {
        if (truncation > 0.0 && std::abs(eta) > truncation) continue;
        LyapunovBlock block = build_P_eta(family.op, eta, cert.m_hc);
        fc.sigma_numeric = std::min(fc.sigma_numeric, block.dissipation);
        fc.max_norm_P = std::max(fc.max_norm_P, block.norm_P);
        fc.min_lambda_min_P = std::min(fc.min_lambda_min_P, block.lambda_min_P);
        fc.blocks.push_back(std::move(block));
        ++used;
    }
    if (used == 0)
        throw std::invalid_argument("certify_family: truncation removed every mode");
    fc.mode_spec = std::to_string(used) + " modes checked numerically; |η| > " +
                   std::to_string(truncation > 0.0 ? truncation : std::abs(family.modes.back())) +
                   " covered by the constructive bound (κ₁ applies uniformly for |η| ≥ R)";
    fc.uniform_norm_ok = fc.max_norm_P <= fc.norm_bound + 1e-9;
    fc.pass = fc.uniform_norm_ok && fc.min_lambda_min_P >= 1.0 - 1e-10 &&
              fc.sigma_numeric >= fc.sigma_constructive - 1e-9;
    return fc;
}

}  // namespace hypocert
