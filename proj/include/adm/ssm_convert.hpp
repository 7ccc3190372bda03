#pragma once

#include <sstream>
#include <utility>
#include <vector>

#include "adm/common.hpp"
#include "adm/kernels.hpp"

namespace adm {

// Conversion of a stationary lag-block kernel into a companion-form Markovian
// state-space model. The order-P vector autoregression implied by the kernel
// (least squares on exact covariances) is stacked into a first-order system.

struct GramBlocks {
    int outputs = 0;
    int order = 0;
    std::vector<Matrix> blocks;  // lag tau in [-P+1, P] stored at tau + P - 1

    const Matrix& at(int lag) const { return blocks.at(static_cast<std::size_t>(lag + order - 1)); }
};

struct MultiOrderSsm {
    std::vector<Matrix> coeffs;  // A_1 .. A_P, each N x N
    Matrix noise;                // N x N, symmetric PSD
};

struct CompanionSsm {
    int outputs = 0;  // N
    int order = 0;    // P
    Matrix transition;     // NP x NP, controllable canonical layout
    Matrix process_noise;  // NP x NP, blockdiag(Q, sigma I)
    double stabilizer = 0.0;
    double spectral_radius_value = 0.0;

    int state_dim() const { return outputs * order; }

    Matrix output_mask() const {
        Matrix h = Matrix::Zero(outputs, state_dim());
        h.leftCols(outputs) = Matrix::Identity(outputs, outputs);
        return h;
    }
};

inline GramBlocks build_gram_blocks(const LagBlockKernel& kernel, int order) {
    if (order < 1) throw ConfigError("ssm order must be >= 1");
    GramBlocks gb;
    gb.outputs = kernel.outputs();
    gb.order = order;
    gb.blocks.resize(static_cast<std::size_t>(2 * order));
    for (int lag = -order + 1; lag <= order; ++lag)
        gb.blocks[static_cast<std::size_t>(lag + order - 1)] = kernel.eval_block(lag);
    return gb;
}

struct NormalMatrices {
    Matrix predictor_gram;  // Vg: NP x NP block Toeplitz of lags 0..P-1
    Matrix target_cross;    // Wg: N x NP, [K(P) K(P-1) ... K(1)]
    Matrix target_gram;     // K(0)
};

inline NormalMatrices assemble_normal_matrices(const GramBlocks& gb) {
    const int n = gb.outputs;
    const int p = gb.order;
    NormalMatrices nm;
    nm.predictor_gram.resize(n * p, n * p);
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c)
            nm.predictor_gram.block(r * n, c * n, n, n) = gb.at(r - c);
    nm.target_cross.resize(n, n * p);
    for (int c = 0; c < p; ++c) nm.target_cross.middleCols(c * n, n) = gb.at(p - c);
    nm.target_gram = gb.at(0);
    return nm;
}

// Least squares transition fit through a joint Cholesky factor:
//   D = [Vg Wg^T; Wg K0],  D = L L^T,  G = L2 L1^{-1},  Q = L3 L3^T.
// G columns hold [A_P ... A_1]; they are reversed into coeffs A_1 .. A_P.
inline MultiOrderSsm solve_transition(const NormalMatrices& nm, double jitter_rel = 1e-6) {
    const int n = static_cast<int>(nm.target_gram.rows());
    const int np = static_cast<int>(nm.predictor_gram.rows());
    const int p = np / n;
    Matrix joint(np + n, np + n);
    joint.topLeftCorner(np, np) = nm.predictor_gram;
    joint.topRightCorner(np, n) = nm.target_cross.transpose();
    joint.bottomLeftCorner(n, np) = nm.target_cross;
    joint.bottomRightCorner(n, n) = nm.target_gram;
    symmetrize(joint);

    auto llt = chol_with_jitter(joint, "transition normal equations", jitter_rel, 1e-2);
    Matrix l = llt.matrixL();
    const Matrix l1 = l.topLeftCorner(np, np);
    const Matrix l2 = l.bottomLeftCorner(n, np);
    const Matrix l3 = l.bottomRightCorner(n, n);

    // G = L2 L1^{-1} via a triangular solve on the transpose.
    Matrix g = l1.triangularView<Eigen::Lower>().transpose().solve(l2.transpose()).transpose();

    MultiOrderSsm out;
    out.coeffs.resize(static_cast<std::size_t>(p));
    for (int c = 0; c < p; ++c)
        out.coeffs[static_cast<std::size_t>(p - 1 - c)] = g.middleCols(c * n, n);
    out.noise = symmetrized(l3 * l3.transpose());
    return out;
}

inline CompanionSsm to_companion(const MultiOrderSsm& m, double stabilizer = 1e-6) {
    if (stabilizer <= 0.0) throw ConfigError("companion stabilizer must be positive");
    const int p = static_cast<int>(m.coeffs.size());
    const int n = static_cast<int>(m.noise.rows());
    for (const auto& a : m.coeffs)
        if (a.rows() != n || a.cols() != n)
            throw NumericError("transition block shape mismatch: " + format_shape(a));

    CompanionSsm ssm;
    ssm.outputs = n;
    ssm.order = p;
    ssm.stabilizer = stabilizer;
    ssm.transition = Matrix::Zero(n * p, n * p);
    for (int c = 0; c < p; ++c)
        ssm.transition.block(0, c * n, n, n) = m.coeffs[static_cast<std::size_t>(c)];
    for (int r = 1; r < p; ++r)
        ssm.transition.block(r * n, (r - 1) * n, n, n) = Matrix::Identity(n, n);

    ssm.process_noise = Matrix::Zero(n * p, n * p);
    ssm.process_noise.topLeftCorner(n, n) = m.noise;
    if (p > 1)
        ssm.process_noise.bottomRightCorner(n * (p - 1), n * (p - 1)) =
            stabilizer * Matrix::Identity(n * (p - 1), n * (p - 1));

    ssm.spectral_radius_value = spectral_radius(ssm.transition);
    if (ssm.spectral_radius_value >= 1.0) {
        std::ostringstream os;
        os << "companion transition spectral radius " << ssm.spectral_radius_value << " >= 1";
        log_warn(os.str());
    }
    return ssm;
}

inline CompanionSsm kernel_to_markovian(const LagBlockKernel& kernel, int order,
                                        double jitter_rel = 1e-6, double stabilizer = 1e-6) {
    return to_companion(solve_transition(assemble_normal_matrices(build_gram_blocks(kernel, order)),
                                         jitter_rel),
                        stabilizer);
}

// Per-timestep MOSE conversions for a delay trajectory (T x N, column n the
// delay of output n at each step; column 0 identically zero). The length
// scale is shared across time.
inline std::vector<CompanionSsm> time_varying_family(const Matrix& delays, double length_scale,
                                                     int order, double stabilizer = 1e-6,
                                                     int threads = 1) {
    const int t_count = static_cast<int>(delays.rows());
    if (t_count == 0) throw ConfigError("delay trajectory is empty");
    std::vector<CompanionSsm> family(static_cast<std::size_t>(t_count));
    parallel_for(static_cast<std::size_t>(t_count), threads, [&](std::size_t t) {
        try {
            auto kernel = LagBlockKernel::mose(delays.row(static_cast<Eigen::Index>(t)).transpose(),
                                               length_scale);
            family[t] = kernel_to_markovian(kernel, order, 1e-6, stabilizer);
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "conversion failed at timestep " << t << " (delays=[";
            for (Eigen::Index j = 0; j < delays.cols(); ++j)
                os << (j ? "," : "") << delays(static_cast<Eigen::Index>(t), j);
            os << "], l=" << length_scale << "): " << e.what();
            throw NumericError(os.str());
        }
    });
    return family;
}

// Stationary covariance of the companion state and the implied lag-tau output
// covariance (tau >= 0). Used to validate conversions.
inline Matrix companion_stationary_covariance(const CompanionSsm& ssm) {
    return solve_discrete_lyapunov(ssm.transition, ssm.process_noise);
}

inline Matrix companion_lag_output_covariance(const CompanionSsm& ssm, const Matrix& state_cov,
                                              int lag) {
    Matrix shifted = state_cov;
    for (int k = 0; k < lag; ++k) shifted = (ssm.transition * shifted).eval();
    return shifted.topLeftCorner(ssm.outputs, ssm.outputs);
}

}  // namespace adm
