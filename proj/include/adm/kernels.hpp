#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "adm/common.hpp"

namespace adm {

// Stationary temporal kernels evaluated as N x N cross-covariance blocks at a
// real lag tau (units: time bins). Single-output kinds have N = 1. All blocks
// satisfy K(-tau) = K(tau)^T.

enum class KernelKind { Exp, Matern32, SE, RQ, SM, MOSE, MOSM, CSM, LMC };

inline const char* kernel_kind_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::Exp: return "exp";
        case KernelKind::Matern32: return "matern32";
        case KernelKind::SE: return "se";
        case KernelKind::RQ: return "rq";
        case KernelKind::SM: return "sm";
        case KernelKind::MOSE: return "mose";
        case KernelKind::MOSM: return "mosm";
        case KernelKind::CSM: return "csm";
        case KernelKind::LMC: return "lmc";
    }
    return "?";
}

inline KernelKind kernel_kind_from_name(const std::string& name) {
    for (KernelKind k : {KernelKind::Exp, KernelKind::Matern32, KernelKind::SE, KernelKind::RQ,
                         KernelKind::SM, KernelKind::MOSE, KernelKind::MOSM, KernelKind::CSM,
                         KernelKind::LMC}) {
        if (name == kernel_kind_name(k)) return k;
    }
    throw ConfigError("unknown kernel kind: " + name);
}

// Markov order used by the state-space conversion of each kernel family.
inline int recommended_order(KernelKind kind) {
    switch (kind) {
        case KernelKind::Exp: return 1;
        case KernelKind::Matern32: return 2;
        case KernelKind::SE: return 2;
        case KernelKind::RQ: return 4;
        case KernelKind::SM: return 2;
        case KernelKind::MOSE: return 2;
        case KernelKind::MOSM: return 2;
        case KernelKind::CSM: return 4;
        case KernelKind::LMC: return 2;  // SE base kernels
    }
    throw ConfigError("unknown kernel kind");
}

// --------------------------------------------------------------------------
// Parameter bundles.

struct ExpParams {
    double variance = 1.0;
    double length = 1.0;
};

struct Matern32Params {
    double variance = 1.0;
    double length = 1.0;
};

struct SeParams {
    double variance = 1.0;
    double length = 1.0;
};

struct RqParams {
    double variance = 1.0;
    double length = 1.0;
    double shape = 1.0;  // alpha
};

struct SmComponent {
    double variance = 1.0;
    double length = 1.0;
    double frequency = 0.0;  // rad per bin
};

struct SmParams {
    std::vector<SmComponent> components;
};

// Shared process delayed per output: K_ij(tau) = exp(-(tau + d_j - d_i)^2 / (2 l^2)).
// delays[0] == 0 anchors identifiability; unit amplitude (scale lives in the
// factor loading).
struct MoseParams {
    Vector delays;
    double length = 1.0;
};

// One spectral component of a delayed, amplitude-scaled shared process:
// K_ij(tau) += a_i a_j exp(-(tau + th_ij)^2 / (2 l^2)) cos(w (tau + th_ij)),
// th_ij = d_j - d_i. Positive semidefinite by construction.
struct MosmComponent {
    Vector amplitudes;
    Vector delays;
    double length = 1.0;
    double frequency = 0.0;
};

struct MosmParams {
    std::vector<MosmComponent> components;
};

// Phasor component: K_ij(tau) += sum_r a_ir a_jr exp(-tau^2/(2 l^2))
//                                 cos(w tau + phi_ir - phi_jr).
struct CsmComponent {
    Matrix amplitudes;  // outputs x R
    Matrix phases;      // outputs x R
    double length = 1.0;
    double frequency = 0.0;
};

struct CsmParams {
    std::vector<CsmComponent> components;
};

// K(tau) = sum_q B_q * k_q(tau) with PSD coregionalization matrices B_q and
// SE base kernels k_q.
struct LmcTerm {
    Matrix coregionalization;
    double length = 1.0;
};

struct LmcParams {
    std::vector<LmcTerm> terms;
};

namespace detail {

inline void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw ConfigError(std::string("kernel parameter not finite: ") + name);
}

inline void require_positive(double v, const char* name) {
    require_finite(v, name);
    if (v <= 0.0) throw ConfigError(std::string("kernel parameter must be positive: ") + name);
}

inline void require_finite(const Matrix& m, const char* name) {
    if (!m.allFinite()) throw ConfigError(std::string("kernel parameter not finite: ") + name);
}

inline double se_profile(double tau, double length) {
    const double z = tau / length;
    return std::exp(-0.5 * z * z);
}

}  // namespace detail

// --------------------------------------------------------------------------

class LagBlockKernel {
public:
    static LagBlockKernel exponential(double variance, double length) {
        detail::require_positive(variance, "variance");
        detail::require_positive(length, "length");
        return LagBlockKernel(ExpParams{variance, length});
    }

    static LagBlockKernel matern32(double variance, double length) {
        detail::require_positive(variance, "variance");
        detail::require_positive(length, "length");
        return LagBlockKernel(Matern32Params{variance, length});
    }

    static LagBlockKernel se(double variance, double length) {
        detail::require_positive(variance, "variance");
        detail::require_positive(length, "length");
        return LagBlockKernel(SeParams{variance, length});
    }

    static LagBlockKernel rq(double variance, double length, double shape) {
        detail::require_positive(variance, "variance");
        detail::require_positive(length, "length");
        detail::require_positive(shape, "shape");
        return LagBlockKernel(RqParams{variance, length, shape});
    }

    static LagBlockKernel sm(std::vector<SmComponent> components) {
        if (components.empty()) throw ConfigError("sm kernel needs at least one component");
        for (const auto& c : components) {
            detail::require_positive(c.variance, "variance");
            detail::require_positive(c.length, "length");
            detail::require_finite(c.frequency, "frequency");
        }
        return LagBlockKernel(SmParams{std::move(components)});
    }

    static LagBlockKernel mose(Vector delays, double length) {
        if (delays.size() < 1) throw ConfigError("mose kernel needs at least one output");
        detail::require_finite(Matrix(delays), "delays");
        detail::require_positive(length, "length");
        if (delays(0) != 0.0) throw ConfigError("mose delays must be anchored: delays[0] == 0");
        return LagBlockKernel(MoseParams{std::move(delays), length});
    }

    static LagBlockKernel mosm(std::vector<MosmComponent> components) {
        if (components.empty()) throw ConfigError("mosm kernel needs at least one component");
        const Eigen::Index n = components.front().amplitudes.size();
        for (const auto& c : components) {
            if (c.amplitudes.size() != n || c.delays.size() != n)
                throw ConfigError("mosm components disagree on output count");
            detail::require_finite(Matrix(c.amplitudes), "amplitudes");
            detail::require_finite(Matrix(c.delays), "delays");
            detail::require_positive(c.length, "length");
            detail::require_finite(c.frequency, "frequency");
        }
        return LagBlockKernel(MosmParams{std::move(components)});
    }

    static LagBlockKernel csm(std::vector<CsmComponent> components) {
        if (components.empty()) throw ConfigError("csm kernel needs at least one component");
        const Eigen::Index n = components.front().amplitudes.rows();
        for (const auto& c : components) {
            if (c.amplitudes.rows() != n || c.phases.rows() != n ||
                c.amplitudes.cols() != c.phases.cols())
                throw ConfigError("csm component shape mismatch");
            detail::require_finite(c.amplitudes, "amplitudes");
            detail::require_finite(c.phases, "phases");
            detail::require_positive(c.length, "length");
            detail::require_finite(c.frequency, "frequency");
        }
        return LagBlockKernel(CsmParams{std::move(components)});
    }

    static LagBlockKernel lmc(std::vector<LmcTerm> terms) {
        if (terms.empty()) throw ConfigError("lmc kernel needs at least one term");
        const Eigen::Index n = terms.front().coregionalization.rows();
        for (const auto& t : terms) {
            const Matrix& b = t.coregionalization;
            if (b.rows() != n || b.cols() != n)
                throw ConfigError("lmc coregionalization shape mismatch");
            detail::require_finite(b, "coregionalization");
            if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + b.cwiseAbs().maxCoeff()))
                throw ConfigError("lmc coregionalization must be symmetric");
            Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(b));
            if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + b.cwiseAbs().maxCoeff()))
                throw ConfigError("lmc coregionalization must be positive semidefinite");
            detail::require_positive(t.length, "length");
        }
        return LagBlockKernel(LmcParams{std::move(terms)});
    }

    KernelKind kind() const { return static_cast<KernelKind>(params_.index()); }

    int outputs() const {
        switch (kind()) {
            case KernelKind::MOSE: return static_cast<int>(std::get<MoseParams>(params_).delays.size());
            case KernelKind::MOSM:
                return static_cast<int>(std::get<MosmParams>(params_).components.front().amplitudes.size());
            case KernelKind::CSM:
                return static_cast<int>(std::get<CsmParams>(params_).components.front().amplitudes.rows());
            case KernelKind::LMC:
                return static_cast<int>(std::get<LmcParams>(params_).terms.front().coregionalization.rows());
            default: return 1;
        }
    }

    int order() const { return recommended_order(kind()); }

    // Closed-form cross-covariance block at lag tau.
    Matrix eval_block(double tau) const {
        if (!std::isfinite(tau)) throw ConfigError("kernel lag must be finite");
        switch (kind()) {
            case KernelKind::Exp: {
                const auto& p = std::get<ExpParams>(params_);
                return scalar_block(p.variance * std::exp(-std::abs(tau) / p.length));
            }
            case KernelKind::Matern32: {
                const auto& p = std::get<Matern32Params>(params_);
                const double z = std::sqrt(3.0) * std::abs(tau) / p.length;
                return scalar_block(p.variance * (1.0 + z) * std::exp(-z));
            }
            case KernelKind::SE: {
                const auto& p = std::get<SeParams>(params_);
                return scalar_block(p.variance * detail::se_profile(tau, p.length));
            }
            case KernelKind::RQ: {
                const auto& p = std::get<RqParams>(params_);
                const double q = 1.0 + tau * tau / (2.0 * p.shape * p.length * p.length);
                return scalar_block(p.variance * std::pow(q, -p.shape));
            }
            case KernelKind::SM: {
                const auto& p = std::get<SmParams>(params_);
                double v = 0.0;
                for (const auto& c : p.components)
                    v += c.variance * detail::se_profile(tau, c.length) * std::cos(c.frequency * tau);
                return scalar_block(v);
            }
            case KernelKind::MOSE: {
                const auto& p = std::get<MoseParams>(params_);
                const Eigen::Index n = p.delays.size();
                Matrix block(n, n);
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = 0; j < n; ++j) {
                        const double shifted = tau + (p.delays(j) - p.delays(i));
                        block(i, j) = detail::se_profile(shifted, p.length);
                    }
                return block;
            }
            case KernelKind::MOSM: {
                const auto& p = std::get<MosmParams>(params_);
                const Eigen::Index n = p.components.front().amplitudes.size();
                Matrix block = Matrix::Zero(n, n);
                for (const auto& c : p.components)
                    for (Eigen::Index i = 0; i < n; ++i)
                        for (Eigen::Index j = 0; j < n; ++j) {
                            const double shifted = tau + (c.delays(j) - c.delays(i));
                            block(i, j) += c.amplitudes(i) * c.amplitudes(j) *
                                           detail::se_profile(shifted, c.length) *
                                           std::cos(c.frequency * shifted);
                        }
                return block;
            }
            case KernelKind::CSM: {
                const auto& p = std::get<CsmParams>(params_);
                const Eigen::Index n = p.components.front().amplitudes.rows();
                Matrix block = Matrix::Zero(n, n);
                for (const auto& c : p.components) {
                    const double envelope = detail::se_profile(tau, c.length);
                    for (Eigen::Index r = 0; r < c.amplitudes.cols(); ++r)
                        for (Eigen::Index i = 0; i < n; ++i)
                            for (Eigen::Index j = 0; j < n; ++j)
                                block(i, j) += c.amplitudes(i, r) * c.amplitudes(j, r) * envelope *
                                               std::cos(c.frequency * tau + c.phases(i, r) - c.phases(j, r));
                }
                return block;
            }
            case KernelKind::LMC: {
                const auto& p = std::get<LmcParams>(params_);
                const Eigen::Index n = p.terms.front().coregionalization.rows();
                Matrix block = Matrix::Zero(n, n);
                for (const auto& t : p.terms)
                    block += t.coregionalization * detail::se_profile(tau, t.length);
                return block;
            }
        }
        throw ConfigError("unknown kernel kind");
    }

    const ExpParams& exp_params() const { return std::get<ExpParams>(params_); }
    const Matern32Params& matern32_params() const { return std::get<Matern32Params>(params_); }
    const SeParams& se_params() const { return std::get<SeParams>(params_); }
    const RqParams& rq_params() const { return std::get<RqParams>(params_); }
    const SmParams& sm_params() const { return std::get<SmParams>(params_); }
    const MoseParams& mose_params() const { return std::get<MoseParams>(params_); }
    const MosmParams& mosm_params() const { return std::get<MosmParams>(params_); }
    const CsmParams& csm_params() const { return std::get<CsmParams>(params_); }
    const LmcParams& lmc_params() const { return std::get<LmcParams>(params_); }

private:
    using ParamsVariant = std::variant<ExpParams, Matern32Params, SeParams, RqParams, SmParams,
                                       MoseParams, MosmParams, CsmParams, LmcParams>;
    // Variant order must match KernelKind order; kind() relies on it.
    static_assert(static_cast<int>(KernelKind::LMC) == 8);

    explicit LagBlockKernel(ParamsVariant params) : params_(std::move(params)) {}

    Matrix scalar_block(double v) const {
        Matrix m(1, 1);
        m(0, 0) = v;
        return m;
    }

    ParamsVariant params_;
};

// --------------------------------------------------------------------------
// Block-Toeplitz Gram matrix over a uniform time grid (NT x NT, time-major).

inline Matrix gram_matrix(const LagBlockKernel& kernel, const std::vector<double>& times) {
    if (times.empty()) throw DataError("gram grid is empty");
    const int t_count = static_cast<int>(times.size());
    if (t_count > 1) {
        const double step = times[1] - times[0];
        if (step <= 0.0) throw DataError("gram grid must be strictly increasing");
        for (int s = 1; s < t_count; ++s) {
            const double d = times[s] - times[s - 1];
            if (std::abs(d - step) > 1e-9 * std::max(1.0, std::abs(step)))
                throw DataError("gram grid must be uniformly spaced");
        }
    }
    const int n = kernel.outputs();
    const double step = t_count > 1 ? times[1] - times[0] : 1.0;
    // One block per distinct lag, then tiled.
    std::vector<Matrix> lag_blocks(2 * t_count - 1);
    for (int lag = -(t_count - 1); lag <= t_count - 1; ++lag)
        lag_blocks[lag + t_count - 1] = kernel.eval_block(lag * step);
    Matrix gram(n * t_count, n * t_count);
    for (int s = 0; s < t_count; ++s)
        for (int t = 0; t < t_count; ++t)
            gram.block(s * n, t * n, n, n) = lag_blocks[(s - t) + t_count - 1];
    return gram;
}

inline Matrix gram_matrix(const LagBlockKernel& kernel, int t_count) {
    std::vector<double> times(static_cast<std::size_t>(t_count));
    for (int t = 0; t < t_count; ++t) times[static_cast<std::size_t>(t)] = t;
    return gram_matrix(kernel, times);
}

// Cholesky of a Gram matrix with the standard base jitter of 1e-6 times the
// mean diagonal, escalating if needed.
inline Eigen::LLT<Matrix> gram_cholesky(const Matrix& gram, double* jitter_used = nullptr) {
    Matrix jittered = gram;
    const double base = 1e-6 * std::max(gram.diagonal().mean(), 1e-300);
    jittered.diagonal().array() += base;
    auto llt = chol_with_jitter(jittered, "gram matrix", 1e-6, 1e-2, jitter_used);
    if (jitter_used) *jitter_used += base;
    return llt;
}

}  // namespace adm
