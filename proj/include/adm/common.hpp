#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace adm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. The CLI maps these to distinct exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Logging, controlled by the ADM_LOG environment variable
// (error < warn < info < debug; default warn).

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("ADM_LOG");
        if (env == nullptr) return LogLevel::Warn;
        std::string s(env);
        if (s == "error" || s == "0") return LogLevel::Error;
        if (s == "warn" || s == "1") return LogLevel::Warn;
        if (s == "info" || s == "2") return LogLevel::Info;
        if (s == "debug" || s == "3") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_msg(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const char* tag = level == LogLevel::Error  ? "error"
                      : level == LogLevel::Warn ? "warn"
                      : level == LogLevel::Info ? "info"
                                                : "debug";
    std::cerr << "[adm:" << tag << "] " << msg << '\n';
}

inline void log_warn(const std::string& msg) { log_msg(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_msg(LogLevel::Debug, msg); }

// ---------------------------------------------------------------------------
// Small numeric helpers shared across the library.

inline void symmetrize(Matrix& m) { m = ((m + m.transpose()) * 0.5).eval(); }

inline Matrix symmetrized(const Matrix& m) { return (m + m.transpose()) * 0.5; }

// Cholesky with an escalating diagonal jitter. The jitter starts at
// `rel_start` times the mean diagonal and grows tenfold until `rel_max`;
// failure past that throws NumericError with `what_failed` in the message.
inline Eigen::LLT<Matrix> chol_with_jitter(const Matrix& m,
                                           const std::string& what_failed,
                                           double rel_start = 1e-6,
                                           double rel_max = 1e-2,
                                           double* jitter_used = nullptr) {
    const double scale = std::max(m.diagonal().mean(), 1e-300);
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) {
        if (jitter_used) *jitter_used = 0.0;
        return llt;
    }
    for (double rel = rel_start; rel <= rel_max * (1.0 + 1e-12); rel *= 10.0) {
        Matrix jittered = m;
        jittered.diagonal().array() += rel * scale;
        llt.compute(jittered);
        if (llt.info() == Eigen::Success) {
            if (jitter_used) *jitter_used = rel * scale;
            return llt;
        }
    }
    throw NumericError("Cholesky factorization failed after jitter escalation: " + what_failed);
}

inline double logdet_from_llt(const Eigen::LLT<Matrix>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Stationary covariance of x_t = A x_{t-1} + q, q ~ N(0, Q):
// solves P = A P A^T + Q by Kronecker vectorization.
inline Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q) {
    const Eigen::Index n = a.rows();
    Matrix system = Matrix::Identity(n * n, n * n);
    // system -= kron(A, A)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            system.block(i * n, j * n, n, n) -= a(i, j) * a;
    Vector rhs = Eigen::Map<const Vector>(q.data(), n * n);
    Vector sol = system.partialPivLu().solve(rhs);
    Matrix p = Eigen::Map<const Matrix>(sol.data(), n, n);
    symmetrize(p);
    return p;
}

inline double spectral_radius(const Matrix& a) {
    return a.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Seed folding for independent per-stream RNGs (splitmix64 mix).

inline std::uint64_t fold_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return Rng(fold_seed(seed, stream));
}

// ---------------------------------------------------------------------------
// Thread pool free parallel loop: spawns up to `threads` workers over [0, n).
// With threads <= 1 the loop runs inline, giving a deterministic serial order.

inline int default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    const int workers = std::min<std::size_t>(std::max(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next(0);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<bool> failed(false);
    std::exception_ptr error;
    std::mutex error_mu;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load(std::memory_order_relaxed)) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::string format_shape(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

}  // namespace adm
