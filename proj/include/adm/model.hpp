#pragma once

#include <numeric>
#include <vector>

#include "adm/common.hpp"
#include "adm/kernels.hpp"
#include "adm/ssm_convert.hpp"

namespace adm {

// Joint latent model: m_a across-region groups (delayed shared processes,
// MOSE kernels, possibly time-varying delays) plus m_w within-region groups
// (independent scalar SE chains per region), observed through a
// block-diagonal factor-analysis emission.

struct LatentLayout {
    int regions = 0;        // N
    int across_groups = 0;  // m_a
    int within_groups = 0;  // m_w
    int order = 0;          // P
    std::vector<int> region_dims;
    int bins = 0;  // T

    int groups_per_region() const { return across_groups + within_groups; }  // M
    int latent_count() const { return groups_per_region() * regions; }       // MN
    int state_dim() const { return groups_per_region() * regions * order; }
    int obs_dim() const { return std::accumulate(region_dims.begin(), region_dims.end(), 0); }

    int region_offset(int region) const {
        return std::accumulate(region_dims.begin(), region_dims.begin() + region, 0);
    }

    // State coordinate holding the current value of latent group m in
    // `region`. Across groups stack first (N current values each), then
    // within-group chains of length `order` per region.
    int current_state_index(int region, int m) const {
        if (m < across_groups) return m * regions * order + region;
        const int w = m - across_groups;
        return across_groups * regions * order + (w * regions + region) * order;
    }

    void validate() const {
        if (regions < 1) throw ConfigError("layout: need at least one region");
        if (across_groups < 0 || within_groups < 0) throw ConfigError("layout: negative group count");
        if (across_groups + within_groups < 1) throw ConfigError("layout: need at least one latent group");
        if (order < 1) throw ConfigError("layout: order must be >= 1");
        if (static_cast<int>(region_dims.size()) != regions)
            throw ConfigError("layout: region_dims size mismatch");
        for (int d : region_dims)
            if (d < 0) throw ConfigError("layout: negative region dim");
        if (bins < 1) throw ConfigError("layout: need at least one time bin");
    }
};

struct FaParams {
    std::vector<Matrix> region_loadings;  // region i: dims_i x M
    Vector bias;                          // D
    Vector noise_var;                     // D, diagonal of V

    // Dense D x MN block-diagonal loading; latent order is region-major.
    Matrix dense_loading(const LatentLayout& layout) const {
        const int m = layout.groups_per_region();
        Matrix c = Matrix::Zero(layout.obs_dim(), layout.latent_count());
        for (int i = 0; i < layout.regions; ++i)
            c.block(layout.region_offset(i), i * m, layout.region_dims[static_cast<std::size_t>(i)], m) =
                region_loadings[static_cast<std::size_t>(i)];
        return c;
    }

    void validate(const LatentLayout& layout) const {
        if (static_cast<int>(region_loadings.size()) != layout.regions)
            throw ConfigError("fa: loading block count mismatch");
        for (int i = 0; i < layout.regions; ++i) {
            const Matrix& b = region_loadings[static_cast<std::size_t>(i)];
            if (b.rows() != layout.region_dims[static_cast<std::size_t>(i)] ||
                b.cols() != layout.groups_per_region())
                throw ConfigError("fa: loading block shape mismatch for region " + std::to_string(i));
        }
        if (bias.size() != layout.obs_dim()) throw ConfigError("fa: bias size mismatch");
        if (noise_var.size() != layout.obs_dim()) throw ConfigError("fa: noise size mismatch");
        if ((noise_var.array() < 0.0).any()) throw ConfigError("fa: negative observation noise");
    }
};

struct AcrossGroup {
    Matrix delays;  // T x N, column 0 identically zero
    double length_scale = 1.0;
    std::vector<CompanionSsm> ssms;  // one per timestep
};

struct WithinGroup {
    double length_scale = 1.0;
    CompanionSsm chain;  // scalar SE chain shared by every region in the group
};

struct TrialSet {
    std::vector<Matrix> trials;  // each D x T
    double bin_width = 1.0;      // seconds per bin
    std::vector<int> region_dims;

    int count() const { return static_cast<int>(trials.size()); }
    int dims() const { return trials.empty() ? 0 : static_cast<int>(trials.front().rows()); }
    int bins() const { return trials.empty() ? 0 : static_cast<int>(trials.front().cols()); }

    void validate() const {
        if (trials.empty()) throw DataError("trial set is empty");
        const auto rows = trials.front().rows();
        const auto cols = trials.front().cols();
        for (const auto& tr : trials) {
            if (tr.rows() != rows || tr.cols() != cols)
                throw DataError("trial shape mismatch: " + format_shape(tr));
            if (!tr.allFinite()) throw DataError("trial contains non-finite values");
        }
        if (std::accumulate(region_dims.begin(), region_dims.end(), 0) != rows)
            throw DataError("region dims do not sum to the channel count");
    }
};

struct AdmModel {
    LatentLayout layout;
    std::vector<AcrossGroup> across;
    std::vector<WithinGroup> within;
    FaParams fa;
    double stabilizer = 1e-6;

    void rebuild_across(int g, int threads = 1) {
        auto& grp = across[static_cast<std::size_t>(g)];
        grp.ssms = time_varying_family(grp.delays, grp.length_scale, layout.order, stabilizer, threads);
    }

    void rebuild_within(int w) {
        auto& grp = within[static_cast<std::size_t>(w)];
        grp.chain = kernel_to_markovian(LagBlockKernel::se(1.0, grp.length_scale), layout.order,
                                        1e-6, stabilizer);
    }

    void rebuild_all(int threads = 1) {
        for (int g = 0; g < layout.across_groups; ++g) rebuild_across(g, threads);
        for (int w = 0; w < layout.within_groups; ++w) rebuild_within(w);
    }

    void check_time_index(int t) const {
        if (t < 0 || t >= layout.bins) throw ConfigError("timestep out of range: " + std::to_string(t));
    }

    Matrix joint_transition(int t) const {
        check_time_index(t);
        const int s = layout.state_dim();
        const int np = layout.regions * layout.order;
        Matrix a = Matrix::Zero(s, s);
        int off = 0;
        for (const auto& grp : across) {
            a.block(off, off, np, np) = grp.ssms[static_cast<std::size_t>(t)].transition;
            off += np;
        }
        for (const auto& grp : within)
            for (int n = 0; n < layout.regions; ++n) {
                a.block(off, off, layout.order, layout.order) = grp.chain.transition;
                off += layout.order;
            }
        return a;
    }

    Matrix joint_noise(int t) const {
        check_time_index(t);
        const int s = layout.state_dim();
        const int np = layout.regions * layout.order;
        Matrix q = Matrix::Zero(s, s);
        int off = 0;
        for (const auto& grp : across) {
            q.block(off, off, np, np) = grp.ssms[static_cast<std::size_t>(t)].process_noise;
            off += np;
        }
        for (const auto& grp : within)
            for (int n = 0; n < layout.regions; ++n) {
                q.block(off, off, layout.order, layout.order) = grp.chain.process_noise;
                off += layout.order;
            }
        return q;
    }

    // E = C H_joint: row d of the dense loading scattered onto the state
    // coordinates that hold current latent values.
    Matrix emission() const {
        const Matrix dense = fa.dense_loading(layout);
        Matrix e = Matrix::Zero(layout.obs_dim(), layout.state_dim());
        const int m_per = layout.groups_per_region();
        for (int i = 0; i < layout.regions; ++i)
            for (int m = 0; m < m_per; ++m)
                e.col(layout.current_state_index(i, m)) = dense.col(i * m_per + m);
        return e;
    }

    // Stationary prior covariance of the stacked state at t = 0: per group the
    // exact kernel Gram over lags 0..P-1.
    Matrix initial_covariance() const {
        const int s = layout.state_dim();
        const int np = layout.regions * layout.order;
        Matrix p0 = Matrix::Zero(s, s);
        int off = 0;
        for (const auto& grp : across) {
            auto kernel = LagBlockKernel::mose(grp.delays.row(0).transpose(), grp.length_scale);
            p0.block(off, off, np, np) =
                assemble_normal_matrices(build_gram_blocks(kernel, layout.order)).predictor_gram;
            off += np;
        }
        for (const auto& grp : within) {
            auto kernel = LagBlockKernel::se(1.0, grp.length_scale);
            const Matrix block =
                assemble_normal_matrices(build_gram_blocks(kernel, layout.order)).predictor_gram;
            for (int n = 0; n < layout.regions; ++n) {
                p0.block(off, off, layout.order, layout.order) = block;
                off += layout.order;
            }
        }
        symmetrize(p0);
        try {
            gram_cholesky(p0);
        } catch (const NumericError& e) {
            throw NumericError(std::string("initial state covariance not PSD: ") + e.what());
        }
        return p0;
    }

    void validate() const {
        layout.validate();
        if (static_cast<int>(across.size()) != layout.across_groups)
            throw ConfigError("model: across group count mismatch");
        if (static_cast<int>(within.size()) != layout.within_groups)
            throw ConfigError("model: within group count mismatch");
        for (const auto& grp : across) {
            if (grp.delays.rows() != layout.bins || grp.delays.cols() != layout.regions)
                throw ConfigError("model: delay trajectory shape mismatch");
            if (grp.delays.col(0).cwiseAbs().maxCoeff() != 0.0)
                throw ConfigError("model: delays of region 0 must stay zero");
            if (static_cast<int>(grp.ssms.size()) != layout.bins)
                throw ConfigError("model: group not rebuilt to T timesteps");
        }
        fa.validate(layout);
    }
};

struct JointTriple {
    Matrix transition;
    Matrix noise;
    Matrix emission;
};

inline JointTriple assemble_joint(const AdmModel& model, int t) {
    return JointTriple{model.joint_transition(t), model.joint_noise(t), model.emission()};
}

struct StationaryInitial {
    Vector mean;
    Matrix cov;
};

inline StationaryInitial stationary_initial(const AdmModel& model) {
    return StationaryInitial{Vector::Zero(model.layout.state_dim()), model.initial_covariance()};
}

// --------------------------------------------------------------------------
// Forward simulation.

struct SimulationResult {
    TrialSet data;
    std::vector<Matrix> latents;  // per trial: MN x T current latent values
};

inline SimulationResult simulate(const AdmModel& model, int trial_count, std::uint64_t seed,
                                 int threads = 1) {
    model.validate();
    if (trial_count < 1) throw ConfigError("simulate: need at least one trial");
    const int s = model.layout.state_dim();
    const int t_count = model.layout.bins;
    const int d_count = model.layout.obs_dim();
    const int mn = model.layout.latent_count();

    const Matrix emission = model.emission();
    const Matrix p0 = model.initial_covariance();
    const Matrix p0_chol = gram_cholesky(p0).matrixL();

    std::vector<Matrix> transitions(static_cast<std::size_t>(t_count));
    std::vector<Matrix> noise_chols(static_cast<std::size_t>(t_count));
    for (int t = 1; t < t_count; ++t) {
        transitions[static_cast<std::size_t>(t)] = model.joint_transition(t);
        noise_chols[static_cast<std::size_t>(t)] =
            Matrix(chol_with_jitter(model.joint_noise(t), "process noise").matrixL());
    }

    std::vector<int> current(static_cast<std::size_t>(mn));
    const int m_per = model.layout.groups_per_region();
    for (int i = 0; i < model.layout.regions; ++i)
        for (int m = 0; m < m_per; ++m)
            current[static_cast<std::size_t>(i * m_per + m)] = model.layout.current_state_index(i, m);

    const Vector noise_sd = model.fa.noise_var.cwiseSqrt();

    SimulationResult out;
    out.data.trials.resize(static_cast<std::size_t>(trial_count));
    out.data.bin_width = 1.0;
    out.data.region_dims = model.layout.region_dims;
    out.latents.resize(static_cast<std::size_t>(trial_count));

    parallel_for(static_cast<std::size_t>(trial_count), threads, [&](std::size_t r) {
        Rng rng = make_rng(seed, r);
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto draw = [&](Eigen::Index n) {
            Vector v(n);
            for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(rng);
            return v;
        };

        Matrix obs(d_count, t_count);
        Matrix lat(mn, t_count);
        Vector state = p0_chol * draw(s);
        for (int t = 0; t < t_count; ++t) {
            if (t > 0)
                state = transitions[static_cast<std::size_t>(t)] * state +
                        noise_chols[static_cast<std::size_t>(t)] * draw(s);
            for (int k = 0; k < mn; ++k) lat(k, t) = state(current[static_cast<std::size_t>(k)]);
            obs.col(t) = emission * state + model.fa.bias + noise_sd.cwiseProduct(draw(d_count));
        }
        out.data.trials[r] = std::move(obs);
        out.latents[r] = std::move(lat);
    });
    return out;
}

}  // namespace adm
