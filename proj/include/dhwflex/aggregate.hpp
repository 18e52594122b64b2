#pragma once

#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dhwflex/thermal.hpp"

namespace dhwflex {

// K-step composition of the per-minute tank dynamics,
//   theta_{k+K} = M theta_k + rowC . zeta_hat + rowD . g_hat,
// with M the product of the a-coefficients, rowC[j] the downstream a-product
// times a_bar at minute j, and rowD = rowC (elementwise*) b.
struct LiftedClusterModel {
    double m_product = 1.0;
    std::vector<double> row_c;
    std::vector<double> row_d;
    int cluster_size = 1;
    double window_len_s = 900.0;

    int step_count() const { return static_cast<int>(row_c.size()); }
    double row_d_sum() const { return std::accumulate(row_d.begin(), row_d.end(), 0.0); }
};

inline LiftedClusterModel lift(std::span<const StepCoefficients> coeffs, int cluster_size,
                               double window_len_s) {
    if (coeffs.empty()) throw std::invalid_argument("lift: empty coefficient sequence");
    const int K = static_cast<int>(coeffs.size());
    LiftedClusterModel m;
    m.cluster_size = cluster_size;
    m.window_len_s = window_len_s;
    m.row_c.assign(K, 0.0);
    m.row_d.assign(K, 0.0);
    // Suffix products of a: row_c[j] = (prod_{k>j} a_k) * a_bar_j.
    double suffix = 1.0;
    for (int j = K - 1; j >= 0; --j) {
        m.row_c[j] = suffix * coeffs[j].a_bar;
        m.row_d[j] = m.row_c[j] * coeffs[j].b;
        suffix *= coeffs[j].a;
    }
    m.m_product = suffix;
    return m;
}

// Per-device lifted step (used by tests and by per-device window predictions).
inline double lifted_device_step(const LiftedClusterModel& m, double theta0,
                                 std::span<const double> zeta_hat, std::span<const double> g_hat) {
    if (static_cast<int>(zeta_hat.size()) != m.step_count() ||
        static_cast<int>(g_hat.size()) != m.step_count())
        throw std::invalid_argument("lifted_device_step: length mismatch");
    double t = m.m_product * theta0;
    for (int j = 0; j < m.step_count(); ++j) t += m.row_c[j] * zeta_hat[j] + m.row_d[j] * g_hat[j];
    return t;
}

struct ClusterState {
    double aggregate_temp_Ccount = 0.0;  // sum of member temperatures
    long quarter_index = 0;
};

// Aggregate window step: Theta' = M Theta + n rowC . zeta_hat + (rowD . 1) pi / dT,
// with pi the cluster energy setpoint in joules spread as constant power.
inline ClusterState cluster_step(const LiftedClusterModel& m, const ClusterState& state,
                                 std::span<const double> zeta_hat, double pi_J) {
    if (pi_J < 0) throw std::invalid_argument("cluster_step: pi must be >= 0");
    if (static_cast<int>(zeta_hat.size()) != m.step_count())
        throw std::invalid_argument("cluster_step: zeta length mismatch");
    double dot_c = 0.0;
    for (int j = 0; j < m.step_count(); ++j) dot_c += m.row_c[j] * zeta_hat[j];
    ClusterState next;
    next.aggregate_temp_Ccount = m.m_product * state.aggregate_temp_Ccount +
                                 m.cluster_size * dot_c + m.row_d_sum() * pi_J / m.window_len_s;
    next.quarter_index = state.quarter_index + 1;
    return next;
}

// Block-diagonal assembly over clusters; there is no cross-cluster coupling,
// so the block model is just the list of per-cluster lifted models.
struct BlockModel {
    std::vector<LiftedClusterModel> blocks;

    int n_clusters() const { return static_cast<int>(blocks.size()); }

    std::vector<ClusterState> apply(const std::vector<ClusterState>& states,
                                    const std::vector<std::vector<double>>& zeta_hats,
                                    const std::vector<double>& pis_J) const {
        if (states.size() != blocks.size() || zeta_hats.size() != blocks.size() ||
            pis_J.size() != blocks.size())
            throw std::invalid_argument("BlockModel::apply: size mismatch");
        std::vector<ClusterState> out(blocks.size());
        for (size_t i = 0; i < blocks.size(); ++i)
            out[i] = cluster_step(blocks[i], states[i], zeta_hats[i], pis_J[i]);
        return out;
    }

    // Dense views of the block-diagonal matrices (tests of the structure).
    std::vector<std::vector<double>> dense_M() const {
        const int n = n_clusters();
        std::vector<std::vector<double>> M(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i) M[i][i] = blocks[i].m_product;
        return M;
    }
    std::vector<std::vector<double>> dense_C() const {
        const int n = n_clusters();
        int total = 0;
        for (const auto& b : blocks) total += b.step_count();
        std::vector<std::vector<double>> C(n, std::vector<double>(total, 0.0));
        int off = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < blocks[i].step_count(); ++j)
                C[i][off + j] = blocks[i].cluster_size * blocks[i].row_c[j];
            off += blocks[i].step_count();
        }
        return C;
    }
    std::vector<std::vector<double>> dense_D() const {
        const int n = n_clusters();
        std::vector<std::vector<double>> D(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i) D[i][i] = blocks[i].row_d_sum() / blocks[i].window_len_s;
        return D;
    }
};

inline BlockModel build_block(std::vector<LiftedClusterModel> models) {
    if (models.empty()) throw std::invalid_argument("build_block: need at least one cluster");
    return BlockModel{std::move(models)};
}

// Constant cluster power over a window given per-cluster energy setpoints.
inline double fleet_power_W(std::span<const double> pis_J, double window_len_s) {
    double sum = 0.0;
    for (double p : pis_J) sum += p;
    return sum / window_len_s;
}

} // namespace dhwflex
