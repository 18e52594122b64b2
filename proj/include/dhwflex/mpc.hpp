#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhwflex/qp.hpp"

namespace dhwflex::mpc {

// One prediction window of one cluster's aggregate dynamics:
//   Theta' = m_coef * Theta + c_offset + (d_sum / window) * pi.
// c_offset already contains n * rowC . zeta_hat; d_sum is the per-device
// rowD . 1 so the pi term matches a uniform spread of the window energy.
struct StageModel {
    double m_coef = 0.99;
    double c_offset_Ccount = 0.0;
    double d_sum_C_per_W = 0.003;
};

struct ClusterSpec {
    std::string name;
    int size = 1;
    double theta0_Ccount = 0.0;   // measured aggregate temperature
    double t_lower_C = 50.0;      // comfort threshold driving the binaries
    double t_upper_C = 85.0;      // hard cap
    double t_hard_lower_C = 45.0;
    double p_max_W = 2500.0;      // per-device power bound
    int sigma0 = 1;               // known first-stage binary
    std::vector<StageModel> stages;

    double capacity_J(double window_s) const { return window_s * p_max_W * size; }
};

struct MiqpProblem {
    double window_s = 900.0;
    int horizon = 4;
    std::vector<ClusterSpec> clusters;
    // Tracking data per stage (fleet totals, W).
    std::vector<double> baseline_W;
    std::vector<double> wind_dayahead_W;
    std::vector<double> wind_short_W;
    double epsilon_Ccount = 1e-3;
    double big_m_theta_Ccount = 0.0;  // 0 -> default 10 * n * (upper - hard_lower)

    int n_clusters() const { return static_cast<int>(clusters.size()); }
    int n_binaries() const { return n_clusters() * (horizon - 1); }

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
        if (clusters.empty()) throw std::invalid_argument("need at least one cluster");
        if (static_cast<int>(baseline_W.size()) != horizon ||
            static_cast<int>(wind_dayahead_W.size()) != horizon ||
            static_cast<int>(wind_short_W.size()) != horizon)
            throw std::invalid_argument("tracking vectors must have horizon entries");
        for (const auto& c : clusters) {
            if (c.size < 1 || c.p_max_W <= 0) throw std::invalid_argument("bad cluster spec");
            if (static_cast<int>(c.stages.size()) != horizon)
                throw std::invalid_argument("cluster needs one stage model per horizon step");
            if (!(c.t_hard_lower_C < c.t_lower_C && c.t_lower_C < c.t_upper_C))
                throw std::invalid_argument("cluster bounds out of order");
            if (c.sigma0 != 0 && c.sigma0 != 1) throw std::invalid_argument("sigma0 must be 0/1");
        }
        if (epsilon_Ccount <= 0) throw std::invalid_argument("epsilon must be > 0");
    }

    double big_m_for(const ClusterSpec& c) const {
        return big_m_theta_Ccount > 0 ? big_m_theta_Ccount
                                      : 10.0 * c.size * (c.t_upper_C - c.t_hard_lower_C);
    }

    // Desired fleet power per stage (baseline shifted by the wind forecast error).
    double target_W(int stage) const {
        return baseline_W[stage] + wind_short_W[stage] - wind_dayahead_W[stage];
    }

    double fleet_capacity_W() const {
        double s = 0;
        for (const auto& c : clusters) s += c.p_max_W * c.size;
        return s;
    }
};

enum class MiqpStatus { Optimal, Infeasible, SizeGuard };

struct MiqpSolution {
    MiqpStatus status = MiqpStatus::Infeasible;
    Eigen::MatrixXd pi_J;        // n x horizon
    Eigen::MatrixXi sigma;       // n x (horizon-1), decision binaries
    Eigen::MatrixXd theta_Ccount;  // n x (horizon+1) predicted trajectory
    double objective_W2 = std::numeric_limits<double>::quiet_NaN();
    // Same objective with powers normalised by fleet capacity; use this for
    // near-zero comparisons where W^2 units amplify float noise.
    double objective_scaled = std::numeric_limits<double>::quiet_NaN();
    long nodes = 0;
    int widen_steps = 0;
    double kkt_stationarity = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Internal scaled formulation. Per cluster we work with the per-device average
// temperature and with y = pi / capacity in [0,1]; powers are normalised by
// the fleet capacity. sigma statuses: -1 free, 0, 1.
// ---------------------------------------------------------------------------
namespace detail {

struct ScaledCluster {
    double theta0 = 0;           // per-device C
    double t_lower = 0, t_upper = 0, t_hard_lower = 0;
    double eps = 0;              // epsilon / n
    double big_m = 0;            // bigM / n
    int sigma0 = 1;
    std::vector<double> M, c, h;  // per stage: theta' = M theta + c + h y
    double weight = 0;            // capacity share in the fleet power sum
    double capacity_J = 0;
};

struct Scaled {
    int horizon = 0;
    std::vector<ScaledCluster> cl;
    std::vector<double> target_norm;  // target / fleet capacity
    double fleet_W = 0;
    double window_s = 0;
};

inline Scaled scale_problem(const MiqpProblem& p, double widen_up_C, double widen_down_C) {
    Scaled s;
    s.horizon = p.horizon;
    s.window_s = p.window_s;
    s.fleet_W = p.fleet_capacity_W();
    for (const auto& c : p.clusters) {
        ScaledCluster sc;
        const double n = c.size;
        sc.theta0 = c.theta0_Ccount / n;
        sc.t_lower = c.t_lower_C;
        sc.t_upper = c.t_upper_C + widen_up_C;
        sc.t_hard_lower = c.t_hard_lower_C - widen_down_C;
        sc.eps = p.epsilon_Ccount / n;
        sc.big_m = p.big_m_for(c) / n;
        sc.sigma0 = c.sigma0;
        for (const auto& st : c.stages) {
            sc.M.push_back(st.m_coef);
            sc.c.push_back(st.c_offset_Ccount / n);
            sc.h.push_back(st.d_sum_C_per_W * c.p_max_W);
        }
        sc.weight = c.p_max_W * c.size / s.fleet_W;
        sc.capacity_J = c.capacity_J(p.window_s);
        s.cl.push_back(std::move(sc));
    }
    for (int t = 0; t < p.horizon; ++t) s.target_norm.push_back(p.target_W(t) / s.fleet_W);
    return s;
}

// sigma status of a stage: stage 0 is the known sigma0, later stages come
// from the branching pattern.
inline int stage_status(const ScaledCluster& c, const std::vector<int8_t>& pattern, int cluster,
                        int horizon, int stage) {
    if (stage == 0) return c.sigma0;
    return pattern[cluster * (horizon - 1) + (stage - 1)];
}

struct Interval {
    double lo = 0, hi = 0;
    bool empty(double tol = 1e-12) const { return lo > hi + tol; }
};

// Exact forward interval propagation of the reachable-and-valid per-device
// temperature, including the free-sigma coupling row
//     bigM * y + theta >= t_lower + eps.
// Returns false on emptiness. Also constructs a feasible (theta, y) path.
struct Propagation {
    bool feasible = false;
    std::vector<Interval> reach;    // horizon+1 intervals
    std::vector<double> theta_path; // horizon+1
    std::vector<double> y_path;     // horizon
};

inline Interval state_constraint(const ScaledCluster& c, const std::vector<int8_t>& pattern,
                                 int cluster, int horizon, int stage) {
    Interval s{-1e300, 1e300};
    if (stage >= 1) {
        s.lo = c.t_hard_lower;
        s.hi = c.t_upper;
        if (stage <= horizon - 1) {
            const int st = stage_status(c, pattern, cluster, horizon, stage);
            if (st == 1) s.lo = std::max(s.lo, c.t_lower + c.eps);
            if (st == 0) s.hi = std::min(s.hi, c.t_lower - c.eps);
        }
    }
    return s;
}

inline Propagation propagate(const ScaledCluster& c, const std::vector<int8_t>& pattern,
                             int cluster, int horizon) {
    Propagation out;
    out.reach.assign(horizon + 1, Interval{});
    out.reach[0] = {c.theta0, c.theta0};
    for (int t = 0; t < horizon; ++t) {
        const int st = stage_status(c, pattern, cluster, horizon, t);
        const double ylo = (st == 0) ? 1.0 : 0.0;
        const double yhi = 1.0;
        const bool coupling = (t >= 1) && (st == -1);
        const Interval cur = out.reach[t];
        const double up = c.M[t] * cur.hi + c.c[t] + c.h[t] * yhi;
        double down;
        if (!coupling) {
            down = c.M[t] * cur.lo + c.c[t] + c.h[t] * ylo;
        } else {
            auto eval = [&](double th) {
                const double need = (c.t_lower + c.eps - th) / c.big_m;
                return c.M[t] * th + c.c[t] + c.h[t] * std::max(ylo, need);
            };
            const double kink = std::clamp(c.t_lower + c.eps - ylo * c.big_m, cur.lo, cur.hi);
            down = std::min({eval(cur.lo), eval(cur.hi), eval(kink)});
        }
        Interval next{down, up};
        const Interval sc = state_constraint(c, pattern, cluster, horizon, t + 1);
        next.lo = std::max(next.lo, sc.lo);
        next.hi = std::min(next.hi, sc.hi);
        if (next.empty()) return out;
        out.reach[t + 1] = next;
    }

    // Backward choice of a temperature path, then forward reconstruction of y.
    std::vector<double> target(horizon + 1);
    target[horizon] = 0.5 * (out.reach[horizon].lo + out.reach[horizon].hi);
    for (int t = horizon - 1; t >= 0; --t) {
        const int st = stage_status(c, pattern, cluster, horizon, t);
        const double ylo = (st == 0) ? 1.0 : 0.0;
        const bool coupling = (t >= 1) && (st == -1);
        Interval J = out.reach[t];
        const double tn = target[t + 1];
        if (c.h[t] > 1e-300) {
            // y <= 1  ->  theta >= (tn - c - h) / M
            J.lo = std::max(J.lo, (tn - c.c[t] - c.h[t]) / c.M[t]);
            // y >= ylo -> theta <= (tn - c - h*ylo) / M
            J.hi = std::min(J.hi, (tn - c.c[t] - c.h[t] * ylo) / c.M[t]);
        } else {
            const double v = (tn - c.c[t]) / c.M[t];
            J.lo = std::max(J.lo, v);
            J.hi = std::min(J.hi, v);
        }
        if (coupling) {
            // (tn - c - M th)/h >= (t_lower + eps - th)/bigM
            const double coef = c.h[t] - c.big_m * c.M[t];
            const double rhs = c.h[t] * (c.t_lower + c.eps) - c.big_m * (tn - c.c[t]);
            if (std::abs(coef) > 1e-14) {
                const double v = rhs / coef;
                if (coef > 0) J.lo = std::max(J.lo, v);
                else J.hi = std::min(J.hi, v);
            }
        }
        // In exact arithmetic J is nonempty; the midpoint clamped back into the
        // reachable set absorbs rounding-level emptiness.
        target[t] = std::clamp(0.5 * (J.lo + J.hi), out.reach[t].lo, out.reach[t].hi);
    }
    target[0] = c.theta0;

    out.theta_path.assign(horizon + 1, 0.0);
    out.y_path.assign(horizon, 0.0);
    out.theta_path[0] = c.theta0;
    for (int t = 0; t < horizon; ++t) {
        const int st = stage_status(c, pattern, cluster, horizon, t);
        double ylo = (st == 0) ? 1.0 : 0.0;
        if (t >= 1 && st == -1)
            ylo = std::max(ylo, (c.t_lower + c.eps - out.theta_path[t]) / c.big_m);
        double y = c.h[t] > 1e-300
                       ? (target[t + 1] - c.c[t] - c.M[t] * out.theta_path[t]) / c.h[t]
                       : ylo;
        y = std::clamp(y, ylo, 1.0);
        out.y_path[t] = y;
        out.theta_path[t + 1] = c.M[t] * out.theta_path[t] + c.c[t] + c.h[t] * y;
    }
    out.feasible = true;
    return out;
}

// Affine expression of theta at each stage in the reduced y variables.
struct AffineTheta {
    std::vector<double> base;                 // horizon+1
    std::vector<std::vector<std::pair<int, double>>> terms;  // var index, coefficient
};

} // namespace detail

// Result of one continuous relaxation (sigma free entries projected out
// exactly; fixed entries substituted).
struct RelaxationResult {
    bool feasible = false;
    double objective_W2 = std::numeric_limits<double>::quiet_NaN();
    double objective_scaled = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd pi_J;          // n x horizon
    Eigen::MatrixXd theta_Ccount;  // n x (horizon+1)
    double kkt_stationarity = 0;
    double min_row_slack = 0;
    // Per free binary: the admissible sigma interval at the relaxed optimum.
    struct SigmaInterval {
        int cluster = 0, stage = 0;
        double lo = 0, hi = 1;
    };
    std::vector<SigmaInterval> sigma_intervals;
};

// pattern entries: -1 free, 0 fixed to zero, 1 fixed to one; layout
// cluster-major over stages 1..horizon-1. An empty pattern means all free.
inline RelaxationResult solve_relaxation(const MiqpProblem& p, std::vector<int8_t> pattern = {},
                                         double widen_up_C = 0.0, double widen_down_C = 0.0) {
    p.validate();
    if (pattern.empty()) pattern.assign(p.n_binaries(), -1);
    if (static_cast<int>(pattern.size()) != p.n_binaries())
        throw std::invalid_argument("pattern size mismatch");

    const auto s = detail::scale_problem(p, widen_up_C, widen_down_C);
    const int n = p.n_clusters();
    const int H = p.horizon;

    RelaxationResult out;

    std::vector<detail::Propagation> props(n);
    for (int i = 0; i < n; ++i) {
        props[i] = detail::propagate(s.cl[i], pattern, i, H);
        if (!props[i].feasible) return out;
    }

    // Variable map: y(i,t) free unless its stage binary is fixed to zero.
    std::vector<std::vector<int>> var(n, std::vector<int>(H, -1));
    int nv = 0;
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < H; ++t)
            if (detail::stage_status(s.cl[i], pattern, i, H, t) != 0) var[i][t] = nv++;

    // Affine theta expressions per cluster.
    std::vector<detail::AffineTheta> aff(n);
    for (int i = 0; i < n; ++i) {
        const auto& c = s.cl[i];
        aff[i].base.assign(H + 1, 0.0);
        aff[i].terms.assign(H + 1, {});
        aff[i].base[0] = c.theta0;
        for (int t = 0; t < H; ++t) {
            aff[i].base[t + 1] = c.M[t] * aff[i].base[t] + c.c[t];
            aff[i].terms[t + 1] = aff[i].terms[t];
            for (auto& [idx, coef] : aff[i].terms[t + 1]) coef *= c.M[t];
            if (var[i][t] >= 0)
                aff[i].terms[t + 1].emplace_back(var[i][t], c.h[t]);
            else
                aff[i].base[t + 1] += c.h[t];  // y fixed at 1
        }
    }

    // Rows A y >= b.
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    auto add_row = [&](const Eigen::VectorXd& a, double b) {
        rows.push_back(a);
        rhs.push_back(b);
    };
    auto theta_row = [&](int i, int t, double scale) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
        for (auto& [idx, coef] : aff[i].terms[t]) a[idx] += scale * coef;
        return a;
    };

    for (int i = 0; i < n; ++i) {
        const auto& c = s.cl[i];
        for (int t = 0; t < H; ++t) {
            if (var[i][t] < 0) continue;
            Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
            a[var[i][t]] = 1.0;
            add_row(a, 0.0);    // y >= 0
            add_row(-a, -1.0);  // y <= 1
        }
        for (int t = 1; t <= H; ++t) {
            const int st = (t <= H - 1) ? detail::stage_status(c, pattern, i, H, t) : 2;
            // Hard bounds on predicted states.
            add_row(theta_row(i, t, 1.0), c.t_hard_lower - aff[i].base[t]);
            add_row(theta_row(i, t, -1.0), -(c.t_upper - aff[i].base[t]));
            if (t <= H - 1) {
                if (st == 1) {
                    add_row(theta_row(i, t, 1.0), c.t_lower + c.eps - aff[i].base[t]);
                } else if (st == 0) {
                    add_row(theta_row(i, t, -1.0), -(c.t_lower - c.eps - aff[i].base[t]));
                } else if (st == -1) {
                    // Exact projection of the free binary: bigM y_t + theta_t >= lower+eps.
                    Eigen::VectorXd a = theta_row(i, t, 1.0);
                    a[var[i][t]] += c.big_m;
                    add_row(a, c.t_lower + c.eps - aff[i].base[t]);
                }
            }
        }
    }

    // Objective sum_t (sum_i w_i y_it - target_t)^2 in the reduced variables.
    Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(nv, nv);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(nv);
    double constant = 0.0;
    for (int t = 0; t < H; ++t) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(nv);
        double tgt = s.target_norm[t];
        for (int i = 0; i < n; ++i) {
            if (var[i][t] >= 0) w[var[i][t]] = s.cl[i].weight;
            else tgt -= s.cl[i].weight;  // fixed y = 1 contribution
        }
        Hm += 2.0 * (w * w.transpose());
        q += -2.0 * tgt * w;
        constant += tgt * tgt;
    }

    Eigen::VectorXd y0(nv);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < H; ++t)
            if (var[i][t] >= 0) y0[var[i][t]] = props[i].y_path[t];

    Eigen::MatrixXd A(rows.size(), nv);
    Eigen::VectorXd b(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        A.row(r) = rows[r].transpose();
        b[r] = rhs[r];
    }

    auto qr = qp::solve(Hm, q, A, b, y0);
    if (qr.status == qp::QpStatus::InfeasibleStart || qr.status == qp::QpStatus::Unbounded)
        return out;  // construction guarantees feasibility; treat defensively as infeasible

    out.feasible = true;
    out.objective_scaled = std::max(0.0, qr.objective + constant);
    out.objective_W2 = out.objective_scaled * s.fleet_W * s.fleet_W;
    auto kkt = qp::check_kkt(Hm, q, A, b, qr.y, qr.lambda);
    out.kkt_stationarity = kkt.stationarity;
    out.min_row_slack = kkt.min_slack;

    out.pi_J.resize(n, H);
    out.theta_Ccount.resize(n, H + 1);
    for (int i = 0; i < n; ++i) {
        const auto& c = s.cl[i];
        double th = c.theta0;
        out.theta_Ccount(i, 0) = th * p.clusters[i].size;
        for (int t = 0; t < H; ++t) {
            const double y = var[i][t] >= 0 ? std::clamp(qr.y[var[i][t]], 0.0, 1.0) : 1.0;
            out.pi_J(i, t) = y * c.capacity_J;
            th = c.M[t] * th + c.c[t] + c.h[t] * y;
            out.theta_Ccount(i, t + 1) = th * p.clusters[i].size;
        }
    }

    for (int i = 0; i < n; ++i) {
        const auto& c = s.cl[i];
        for (int t = 1; t <= H - 1; ++t) {
            if (detail::stage_status(c, pattern, i, H, t) != -1) continue;
            const double th = out.theta_Ccount(i, t) / p.clusters[i].size;
            const double y = out.pi_J(i, t) / c.capacity_J;
            RelaxationResult::SigmaInterval si;
            si.cluster = i;
            si.stage = t;
            si.lo = std::max({0.0, (th - c.t_lower + c.eps) / c.big_m, 1.0 - y});
            si.hi = std::min(1.0, (th - c.t_lower - c.eps) / c.big_m + 1.0);
            out.sigma_intervals.push_back(si);
        }
    }
    return out;
}

// Scaled feasibility audit of a candidate solution against every published
// constraint family (dynamics, boxes, big-M rows, hard bounds).
inline double max_violation_scaled(const MiqpProblem& p, const Eigen::MatrixXd& pi_J,
                                   const Eigen::MatrixXi& sigma, double widen_up_C = 0.0,
                                   double widen_down_C = 0.0) {
    const auto s = detail::scale_problem(p, widen_up_C, widen_down_C);
    const int n = p.n_clusters();
    const int H = p.horizon;
    double worst = 0.0;
    auto track = [&](double v) { worst = std::max(worst, v); };
    for (int i = 0; i < n; ++i) {
        const auto& c = s.cl[i];
        double th = c.theta0;
        for (int t = 0; t < H; ++t) {
            const double y = pi_J(i, t) / c.capacity_J;
            const int st = (t == 0) ? c.sigma0 : sigma(i, t - 1);
            track(-y);
            track(y - 1.0);
            if (st == 0) track(std::abs(y - 1.0));
            if (t >= 1) {
                if (st == 1) track((c.t_lower + c.eps - th) / c.big_m);
                if (st == 0) track((th - (c.t_lower - c.eps)) / c.big_m);
            }
            th = c.M[t] * th + c.c[t] + c.h[t] * y;
            track((c.t_hard_lower - th) / (c.t_upper - c.t_hard_lower));
            track((th - c.t_upper) / (c.t_upper - c.t_hard_lower));
        }
    }
    return worst;
}

namespace detail {

inline bool admits_zero(const RelaxationResult::SigmaInterval& si, double tol) {
    return si.lo <= tol;
}
inline bool admits_one(const RelaxationResult::SigmaInterval& si, double tol) {
    return si.hi >= 1.0 - tol;
}

struct SolveOpts {
    long max_nodes = 2'000'000;
    double int_tol = 1e-9;
};

inline MiqpSolution branch_and_bound(const MiqpProblem& p, double widen_up, double widen_down,
                                     const SolveOpts& opts) {
    MiqpSolution best;
    best.status = MiqpStatus::Infeasible;
    const int nb = p.n_binaries();

    struct Node {
        std::vector<int8_t> pattern;
    };
    std::vector<Node> stack;
    stack.push_back({std::vector<int8_t>(nb, -1)});
    double incumbent = std::numeric_limits<double>::infinity();
    long nodes = 0;

    auto accept = [&](const RelaxationResult& rr, const std::vector<int8_t>& pat) {
        Eigen::MatrixXi sig(p.n_clusters(), p.horizon - 1);
        for (int i = 0; i < p.n_clusters(); ++i)
            for (int t = 0; t < p.horizon - 1; ++t) sig(i, t) = pat[i * (p.horizon - 1) + t];
        if (rr.objective_scaled < incumbent) {
            incumbent = rr.objective_scaled;
            best.status = MiqpStatus::Optimal;
            best.pi_J = rr.pi_J;
            best.sigma = sig;
            best.theta_Ccount = rr.theta_Ccount;
            best.objective_W2 = rr.objective_W2;
            best.objective_scaled = rr.objective_scaled;
            best.kkt_stationarity = rr.kkt_stationarity;
        }
    };

    while (!stack.empty() && nodes < opts.max_nodes) {
        Node node = std::move(stack.back());
        stack.pop_back();
        ++nodes;

        auto rr = solve_relaxation(p, node.pattern, widen_up, widen_down);
        if (!rr.feasible) continue;
        const double prune_tol = 1e-12 + 1e-9 * std::abs(incumbent);
        if (rr.objective_scaled >= incumbent - prune_tol) continue;

        // Try integral completion: every free binary admits 0 or 1.
        bool all_admit = true;
        const RelaxationResult::SigmaInterval* branch_si = nullptr;
        double branch_frac_dist = 2.0;
        for (const auto& si : rr.sigma_intervals) {
            const bool a0 = admits_zero(si, opts.int_tol);
            const bool a1 = admits_one(si, opts.int_tol);
            if (!a0 && !a1) {
                all_admit = false;
                const double mid = 0.5 * (si.lo + si.hi);
                const double d = std::abs(mid - 0.5);
                if (d < branch_frac_dist) {
                    branch_frac_dist = d;
                    branch_si = &si;
                }
            }
        }

        if (all_admit) {
            if (rr.sigma_intervals.empty()) {
                accept(rr, node.pattern);  // leaf: all binaries fixed by branching
                continue;
            }
            std::vector<int8_t> pat = node.pattern;
            for (const auto& si : rr.sigma_intervals) {
                const bool a1 = admits_one(si, opts.int_tol);
                pat[si.cluster * (p.horizon - 1) + (si.stage - 1)] = a1 ? 1 : 0;
            }
            auto done = solve_relaxation(p, pat, widen_up, widen_down);
            if (done.feasible) {
                accept(done, pat);
                // The completion matches the node bound up to tolerance, so the
                // subtree is exhausted; otherwise keep branching below.
                if (done.objective_scaled - rr.objective_scaled <=
                    1e-9 * (1.0 + done.objective_scaled))
                    continue;
            }
        }
        if (!branch_si) {
            // All intervals admit integers but the completion did not close the
            // gap (rare numerical corner): branch on the first free binary.
            for (const auto& si : rr.sigma_intervals)
                if (node.pattern[si.cluster * (p.horizon - 1) + (si.stage - 1)] == -1) {
                    branch_si = &si;
                    break;
                }
            if (!branch_si) continue;
        }

        const int k = branch_si->cluster * (p.horizon - 1) + (branch_si->stage - 1);
        Node one = node, zero = node;
        one.pattern[k] = 1;
        zero.pattern[k] = 0;
        stack.push_back(std::move(one));   // explored second
        stack.push_back(std::move(zero));  // forced-heat branch first
    }

    best.nodes = nodes;
    return best;
}

} // namespace detail

// Initial-state hard-bound violation per cluster in per-device degrees
// (positive above the cap / below the hard floor). Used for the distinct
// infeasible-at-construction report and the widening fallback.
struct InitialViolation {
    double above_C = 0;
    double below_C = 0;
};

inline std::vector<InitialViolation> initial_state_violation(const MiqpProblem& p) {
    std::vector<InitialViolation> out;
    for (const auto& c : p.clusters) {
        InitialViolation v;
        const double th = c.theta0_Ccount / c.size;
        v.above_C = std::max(0.0, th - c.t_upper_C);
        v.below_C = std::max(0.0, c.t_hard_lower_C - th);
        out.push_back(v);
    }
    return out;
}

struct MiqpOptions {
    long max_nodes = 2'000'000;
    int max_widen_steps = 60;
};

// Full mixed-integer solve. If the measured state violates the hard bounds the
// problem is widened in whole-degree steps for this solve only; the number of
// steps is reported in the solution.
inline MiqpSolution solve_miqp(const MiqpProblem& p, const MiqpOptions& opts = {}) {
    p.validate();
    const auto viol = initial_state_violation(p);
    double above = 0, below = 0;
    for (const auto& v : viol) {
        above = std::max(above, v.above_C);
        below = std::max(below, v.below_C);
    }
    detail::SolveOpts so;
    so.max_nodes = opts.max_nodes;

    const bool out_of_bounds = above > 0 || below > 0;
    int widen = out_of_bounds ? static_cast<int>(std::ceil(std::max(above, below))) : 0;
    for (; widen <= opts.max_widen_steps; ++widen) {
        const double wu = above > 0 ? widen : 0;
        const double wd = below > 0 ? widen : 0;
        auto sol = detail::branch_and_bound(p, wu, wd, so);
        if (sol.status == MiqpStatus::Optimal) {
            sol.widen_steps = widen;
            return sol;
        }
        if (!out_of_bounds) break;  // widening is only a remedy for bad initial states
    }
    MiqpSolution fail;
    fail.status = MiqpStatus::Infeasible;
    fail.widen_steps = out_of_bounds ? opts.max_widen_steps : 0;
    return fail;
}

// Ground-truth solver: enumerate every binary assignment and keep the best
// relaxation. Guarded to small instances.
inline MiqpSolution enumerate_oracle(const MiqpProblem& p) {
    p.validate();
    const int nb = p.n_binaries();
    if (nb > 16) throw std::invalid_argument("enumerate_oracle: more than 16 binaries");
    MiqpSolution best;
    best.status = MiqpStatus::Infeasible;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << nb); ++mask) {
        std::vector<int8_t> pat(nb);
        for (int k = 0; k < nb; ++k) pat[k] = (mask >> k) & 1;
        auto rr = solve_relaxation(p, pat);
        ++best.nodes;
        if (!rr.feasible) continue;
        if (rr.objective_scaled < best_obj) {
            best_obj = rr.objective_scaled;
            best.status = MiqpStatus::Optimal;
            best.pi_J = rr.pi_J;
            best.theta_Ccount = rr.theta_Ccount;
            best.objective_W2 = rr.objective_W2;
            best.objective_scaled = rr.objective_scaled;
            best.kkt_stationarity = rr.kkt_stationarity;
            best.sigma.resize(p.n_clusters(), p.horizon - 1);
            for (int i = 0; i < p.n_clusters(); ++i)
                for (int t = 0; t < p.horizon - 1; ++t)
                    best.sigma(i, t) = pat[i * (p.horizon - 1) + t];
        }
    }
    return best;
}

} // namespace dhwflex::mpc
