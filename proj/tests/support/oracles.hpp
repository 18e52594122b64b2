#pragma once

// Test-only reference implementations, independent of the library code paths
// they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace oracles {

// Explicit-Euler micro-step integration of the tank ODE
//   C dT/dt = -G (T - Ta) - B (T - Tin) + eta * g
// over [0, horizon_s] with constant inputs.
inline double euler_tank(double T0, double C, double G, double B, double Ta, double Tin,
                         double eta, double g, double horizon_s, double micro_dt_s) {
    double T = T0;
    const long n = static_cast<long>(std::llround(horizon_s / micro_dt_s));
    for (long i = 0; i < n; ++i) {
        const double dTdt = (-G * (T - Ta) - B * (T - Tin) + eta * g) / C;
        T += micro_dt_s * dTdt;
    }
    return T;
}

// Step-by-step recursion oracle for the lifted window model.
struct Coeff {
    double a, a_bar, zeta, b;
};

inline double recurse_window(double theta0, std::span<const Coeff> cs,
                             std::span<const double> g) {
    double t = theta0;
    for (size_t j = 0; j < cs.size(); ++j)
        t = cs[j].a * t + cs[j].a_bar * cs[j].zeta + cs[j].a_bar * cs[j].b * g[j];
    return t;
}

// Finite MDP value iteration: Q_N(s,a) = c(s,a) + gamma * min_a' Q_{N-1}(s',a').
// Deterministic transitions given as next[s][a]; costs as cost[s][a].
struct ChainMdp {
    std::vector<std::array<int, 2>> next;
    std::vector<std::array<double, 2>> cost;
};

inline std::vector<std::array<double, 2>> value_iteration(const ChainMdp& mdp, int iterations,
                                                          double gamma) {
    const size_t S = mdp.next.size();
    std::vector<std::array<double, 2>> Q(S, {0.0, 0.0}), Qn(S, {0.0, 0.0});
    for (int it = 0; it < iterations; ++it) {
        for (size_t s = 0; s < S; ++s) {
            for (int a = 0; a < 2; ++a) {
                const int sp = mdp.next[s][a];
                const double m = std::min(Q[sp][0], Q[sp][1]);
                Qn[s][a] = mdp.cost[s][a] + gamma * m;
            }
        }
        Q = Qn;
    }
    return Q;
}

// Literal re-execution of the dispatch pseudocode: forced set, then ascending
// advantage with check-then-add against the power target.
struct DispatchDevice {
    int id;
    double temp_C;
    double lower_C, upper_C;
    double p_nom_W;
    double advantage_on;  // +inf when unknown
};

struct DispatchOutcome {
    std::map<int, int> u;
    double p_committed_W = 0;
};

inline DispatchOutcome dispatch_pseudocode(const std::vector<DispatchDevice>& devices,
                                           double pi_J, double window_s) {
    DispatchOutcome out;
    double p_min = 0;
    std::vector<const DispatchDevice*> rankable;
    for (const auto& d : devices) {
        if (d.temp_C < d.lower_C) {
            out.u[d.id] = 1;
            p_min += d.p_nom_W;
        } else if (d.temp_C > d.upper_C) {
            out.u[d.id] = 0;
        } else {
            rankable.push_back(&d);
        }
    }
    std::sort(rankable.begin(), rankable.end(), [](const auto* a, const auto* b) {
        if (a->advantage_on != b->advantage_on) return a->advantage_on < b->advantage_on;
        return a->id < b->id;
    });
    double pD = p_min;
    const double target = pi_J / window_s;
    for (const auto* d : rankable) {
        if (pD < target) {
            out.u[d->id] = 1;
            pD += d->p_nom_W;
        } else {
            out.u[d->id] = 0;
        }
    }
    out.p_committed_W = pD;
    return out;
}

} // namespace oracles
