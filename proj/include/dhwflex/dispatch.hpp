#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dhwflex/rl.hpp"
#include "dhwflex/thermal.hpp"

namespace dhwflex {

struct DeviceSnapshot {
    int device_id = 0;
    rl::ObservedState state;
    double p_nom_W = 2500.0;
    ComfortBounds bounds;
    // A(x, 1) at the snapshot state; absent on cold start, which ranks the
    // device last among the switchable ones.
    std::optional<double> advantage_on;
};

struct DispatchRequest {
    double setpoint_J = 0.0;
    double window_s = 900.0;
    std::vector<DeviceSnapshot> devices;
};

struct DispatchResult {
    std::vector<int> u;             // aligned with the request's device list
    double committed_power_W = 0.0; // p^D
    std::vector<int> forced_ids;    // devices below their lower bound
};

// Ascending-advantage decomposition of the cluster setpoint: devices below
// the comfort floor are forced on and seed p^D; devices above the cap are
// never commanded on; the rest switch on in advantage order while p^D is
// still short of the power target.
inline DispatchResult dispatch(const DispatchRequest& req) {
    if (req.setpoint_J < 0) throw std::invalid_argument("dispatch: setpoint must be >= 0");
    if (req.devices.empty()) throw std::invalid_argument("dispatch: empty device set");
    if (!(req.window_s > 0)) throw std::invalid_argument("dispatch: window must be > 0");

    DispatchResult res;
    res.u.assign(req.devices.size(), 0);

    double p_min = 0.0;
    std::vector<int> rank;
    for (size_t i = 0; i < req.devices.size(); ++i) {
        const auto& d = req.devices[i];
        if (d.state.temp_C < d.bounds.user_lower_C) {
            res.u[i] = 1;
            res.forced_ids.push_back(d.device_id);
            p_min += d.p_nom_W;
        } else if (d.state.temp_C > d.bounds.user_upper_C) {
            res.u[i] = 0;  // backup would veto anyway
        } else {
            rank.push_back(static_cast<int>(i));
        }
    }

    const double inf = std::numeric_limits<double>::infinity();
    auto adv = [&](int i) { return req.devices[i].advantage_on.value_or(inf); };
    std::sort(rank.begin(), rank.end(), [&](int a, int b) {
        if (adv(a) != adv(b)) return adv(a) < adv(b);
        return req.devices[a].device_id < req.devices[b].device_id;
    });

    double pD = p_min;
    const double target_W = req.setpoint_J / req.window_s;
    for (int i : rank) {
        if (pD < target_W) {
            res.u[i] = 1;
            pD += req.devices[i].p_nom_W;
        } else {
            res.u[i] = 0;
        }
    }
    res.committed_power_W = pD;
    return res;
}

inline double committed_energy_J(const DispatchResult& res, double window_s) {
    return res.committed_power_W * window_s;
}

} // namespace dhwflex
