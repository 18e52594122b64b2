#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhwflex/csv.hpp"
#include "dhwflex/scenario.hpp"

namespace dhwflex::metrics {

// Every field below is derived purely from the run-log rows, so recomputing
// from the CSV files reproduces the simulate-time report byte for byte.
struct Metrics {
    long quarters = 0;
    long quarters_nonzero_setpoint = 0;
    double pnd_rl_vs_mpc = 0;   // ||P_rl - P_mpc|| / ||P_mpc||
    double pnd_tracking = 0;    // ||P_rl - target|| / ||target||
    double mae_balancing_W = 0; // MAE((P_rl - P_base) - (P_w - P_w_dayahead))
    double max_temp_C = 0;      // over logged minutes
    double hard_cap_C = 0;
    double overshoot_slack_C = 0;
    long comfort_violation_minutes = 0;
    long forced_minutes_not_heating = 0;  // minutes below the floor without u_phys = 1
    double under_delivered_frac = 0;      // among nonzero-setpoint quarters
    double mean_shortfall_frac = 0;
    double requested_J = 0;
    double committed_J = 0;
    double delivered_J = 0;
};

struct FleetQuarter {
    double p_mpc_W = 0, p_rl_W = 0, p_base_W = 0;
    double wind_da_W = 0, wind_st_W = 0;
    double requested_J = 0, committed_J = 0, delivered_J = 0;
};

inline std::vector<FleetQuarter> fleet_quarters(const scenario::RunLog& log) {
    std::map<int, FleetQuarter> acc;
    for (const auto& r : log.quarters) {
        auto& f = acc[r.quarter];
        f.p_mpc_W += r.p_mpc_W;
        f.p_rl_W += r.p_rl_W;
        f.p_base_W += r.p_baseline_W;
        f.wind_da_W = r.wind_dayahead_W;  // fleet-level trace, same on every row
        f.wind_st_W = r.wind_short_W;
        f.requested_J += r.pi_J;
        f.committed_J += r.committed_J;
        f.delivered_J += r.delivered_J;
    }
    std::vector<FleetQuarter> out;
    out.reserve(acc.size());
    for (auto& [q, f] : acc) out.push_back(f);
    return out;
}

inline Metrics compute_metrics(const scenario::RunLog& log) {
    if (log.quarters.empty() || log.minutes.empty())
        throw std::invalid_argument("compute_metrics: empty run log");
    Metrics m;
    m.overshoot_slack_C = log.overshoot_slack_C;
    for (const auto& c : log.clusters) m.hard_cap_C = std::max(m.hard_cap_C, c.bounds.user_upper_C);

    const auto fq = fleet_quarters(log);
    m.quarters = static_cast<long>(fq.size());
    double nn_mpc = 0, nn_diff = 0, nn_target = 0, nn_track = 0, mae = 0;
    for (const auto& f : fq) {
        nn_mpc += f.p_mpc_W * f.p_mpc_W;
        nn_diff += (f.p_rl_W - f.p_mpc_W) * (f.p_rl_W - f.p_mpc_W);
        const double target = f.p_base_W + f.wind_st_W - f.wind_da_W;
        nn_target += target * target;
        nn_track += (f.p_rl_W - target) * (f.p_rl_W - target);
        mae += std::abs(f.p_rl_W - target);
        m.requested_J += f.requested_J;
        m.committed_J += f.committed_J;
        m.delivered_J += f.delivered_J;
        if (f.requested_J > 0) {
            ++m.quarters_nonzero_setpoint;
            if (f.delivered_J < f.requested_J) m.under_delivered_frac += 1.0;
            m.mean_shortfall_frac +=
                std::max(0.0, (f.requested_J - f.delivered_J) / f.requested_J);
        }
    }
    m.pnd_rl_vs_mpc = nn_mpc > 0 ? std::sqrt(nn_diff) / std::sqrt(nn_mpc) : 0.0;
    m.pnd_tracking = nn_target > 0 ? std::sqrt(nn_track) / std::sqrt(nn_target) : 0.0;
    m.mae_balancing_W = mae / fq.size();
    if (m.quarters_nonzero_setpoint > 0) {
        m.under_delivered_frac /= m.quarters_nonzero_setpoint;
        m.mean_shortfall_frac /= m.quarters_nonzero_setpoint;
    }

    for (const auto& r : log.minutes) {
        m.max_temp_C = std::max(m.max_temp_C, r.temp_C);
        const auto& b = log.clusters[r.cluster].bounds;
        if (r.temp_C < b.hard_lower_C - 1e-9 ||
            r.temp_C > b.user_upper_C + log.overshoot_slack_C + 1e-9)
            ++m.comfort_violation_minutes;
        if (r.temp_C < b.user_lower_C && r.u_phys != 1) ++m.forced_minutes_not_heating;
    }
    return m;
}

// Flat deterministic JSON with the study's reference values alongside.
inline std::string metrics_json(const Metrics& m) {
    std::string s = "{\n";
    auto add_num = [&](const char* k, double v, bool last = false) {
        s += "  \"";
        s += k;
        s += "\": " + csv::num(v) + (last ? "\n" : ",\n");
    };
    auto add_int = [&](const char* k, long v) {
        s += "  \"";
        s += k;
        s += "\": " + csv::num(static_cast<long long>(v)) + ",\n";
    };
    add_int("quarters", m.quarters);
    add_int("quarters_nonzero_setpoint", m.quarters_nonzero_setpoint);
    add_num("pnd_rl_vs_mpc", m.pnd_rl_vs_mpc);
    add_num("pnd_tracking", m.pnd_tracking);
    add_num("mae_balancing_W", m.mae_balancing_W);
    add_num("max_temp_C", m.max_temp_C);
    add_num("hard_cap_C", m.hard_cap_C);
    add_num("overshoot_slack_C", m.overshoot_slack_C);
    add_int("comfort_violation_minutes", m.comfort_violation_minutes);
    add_int("forced_minutes_not_heating", m.forced_minutes_not_heating);
    add_num("under_delivered_frac", m.under_delivered_frac);
    add_num("mean_shortfall_frac", m.mean_shortfall_frac);
    add_num("requested_J", m.requested_J);
    add_num("committed_J", m.committed_J);
    add_num("delivered_J", m.delivered_J);
    s += "  \"paper_reference\": {\n";
    s += "    \"pnd_rl_vs_mpc\": 0.1829,\n";
    s += "    \"pnd_tracking\": 0.199,\n";
    s += "    \"mae_kW\": 7.6\n";
    s += "  }\n}\n";
    return s;
}

// ---------------------------------------------------------------------------
// Run-log CSV round trip
// ---------------------------------------------------------------------------

inline void write_minute_csv(const std::string& path, const scenario::RunLog& log) {
    csv::Writer w(path);
    w.row({"minute", "quarter", "cluster", "device_id", "u", "delivered", "u_phys", "temp_C",
           "draw_kg_s"});
    for (const auto& r : log.minutes)
        w.row({csv::num(static_cast<long long>(r.minute)),
               csv::num(static_cast<long long>(r.quarter)),
               csv::num(static_cast<long long>(r.cluster)),
               csv::num(static_cast<long long>(r.device_id)),
               csv::num(static_cast<long long>(r.u_cmd)),
               csv::num(static_cast<long long>(r.delivered)),
               csv::num(static_cast<long long>(r.u_phys)), csv::num(r.temp_C),
               csv::num(r.draw_kg_s)});
}

inline void write_quarter_csv(const std::string& path, const scenario::RunLog& log) {
    csv::Writer w(path);
    w.row({"quarter_index", "cluster", "pi_J", "sigma", "objective", "p_mpc_W", "p_rl_W",
           "p_baseline_W", "wind_dayahead_W", "wind_short_W", "theta_C_count", "committed_J",
           "delivered_J", "mpc_status", "mpc_nodes"});
    for (const auto& r : log.quarters)
        w.row({csv::num(static_cast<long long>(r.quarter)),
               csv::num(static_cast<long long>(r.cluster)), csv::num(r.pi_J),
               csv::num(static_cast<long long>(r.sigma)), csv::num(r.objective_W2),
               csv::num(r.p_mpc_W), csv::num(r.p_rl_W), csv::num(r.p_baseline_W),
               csv::num(r.wind_dayahead_W), csv::num(r.wind_short_W), csv::num(r.theta_Ccount),
               csv::num(r.committed_J), csv::num(r.delivered_J),
               csv::num(static_cast<long long>(r.mpc_status)),
               csv::num(static_cast<long long>(r.mpc_nodes))});
}

// Rebuild the row tables of a run log from disk; the fleet description comes
// from the effective scenario parameters.
inline scenario::RunLog read_logs(const std::string& minute_path, const std::string& quarter_path,
                                  const scenario::ScenarioParams& params) {
    scenario::RunLog log;
    log.window_s = params.window_s;
    log.step_s = params.step_s;
    log.days = params.days;
    log.warmup_days = params.warmup_days;
    double slack = 0;
    for (const auto& c : params.clusters) {
        log.clusters.push_back({c.name, c.size, c.device, c.bounds});
        slack = std::max(slack, c.device.one_step_rise_bound(params.step_s));
    }
    log.overshoot_slack_C = slack;

    const auto mt = csv::read_file(minute_path);
    for (const auto& row : mt.rows) {
        scenario::MinuteRecord r;
        r.minute = std::stoi(row[0]);
        r.quarter = std::stoi(row[1]);
        r.cluster = std::stoi(row[2]);
        r.device_id = std::stoi(row[3]);
        r.u_cmd = std::stoi(row[4]);
        r.delivered = std::stoi(row[5]);
        r.u_phys = std::stoi(row[6]);
        r.temp_C = std::stod(row[7]);
        r.draw_kg_s = std::stod(row[8]);
        log.minutes.push_back(r);
        log.max_temp_C = std::max(log.max_temp_C, r.temp_C);
    }
    const auto qt = csv::read_file(quarter_path);
    for (const auto& row : qt.rows) {
        scenario::QuarterRecord r;
        r.quarter = std::stoi(row[0]);
        r.cluster = std::stoi(row[1]);
        r.pi_J = std::stod(row[2]);
        r.sigma = std::stoi(row[3]);
        r.objective_W2 = std::stod(row[4]);
        r.p_mpc_W = std::stod(row[5]);
        r.p_rl_W = std::stod(row[6]);
        r.p_baseline_W = std::stod(row[7]);
        r.wind_dayahead_W = std::stod(row[8]);
        r.wind_short_W = std::stod(row[9]);
        r.theta_Ccount = std::stod(row[10]);
        r.committed_J = std::stod(row[11]);
        r.delivered_J = std::stod(row[12]);
        r.mpc_status = std::stoi(row[13]);
        r.mpc_nodes = std::stol(row[14]);
        log.quarters.push_back(r);
    }
    if (log.quarters.empty()) throw std::runtime_error("incomplete run log: no quarter rows");
    return log;
}

// ---------------------------------------------------------------------------
// Figure data series (aggregate power, per-cluster comparison, temperatures,
// requested-vs-delivered energy).
// ---------------------------------------------------------------------------

inline void write_figure_series(const std::string& dir, const scenario::RunLog& log) {
    const auto fq = fleet_quarters(log);
    {
        csv::Writer w(dir + "/fig_power_trajectories.csv");
        w.row({"quarter", "baseline_W", "mpc_W", "rl_W", "wind_dayahead_W", "wind_short_W",
               "balance_W"});
        for (size_t q = 0; q < fq.size(); ++q) {
            const auto& f = fq[q];
            w.row({csv::num(static_cast<long long>(q)), csv::num(f.p_base_W), csv::num(f.p_mpc_W),
                   csv::num(f.p_rl_W), csv::num(f.wind_da_W), csv::num(f.wind_st_W),
                   csv::num(f.wind_da_W + f.p_rl_W - f.p_base_W)});
        }
    }
    const int n_clusters = static_cast<int>(log.clusters.size());
    {
        csv::Writer w(dir + "/fig_cluster_comparison.csv");
        std::vector<std::string> head{"quarter"};
        for (const auto& c : log.clusters) {
            head.push_back(c.name + "_mpc_W");
            head.push_back(c.name + "_rl_W");
        }
        w.row(head);
        std::map<int, std::vector<std::pair<double, double>>> rows;
        for (const auto& r : log.quarters) {
            auto& v = rows[r.quarter];
            v.resize(n_clusters);
            v[r.cluster] = {r.p_mpc_W, r.p_rl_W};
        }
        for (const auto& [q, v] : rows) {
            std::vector<std::string> cells{csv::num(static_cast<long long>(q))};
            for (const auto& [a, b] : v) {
                cells.push_back(csv::num(a));
                cells.push_back(csv::num(b));
            }
            w.row(cells);
        }
    }
    {
        csv::Writer w(dir + "/fig_temperature.csv");
        std::vector<std::string> head{"quarter"};
        for (const auto& c : log.clusters) head.push_back(c.name + "_avg_temp_C");
        w.row(head);
        std::map<int, std::vector<double>> rows;
        for (const auto& r : log.quarters) {
            auto& v = rows[r.quarter];
            v.resize(n_clusters);
            v[r.cluster] = r.theta_Ccount / log.clusters[r.cluster].size;
        }
        for (const auto& [q, v] : rows) {
            std::vector<std::string> cells{csv::num(static_cast<long long>(q))};
            for (double t : v) cells.push_back(csv::num(t));
            w.row(cells);
        }
    }
    {
        csv::Writer w(dir + "/fig_requested_delivered.csv");
        w.row({"quarter", "requested_J", "committed_J", "delivered_J"});
        for (size_t q = 0; q < fq.size(); ++q)
            w.row({csv::num(static_cast<long long>(q)), csv::num(fq[q].requested_J),
                   csv::num(fq[q].committed_J), csv::num(fq[q].delivered_J)});
    }
}

} // namespace dhwflex::metrics
