#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhwflex/aggregate.hpp"
#include "dhwflex/channel.hpp"
#include "dhwflex/dispatch.hpp"
#include "dhwflex/draws.hpp"
#include "dhwflex/mpc.hpp"
#include "dhwflex/rl.hpp"
#include "dhwflex/rng.hpp"
#include "dhwflex/thermal.hpp"
#include "dhwflex/wind.hpp"

namespace dhwflex::scenario {

struct ClusterConfig {
    std::string name = "residential";
    int size = 100;
    draws::ClusterKind kind = draws::ClusterKind::Residential;
    DeviceParams device;
    ComfortBounds bounds;
    double init_temp_lo_C = 55.0;
    double init_temp_hi_C = 75.0;
    // Multipliers on the profile's event-rate curves; heavier usage drives the
    // forced-heating dips of the residential study.
    double shower_rate_scale = 1.0;
    double tap_rate_scale = 1.0;
};

struct ScenarioParams {
    std::vector<ClusterConfig> clusters;
    int days = 2;          // controlled days
    int warmup_days = 1;   // exploration span that seeds the training batches
    std::uint64_t seed = 1;
    double ambient_C = 20.0;
    double inlet_C = 15.0;
    double step_s = 60.0;
    double window_s = 900.0;

    // mpc
    int horizon = 4;
    double epsilon_Ccount = 1e-3;
    double big_m_theta = 0.0;  // 0 = default rule

    // rl
    ForestParams forest;
    double lambda_per_J = 2e-8;
    double alpha = 3e-4;
    double gamma = 1.0;
    int fqi_iterations = 48;
    rl::TimeEncoding time_encoding = rl::TimeEncoding::Cyclic;
    int training_window_days = 18;
    int max_batch_rows = 700;    // seeded subsample cap on the per-device batch
    bool freeze_models = false;  // skip nightly retraining during the run
    double explore_duty = 0.25;
    double explore_hold_min = 20.0;

    // wind (scales are relative to the mean thermostat-baseline fleet power)
    double wind_mean_frac = 2.5;
    double wind_amplitude_frac = 0.9;
    double wind_error_frac = 0.25;
    double wind_ar1 = 0.8;

    channel::ChannelParams channel_params;

    void validate() const {
        if (clusters.empty()) throw std::invalid_argument("scenario: no clusters");
        if (days < 1 || warmup_days < 0) throw std::invalid_argument("scenario: bad day counts");
        if (horizon < 1) throw std::invalid_argument("scenario: bad horizon");
        // The closed-loop protocol runs on the 1-minute / quarter-hour grid;
        // the window and device models themselves are grid-agnostic.
        if (window_s != 900.0 || step_s != 60.0)
            throw std::invalid_argument(
                "scenario: the simulation protocol requires step_s = 60 and window_s = 900");
        if (max_batch_rows < 10) throw std::invalid_argument("scenario: max_batch_rows too small");
        for (const auto& c : clusters) {
            if (c.size < 1) throw std::invalid_argument("scenario: empty cluster");
            c.device.validate();
            c.bounds.validate();
            if (!(c.init_temp_lo_C <= c.init_temp_hi_C))
                throw std::invalid_argument("scenario: bad init temperature range");
            if (c.shower_rate_scale < 0 || c.tap_rate_scale < 0)
                throw std::invalid_argument("scenario: draw rate scales must be >= 0");
        }
        channel_params.validate();
    }

    int steps_per_window() const { return static_cast<int>(std::round(window_s / step_s)); }
    int quarters_per_day() const { return static_cast<int>(std::round(86400.0 / window_s)); }
};

struct MinuteRecord {
    int minute = 0;   // within the controlled span
    int quarter = 0;  // absolute quarter within the controlled span
    int cluster = 0;
    int device_id = 0;
    int u_cmd = 0;      // dispatcher intent
    int delivered = 0;  // effective command equals the intent
    int u_phys = 0;     // after the backup override
    double temp_C = 0;  // at minute start
    double draw_kg_s = 0;
};

struct QuarterRecord {
    int quarter = 0;
    int cluster = 0;
    double pi_J = 0;
    int sigma = 0;  // measured first-stage binary
    double objective_W2 = 0;
    double p_mpc_W = 0;
    double p_rl_W = 0;
    double p_baseline_W = 0;
    double wind_dayahead_W = 0;
    double wind_short_W = 0;
    double theta_Ccount = 0;
    double committed_J = 0;
    double delivered_J = 0;
    int mpc_status = 0;  // 0 solved, 1 solved after widening, 2 fallback
    long mpc_nodes = 0;
};

struct ClusterMeta {
    std::string name;
    int size = 0;
    DeviceParams device;
    ComfortBounds bounds;
};

struct RunLog {
    std::vector<ClusterMeta> clusters;
    double window_s = 900, step_s = 60;
    int days = 0, warmup_days = 0;
    std::vector<MinuteRecord> minutes;
    std::vector<QuarterRecord> quarters;
    double max_temp_C = -std::numeric_limits<double>::infinity();  // whole sim
    double overshoot_slack_C = 0;
    long channel_messages = 0;
    long channel_dropped = 0;
    double channel_mean_delay_s = 0;
    int training_events = 0;
};

struct BaselineResult {
    // Per cluster, per quarter over the whole simulated span (warmup + run).
    std::vector<std::vector<double>> cluster_quarter_W;
    std::vector<double> fleet_quarter_W;
    double mean_fleet_W = 0;  // over the controlled span
};

namespace detail {

inline std::vector<std::vector<double>> initial_temperatures(const ScenarioParams& p) {
    std::vector<std::vector<double>> temps;
    int global = 0;
    for (const auto& c : p.clusters) {
        std::vector<double> t(c.size);
        for (int j = 0; j < c.size; ++j) {
            Rng rng = make_stream(p.seed, 0x1E3Fu, global++);
            t[j] = rng.uniform(c.init_temp_lo_C, c.init_temp_hi_C);
        }
        temps.push_back(std::move(t));
    }
    return temps;
}

inline std::vector<draws::DrawSet> make_draws(const ScenarioParams& p, int total_days) {
    std::vector<draws::DrawSet> out;
    for (size_t i = 0; i < p.clusters.size(); ++i) {
        const auto& c = p.clusters[i];
        auto model = draws::DrawProfileModel::from_kind(c.kind);
        for (auto& r : model.shower_rate) r *= c.shower_rate_scale;
        for (auto& r : model.tap_rate) r *= c.tap_rate_scale;
        out.push_back(draws::generate_draws(model, c.size, total_days,
                                            p.seed ^ (0xD0D0ull + i),
                                            c.device.water_density_kg_per_L));
    }
    return out;
}

} // namespace detail

// Pure hysteresis reference: on at or below the user lower bound, off at or
// above the upper bound, hold in between. Shares draws and initial states
// with the controlled run so the baseline is the matching counterfactual.
inline BaselineResult thermostat_baseline(const ScenarioParams& p,
                                          const std::vector<draws::DrawSet>& draw_sets,
                                          const std::vector<std::vector<double>>& init_temps,
                                          int total_days) {
    const int minutes = total_days * 1440;
    const int quarters = total_days * p.quarters_per_day();
    const int k = p.steps_per_window();
    BaselineResult res;
    res.cluster_quarter_W.assign(p.clusters.size(), std::vector<double>(quarters, 0.0));
    res.fleet_quarter_W.assign(quarters, 0.0);

    for (size_t ci = 0; ci < p.clusters.size(); ++ci) {
        const auto& c = p.clusters[ci];
        std::vector<double> temp = init_temps[ci];
        std::vector<int> on(c.size, 0);
        for (int m = 0; m < minutes; ++m) {
            const int quarter = m / k;
            double power = 0;
            for (int j = 0; j < c.size; ++j) {
                if (temp[j] <= c.bounds.user_lower_C) on[j] = 1;
                else if (temp[j] >= c.bounds.user_upper_C) on[j] = 0;
                if (on[j]) power += c.device.nominal_power_W;
                StepInputs in;
                in.draw_rate_kg_s = draw_sets[ci].per_customer_kg_s[j][m];
                in.ambient_C = p.ambient_C;
                in.inlet_C = p.inlet_C;
                in.heat_power_W = on[j] ? c.device.nominal_power_W : 0.0;
                in.step_len_s = p.step_s;
                temp[j] = step({temp[j], m}, c.device, in).temperature_C;
            }
            res.cluster_quarter_W[ci][quarter] += power / 15.0;
        }
        for (int q = 0; q < quarters; ++q) res.fleet_quarter_W[q] += res.cluster_quarter_W[ci][q];
    }
    const int run_start = p.warmup_days * p.quarters_per_day();
    double sum = 0;
    for (int q = run_start; q < quarters; ++q) sum += res.fleet_quarter_W[q];
    res.mean_fleet_W = sum / std::max(1, quarters - run_start);
    return res;
}

namespace detail {

struct DeviceRef {
    int cluster = 0;
    int index = 0;      // within cluster
    int global_id = 0;  // stable id across the fleet
};

struct Fleet {
    std::vector<DeviceRef> devices;
    std::vector<int> cluster_offset;  // global id of each cluster's first device

    static Fleet build(const ScenarioParams& p) {
        Fleet f;
        int id = 0;
        for (size_t ci = 0; ci < p.clusters.size(); ++ci) {
            f.cluster_offset.push_back(id);
            for (int j = 0; j < p.clusters[ci].size; ++j)
                f.devices.push_back({static_cast<int>(ci), j, id++});
        }
        return f;
    }
    int total() const { return static_cast<int>(devices.size()); }
};

// Per-device rolling transition history used to build training batches.
struct History {
    std::vector<rl::Transition> items;
};

inline std::vector<rl::Transition> training_batch(const History& h, int window_days,
                                                  int max_rows, Rng rng) {
    const size_t window = static_cast<size_t>(window_days) * 1440;
    const size_t take = std::min(h.items.size(), window);
    std::vector<rl::Transition> batch(h.items.end() - take, h.items.end());
    if (static_cast<int>(batch.size()) > max_rows) {
        std::vector<size_t> idx(batch.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (size_t i = idx.size() - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
        idx.resize(max_rows);
        std::sort(idx.begin(), idx.end());
        std::vector<rl::Transition> sampled;
        sampled.reserve(max_rows);
        for (size_t i : idx) sampled.push_back(batch[i]);
        batch = std::move(sampled);
    }
    return batch;
}

} // namespace detail

// Forecast window model for one cluster and one future window, built from the
// day-cycle mean draw profile.
inline mpc::StageModel forecast_stage(const ClusterConfig& c, const ScenarioParams& p,
                                      const draws::DrawSet& ds, int minute_of_span_start) {
    const int K = p.steps_per_window();
    std::vector<StepCoefficients> cs(K);
    std::vector<double> zeta(K);
    for (int j = 0; j < K; ++j) {
        StepInputs in;
        const int mod = (minute_of_span_start + j) % 1440;
        in.draw_rate_kg_s = ds.mean_profile_kg_s[mod];
        in.ambient_C = p.ambient_C;
        in.inlet_C = p.inlet_C;
        in.step_len_s = p.step_s;
        cs[j] = step_coefficients(c.device, in);
        zeta[j] = cs[j].zeta;
    }
    const auto lifted = lift(cs, c.size, p.window_s);
    mpc::StageModel st;
    st.m_coef = lifted.m_product;
    double dot = 0;
    for (int j = 0; j < K; ++j) dot += lifted.row_c[j] * zeta[j];
    st.c_offset_Ccount = c.size * dot;
    st.d_sum_C_per_W = lifted.row_d_sum();
    return st;
}

// Full closed loop: thermostat baseline and wind synthesis, an exploration
// warmup that seeds per-device batches, double-FQI training, then the
// quarter-hour MPC / per-minute dispatch cascade through the lossy channel.
// The trained per-device value models are exposed through models_out for
// persistence.
inline RunLog run_closed_loop(const ScenarioParams& p,
                              std::vector<std::optional<rl::QEnsemble>>* models_out = nullptr) {
    p.validate();
    const int qpd = p.quarters_per_day();
    const int total_days = p.warmup_days + p.days;
    const int run_quarters = p.days * qpd;
    const int warmup_minutes = p.warmup_days * 1440;

    const auto fleet = detail::Fleet::build(p);
    auto draw_sets = detail::make_draws(p, total_days);
    auto init_temps = detail::initial_temperatures(p);
    const auto baseline = thermostat_baseline(p, draw_sets, init_temps, total_days);

    wind::WindParams wp;
    wp.mean_W = p.wind_mean_frac * baseline.mean_fleet_W;
    wp.amplitude_W = p.wind_amplitude_frac * baseline.mean_fleet_W;
    wp.error_std_W = p.wind_error_frac * baseline.mean_fleet_W;
    wp.ar1 = p.wind_ar1;
    const auto wind_traces = wind::generate_wind(wp, run_quarters + p.horizon, p.seed ^ 0x717Dull);

    // Padded lookups: indices past the end wrap to the same time of day on the
    // final simulated day.
    auto baseline_at = [&](int cluster, int abs_quarter) {
        const int total_q = total_days * qpd;
        int q = p.warmup_days * qpd + abs_quarter;
        if (q >= total_q) q = total_q - qpd + (q % qpd);
        return baseline.cluster_quarter_W[cluster][q];
    };
    auto fleet_baseline_at = [&](int abs_quarter) {
        double s = 0;
        for (size_t ci = 0; ci < p.clusters.size(); ++ci)
            s += baseline_at(static_cast<int>(ci), abs_quarter);
        return s;
    };

    RunLog log;
    log.window_s = p.window_s;
    log.step_s = p.step_s;
    log.days = p.days;
    log.warmup_days = p.warmup_days;
    for (const auto& c : p.clusters) log.clusters.push_back({c.name, c.size, c.device, c.bounds});
    double slack = 0;
    for (const auto& c : p.clusters) slack = std::max(slack, c.device.one_step_rise_bound(p.step_s));
    log.overshoot_slack_C = slack;

    // Live state.
    std::vector<std::vector<double>> temp = init_temps;
    std::vector<detail::History> history(fleet.total());
    std::vector<std::optional<rl::QEnsemble>> models(fleet.total());

    auto quarter_of_day = [&](long minute_of_span) {
        return static_cast<int>((minute_of_span % 1440) / 15) + 1;
    };
    auto track_max = [&](double t) { log.max_temp_C = std::max(log.max_temp_C, t); };
    for (const auto& ct : temp)
        for (double t : ct) track_max(t);

    // ---------------- warmup: persistent random exploration ----------------
    {
        std::vector<Rng> dev_rng;
        std::vector<int> hold(fleet.total(), 0), act(fleet.total(), 0);
        for (int d = 0; d < fleet.total(); ++d) dev_rng.push_back(make_stream(p.seed, 0xE27u, d));
        for (long m = 0; m < warmup_minutes; ++m) {
            for (int d = 0; d < fleet.total(); ++d) {
                const auto& ref = fleet.devices[d];
                const auto& c = p.clusters[ref.cluster];
                if (hold[d] == 0) {
                    act[d] = dev_rng[d].bernoulli(p.explore_duty) ? 1 : 0;
                    hold[d] = 1 + static_cast<int>(dev_rng[d].uniform_int(
                                  static_cast<std::uint64_t>(2 * p.explore_hold_min)));
                }
                --hold[d];
                const double t_before = temp[ref.cluster][ref.index];
                const int u = act[d];
                const int u_phys = backup(t_before, u, c.bounds);
                StepInputs in;
                in.draw_rate_kg_s = draw_sets[ref.cluster].per_customer_kg_s[ref.index][m];
                in.ambient_C = p.ambient_C;
                in.inlet_C = p.inlet_C;
                in.heat_power_W = u_phys ? c.device.nominal_power_W : 0.0;
                in.step_len_s = p.step_s;
                const double t_after = step({t_before, m}, c.device, in).temperature_C;
                temp[ref.cluster][ref.index] = t_after;
                track_max(t_after);
                rl::Transition tr;
                tr.x = {quarter_of_day(m), t_before};
                tr.u = u;
                tr.u_phys = u_phys;
                tr.x_next = {quarter_of_day(m + 1), t_after};
                history[d].items.push_back(tr);
            }
        }
    }

    auto train_all = [&](int event_index) {
        for (int d = 0; d < fleet.total(); ++d) {
            if (history[d].items.empty()) continue;
            const auto& ref = fleet.devices[d];
            const auto& c = p.clusters[ref.cluster];
            Rng sub_rng = make_stream(p.seed, 0x5AB5u, d * 1000 + event_index);
            auto batch = detail::training_batch(history[d], p.training_window_days,
                                                p.max_batch_rows, sub_rng);
            rl::FqiConfig cfg;
            cfg.p_nom_W = c.device.nominal_power_W;
            cfg.t_lower_C = c.bounds.user_lower_C;
            cfg.step_len_s = p.step_s;
            cfg.lambda_per_J = p.lambda_per_J;
            cfg.alpha = p.alpha;
            cfg.gamma = p.gamma;
            cfg.iterations = p.fqi_iterations;
            cfg.enc = p.time_encoding;
            cfg.seed = make_stream(p.seed, 0x9D1u, d * 1000 + event_index).next_u64();
            const std::uint64_t fseed =
                make_stream(p.seed, 0xF0Au, d * 1000 + event_index).next_u64();
            models[d] = rl::double_fqi(batch, cfg, rl::forest_factory(p.forest, fseed));
        }
        ++log.training_events;
    };
    if (p.warmup_days > 0) train_all(0);

    // ---------------- controlled span ----------------
    std::vector<channel::LossyChannel> channels;
    for (size_t ci = 0; ci < p.clusters.size(); ++ci)
        channels.emplace_back(p.channel_params, p.clusters[ci].size,
                              make_stream(p.seed, 0xC4A7u, ci));

    const int K = p.steps_per_window();
    log.minutes.reserve(static_cast<size_t>(run_quarters) * K * fleet.total());

    for (int q = 0; q < run_quarters; ++q) {
        const long span_minute0 = warmup_minutes + static_cast<long>(q) * K;

        // Build and solve the window problem.
        mpc::MiqpProblem prob;
        prob.window_s = p.window_s;
        prob.horizon = p.horizon;
        prob.epsilon_Ccount = p.epsilon_Ccount;
        prob.big_m_theta_Ccount = p.big_m_theta;
        std::vector<double> theta(p.clusters.size(), 0.0);
        for (size_t ci = 0; ci < p.clusters.size(); ++ci) {
            for (double t : temp[ci]) theta[ci] += t;
            mpc::ClusterSpec spec;
            spec.name = p.clusters[ci].name;
            spec.size = p.clusters[ci].size;
            spec.theta0_Ccount = theta[ci];
            spec.t_lower_C = p.clusters[ci].bounds.user_lower_C;
            spec.t_upper_C = p.clusters[ci].bounds.user_upper_C;
            spec.t_hard_lower_C = p.clusters[ci].bounds.hard_lower_C;
            spec.p_max_W = p.clusters[ci].device.nominal_power_W;
            spec.sigma0 = theta[ci] > p.clusters[ci].size * spec.t_lower_C ? 1 : 0;
            for (int ph = 0; ph < p.horizon; ++ph)
                spec.stages.push_back(forecast_stage(p.clusters[ci], p, draw_sets[ci],
                                                     static_cast<int>(span_minute0 % 1440) +
                                                         ph * K));
            prob.clusters.push_back(std::move(spec));
        }
        for (int ph = 0; ph < p.horizon; ++ph) {
            prob.baseline_W.push_back(fleet_baseline_at(q + ph));
            prob.wind_dayahead_W.push_back(wind_traces.dayahead_W[q + ph]);
            prob.wind_short_W.push_back(wind_traces.short_term_W[q + ph]);
        }

        auto sol = mpc::solve_miqp(prob);
        std::vector<double> pi_star(p.clusters.size(), 0.0);
        int status;
        if (sol.status == mpc::MiqpStatus::Optimal) {
            for (size_t ci = 0; ci < p.clusters.size(); ++ci) pi_star[ci] = sol.pi_J(ci, 0);
            status = sol.widen_steps > 0 ? 1 : 0;
        } else {
            // All-on when the cluster is below the comfort threshold, all-off
            // otherwise; never reuse a stale setpoint.
            for (size_t ci = 0; ci < p.clusters.size(); ++ci)
                pi_star[ci] = prob.clusters[ci].sigma0 == 0
                                  ? prob.clusters[ci].capacity_J(p.window_s)
                                  : 0.0;
            status = 2;
        }

        // Per-minute dispatch against the remaining window budget.
        std::vector<double> committed_J(p.clusters.size(), 0.0);
        std::vector<double> delivered_J(p.clusters.size(), 0.0);
        for (int mm = 0; mm < K; ++mm) {
            const long m = span_minute0 + mm;
            for (size_t ci = 0; ci < p.clusters.size(); ++ci) {
                const auto& c = p.clusters[ci];
                DispatchRequest req;
                req.window_s = (K - mm) * p.step_s;
                req.setpoint_J = std::max(0.0, pi_star[ci] - committed_J[ci]);
                req.devices.reserve(c.size);
                for (int j = 0; j < c.size; ++j) {
                    const int d = fleet.cluster_offset[ci] + j;
                    DeviceSnapshot snap;
                    snap.device_id = d;
                    snap.state = {quarter_of_day(m), temp[ci][j]};
                    snap.p_nom_W = c.device.nominal_power_W;
                    snap.bounds = c.bounds;
                    if (models[d])
                        snap.advantage_on = rl::advantage(*models[d], snap.state).second;
                    req.devices.push_back(snap);
                }
                auto res = dhwflex::dispatch(req);
                committed_J[ci] += res.committed_power_W * p.step_s;
                const auto& effective = channels[ci].step(res.u);

                for (int j = 0; j < c.size; ++j) {
                    const int d = fleet.cluster_offset[ci] + j;
                    const double t_before = temp[ci][j];
                    const int u_phys = backup(t_before, effective[j], c.bounds);
                    StepInputs in;
                    in.draw_rate_kg_s = draw_sets[ci].per_customer_kg_s[j][m];
                    in.ambient_C = p.ambient_C;
                    in.inlet_C = p.inlet_C;
                    in.heat_power_W = u_phys ? c.device.nominal_power_W : 0.0;
                    in.step_len_s = p.step_s;
                    const double t_after = step({t_before, m}, c.device, in).temperature_C;
                    temp[ci][j] = t_after;
                    track_max(t_after);
                    delivered_J[ci] += u_phys * c.device.nominal_power_W * p.step_s;

                    MinuteRecord rec;
                    rec.minute = static_cast<int>(m - warmup_minutes);
                    rec.quarter = q;
                    rec.cluster = static_cast<int>(ci);
                    rec.device_id = d;
                    rec.u_cmd = res.u[j];
                    rec.delivered = effective[j] == res.u[j] ? 1 : 0;
                    rec.u_phys = u_phys;
                    rec.temp_C = t_before;
                    rec.draw_kg_s = in.draw_rate_kg_s;
                    log.minutes.push_back(rec);

                    rl::Transition tr;
                    tr.x = {quarter_of_day(m), t_before};
                    tr.u = effective[j];
                    tr.u_phys = u_phys;
                    tr.x_next = {quarter_of_day(m + 1), t_after};
                    history[d].items.push_back(tr);
                }
            }
        }

        for (size_t ci = 0; ci < p.clusters.size(); ++ci) {
            QuarterRecord rec;
            rec.quarter = q;
            rec.cluster = static_cast<int>(ci);
            rec.pi_J = pi_star[ci];
            rec.sigma = prob.clusters[ci].sigma0;
            rec.objective_W2 =
                sol.status == mpc::MiqpStatus::Optimal ? sol.objective_W2 : -1.0;
            rec.p_mpc_W = pi_star[ci] / p.window_s;
            rec.p_rl_W = delivered_J[ci] / p.window_s;
            rec.p_baseline_W = baseline_at(static_cast<int>(ci), q);
            rec.wind_dayahead_W = wind_traces.dayahead_W[q];
            rec.wind_short_W = wind_traces.short_term_W[q];
            rec.theta_Ccount = theta[ci];
            rec.committed_J = committed_J[ci];
            rec.delivered_J = delivered_J[ci];
            rec.mpc_status = status;
            rec.mpc_nodes = sol.nodes;
            log.quarters.push_back(rec);
        }

        // Nightly retraining barrier: runs between simulated days, before the
        // next day's first quarter.
        const bool day_end = (q + 1) % qpd == 0;
        const bool more_days = q + 1 < run_quarters;
        if (day_end && more_days && !p.freeze_models) train_all(1 + q / qpd);
    }

    long msgs = 0, drops = 0;
    double delay = 0;
    for (const auto& ch : channels) {
        msgs += ch.messages();
        drops += ch.dropped();
        delay += ch.mean_delay_s() * ch.messages();
    }
    log.channel_messages = msgs;
    log.channel_dropped = drops;
    log.channel_mean_delay_s = msgs ? delay / msgs : 0.0;
    if (models_out) *models_out = std::move(models);
    return log;
}

} // namespace dhwflex::scenario
