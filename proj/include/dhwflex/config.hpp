#pragma once

#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhwflex/mpc.hpp"
#include "dhwflex/scenario.hpp"

namespace dhwflex::config {

using nlohmann::json;

// Schema problems (unknown keys, bad types, missing files) are reported as
// ConfigError so the CLI can map them to its dedicated exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutputConfig {
    std::string dir = "out";
    bool write_minute_log = true;
    bool save_models = false;
};

struct LoadedConfig {
    scenario::ScenarioParams params;
    OutputConfig output;
    json effective;  // defaults materialized, echoed verbatim into the run dir
};

inline json default_cluster_json(const std::string& name, const std::string& profile) {
    return json{{"name", name},
                {"size", 100},
                {"draw_profile", profile},
                {"device",
                 {{"volume_L", 80.0},
                  {"specific_heat_J_per_kgK", 4186.0},
                  {"surface_area_m2", 2.0},
                  {"tank_resistance_Km2_per_W", 1.0},
                  {"efficiency", 0.98},
                  {"nominal_power_W", 2500.0},
                  {"water_density_kg_per_L", 1.0}}},
                {"bounds",
                 {{"user_lower_C", 50.0}, {"user_upper_C", 85.0}, {"hard_lower_C", 45.0}}},
                {"init_temp_range_C", json::array({55.0, 75.0})},
                {"shower_rate_scale", 1.0},
                {"tap_rate_scale", 1.0}};
}

inline json default_config_json() {
    json j;
    j["fleet"]["clusters"] =
        json::array({default_cluster_json("residential", "residential"),
                     default_cluster_json("office", "office")});
    j["mpc"] = {{"horizon", 4},
                {"window_s", 900.0},
                {"step_s", 60.0},
                {"epsilon_C_count", 1e-3},
                {"big_m_theta", 0.0}};
    j["rl"] = {{"n_trees", 50},
               {"k_candidates", 0},
               {"n_min", 5},
               {"lambda_per_J", 2e-8},
               {"alpha", 3e-4},
               {"gamma", 1.0},
               {"iterations", 48},
               {"time_encoding", "cyclic"},
               {"training_window_days", 18},
               {"max_batch_rows", 700},
               {"explore_duty", 0.25},
               {"explore_hold_min", 20.0}};
    j["scenario"] = {{"days", 2},
                     {"warmup_days", 1},
                     {"seed", 1},
                     {"ambient_C", 20.0},
                     {"inlet_C", 15.0},
                     {"freeze_models", false},
                     {"wind",
                      {{"mean_frac", 2.5},
                       {"amplitude_frac", 0.9},
                       {"error_std_frac", 0.25},
                       {"ar1", 0.8}}},
                     {"channel",
                      {{"p_drop", 0.0},
                       {"delay_s", json::array({2.0, 4.0})},
                       {"refresh_period_min", 60}}}};
    j["output"] = {{"dir", "out"}, {"write_minute_log", true}, {"save_models", false}};
    return j;
}

namespace detail {

// Recursive merge of user values onto the defaults; any key absent from the
// default tree is rejected. Arrays replace wholesale, except clusters, whose
// elements are validated against the cluster template.
inline void merge_checked(json& base, const json& user, const std::string& path) {
    if (!user.is_object() || !base.is_object()) {
        base = user;
        return;
    }
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string child = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key: " + child);
        if (it.key() == "clusters") {
            if (!it.value().is_array() || it.value().empty())
                throw ConfigError("fleet.clusters must be a non-empty array");
            json tmpl = default_cluster_json("x", "residential");
            json merged = json::array();
            for (size_t i = 0; i < it.value().size(); ++i) {
                json c = tmpl;
                merge_checked(c, it.value()[i], child + "[" + std::to_string(i) + "]");
                merged.push_back(c);
            }
            base[it.key()] = merged;
        } else if (base[it.key()].is_object() && it.value().is_object()) {
            merge_checked(base[it.key()], it.value(), child);
        } else {
            base[it.key()] = it.value();
        }
    }
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const std::exception& e) {
        throw ConfigError("bad value at " + path + "." + key + ": " + e.what());
    }
}

} // namespace detail

inline LoadedConfig config_from_json(const json& user) {
    json eff = default_config_json();
    detail::merge_checked(eff, user, "");

    LoadedConfig out;
    out.effective = eff;
    scenario::ScenarioParams& p = out.params;
    p.clusters.clear();
    for (const auto& cj : eff["fleet"]["clusters"]) {
        scenario::ClusterConfig c;
        c.name = detail::require<std::string>(cj, "name", "cluster");
        c.size = detail::require<int>(cj, "size", "cluster");
        c.kind = draws::kind_from_string(
            detail::require<std::string>(cj, "draw_profile", "cluster"));
        const auto& dj = cj.at("device");
        c.device.water_density_kg_per_L =
            detail::require<double>(dj, "water_density_kg_per_L", "device");
        c.device.water_mass_kg = detail::require<double>(dj, "volume_L", "device") *
                                 c.device.water_density_kg_per_L;
        c.device.specific_heat_J_per_kgK =
            detail::require<double>(dj, "specific_heat_J_per_kgK", "device");
        c.device.surface_area_m2 = detail::require<double>(dj, "surface_area_m2", "device");
        c.device.tank_resistance_Km2_per_W =
            detail::require<double>(dj, "tank_resistance_Km2_per_W", "device");
        c.device.efficiency = detail::require<double>(dj, "efficiency", "device");
        c.device.nominal_power_W = detail::require<double>(dj, "nominal_power_W", "device");
        const auto& bj = cj.at("bounds");
        c.bounds.user_lower_C = detail::require<double>(bj, "user_lower_C", "bounds");
        c.bounds.user_upper_C = detail::require<double>(bj, "user_upper_C", "bounds");
        c.bounds.hard_lower_C = detail::require<double>(bj, "hard_lower_C", "bounds");
        const auto& ir = cj.at("init_temp_range_C");
        if (!ir.is_array() || ir.size() != 2)
            throw ConfigError("init_temp_range_C must be [lo, hi]");
        c.init_temp_lo_C = ir[0].get<double>();
        c.init_temp_hi_C = ir[1].get<double>();
        c.shower_rate_scale = detail::require<double>(cj, "shower_rate_scale", "cluster");
        c.tap_rate_scale = detail::require<double>(cj, "tap_rate_scale", "cluster");
        p.clusters.push_back(std::move(c));
    }

    const auto& mj = eff["mpc"];
    p.horizon = detail::require<int>(mj, "horizon", "mpc");
    p.window_s = detail::require<double>(mj, "window_s", "mpc");
    p.step_s = detail::require<double>(mj, "step_s", "mpc");
    p.epsilon_Ccount = detail::require<double>(mj, "epsilon_C_count", "mpc");
    p.big_m_theta = detail::require<double>(mj, "big_m_theta", "mpc");

    const auto& rj = eff["rl"];
    p.forest.n_trees = detail::require<int>(rj, "n_trees", "rl");
    p.forest.k_candidates = detail::require<int>(rj, "k_candidates", "rl");
    p.forest.n_min = detail::require<int>(rj, "n_min", "rl");
    p.lambda_per_J = detail::require<double>(rj, "lambda_per_J", "rl");
    p.alpha = detail::require<double>(rj, "alpha", "rl");
    p.gamma = detail::require<double>(rj, "gamma", "rl");
    p.fqi_iterations = detail::require<int>(rj, "iterations", "rl");
    const auto enc = detail::require<std::string>(rj, "time_encoding", "rl");
    if (enc == "cyclic") p.time_encoding = rl::TimeEncoding::Cyclic;
    else if (enc == "raw") p.time_encoding = rl::TimeEncoding::Raw;
    else throw ConfigError("rl.time_encoding must be raw|cyclic");
    p.training_window_days = detail::require<int>(rj, "training_window_days", "rl");
    p.max_batch_rows = detail::require<int>(rj, "max_batch_rows", "rl");
    p.explore_duty = detail::require<double>(rj, "explore_duty", "rl");
    p.explore_hold_min = detail::require<double>(rj, "explore_hold_min", "rl");

    const auto& sj = eff["scenario"];
    p.days = detail::require<int>(sj, "days", "scenario");
    p.warmup_days = detail::require<int>(sj, "warmup_days", "scenario");
    p.seed = detail::require<std::uint64_t>(sj, "seed", "scenario");
    p.ambient_C = detail::require<double>(sj, "ambient_C", "scenario");
    p.inlet_C = detail::require<double>(sj, "inlet_C", "scenario");
    p.freeze_models = detail::require<bool>(sj, "freeze_models", "scenario");
    const auto& wj = sj.at("wind");
    p.wind_mean_frac = detail::require<double>(wj, "mean_frac", "wind");
    p.wind_amplitude_frac = detail::require<double>(wj, "amplitude_frac", "wind");
    p.wind_error_frac = detail::require<double>(wj, "error_std_frac", "wind");
    p.wind_ar1 = detail::require<double>(wj, "ar1", "wind");
    const auto& chj = sj.at("channel");
    p.channel_params.p_drop = detail::require<double>(chj, "p_drop", "channel");
    const auto& del = chj.at("delay_s");
    if (!del.is_array() || del.size() != 2) throw ConfigError("channel.delay_s must be [lo, hi]");
    p.channel_params.delay_lo_s = del[0].get<double>();
    p.channel_params.delay_hi_s = del[1].get<double>();
    p.channel_params.refresh_period_min = detail::require<int>(chj, "refresh_period_min", "channel");

    const auto& oj = eff["output"];
    out.output.dir = detail::require<std::string>(oj, "dir", "output");
    out.output.write_minute_log = detail::require<bool>(oj, "write_minute_log", "output");
    out.output.save_models = detail::require<bool>(oj, "save_models", "output");

    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return out;
}

inline LoadedConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json user;
    try {
        in >> user;
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config_from_json(user);
}

// ---------------------------------------------------------------------------
// MPC problem snapshot (the mpc-solve input document). Same dialect as the
// scenario config: JSON with the mpc subsection keys plus per-stage data.
// ---------------------------------------------------------------------------

inline mpc::MiqpProblem problem_from_json(const json& j) {
    mpc::MiqpProblem p;
    try {
        const auto& mj = j.at("mpc");
        p.horizon = mj.at("horizon").get<int>();
        p.window_s = mj.at("window_s").get<double>();
        if (mj.contains("epsilon_C_count")) p.epsilon_Ccount = mj.at("epsilon_C_count").get<double>();
        if (mj.contains("big_m_theta")) p.big_m_theta_Ccount = mj.at("big_m_theta").get<double>();
        for (const auto& cj : j.at("clusters")) {
            mpc::ClusterSpec c;
            c.name = cj.at("name").get<std::string>();
            c.size = cj.at("size").get<int>();
            c.theta0_Ccount = cj.at("theta0_C_count").get<double>();
            c.t_lower_C = cj.at("t_lower_C").get<double>();
            c.t_upper_C = cj.at("t_upper_C").get<double>();
            c.t_hard_lower_C = cj.at("t_hard_lower_C").get<double>();
            c.p_max_W = cj.at("p_max_W").get<double>();
            c.sigma0 = cj.at("sigma0").get<int>();
            for (const auto& stj : cj.at("stages")) {
                mpc::StageModel st;
                st.m_coef = stj.at("m_coef").get<double>();
                st.c_offset_Ccount = stj.at("c_offset_C_count").get<double>();
                st.d_sum_C_per_W = stj.at("d_sum_C_per_W").get<double>();
                c.stages.push_back(st);
            }
            p.clusters.push_back(std::move(c));
        }
        const auto& tj = j.at("target");
        p.baseline_W = tj.at("baseline_W").get<std::vector<double>>();
        p.wind_dayahead_W = tj.at("wind_dayahead_W").get<std::vector<double>>();
        p.wind_short_W = tj.at("wind_short_W").get<std::vector<double>>();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad problem snapshot: ") + e.what());
    }
    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid problem snapshot: ") + e.what());
    }
    return p;
}

inline json problem_to_json(const mpc::MiqpProblem& p) {
    json j;
    j["mpc"] = {{"horizon", p.horizon},
                {"window_s", p.window_s},
                {"epsilon_C_count", p.epsilon_Ccount},
                {"big_m_theta", p.big_m_theta_Ccount}};
    j["clusters"] = json::array();
    for (const auto& c : p.clusters) {
        json cj = {{"name", c.name},
                   {"size", c.size},
                   {"theta0_C_count", c.theta0_Ccount},
                   {"t_lower_C", c.t_lower_C},
                   {"t_upper_C", c.t_upper_C},
                   {"t_hard_lower_C", c.t_hard_lower_C},
                   {"p_max_W", c.p_max_W},
                   {"sigma0", c.sigma0},
                   {"stages", json::array()}};
        for (const auto& st : c.stages)
            cj["stages"].push_back({{"m_coef", st.m_coef},
                                    {"c_offset_C_count", st.c_offset_Ccount},
                                    {"d_sum_C_per_W", st.d_sum_C_per_W}});
        j["clusters"].push_back(cj);
    }
    j["target"] = {{"baseline_W", p.baseline_W},
                   {"wind_dayahead_W", p.wind_dayahead_W},
                   {"wind_short_W", p.wind_short_W}};
    return j;
}

} // namespace dhwflex::config
