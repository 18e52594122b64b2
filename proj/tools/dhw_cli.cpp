// Command-line front end: scenario simulation, offline training, single MPC
// solves and run-log reporting. Exit codes: 0 success, 1 runtime failure,
// 2 configuration/schema error, 3 infeasible optimization.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "dhwflex/config.hpp"
#include "dhwflex/csv.hpp"
#include "dhwflex/metrics.hpp"
#include "dhwflex/mpc.hpp"
#include "dhwflex/rl.hpp"
#include "dhwflex/scenario.hpp"

namespace fs = std::filesystem;
using namespace dhwflex;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> days;
    std::optional<std::string> out;
    bool freeze_models = false;
};

config::LoadedConfig load_with_overrides(const std::string& path, const Overrides& ov) {
    auto cfg = config::load_config_file(path);
    if (ov.seed) {
        cfg.params.seed = *ov.seed;
        cfg.effective["scenario"]["seed"] = *ov.seed;
    }
    if (ov.days) {
        cfg.params.days = *ov.days;
        cfg.effective["scenario"]["days"] = *ov.days;
    }
    if (ov.freeze_models) {
        cfg.params.freeze_models = true;
        cfg.effective["scenario"]["freeze_models"] = true;
    }
    if (ov.out) {
        cfg.output.dir = *ov.out;
        cfg.effective["output"]["dir"] = *ov.out;
    }
    cfg.params.validate();
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void save_models(const std::string& dir,
                 const std::vector<std::optional<rl::QEnsemble>>& models) {
    fs::create_directories(dir);
    for (size_t d = 0; d < models.size(); ++d) {
        if (!models[d]) continue;
        models[d]->merged_forest().save(dir + "/device_" + std::to_string(d) + ".xtf");
    }
}

int cmd_simulate(const std::string& config_path, const Overrides& ov) {
    auto cfg = load_with_overrides(config_path, ov);
    fs::create_directories(cfg.output.dir);

    std::vector<std::optional<rl::QEnsemble>> models;
    auto log = scenario::run_closed_loop(cfg.params, &models);
    const auto m = metrics::compute_metrics(log);

    write_text(cfg.output.dir + "/effective_config.json", cfg.effective.dump(2) + "\n");
    metrics::write_quarter_csv(cfg.output.dir + "/runlog_quarter.csv", log);
    if (cfg.output.write_minute_log)
        metrics::write_minute_csv(cfg.output.dir + "/runlog_minute.csv", log);
    write_text(cfg.output.dir + "/metrics.json", metrics::metrics_json(m));
    if (cfg.output.save_models) save_models(cfg.output.dir + "/models", models);

    std::printf("simulated %d day(s), %ld quarters; pnd_rl_vs_mpc=%.4f pnd_tracking=%.4f "
                "max_temp=%.2fC\n",
                cfg.params.days, m.quarters, m.pnd_rl_vs_mpc, m.pnd_tracking, m.max_temp_C);
    std::printf("outputs in %s\n", cfg.output.dir.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& batch_path,
              const Overrides& ov) {
    auto cfg = load_with_overrides(config_path, ov);
    auto batches = rl::read_batches(batch_path);
    if (batches.empty()) throw std::runtime_error(batch_path + ": batch file holds no rows");

    // Device ids map onto the fleet in declaration order.
    std::vector<int> cluster_of;
    for (size_t ci = 0; ci < cfg.params.clusters.size(); ++ci)
        for (int j = 0; j < cfg.params.clusters[ci].size; ++j)
            cluster_of.push_back(static_cast<int>(ci));

    const std::string dir = cfg.output.dir + "/models";
    fs::create_directories(dir);
    int written = 0;
    for (const auto& [device, batch] : batches) {
        if (device < 0 || device >= static_cast<int>(cluster_of.size()))
            throw std::runtime_error("device id " + std::to_string(device) +
                                     " is outside the configured fleet");
        const auto& cl = cfg.params.clusters[cluster_of[device]];
        rl::FqiConfig fc;
        fc.p_nom_W = cl.device.nominal_power_W;
        fc.t_lower_C = cl.bounds.user_lower_C;
        fc.step_len_s = cfg.params.step_s;
        fc.lambda_per_J = cfg.params.lambda_per_J;
        fc.alpha = cfg.params.alpha;
        fc.gamma = cfg.params.gamma;
        fc.iterations = cfg.params.fqi_iterations;
        fc.enc = cfg.params.time_encoding;
        fc.seed = make_stream(cfg.params.seed, 0x9D1u, device * 1000).next_u64();
        const auto fseed = make_stream(cfg.params.seed, 0xF0Au, device * 1000).next_u64();
        auto q = rl::double_fqi(batch, fc, rl::forest_factory(cfg.params.forest, fseed));
        q.merged_forest().save(dir + "/device_" + std::to_string(device) + ".xtf");
        ++written;
    }
    std::printf("trained %d device model(s) into %s\n", written, dir.c_str());
    return 0;
}

int cmd_mpc_solve(const std::string& problem_path, const std::string& out_path) {
    std::ifstream in(problem_path);
    if (!in) throw config::ConfigError("cannot open problem file: " + problem_path);
    nlohmann::json pj;
    try {
        in >> pj;
    } catch (const std::exception& e) {
        throw config::ConfigError(problem_path + ": " + std::string(e.what()));
    }
    const auto problem = config::problem_from_json(pj);
    const auto sol = mpc::solve_miqp(problem);
    if (sol.status != mpc::MiqpStatus::Optimal) {
        std::printf("status=infeasible nodes=%ld\n", sol.nodes);
        return 3;
    }
    std::printf("status=optimal objective_W2=%.6g nodes=%ld widen_steps=%d\n", sol.objective_W2,
                sol.nodes, sol.widen_steps);
    csv::Writer w(out_path);
    w.row({"quarter_index", "cluster", "pi_J", "sigma", "objective"});
    for (int t = 0; t < problem.horizon; ++t)
        for (int i = 0; i < problem.n_clusters(); ++i) {
            const int sigma = t == 0 ? problem.clusters[i].sigma0 : sol.sigma(i, t - 1);
            w.row({csv::num(static_cast<long long>(t)), csv::num(static_cast<long long>(i)),
                   csv::num(sol.pi_J(i, t)), csv::num(static_cast<long long>(sigma)),
                   csv::num(sol.objective_W2)});
        }
    std::printf("solution written to %s\n", out_path.c_str());
    return 0;
}

int cmd_report(const std::string& runlog_dir) {
    const std::string cfg_path = runlog_dir + "/effective_config.json";
    std::ifstream in(cfg_path);
    if (!in) throw config::ConfigError("missing " + cfg_path);
    nlohmann::json cj;
    try {
        in >> cj;
    } catch (const std::exception& e) {
        throw config::ConfigError(cfg_path + ": " + std::string(e.what()));
    }
    auto cfg = config::config_from_json(cj);

    const std::string mpath = runlog_dir + "/runlog_minute.csv";
    const std::string qpath = runlog_dir + "/runlog_quarter.csv";
    if (!fs::exists(mpath) || !fs::exists(qpath))
        throw std::runtime_error("incomplete run log in " + runlog_dir +
                                 " (need runlog_minute.csv and runlog_quarter.csv)");
    auto log = metrics::read_logs(mpath, qpath, cfg.params);
    const auto m = metrics::compute_metrics(log);
    write_text(runlog_dir + "/metrics.json", metrics::metrics_json(m));
    metrics::write_figure_series(runlog_dir, log);
    std::printf("pnd_rl_vs_mpc=%.4f pnd_tracking=%.4f mae=%.1fW shortfall_frac=%.4f\n",
                m.pnd_rl_vs_mpc, m.pnd_tracking, m.mae_balancing_W, m.mean_shortfall_frac);
    std::printf("report written to %s\n", runlog_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Aggregate-and-dispatch controller for water-heater fleets"};
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path, batch_path, problem_path, runlog_dir;
    std::string solution_out = "mpc_solution.csv";

    auto* sim = app.add_subcommand("simulate", "run the closed-loop scenario");
    sim->add_option("--config", config_path, "scenario config JSON")->required();
    sim->add_option("--seed", ov.seed, "override scenario.seed");
    sim->add_option("--days", ov.days, "override scenario.days");
    sim->add_option("--out", ov.out, "override output.dir");
    sim->add_flag("--freeze-models", ov.freeze_models, "skip nightly retraining");

    auto* train = app.add_subcommand("train", "train dispatch models from a batch CSV");
    train->add_option("--config", config_path, "scenario config JSON")->required();
    train->add_option("--batch", batch_path, "transition batch CSV")->required();
    train->add_option("--seed", ov.seed, "override scenario.seed");
    train->add_option("--out", ov.out, "override output.dir");

    auto* solve = app.add_subcommand("mpc-solve", "solve one MPC problem snapshot");
    solve->add_option("problem", problem_path, "problem snapshot JSON")->required();
    solve->add_option("--out", solution_out, "solution CSV path");

    auto* report = app.add_subcommand("report", "metrics and figure series from a run directory");
    report->add_option("runlog", runlog_dir, "run directory with logs and effective config")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path, ov);
        if (train->parsed()) return cmd_train(config_path, batch_path, ov);
        if (solve->parsed()) return cmd_mpc_solve(problem_path, solution_out);
        if (report->parsed()) return cmd_report(runlog_dir);
    } catch (const config::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
