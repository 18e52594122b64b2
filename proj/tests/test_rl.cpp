#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <vector>

#include "dhwflex/rl.hpp"
#include "dhwflex/rng.hpp"
#include "support/oracles.hpp"

using namespace dhwflex;
using namespace dhwflex::rl;

namespace {

// Three-state deterministic chain living on the temperature axis. Quarter is
// pinned to 1 so the regressors only need to resolve (T, u).
const double kTemps[3] = {30.0, 50.0, 70.0};

int chain_next(int s, int u) {
    if (u == 1) return std::min(s + 1, 2);
    return std::max(s - 1, 0);
}

FqiConfig chain_config() {
    FqiConfig cfg;
    cfg.p_nom_W = 2500.0;
    cfg.t_lower_C = 40.0;
    cfg.step_len_s = 60.0;
    cfg.lambda_per_J = 2e-8;  // 0.003 per heated minute
    cfg.alpha = 1e-3;
    cfg.gamma = 1.0;
    cfg.iterations = 10;
    cfg.enc = TimeEncoding::Cyclic;
    return cfg;
}

oracles::ChainMdp chain_mdp(const FqiConfig& cfg) {
    oracles::ChainMdp mdp;
    mdp.next.resize(3);
    mdp.cost.resize(3);
    for (int s = 0; s < 3; ++s) {
        for (int u = 0; u < 2; ++u) {
            mdp.next[s][u] = chain_next(s, u);
            double c = cfg.p_nom_W * cfg.step_len_s * cfg.lambda_per_J * u;
            if (kTemps[s] > cfg.t_lower_C) c -= cfg.alpha;
            mdp.cost[s][u] = c;
        }
    }
    return mdp;
}

std::vector<Transition> chain_exact_batch() {
    std::vector<Transition> batch;
    for (int s = 0; s < 3; ++s)
        for (int u = 0; u < 2; ++u) {
            Transition t;
            t.x = {1, kTemps[s]};
            t.u = u;
            t.u_phys = u;
            t.x_next = {1, kTemps[chain_next(s, u)]};
            batch.push_back(t);
        }
    return batch;
}

std::vector<Transition> chain_sampled_batch(int n, std::uint64_t seed) {
    std::vector<Transition> batch;
    Rng rng(seed);
    int s = 0;
    for (int i = 0; i < n; ++i) {
        const int u = rng.bernoulli(0.5) ? 1 : 0;
        Transition t;
        t.x = {1, kTemps[s]};
        t.u = u;
        t.u_phys = u;
        const int sn = chain_next(s, u);
        t.x_next = {1, kTemps[sn]};
        batch.push_back(t);
        s = rng.bernoulli(0.15) ? static_cast<int>(rng.uniform_int(3)) : sn;
    }
    return batch;
}

double max_abs_q(const std::vector<std::array<double, 2>>& Q) {
    double m = 0;
    for (const auto& q : Q) m = std::max({m, std::abs(q[0]), std::abs(q[1])});
    return m;
}

} // namespace

TEST_CASE("zero prices give an identically zero value function") {
    auto cfg = chain_config();
    cfg.lambda_per_J = 0;
    cfg.alpha = 0;
    auto batch = chain_sampled_batch(300, 5);
    for (auto factory : {lookup_factory(), forest_factory(ForestParams{}, 7)}) {
        auto q = fqi(batch, cfg, factory);
        auto qd = double_fqi(batch, cfg, factory);
        for (int s = 0; s < 3; ++s)
            for (int u = 0; u < 2; ++u) {
                REQUIRE(q.value({1, kTemps[s]}, u) == 0.0);
                REQUIRE(qd.value({1, kTemps[s]}, u) == 0.0);
            }
    }
}

TEST_CASE("lookup-backed fqi equals finite-horizon value iteration") {
    auto cfg = chain_config();
    auto batch = chain_exact_batch();
    auto q = fqi(batch, cfg, lookup_factory());
    auto Qstar = oracles::value_iteration(chain_mdp(cfg), cfg.iterations, cfg.gamma);
    for (int s = 0; s < 3; ++s)
        for (int u = 0; u < 2; ++u)
            REQUIRE(std::abs(q.value({1, kTemps[s]}, u) - Qstar[s][u]) <= 1e-9);
}

TEST_CASE("forest-backed fqi approximates the DP oracle") {
    auto cfg = chain_config();
    ForestParams fp;
    fp.n_trees = 50;
    auto batch = chain_sampled_batch(2000, 11);
    auto q = fqi(batch, cfg, forest_factory(fp, 11));
    auto Qstar = oracles::value_iteration(chain_mdp(cfg), cfg.iterations, cfg.gamma);
    const double tol = 0.1 * max_abs_q(Qstar);
    for (int s = 0; s < 3; ++s)
        for (int u = 0; u < 2; ++u)
            REQUIRE(std::abs(q.value({1, kTemps[s]}, u) - Qstar[s][u]) <= tol);
}

TEST_CASE("double fqi stays near the DP oracle on the noiseless chain") {
    auto cfg = chain_config();
    ForestParams fp;
    fp.n_trees = 50;
    auto batch = chain_sampled_batch(2000, 13);
    auto q = double_fqi(batch, cfg, forest_factory(fp, 13));
    auto Qstar = oracles::value_iteration(chain_mdp(cfg), cfg.iterations, cfg.gamma);
    const double tol = 0.1 * max_abs_q(Qstar);
    for (int s = 0; s < 3; ++s)
        for (int u = 0; u < 2; ++u)
            REQUIRE(std::abs(q.value({1, kTemps[s]}, u) - Qstar[s][u]) <= tol);
}

TEST_CASE("double fqi has no larger min-operator bias than single fqi") {
    // Measurement noise on the stored temperatures sits right on the
    // availability threshold for the middle state, so the indicator cost
    // flips stochastically while the three states stay separable. The
    // expected-cost chain is the ground truth; paired seeds compare the bias
    // of E[min_u Qhat] summed over the states.
    FqiConfig cfg = chain_config();
    cfg.t_lower_C = 50.0;
    cfg.iterations = 8;
    const double noise_sd = 1.5;

    oracles::ChainMdp mdp;
    mdp.next.resize(3);
    mdp.cost.resize(3);
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    for (int s = 0; s < 3; ++s)
        for (int u = 0; u < 2; ++u) {
            mdp.next[s][u] = chain_next(s, u);
            const double p_above = phi((kTemps[s] - cfg.t_lower_C) / noise_sd);
            mdp.cost[s][u] =
                cfg.p_nom_W * cfg.step_len_s * cfg.lambda_per_J * u - cfg.alpha * p_above;
        }
    auto Qstar = oracles::value_iteration(mdp, cfg.iterations, cfg.gamma);
    double truth = 0;
    for (int s = 0; s < 3; ++s) truth += std::min(Qstar[s][0], Qstar[s][1]);

    ForestParams fp;
    fp.n_trees = 20;
    fp.n_min = 3;
    double sum_single = 0, sum_double = 0;
    const int n_seeds = 20;
    for (int seed = 1; seed <= n_seeds; ++seed) {
        Rng rng(seed * 977);
        std::vector<Transition> batch;
        int s = 0;
        for (int i = 0; i < 300; ++i) {
            const int u = rng.bernoulli(0.5) ? 1 : 0;
            const int sn = chain_next(s, u);
            Transition t;
            t.x = {1, kTemps[s] + rng.normal(0.0, noise_sd)};
            t.u = u;
            t.u_phys = u;
            t.x_next = {1, kTemps[sn] + rng.normal(0.0, noise_sd)};
            batch.push_back(t);
            s = rng.bernoulli(0.15) ? static_cast<int>(rng.uniform_int(3)) : sn;
        }
        FqiConfig c = cfg;
        c.seed = seed;
        auto qs = fqi(batch, c, forest_factory(fp, seed * 31));
        auto qd = double_fqi(batch, c, forest_factory(fp, seed * 31));
        for (int st = 0; st < 3; ++st) {
            const ObservedState ref{1, kTemps[st]};
            sum_single += std::min(qs.value(ref, 0), qs.value(ref, 1));
            sum_double += std::min(qd.value(ref, 0), qd.value(ref, 1));
        }
    }
    const double bias_single = std::abs(sum_single / n_seeds - truth);
    const double bias_double = std::abs(sum_double / n_seeds - truth);
    REQUIRE(bias_double <= bias_single);
}

TEST_CASE("greedy policy argmin and tie-breaking") {
    // Direct construction through a lookup table.
    auto cfg = chain_config();
    cfg.iterations = 1;
    auto batch = chain_exact_batch();
    auto q = fqi(batch, cfg, lookup_factory());
    // After one iteration Q(x,u) = c(x,u); heating costs more everywhere, so
    // the greedy action is off.
    for (int s = 0; s < 3; ++s) REQUIRE(greedy_policy(q, {1, kTemps[s]}) == 0);

    // Exact tie: zero prices make both actions zero-valued.
    FqiConfig zcfg = cfg;
    zcfg.lambda_per_J = 0;
    zcfg.alpha = 0;
    auto qz = fqi(batch, zcfg, lookup_factory());
    REQUIRE(greedy_policy(qz, {1, 50.0}) == 0);

    // Full-horizon lookup policy matches the DP-optimal actions.
    auto cfg10 = chain_config();
    auto q10 = fqi(batch, cfg10, lookup_factory());
    auto Qstar = oracles::value_iteration(chain_mdp(cfg10), cfg10.iterations, cfg10.gamma);
    for (int s = 0; s < 3; ++s) {
        const int dp = Qstar[s][1] < Qstar[s][0] ? 1 : 0;
        REQUIRE(greedy_policy(q10, {1, kTemps[s]}) == dp);
    }
}

TEST_CASE("advantage subtracts the per-state minimum") {
    auto cfg = chain_config();
    auto q = fqi(chain_exact_batch(), cfg, lookup_factory());
    for (int s = 0; s < 3; ++s) {
        auto [a0, a1] = advantage(q, {1, kTemps[s]});
        REQUIRE(a0 >= 0.0);
        REQUIRE(a1 >= 0.0);
        REQUIRE(std::min(a0, a1) == 0.0);
    }
    // DP-optimal actions carry zero advantage.
    auto Qstar = oracles::value_iteration(chain_mdp(cfg), cfg.iterations, cfg.gamma);
    for (int s = 0; s < 3; ++s) {
        auto [a0, a1] = advantage(q, {1, kTemps[s]});
        const int dp = Qstar[s][1] < Qstar[s][0] ? 1 : 0;
        REQUIRE((dp == 0 ? a0 : a1) <= 1e-12);
    }
}

TEST_CASE("joint positive scaling of prices scales Q and keeps the policy") {
    auto cfg = chain_config();
    auto batch = chain_exact_batch();
    auto q1 = fqi(batch, cfg, lookup_factory());
    FqiConfig cfg3 = cfg;
    cfg3.lambda_per_J *= 3.0;
    cfg3.alpha *= 3.0;
    auto q3 = fqi(batch, cfg3, lookup_factory());
    for (int s = 0; s < 3; ++s)
        for (int u = 0; u < 2; ++u) {
            const ObservedState x{1, kTemps[s]};
            REQUIRE(q3.value(x, u) == Catch::Approx(3.0 * q1.value(x, u)).margin(1e-12));
        }
    for (int s = 0; s < 3; ++s)
        REQUIRE(greedy_policy(q1, {1, kTemps[s]}) == greedy_policy(q3, {1, kTemps[s]}));
}

TEST_CASE("training is deterministic under fixed seeds") {
    auto cfg = chain_config();
    cfg.iterations = 4;
    cfg.seed = 42;
    ForestParams fp;
    fp.n_trees = 10;
    auto batch = chain_sampled_batch(500, 21);
    auto qa = double_fqi(batch, cfg, forest_factory(fp, 42));
    auto qb = double_fqi(batch, cfg, forest_factory(fp, 42));
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const ObservedState x{1 + static_cast<int>(rng.uniform_int(96)), rng.uniform(25.0, 75.0)};
        REQUIRE(qa.value(x, 0) == qb.value(x, 0));
        REQUIRE(qa.value(x, 1) == qb.value(x, 1));
    }
}

TEST_CASE("merged forest reproduces the two-member ensemble mean") {
    auto cfg = chain_config();
    cfg.iterations = 3;
    ForestParams fp;
    fp.n_trees = 12;
    auto batch = chain_sampled_batch(600, 33);
    auto q = double_fqi(batch, cfg, forest_factory(fp, 33));
    auto merged = q.merged_forest();
    REQUIRE(merged.n_trees() == 24);
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const ObservedState x{1, rng.uniform(25.0, 75.0)};
        double buf[5];
        encode_features(x, 1, q.enc, buf);
        const double direct = q.value(x, 1);
        const double via = merged.predict(buf, feature_dims(q.enc));
        REQUIRE(via == Catch::Approx(direct).margin(1e-12));
    }
}

TEST_CASE("empty batches are rejected") {
    auto cfg = chain_config();
    REQUIRE_THROWS_AS(fqi({}, cfg, lookup_factory()), std::invalid_argument);
    REQUIRE_THROWS_AS(double_fqi({}, cfg, lookup_factory()), std::invalid_argument);
}

TEST_CASE("batch csv round-trip and malformed-row diagnostics") {
    std::map<int, std::vector<Transition>> batches;
    batches[3] = chain_exact_batch();
    batches[7] = chain_sampled_batch(20, 2);
    const std::string path = "batch_roundtrip.csv";
    write_batches(path, batches);
    auto back = read_batches(path);
    REQUIRE(back.size() == 2);
    REQUIRE(back[3].size() == batches[3].size());
    REQUIRE(back[7].size() == 20);
    for (size_t i = 0; i < back[3].size(); ++i) {
        REQUIRE(back[3][i].x.quarter == batches[3][i].x.quarter);
        REQUIRE(back[3][i].x.temp_C == batches[3][i].x.temp_C);
        REQUIRE(back[3][i].u == batches[3][i].u);
        REQUIRE(back[3][i].u_phys == batches[3][i].u_phys);
    }
    std::remove(path.c_str());

    {
        std::ofstream bad("batch_bad.csv");
        bad << "device_id,quarter,temp_C,u,u_phys,quarter_next,temp_next_C\n";
        bad << "1,5,55.0,0,0,5,54.9\n";
        bad << "1,97,55.0,0,0,5,54.9\n";  // quarter out of range on line 3
    }
    try {
        read_batches("batch_bad.csv");
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::remove("batch_bad.csv");
}
