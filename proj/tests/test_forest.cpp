#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <vector>

#include "dhwflex/forest.hpp"
#include "dhwflex/rng.hpp"

using namespace dhwflex;

namespace {

struct Data {
    std::vector<double> X;
    std::vector<double> y;
    int dims;
};

// 1-D step function y = I(x > 0.5) on uniform samples.
Data step_data(int n, std::uint64_t seed) {
    Data d;
    d.dims = 1;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform();
        d.X.push_back(x);
        d.y.push_back(x > 0.5 ? 1.0 : 0.0);
    }
    return d;
}

double grid_mse(const Forest& f, int n_grid) {
    double mse = 0;
    for (int i = 0; i < n_grid; ++i) {
        const double x = (i + 0.5) / n_grid;
        const double t = x > 0.5 ? 1.0 : 0.0;
        const double p = f.predict(&x, 1);
        mse += (p - t) * (p - t);
    }
    return mse / n_grid;
}

} // namespace

TEST_CASE("constant target predicts the constant everywhere") {
    std::vector<double> X{0.1, 0.4, 0.7, 0.9, 0.2, 0.6};
    std::vector<double> y(6, 3.25);
    ForestParams p;
    p.n_trees = 10;
    auto f = fit_forest(X, y, 1, p);
    for (double x : {0.0, 0.5, 1.0, -3.0}) REQUIRE(f.predict(&x, 1) == 3.25);
}

TEST_CASE("n_min above the sample count gives single-leaf global-mean trees") {
    std::vector<double> X{0.0, 1.0, 2.0};
    std::vector<double> y{1.0, 2.0, 6.0};
    ForestParams p;
    p.n_trees = 7;
    p.n_min = 10;
    auto f = fit_forest(X, y, 1, p);
    for (const auto& t : f.trees()) REQUIRE(t.nodes.size() == 1);
    const double x = 0.7;
    REQUIRE(f.predict(&x, 1) == Catch::Approx(3.0));
}

TEST_CASE("identical rows degenerate to single-leaf trees") {
    std::vector<double> X(20, 1.5);
    std::vector<double> y;
    Rng rng(3);
    for (int i = 0; i < 20; ++i) y.push_back(rng.uniform());
    ForestParams p;
    p.n_trees = 5;
    p.n_min = 2;
    auto f = fit_forest(X, y, 1, p);
    for (const auto& t : f.trees()) REQUIRE(t.nodes.size() == 1);
}

TEST_CASE("step function is learned to grid MSE <= 0.01") {
    auto d = step_data(1000, 11);
    ForestParams p;
    p.n_trees = 50;
    p.rng_seed = 11;
    auto f = fit_forest(d.X, d.y, 1, p);
    REQUIRE(grid_mse(f, 500) <= 0.01);
}

TEST_CASE("held-out error does not grow with ensemble size") {
    auto d = step_data(1000, 13);
    double prev = 1e9;
    for (int nt : {1, 10, 50}) {
        ForestParams p;
        p.n_trees = nt;
        p.rng_seed = 13;
        auto f = fit_forest(d.X, d.y, 1, p);
        const double mse = grid_mse(f, 500);
        REQUIRE(mse <= prev * 1.05 + 1e-4);  // 5% noise margin, small floor near zero
        prev = mse;
    }
}

TEST_CASE("single leaf with known mean predicts it exactly") {
    std::vector<double> X{1.0, 2.0};
    std::vector<double> y{3.2, 3.2};
    ForestParams p;
    p.n_trees = 1;
    auto f = fit_forest(X, y, 1, p);
    const double x = 5.0;
    REQUIRE(f.predict(&x, 1) == 3.2);
}

TEST_CASE("predictions stay within the training target extrema") {
    Rng rng(17);
    std::vector<double> X, y;
    const int dims = 3;
    double ymin = 1e300, ymax = -1e300;
    for (int i = 0; i < 400; ++i) {
        for (int d = 0; d < dims; ++d) X.push_back(rng.uniform(-2.0, 2.0));
        const double t = rng.normal(0.0, 5.0);
        y.push_back(t);
        ymin = std::min(ymin, t);
        ymax = std::max(ymax, t);
    }
    ForestParams p;
    p.n_trees = 20;
    p.rng_seed = 17;
    auto f = fit_forest(X, y, dims, p);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                              rng.uniform(-3.0, 3.0)};
        const double v = f.predict(x);
        REQUIRE(v >= ymin - 1e-12 * std::abs(ymin));
        REQUIRE(v <= ymax + 1e-12 * std::abs(ymax));
    }
}

TEST_CASE("leaf predictions equal the mean of their training targets") {
    Rng rng(19);
    std::vector<double> X, y;
    for (int i = 0; i < 200; ++i) {
        X.push_back(rng.uniform());
        y.push_back(rng.uniform(0.0, 10.0));
    }
    ForestParams p;
    p.n_trees = 3;
    p.rng_seed = 19;
    auto f = fit_forest(X, y, 1, p);
    // Re-derive each leaf's membership by routing the training rows.
    for (const auto& tree : f.trees()) {
        std::vector<double> sums(tree.nodes.size(), 0.0);
        std::vector<int> counts(tree.nodes.size(), 0);
        for (size_t i = 0; i < y.size(); ++i) {
            int node = 0;
            while (tree.nodes[node].feature >= 0)
                node = tree.nodes[node].left +
                       (X[i] <= tree.nodes[node].threshold ? 0 : 1);
            sums[node] += y[i];
            counts[node] += 1;
        }
        for (size_t nidx = 0; nidx < tree.nodes.size(); ++nidx) {
            if (tree.nodes[nidx].feature >= 0) continue;
            REQUIRE(counts[nidx] > 0);  // every leaf reachable by training data
            REQUIRE(tree.nodes[nidx].value ==
                    Catch::Approx(sums[nidx] / counts[nidx]).epsilon(1e-12));
        }
    }
}

TEST_CASE("fixed seed reproduces bit-identical forests") {
    auto d = step_data(300, 23);
    ForestParams p;
    p.n_trees = 8;
    p.rng_seed = 99;
    auto f1 = fit_forest(d.X, d.y, 1, p);
    auto f2 = fit_forest(d.X, d.y, 1, p);
    REQUIRE(f1.n_trees() == f2.n_trees());
    for (int t = 0; t < f1.n_trees(); ++t) {
        const auto& a = f1.trees()[t].nodes;
        const auto& b = f2.trees()[t].nodes;
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].feature == b[i].feature);
            REQUIRE(a[i].threshold == b[i].threshold);
            REQUIRE(a[i].left == b[i].left);
            REQUIRE(a[i].value == b[i].value);
        }
    }
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        const double x = rng.uniform(-0.5, 1.5);
        REQUIRE(f1.predict(&x, 1) == f2.predict(&x, 1));
    }
}

TEST_CASE("serialization round-trips bit-exactly") {
    Rng rng(29);
    std::vector<double> X, y;
    const int dims = 4;
    for (int i = 0; i < 300; ++i) {
        for (int d = 0; d < dims; ++d) X.push_back(rng.uniform(-1.0, 1.0));
        y.push_back(rng.normal());
    }
    ForestParams p;
    p.n_trees = 6;
    p.rng_seed = 4;
    auto f = fit_forest(X, y, dims, p);
    const std::string path = "forest_roundtrip.xtf";
    f.save(path);
    auto g = Forest::load(path);
    REQUIRE(g.dims() == f.dims());
    REQUIRE(g.n_trees() == f.n_trees());
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x;
        for (int d = 0; d < dims; ++d) x.push_back(rng.uniform(-1.5, 1.5));
        REQUIRE(f.predict(x) == g.predict(x));
    }
    std::remove(path.c_str());
    REQUIRE_THROWS_AS(Forest::load("no_such_forest.xtf"), std::runtime_error);
}

TEST_CASE("dimension mismatch and bad parameters are rejected") {
    std::vector<double> X{0.0, 1.0};
    std::vector<double> y{0.0, 1.0};
    ForestParams p;
    auto f = fit_forest(X, y, 1, p);
    std::vector<double> x2{0.0, 1.0};
    REQUIRE_THROWS_AS(f.predict(x2.data(), 2), std::invalid_argument);
    ForestParams bad;
    bad.k_candidates = 5;
    REQUIRE_THROWS_AS(fit_forest(X, y, 1, bad), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_forest({}, {}, 1, p), std::invalid_argument);
}
