#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhwflex/csv.hpp"
#include "dhwflex/forest.hpp"
#include "dhwflex/rng.hpp"

namespace dhwflex::rl {

// Observable device state: quarter-hour of day (1..96) and tank temperature.
struct ObservedState {
    int quarter = 1;
    double temp_C = 60.0;
};

struct Transition {
    ObservedState x;
    int u = 0;        // requested action
    ObservedState x_next;
    int u_phys = 0;   // action after the backup override
};

enum class TimeEncoding { Raw, Cyclic };

inline int feature_dims(TimeEncoding enc) { return enc == TimeEncoding::Raw ? 3 : 5; }

// Raw: [quarter, T, u]. Cyclic adds sin/cos of the day phase so midnight
// wrap-around is learnable.
inline void encode_features(const ObservedState& x, int u, TimeEncoding enc, double* out) {
    if (enc == TimeEncoding::Raw) {
        out[0] = x.quarter;
        out[1] = x.temp_C;
        out[2] = u;
    } else {
        const double phase = 2.0 * M_PI * x.quarter / 96.0;
        out[0] = x.quarter;
        out[1] = std::sin(phase);
        out[2] = std::cos(phase);
        out[3] = x.temp_C;
        out[4] = u;
    }
}

// Regression backend for Qhat over encoded (x, u) features. An unfitted
// regressor represents Qhat_0 = 0.
class QRegressor {
public:
    virtual ~QRegressor() = default;
    virtual void fit(const std::vector<double>& X, const std::vector<double>& y, int dims) = 0;
    virtual double predict(const double* x, int dims) const = 0;
    virtual bool fitted() const = 0;
    virtual const Forest* forest() const { return nullptr; }
};

using RegressorFactory = std::function<std::unique_ptr<QRegressor>()>;

// Exact-match table: the oracle-friendly backend for finite MDPs. Duplicate
// keys average their targets; unseen keys predict zero.
class LookupRegressor : public QRegressor {
public:
    void fit(const std::vector<double>& X, const std::vector<double>& y, int dims) override {
        table_.clear();
        dims_ = dims;
        for (size_t i = 0; i < y.size(); ++i) {
            std::vector<double> key(X.begin() + i * dims, X.begin() + (i + 1) * dims);
            auto& cell = table_[key];
            cell.first += y[i];
            cell.second += 1;
        }
        fitted_ = true;
    }
    double predict(const double* x, int dims) const override {
        if (!fitted_) return 0.0;
        if (dims != dims_) throw std::invalid_argument("lookup predict: dimension mismatch");
        auto it = table_.find(std::vector<double>(x, x + dims));
        if (it == table_.end()) return 0.0;
        return it->second.first / it->second.second;
    }
    bool fitted() const override { return fitted_; }

private:
    std::map<std::vector<double>, std::pair<double, int>> table_;
    int dims_ = 0;
    bool fitted_ = false;
};

class ForestRegressor : public QRegressor {
public:
    ForestRegressor(ForestParams params, std::uint64_t fit_seed) : params_(params) {
        params_.rng_seed = fit_seed;
    }
    void fit(const std::vector<double>& X, const std::vector<double>& y, int dims) override {
        forest_ = fit_forest(X, y, dims, params_);
        fitted_ = true;
    }
    double predict(const double* x, int dims) const override {
        if (!fitted_) return 0.0;
        return forest_.predict(x, dims);
    }
    bool fitted() const override { return fitted_; }
    const Forest* forest() const override { return fitted_ ? &forest_ : nullptr; }

private:
    ForestParams params_;
    Forest forest_;
    bool fitted_ = false;
};

// Every created regressor draws a fresh deterministic seed, so refits across
// iterations decorrelate while whole runs stay reproducible.
inline RegressorFactory forest_factory(const ForestParams& params, std::uint64_t seed) {
    auto counter = std::make_shared<std::uint64_t>(0);
    return [params, seed, counter]() -> std::unique_ptr<QRegressor> {
        Rng root(seed);
        const std::uint64_t fit_seed = root.fork(0xFACE0000u + (*counter)++).next_u64();
        return std::make_unique<ForestRegressor>(params, fit_seed);
    };
}

inline RegressorFactory lookup_factory() {
    return []() -> std::unique_ptr<QRegressor> { return std::make_unique<LookupRegressor>(); };
}

// Fitted state-action value estimate; the prediction is the mean over the
// member estimators (one for plain FQI, two for the double variant).
struct QEnsemble {
    std::vector<std::unique_ptr<QRegressor>> members;
    TimeEncoding enc = TimeEncoding::Cyclic;
    int iterations = 0;
    double lambda_per_J = 0;
    double alpha = 0;

    double value(const ObservedState& x, int u) const {
        double buf[5];
        encode_features(x, u, enc, buf);
        const int d = feature_dims(enc);
        double sum = 0;
        for (const auto& m : members) sum += m->predict(buf, d);
        return sum / static_cast<double>(members.size());
    }

    // Equal-sized forest members merge into one flat forest whose ensemble
    // mean is bit-identical to the member mean; used for persistence.
    Forest merged_forest() const {
        std::vector<RegressionTree> trees;
        int dims = -1;
        for (const auto& m : members) {
            const Forest* f = m->forest();
            if (!f) throw std::runtime_error("merged_forest: non-forest member");
            if (dims < 0) dims = f->dims();
            for (const auto& t : f->trees()) trees.push_back(t);
        }
        return Forest::from_trees(std::move(trees), dims);
    }
};

struct FqiConfig {
    double p_nom_W = 2500.0;
    double t_lower_C = 50.0;
    double step_len_s = 60.0;
    double lambda_per_J = 2e-8;
    double alpha = 3e-4;
    double gamma = 1.0;
    int iterations = 96;
    TimeEncoding enc = TimeEncoding::Cyclic;
    std::uint64_t seed = 1;
};

namespace detail {

inline double transition_cost(const Transition& t, const FqiConfig& cfg) {
    double c = cfg.p_nom_W * cfg.step_len_s * cfg.lambda_per_J * (t.u_phys ? 1.0 : 0.0);
    if (t.x.temp_C > cfg.t_lower_C) c -= cfg.alpha;
    return c;
}

struct EncodedBatch {
    std::vector<double> X;       // (x_l, u_l)
    std::vector<double> Xn0;     // (x'_l, 0)
    std::vector<double> Xn1;     // (x'_l, 1)
    std::vector<double> cost;
    int dims = 0;
    size_t n = 0;
};

inline EncodedBatch encode_batch(const std::vector<Transition>& batch, const FqiConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("fqi: empty batch");
    EncodedBatch e;
    e.dims = feature_dims(cfg.enc);
    e.n = batch.size();
    e.X.resize(e.n * e.dims);
    e.Xn0.resize(e.n * e.dims);
    e.Xn1.resize(e.n * e.dims);
    e.cost.resize(e.n);
    for (size_t l = 0; l < e.n; ++l) {
        encode_features(batch[l].x, batch[l].u, cfg.enc, &e.X[l * e.dims]);
        encode_features(batch[l].x_next, 0, cfg.enc, &e.Xn0[l * e.dims]);
        encode_features(batch[l].x_next, 1, cfg.enc, &e.Xn1[l * e.dims]);
        e.cost[l] = transition_cost(batch[l], cfg);
    }
    return e;
}

inline void check_targets(const std::vector<double>& t, int iteration) {
    for (double v : t)
        if (!std::isfinite(v))
            throw std::domain_error("fqi: non-finite regression target at iteration " +
                                    std::to_string(iteration));
}

} // namespace detail

// Fitted Q-iteration: repeated regression of one-step Bellman targets
//   Q_N(x,u) = c(x, u_phys) + gamma * min_u' Q_{N-1}(x', u')
// onto a fresh regressor, starting from Q_0 = 0.
inline QEnsemble fqi(const std::vector<Transition>& batch, const FqiConfig& cfg,
                     const RegressorFactory& factory) {
    if (cfg.iterations < 1) throw std::invalid_argument("fqi: iterations must be >= 1");
    auto e = detail::encode_batch(batch, cfg);
    std::unique_ptr<QRegressor> prev;
    std::vector<double> targets(e.n);
    for (int N = 1; N <= cfg.iterations; ++N) {
        for (size_t l = 0; l < e.n; ++l) {
            double next = 0.0;
            if (prev) {
                next = std::min(prev->predict(&e.Xn0[l * e.dims], e.dims),
                                prev->predict(&e.Xn1[l * e.dims], e.dims));
            }
            targets[l] = e.cost[l] + cfg.gamma * next;
        }
        detail::check_targets(targets, N);
        auto next_reg = factory();
        next_reg->fit(e.X, targets, e.dims);
        prev = std::move(next_reg);
    }
    QEnsemble q;
    q.members.push_back(std::move(prev));
    q.enc = cfg.enc;
    q.iterations = cfg.iterations;
    q.lambda_per_J = cfg.lambda_per_J;
    q.alpha = cfg.alpha;
    return q;
}

// Double variant: two estimators, the batch split in half anew each
// iteration; each estimator selects the minimizing action with its own value
// and evaluates it with the other's, which damps the min-operator bias.
inline QEnsemble double_fqi(const std::vector<Transition>& batch, const FqiConfig& cfg,
                            const RegressorFactory& factory) {
    if (cfg.iterations < 1) throw std::invalid_argument("double_fqi: iterations must be >= 1");
    auto e = detail::encode_batch(batch, cfg);
    Rng split_rng = make_stream(cfg.seed, 0xD0B1u);

    std::unique_ptr<QRegressor> qa, qb;
    std::vector<size_t> perm(e.n);
    std::iota(perm.begin(), perm.end(), size_t{0});

    auto argmin_next = [&](const QRegressor* chooser, size_t l) {
        if (!chooser || !chooser->fitted()) return 0;  // ties toward off
        const double v0 = chooser->predict(&e.Xn0[l * e.dims], e.dims);
        const double v1 = chooser->predict(&e.Xn1[l * e.dims], e.dims);
        return v1 < v0 ? 1 : 0;
    };
    auto eval_next = [&](const QRegressor* evaluator, size_t l, int u) {
        if (!evaluator || !evaluator->fitted()) return 0.0;
        const double* row = u ? &e.Xn1[l * e.dims] : &e.Xn0[l * e.dims];
        return evaluator->predict(row, e.dims);
    };

    for (int N = 1; N <= cfg.iterations; ++N) {
        for (size_t i = e.n - 1; i > 0; --i) {
            const size_t j = split_rng.uniform_int(i + 1);
            std::swap(perm[i], perm[j]);
        }
        const size_t half = (e.n + 1) / 2;

        std::vector<double> Xa, ya, Xb, yb;
        Xa.reserve(half * e.dims);
        ya.reserve(half);
        for (size_t i = 0; i < e.n; ++i) {
            const size_t l = perm[i];
            const bool to_a = i < half;
            const QRegressor* chooser = to_a ? qa.get() : qb.get();
            const QRegressor* evaluator = to_a ? qb.get() : qa.get();
            const int ustar = argmin_next(chooser, l);
            const double target = e.cost[l] + cfg.gamma * eval_next(evaluator, l, ustar);
            auto& X = to_a ? Xa : Xb;
            auto& y = to_a ? ya : yb;
            X.insert(X.end(), &e.X[l * e.dims], &e.X[(l + 1) * e.dims]);
            y.push_back(target);
        }
        detail::check_targets(ya, N);
        detail::check_targets(yb, N);
        auto na = factory();
        na->fit(Xa, ya, e.dims);
        auto nb = factory();
        nb->fit(Xb, yb, e.dims);
        qa = std::move(na);
        qb = std::move(nb);
    }

    QEnsemble q;
    q.members.push_back(std::move(qa));
    q.members.push_back(std::move(qb));
    q.enc = cfg.enc;
    q.iterations = cfg.iterations;
    q.lambda_per_J = cfg.lambda_per_J;
    q.alpha = cfg.alpha;
    return q;
}

// Greedy action; exact ties break toward staying off.
inline int greedy_policy(const QEnsemble& q, const ObservedState& x) {
    return q.value(x, 1) < q.value(x, 0) ? 1 : 0;
}

// Opportunity cost of each action relative to the locally optimal one.
inline std::pair<double, double> advantage(const QEnsemble& q, const ObservedState& x) {
    const double v0 = q.value(x, 0);
    const double v1 = q.value(x, 1);
    const double vmin = std::min(v0, v1);
    return {v0 - vmin, v1 - vmin};
}

struct AdvantageTable {
    int device_id = 0;
    const QEnsemble* q = nullptr;

    std::pair<double, double> operator()(const ObservedState& x) const {
        return advantage(*q, x);
    }
};

// --- batch files -----------------------------------------------------------
// CSV columns: device_id,quarter,temp_C,u,u_phys,quarter_next,temp_next_C

inline void write_batches(const std::string& path,
                          const std::map<int, std::vector<Transition>>& batches) {
    csv::Writer w(path);
    w.row({"device_id", "quarter", "temp_C", "u", "u_phys", "quarter_next", "temp_next_C"});
    for (const auto& [id, list] : batches)
        for (const auto& t : list)
            w.row({csv::num(static_cast<long long>(id)), csv::num(static_cast<long long>(t.x.quarter)),
                   csv::num(t.x.temp_C), csv::num(static_cast<long long>(t.u)),
                   csv::num(static_cast<long long>(t.u_phys)),
                   csv::num(static_cast<long long>(t.x_next.quarter)), csv::num(t.x_next.temp_C)});
}

inline std::map<int, std::vector<Transition>> read_batches(const std::string& path) {
    const auto table = csv::read_file(path);
    const std::vector<std::string> expect = {"device_id", "quarter",      "temp_C",
                                             "u",         "u_phys",       "quarter_next",
                                             "temp_next_C"};
    if (table.header != expect) throw std::runtime_error(path + ": unexpected batch header");
    std::map<int, std::vector<Transition>> out;
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const long line = static_cast<long>(r) + 2;  // 1-based, after header
        const auto& row = table.rows[r];
        auto fail = [&](const std::string& what) {
            throw std::runtime_error(path + ": line " + std::to_string(line) + ": " + what);
        };
        if (row.size() != expect.size()) fail("wrong column count");
        Transition t;
        int device = 0;
        try {
            device = std::stoi(row[0]);
            t.x.quarter = std::stoi(row[1]);
            t.x.temp_C = std::stod(row[2]);
            t.u = std::stoi(row[3]);
            t.u_phys = std::stoi(row[4]);
            t.x_next.quarter = std::stoi(row[5]);
            t.x_next.temp_C = std::stod(row[6]);
        } catch (const std::exception&) {
            fail("unparseable field");
        }
        if (t.x.quarter < 1 || t.x.quarter > 96 || t.x_next.quarter < 1 || t.x_next.quarter > 96)
            fail("quarter out of range 1..96");
        if ((t.u != 0 && t.u != 1) || (t.u_phys != 0 && t.u_phys != 1)) fail("u must be 0/1");
        if (!std::isfinite(t.x.temp_C) || !std::isfinite(t.x_next.temp_C)) fail("non-finite temp");
        out[device].push_back(t);
    }
    return out;
}

} // namespace dhwflex::rl
