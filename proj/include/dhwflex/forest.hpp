#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhwflex/rng.hpp"

namespace dhwflex {

// Extremely randomized trees for regression: at every node a handful of
// non-constant feature directions is sampled, each gets one uniform-random
// threshold inside the node's value range, and the best split by squared-error
// reduction wins. No bootstrap; every tree sees the full training set.
struct ForestParams {
    int n_trees = 50;
    int k_candidates = 0;  // 0 means all input dimensions
    int n_min = 5;         // minimum samples to split
    std::uint64_t rng_seed = 1;

    void validate(int dims) const {
        if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
        if (n_min < 2) throw std::invalid_argument("n_min must be >= 2");
        if (k_candidates < 0 || k_candidates > dims)
            throw std::invalid_argument("k_candidates must be in [1, dims] (0 = all)");
    }
};

struct TreeNode {
    double value = 0.0;      // leaf prediction (mean of node targets)
    float threshold = 0.0f;  // split point, x[feature] <= threshold goes left
    std::int32_t feature = -1;  // -1 marks a leaf
    std::int32_t left = -1;     // left child index; right child is left + 1
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const double* x) const {
        int i = 0;
        while (nodes[i].feature >= 0)
            i = nodes[i].left + (x[nodes[i].feature] <= nodes[i].threshold ? 0 : 1);
        return nodes[i].value;
    }
};

class Forest {
public:
    Forest() = default;

    int dims() const { return dims_; }
    int n_trees() const { return static_cast<int>(trees_.size()); }
    const std::vector<RegressionTree>& trees() const { return trees_; }

    double predict(const double* x, int dims) const {
        if (dims != dims_) throw std::invalid_argument("predict: dimension mismatch");
        double sum = 0.0;
        for (const auto& t : trees_) sum += t.predict(x);
        return sum / static_cast<double>(trees_.size());
    }

    double predict(const std::vector<double>& x) const {
        return predict(x.data(), static_cast<int>(x.size()));
    }

    // --- versioned flat binary serialization -------------------------------
    // All integers little-endian. Layout:
    //   magic  'X','T','F','1'
    //   u32 version (=1), u32 n_trees, u32 dims
    //   per tree: u32 n_nodes, then n_nodes records of
    //     i32 feature, f32 threshold, i32 left, f64 value
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write forest file: " + path);
        const char magic[4] = {'X', 'T', 'F', '1'};
        out.write(magic, 4);
        write_u32(out, 1);
        write_u32(out, static_cast<std::uint32_t>(trees_.size()));
        write_u32(out, static_cast<std::uint32_t>(dims_));
        for (const auto& t : trees_) {
            write_u32(out, static_cast<std::uint32_t>(t.nodes.size()));
            for (const auto& n : t.nodes) {
                write_i32(out, n.feature);
                write_f32(out, n.threshold);
                write_i32(out, n.left);
                write_f64(out, n.value);
            }
        }
        if (!out) throw std::runtime_error("short write to forest file: " + path);
    }

    static Forest load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read forest file: " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, "XTF1", 4) != 0)
            throw std::runtime_error("bad forest file magic: " + path);
        const std::uint32_t version = read_u32(in);
        if (version != 1) throw std::runtime_error("unsupported forest file version");
        Forest f;
        const std::uint32_t nt = read_u32(in);
        f.dims_ = static_cast<int>(read_u32(in));
        f.trees_.resize(nt);
        for (auto& t : f.trees_) {
            const std::uint32_t nn = read_u32(in);
            t.nodes.resize(nn);
            for (auto& n : t.nodes) {
                n.feature = read_i32(in);
                n.threshold = read_f32(in);
                n.left = read_i32(in);
                n.value = read_f64(in);
            }
        }
        if (!in) throw std::runtime_error("truncated forest file: " + path);
        return f;
    }

    static Forest from_trees(std::vector<RegressionTree> trees, int dims) {
        if (trees.empty()) throw std::invalid_argument("from_trees: no trees");
        Forest f;
        f.trees_ = std::move(trees);
        f.dims_ = dims;
        return f;
    }

    friend Forest fit_forest(const std::vector<double>& X, const std::vector<double>& y, int dims,
                             const ForestParams& params);

private:
    static void write_u32(std::ostream& o, std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        o.write(reinterpret_cast<char*>(b), 4);
    }
    static void write_i32(std::ostream& o, std::int32_t v) {
        write_u32(o, static_cast<std::uint32_t>(v));
    }
    static void write_f32(std::ostream& o, float v) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        write_u32(o, u);
    }
    static void write_f64(std::ostream& o, double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        write_u32(o, static_cast<std::uint32_t>(u));
        write_u32(o, static_cast<std::uint32_t>(u >> 32));
    }
    static std::uint32_t read_u32(std::istream& i) {
        unsigned char b[4];
        i.read(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    static std::int32_t read_i32(std::istream& i) { return static_cast<std::int32_t>(read_u32(i)); }
    static float read_f32(std::istream& i) {
        const std::uint32_t u = read_u32(i);
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    static double read_f64(std::istream& i) {
        std::uint64_t u = read_u32(i);
        u |= static_cast<std::uint64_t>(read_u32(i)) << 32;
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }

    std::vector<RegressionTree> trees_;
    int dims_ = 0;
};

namespace forest_detail {

struct Builder {
    // Feature-major copy (one contiguous block per dimension) plus a target
    // copy; built once and shared by all trees of a fit.
    std::vector<double> Xt;
    std::vector<double> yy;
    int dims;
    int n_rows;
    const ForestParams& params;
    std::vector<int> idx;

    Builder(const std::vector<double>& X, const std::vector<double>& y, int d,
            const ForestParams& p)
        : dims(d), n_rows(static_cast<int>(y.size())), params(p) {
        Xt.resize(X.size());
        for (int i = 0; i < n_rows; ++i)
            for (int j = 0; j < d; ++j)
                Xt[static_cast<size_t>(j) * n_rows + i] = X[static_cast<size_t>(i) * d + j];
        yy = y;
    }

    RegressionTree grow(Rng rng) {
        RegressionTree tree;
        idx.resize(n_rows);
        std::iota(idx.begin(), idx.end(), 0);
        // Node ranges into idx with target sums carried down from the split
        // scan, so only the candidate scoring touches the rows.
        struct Item {
            int node, lo, hi;
            double sum, sumsq;
        };
        double sum0 = 0, sumsq0 = 0;
        for (double v : yy) {
            sum0 += v;
            sumsq0 += v * v;
        }
        std::vector<Item> stack;
        tree.nodes.emplace_back();
        stack.push_back({0, 0, n_rows, sum0, sumsq0});

        std::vector<double> mins(dims), maxs(dims);
        std::vector<int> usable(dims);

        while (!stack.empty()) {
            const Item it = stack.back();
            stack.pop_back();
            const int n = it.hi - it.lo;

            auto make_leaf = [&] {
                tree.nodes[it.node].feature = -1;
                tree.nodes[it.node].value = it.sum / n;
            };
            const double node_sse = it.sumsq - it.sum * it.sum / n;
            if (n < params.n_min || node_sse <= 1e-12 * (1.0 + std::abs(it.sumsq))) {
                make_leaf();
                continue;
            }

            // Candidate directions: sampled among the non-constant features.
            for (int d = 0; d < dims; ++d) {
                mins[d] = std::numeric_limits<double>::infinity();
                maxs[d] = -mins[d];
            }
            for (int i = it.lo; i < it.hi; ++i) {
                const int row = idx[i];
                for (int d = 0; d < dims; ++d) {
                    const double v = Xt[static_cast<size_t>(d) * n_rows + row];
                    mins[d] = std::min(mins[d], v);
                    maxs[d] = std::max(maxs[d], v);
                }
            }
            int n_usable = 0;
            for (int d = 0; d < dims; ++d)
                if (maxs[d] > mins[d]) usable[n_usable++] = d;
            if (n_usable == 0) {
                make_leaf();
                continue;
            }
            int k = params.k_candidates == 0 ? dims : params.k_candidates;
            k = std::min(k, n_usable);
            // Partial Fisher-Yates over the usable list.
            for (int i = 0; i < k; ++i) {
                const int j = i + static_cast<int>(rng.uniform_int(n_usable - i));
                std::swap(usable[i], usable[j]);
            }

            int best_dim = -1;
            float best_thr = 0.0f;
            double best_child_sse = std::numeric_limits<double>::infinity();
            double best_lsum = 0, best_lsumsq = 0;
            int best_lcount = 0;
            for (int c = 0; c < k; ++c) {
                const int d = usable[c];
                const float thr =
                    static_cast<float>(mins[d] + rng.uniform() * (maxs[d] - mins[d]));
                const double* col = &Xt[static_cast<size_t>(d) * n_rows];
                double lsum = 0, lsumsq = 0;
                int lcount = 0;
                for (int i = it.lo; i < it.hi; ++i) {
                    const int row = idx[i];
                    if (col[row] <= thr) {
                        const double v = yy[row];
                        lsum += v;
                        lsumsq += v * v;
                        ++lcount;
                    }
                }
                if (lcount == 0 || lcount == n) continue;  // float rounding corner
                const double rsum = it.sum - lsum, rsumsq = it.sumsq - lsumsq;
                const int rcount = n - lcount;
                const double sse = (lsumsq - lsum * lsum / lcount) +
                                   (rsumsq - rsum * rsum / rcount);
                if (sse < best_child_sse) {
                    best_child_sse = sse;
                    best_dim = d;
                    best_thr = thr;
                    best_lsum = lsum;
                    best_lsumsq = lsumsq;
                    best_lcount = lcount;
                }
            }
            if (best_dim < 0) {
                make_leaf();
                continue;
            }

            // In-place partition: left block first.
            const double* col = &Xt[static_cast<size_t>(best_dim) * n_rows];
            int mid = it.lo;
            for (int i = it.lo; i < it.hi; ++i)
                if (col[idx[i]] <= best_thr) std::swap(idx[mid++], idx[i]);

            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes[it.node].feature = best_dim;
            tree.nodes[it.node].threshold = best_thr;
            tree.nodes[it.node].left = left;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            stack.push_back({left + 1, mid, it.hi, it.sum - best_lsum, it.sumsq - best_lsumsq});
            stack.push_back({left, it.lo, mid, best_lsum, best_lsumsq});
            (void)best_lcount;
        }
        return tree;
    }
};

} // namespace forest_detail

// X is row-major (n_rows x dims). Targets must be finite; an all-identical
// input degenerates into single-leaf trees.
inline Forest fit_forest(const std::vector<double>& X, const std::vector<double>& y, int dims,
                         const ForestParams& params) {
    if (y.empty()) throw std::invalid_argument("fit_forest: empty training set");
    if (X.size() != y.size() * static_cast<size_t>(dims))
        throw std::invalid_argument("fit_forest: X/y size mismatch");
    params.validate(dims);
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("fit_forest: non-finite target");

    Forest f;
    f.dims_ = dims;
    f.trees_.resize(params.n_trees);
    forest_detail::Builder builder(X, y, dims, params);
    for (int t = 0; t < params.n_trees; ++t)
        f.trees_[t] = builder.grow(make_stream(params.rng_seed, 0xF0E5u, t));
    return f;
}

} // namespace dhwflex
