#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dhwflex/rng.hpp"

namespace dhwflex::wind {

struct WindParams {
    double mean_W = 80000.0;
    double amplitude_W = 30000.0;
    double error_std_W = 8000.0;  // stationary std of the forecast error
    double ar1 = 0.8;             // lag-1 coefficient of the error process
};

struct WindTraces {
    std::vector<double> dayahead_W;    // planned production per quarter
    std::vector<double> short_term_W;  // 15-minute-ahead forecast per quarter
};

// Smooth day-ahead shape plus an AR(1) forecast-error process on top for the
// short-term forecast. Both traces are clamped nonnegative.
inline WindTraces generate_wind(const WindParams& p, int n_quarters, std::uint64_t seed) {
    if (n_quarters < 1) throw std::invalid_argument("generate_wind: need quarters");
    if (p.ar1 < 0 || p.ar1 >= 1) throw std::invalid_argument("generate_wind: ar1 in [0,1)");
    WindTraces w;
    w.dayahead_W.resize(n_quarters);
    w.short_term_W.resize(n_quarters);
    Rng rng = make_stream(seed, 0x817Du);
    double err = p.error_std_W > 0 ? rng.normal(0.0, p.error_std_W) : 0.0;
    const double innov = p.error_std_W * std::sqrt(1.0 - p.ar1 * p.ar1);
    for (int q = 0; q < n_quarters; ++q) {
        const double phase = 2.0 * M_PI * (q % 96) / 96.0;
        const double shape = 0.65 * std::sin(phase + 0.7) + 0.35 * std::sin(2.0 * phase + 2.1);
        w.dayahead_W[q] = std::max(0.0, p.mean_W + p.amplitude_W * shape);
        w.short_term_W[q] = std::max(0.0, w.dayahead_W[q] + err);
        if (p.error_std_W > 0) err = p.ar1 * err + innov * rng.normal();
    }
    return w;
}

} // namespace dhwflex::wind
