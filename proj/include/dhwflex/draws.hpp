#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhwflex/rng.hpp"

namespace dhwflex::draws {

enum class ClusterKind { Residential, Office };

inline ClusterKind kind_from_string(const std::string& s) {
    if (s == "residential") return ClusterKind::Residential;
    if (s == "office") return ClusterKind::Office;
    throw std::invalid_argument("unknown draw profile kind: " + s);
}

// Event-rate curves over the 96 quarter-hours of a day plus the two event
// magnitude classes. Residential usage is bimodal (morning and evening
// showers); office taps sit almost uniformly inside working hours.
struct DrawProfileModel {
    ClusterKind kind = ClusterKind::Residential;
    std::array<double, 96> shower_rate{};  // expected events per customer per quarter
    std::array<double, 96> tap_rate{};
    double shower_volume_L = 40.0;
    double shower_duration_min = 8.0;
    double tap_volume_L = 2.0;
    double tap_duration_min = 1.0;

    void validate() const {
        for (double r : shower_rate)
            if (r < 0) throw std::invalid_argument("negative shower rate");
        for (double r : tap_rate)
            if (r < 0) throw std::invalid_argument("negative tap rate");
    }

    static DrawProfileModel residential();
    static DrawProfileModel office();
    static DrawProfileModel from_kind(ClusterKind k) {
        return k == ClusterKind::Residential ? residential() : office();
    }
};

namespace detail {

// Gaussian bump over hours of day, discretised to quarters, normalised to a
// total expected event count.
inline void add_bump(std::array<double, 96>& rate, double center_h, double sd_h,
                     double events_per_day) {
    std::array<double, 96> w{};
    double sum = 0;
    for (int q = 0; q < 96; ++q) {
        const double h = (q + 0.5) / 4.0;
        double d = std::abs(h - center_h);
        d = std::min(d, 24.0 - d);  // wrap around midnight
        w[q] = std::exp(-0.5 * (d / sd_h) * (d / sd_h));
        sum += w[q];
    }
    for (int q = 0; q < 96; ++q) rate[q] += events_per_day * w[q] / sum;
}

inline void add_window(std::array<double, 96>& rate, double start_h, double end_h,
                       double events_per_day) {
    int count = 0;
    for (int q = 0; q < 96; ++q) {
        const double h = (q + 0.5) / 4.0;
        if (h >= start_h && h < end_h) ++count;
    }
    for (int q = 0; q < 96; ++q) {
        const double h = (q + 0.5) / 4.0;
        if (h >= start_h && h < end_h) rate[q] += events_per_day / count;
    }
}

} // namespace detail

inline DrawProfileModel DrawProfileModel::residential() {
    DrawProfileModel m;
    m.kind = ClusterKind::Residential;
    detail::add_bump(m.shower_rate, 7.25, 1.0, 1.0);    // morning peak
    detail::add_bump(m.shower_rate, 20.5, 1.25, 0.6);   // evening peak
    detail::add_bump(m.tap_rate, 7.5, 1.5, 2.0);
    detail::add_bump(m.tap_rate, 19.5, 2.0, 2.5);
    detail::add_window(m.tap_rate, 9.0, 23.0, 1.5);
    return m;
}

inline DrawProfileModel DrawProfileModel::office() {
    DrawProfileModel m;
    m.kind = ClusterKind::Office;
    detail::add_window(m.tap_rate, 8.0, 18.0, 4.0);
    detail::add_bump(m.tap_rate, 12.5, 0.75, 0.8);      // lunch bump
    detail::add_window(m.shower_rate, 8.0, 18.0, 0.12); // occasional gym shower
    return m;
}

struct DrawSet {
    // Mass flow in kg/s, one row per customer, one column per simulated minute.
    std::vector<std::vector<double>> per_customer_kg_s;
    // Day-cycle mean over customers and days at 1-minute resolution; serves as
    // the forecast profile for the window models and the training pipeline.
    std::array<double, 1440> mean_profile_kg_s{};
    int minutes = 0;
};

// Inhomogeneous Poisson event sampling per customer. Event starts land
// uniformly inside their quarter; volumes spread uniformly over the event
// duration and stack additively.
inline DrawSet generate_draws(const DrawProfileModel& model, int n_customers, int days,
                              std::uint64_t seed, double rho_kg_per_L = 1.0) {
    if (n_customers < 1) throw std::invalid_argument("generate_draws: need customers");
    if (days < 1) throw std::invalid_argument("generate_draws: need days");
    model.validate();

    DrawSet out;
    out.minutes = days * 1440;
    out.per_customer_kg_s.assign(n_customers, std::vector<double>(out.minutes, 0.0));

    auto add_event = [&](std::vector<double>& row, int start_min, double volume_L,
                         double duration_min) {
        const double rate_kg_s = volume_L * rho_kg_per_L / (duration_min * 60.0);
        for (int k = 0; k < static_cast<int>(duration_min); ++k) {
            const int m = start_min + k;
            if (m < out.minutes) row[m] += rate_kg_s;
        }
    };

    for (int cust = 0; cust < n_customers; ++cust) {
        Rng rng = make_stream(seed, 0xD3A9u, cust);
        auto& row = out.per_customer_kg_s[cust];
        for (int day = 0; day < days; ++day) {
            for (int q = 0; q < 96; ++q) {
                const int base_min = day * 1440 + q * 15;
                const int n_showers = rng.poisson(model.shower_rate[q]);
                for (int e = 0; e < n_showers; ++e)
                    add_event(row, base_min + static_cast<int>(rng.uniform_int(15)),
                              model.shower_volume_L, model.shower_duration_min);
                const int n_taps = rng.poisson(model.tap_rate[q]);
                for (int e = 0; e < n_taps; ++e)
                    add_event(row, base_min + static_cast<int>(rng.uniform_int(15)),
                              model.tap_volume_L, model.tap_duration_min);
            }
        }
    }

    for (int m = 0; m < out.minutes; ++m) {
        double s = 0;
        for (int c = 0; c < n_customers; ++c) s += out.per_customer_kg_s[c][m];
        out.mean_profile_kg_s[m % 1440] += s;
    }
    for (auto& v : out.mean_profile_kg_s) v /= static_cast<double>(n_customers) * days;
    return out;
}

} // namespace dhwflex::draws
