#pragma once

#include <cmath>
#include <stdexcept>

namespace dhwflex {

// Physical constants of one electric storage water heater. Derived quantities
// (thermal capacity, loss coefficient) are computed from the base fields so
// the identities C = m*c and G = A/R hold exactly.
struct DeviceParams {
    double water_mass_kg = 80.0;
    double specific_heat_J_per_kgK = 4186.0;
    double surface_area_m2 = 2.0;
    double tank_resistance_Km2_per_W = 1.0;
    double efficiency = 0.98;          // in (0, 1]
    double nominal_power_W = 2500.0;
    double water_density_kg_per_L = 1.0;

    double thermal_capacity() const { return water_mass_kg * specific_heat_J_per_kgK; }
    double loss_coeff() const { return surface_area_m2 / tank_resistance_Km2_per_W; }

    void validate() const {
        if (!(water_mass_kg > 0 && specific_heat_J_per_kgK > 0 && surface_area_m2 > 0 &&
              tank_resistance_Km2_per_W > 0 && nominal_power_W > 0 && water_density_kg_per_L > 0))
            throw std::invalid_argument("device parameters must be strictly positive");
        if (!(efficiency > 0 && efficiency <= 1))
            throw std::invalid_argument("efficiency must be in (0,1]");
    }

    // Upper bound on the temperature rise of a single full-power step; used as
    // the documented one-step overshoot slack above the hard cap.
    double one_step_rise_bound(double step_len_s) const {
        return step_len_s * efficiency * nominal_power_W / thermal_capacity();
    }
};

struct ComfortBounds {
    double user_lower_C = 50.0;   // forced-on threshold
    double user_upper_C = 85.0;   // forced-off threshold (hard cap)
    double hard_lower_C = 45.0;   // planning hard bound, below user_lower

    void validate() const {
        if (!(hard_lower_C < user_lower_C && user_lower_C < user_upper_C))
            throw std::invalid_argument("bounds must satisfy hard_lower < user_lower < user_upper");
    }
};

struct DeviceState {
    double temperature_C = 60.0;
    long minute_index = 0;
};

struct StepInputs {
    double draw_rate_kg_s = 0.0;
    double ambient_C = 20.0;
    double inlet_C = 15.0;
    double heat_power_W = 0.0;   // in [0, nominal_power_W]
    double step_len_s = 60.0;

    void validate() const {
        if (draw_rate_kg_s < 0) throw std::invalid_argument("draw_rate must be >= 0");
        if (!(step_len_s > 0)) throw std::invalid_argument("step_len must be > 0");
    }
};

// Exact discretization of the first-order tank ODE
//   C dT/dt = -G (T - Ta) - B (T - Tin) + eta * g
// over one step with constant inputs:
//   T' = a T + (1-a) zeta + (1-a) b g.
struct StepCoefficients {
    double a = 0;       // exp(-dt (G+B) / C)
    double a_bar = 0;   // 1 - a
    double zeta = 0;    // (G Ta + B Tin) / (G+B)
    double b = 0;       // eta / (G+B)
};

inline StepCoefficients step_coefficients(const DeviceParams& params, const StepInputs& inputs) {
    inputs.validate();
    const double G = params.loss_coeff();
    const double B = params.water_density_kg_per_L * inputs.draw_rate_kg_s * params.specific_heat_J_per_kgK;
    const double GB = G + B;
    StepCoefficients c;
    c.a = std::exp(-inputs.step_len_s * GB / params.thermal_capacity());
    c.a_bar = 1.0 - c.a;
    c.zeta = (G * inputs.ambient_C + B * inputs.inlet_C) / GB;
    c.b = params.efficiency / GB;
    if (!(std::isfinite(c.a) && std::isfinite(c.zeta) && std::isfinite(c.b)))
        throw std::domain_error("non-finite step coefficients (parameter overflow/underflow)");
    return c;
}

inline DeviceState step(const DeviceState& state, const DeviceParams& params, const StepInputs& inputs) {
    const StepCoefficients c = step_coefficients(params, inputs);
    DeviceState next;
    next.temperature_C = c.a * state.temperature_C + c.a_bar * c.zeta + c.a_bar * c.b * inputs.heat_power_W;
    next.minute_index = state.minute_index + 1;
    return next;
}

// Device-local override of the requested switching action. Boundary handling:
// T exactly at the lower bound forces on; T exactly at the upper bound still
// allows the requested action.
inline int backup(double temperature_C, int requested_u, const ComfortBounds& bounds) {
    if (temperature_C <= bounds.user_lower_C) return 1;
    if (temperature_C > bounds.user_upper_C) return 0;
    return requested_u;
}

// Per-step operating cost: energy charge when physically heating, minus an
// availability fee whenever the tank is above the user lower bound.
inline double step_cost(int u_phys, double temperature_C, const DeviceParams& params,
                        const ComfortBounds& bounds, double lambda_per_J, double alpha,
                        double step_len_s) {
    if (lambda_per_J < 0 || alpha < 0)
        throw std::invalid_argument("lambda and alpha must be >= 0");
    double cost = params.nominal_power_W * step_len_s * lambda_per_J * (u_phys ? 1.0 : 0.0);
    if (temperature_C > bounds.user_lower_C) cost -= alpha;
    return cost;
}

} // namespace dhwflex
