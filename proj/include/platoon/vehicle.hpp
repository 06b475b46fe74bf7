#pragma once

namespace platoon {

/// Constants shared by every vehicle in a platoon.
struct PhysicalConstants {
    double gravity_mps2 = 9.8;
    double dt_s = 0.1;

    void validate() const;
};

/// Per-vehicle physical parameters and control-input bounds.
/// All heterogeneity across the platoon lives in this struct.
struct VehicleParams {
    double mass_kg = 1500.0;
    double aero_drag_coeff = 1.0;         // C_A, N/(m/s)^2
    double rolling_resist_coeff = 0.015;  // f, dimensionless
    double inertial_lag_s = 0.4;          // tau, driveline lag
    double tire_radius_m = 0.3;
    double driveline_efficiency = 0.9;    // eta in (0, 1]
    double u_min = -3000.0;               // torque command bounds, N*m
    double u_max = 3000.0;
    int id = 0;

    void validate() const;
};

/// Longitudinal state x = [s, v, T].
struct VehicleState {
    double position_m = 0.0;
    double velocity_mps = 0.0;
    double torque = 0.0;
};

/// Controlled output y = [s, v].
struct OutputVec {
    double position_m = 0.0;
    double velocity_mps = 0.0;
};

inline OutputVec output_of(const VehicleState& x) {
    return {x.position_m, x.velocity_mps};
}

/// External drag Gamma(v) = C_A v^2 + m g f.
double drag_force(const VehicleParams& p, const PhysicalConstants& c, double velocity_mps);

/// Torque h(v) that exactly balances the external drag at speed v.
double equilibrium_torque(const VehicleParams& p, const PhysicalConstants& c, double velocity_mps);

/// One step of the discrete longitudinal dynamics, x(t+1) = phi(x(t)) + u * psi.
/// Pure function; the caller is responsible for keeping u within bounds.
VehicleState step(const VehicleParams& p, const PhysicalConstants& c, const VehicleState& x, double u);

/// Reference state for a follower sitting index_gap_m behind a constant-speed leader.
VehicleState desired_state(double leader_pos_m, double leader_vel_mps, double index_gap_m,
                           const VehicleParams& p, const PhysicalConstants& c);

}  // namespace platoon
