#include "platoon/vehicle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace platoon {

void PhysicalConstants::validate() const {
    if (!(gravity_mps2 > 0.0)) throw std::invalid_argument("gravity_mps2 must be positive");
    if (!(dt_s > 0.0)) throw std::invalid_argument("dt_s must be positive");
}

void VehicleParams::validate() const {
    if (!(mass_kg > 0.0)) throw std::invalid_argument("mass_kg must be positive");
    if (!(inertial_lag_s > 0.0)) throw std::invalid_argument("inertial_lag_s must be positive");
    if (!(tire_radius_m > 0.0)) throw std::invalid_argument("tire_radius_m must be positive");
    if (!(driveline_efficiency > 0.0 && driveline_efficiency <= 1.0))
        throw std::invalid_argument("driveline_efficiency must lie in (0, 1]");
    if (!(u_min < u_max)) throw std::invalid_argument("u_min must be below u_max");
    if (!std::isfinite(aero_drag_coeff) || !std::isfinite(rolling_resist_coeff))
        throw std::invalid_argument("drag coefficients must be finite");
}

double drag_force(const VehicleParams& p, const PhysicalConstants& c, double velocity_mps) {
    return p.aero_drag_coeff * velocity_mps * velocity_mps +
           p.mass_kg * c.gravity_mps2 * p.rolling_resist_coeff;
}

double equilibrium_torque(const VehicleParams& p, const PhysicalConstants& c, double velocity_mps) {
    return p.tire_radius_m / p.driveline_efficiency * drag_force(p, c, velocity_mps);
}

VehicleState step(const VehicleParams& p, const PhysicalConstants& c, const VehicleState& x, double u) {
    const double dt = c.dt_s;
    VehicleState next;
    next.position_m = x.position_m + x.velocity_mps * dt;
    next.velocity_mps = x.velocity_mps +
                        dt / p.mass_kg *
                            (p.driveline_efficiency / p.tire_radius_m * x.torque -
                             drag_force(p, c, x.velocity_mps));
    next.torque = x.torque - dt / p.inertial_lag_s * x.torque + dt / p.inertial_lag_s * u;
    return next;
}

VehicleState desired_state(double leader_pos_m, double leader_vel_mps, double index_gap_m,
                           const VehicleParams& p, const PhysicalConstants& c) {
    return {leader_pos_m - index_gap_m, leader_vel_mps, equilibrium_torque(p, c, leader_vel_mps)};
}

}  // namespace platoon
