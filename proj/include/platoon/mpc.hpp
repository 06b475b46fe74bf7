#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "platoon/vehicle.hpp"

namespace platoon {

/// Control/state/output sequences over one prediction horizon.
///
/// Single-shooting consistency holds by construction: states[k+1] equals
/// step(states[k], controls[k]) and outputs[k] = [s_k, v_k].
struct HorizonTrajectory {
    std::vector<double> controls;        // length Np
    std::vector<VehicleState> states;    // length Np + 1
    std::vector<OutputVec> outputs;      // length Np + 1

    int horizon() const { return static_cast<int>(controls.size()); }
};

HorizonTrajectory rollout(const VehicleParams& p, const PhysicalConstants& c,
                          const VehicleState& x0, std::span<const double> controls);

/// Quadratic-form weights of the stage cost.  Q penalises deviation from the
/// desired output, R deviation of the input from the equilibrium torque,
/// F deviation from the vehicle's own assumed output and G deviation from
/// the shifted assumed outputs of the in-neighbors.
struct WeightSet {
    Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
    double R = 0.0;
    Eigen::Matrix2d F = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
};

/// Assumed output sequence of one information source plus the desired gap
/// to it: gap_m = (i - j) * d for in-neighbor j of vehicle i, i * d for the
/// leader (id 0).
struct NeighborTrajectory {
    int id = 0;
    std::vector<OutputVec> assumed;  // length Np + 1
    double gap_m = 0.0;
};

/// Everything vehicle i receives from its information set I_i.
/// The leader entry is present exactly when the vehicle is pinned; its
/// assumed outputs are the constant-speed extrapolation of the leader.
struct NeighborData {
    std::vector<NeighborTrajectory> followers;
    std::optional<NeighborTrajectory> leader;

    bool pinned() const { return leader.has_value(); }
};

struct SolverOptions {
    int max_outer = 8;
    int max_inner = 400;
    double terminal_tol = 1e-4;     // inf-norm bound on the scaled terminal equations
    double penalty_growth = 10.0;
    double penalty_initial = 100.0;
};

enum class SolveStatus { converged, max_iterations, infeasible_terminal };

struct SolveReport {
    std::vector<double> controls;
    HorizonTrajectory trajectory;
    double objective_value = 0.0;    // stage cost only, no penalty bookkeeping
    double terminal_residual = 0.0;  // inf-norm of the scaled terminal equations
    int outer_iterations = 0;
    int inner_iterations = 0;
    SolveStatus status = SolveStatus::converged;
};

/// Stage cost of a trajectory against its references.  The Q term is
/// evaluated only when the vehicle is pinned and the G terms only over the
/// provided in-neighbors.  `desired` may be empty for unpinned vehicles.
double objective(const HorizonTrajectory& traj, std::span<const OutputVec> assumed_self,
                 const NeighborData& neighbors, std::span<const OutputVec> desired,
                 const WeightSet& w, const VehicleParams& p, const PhysicalConstants& c);

/// d(objective)/d(controls) through the single-shooting recursion.
std::vector<double> objective_gradient(const VehicleParams& p, const PhysicalConstants& c,
                                       const VehicleState& x0, std::span<const double> controls,
                                       std::span<const OutputVec> assumed_self,
                                       const NeighborData& neighbors,
                                       std::span<const OutputVec> desired, const WeightSet& w);

/// Solve the finite-horizon problem for one vehicle.
///
/// Box bounds are enforced exactly by projection; the terminal output and
/// terminal torque equations are driven below opts.terminal_tol by an
/// augmented quadratic penalty whose weight grows across outer iterations.
/// The horizon length is taken from the reference sequences (Np + 1 points).
/// An empty warm start means constant controls u = h(v0).
SolveReport solve(const VehicleState& x0, std::span<const OutputVec> assumed_self,
                  const NeighborData& neighbors, std::span<const OutputVec> desired,
                  const WeightSet& w, const VehicleParams& p, const PhysicalConstants& c,
                  const SolverOptions& opts, std::span<const double> warm_start = {});

/// Receding-horizon shift: drop the first control, append the equilibrium
/// hold u = h(v_terminal), and re-roll the dynamics from the second state.
HorizonTrajectory shift_assumed(const HorizonTrajectory& prev, const VehicleParams& p,
                                const PhysicalConstants& c);

}  // namespace platoon
