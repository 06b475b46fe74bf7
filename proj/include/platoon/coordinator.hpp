#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "platoon/metric_learning.hpp"
#include "platoon/mpc.hpp"
#include "platoon/topology.hpp"
#include "platoon/vehicle.hpp"

namespace platoon {

/// Piecewise-linear leader speed profile.  Segment k covers
/// [until_s of k-1, until_s of k); the last segment extends forever.
struct LeaderSegment {
    double until_s = std::numeric_limits<double>::infinity();
    double v_start_mps = 20.0;
    double v_end_mps = 20.0;
};

struct LeaderProfile {
    double initial_position_m = 0.0;
    std::vector<LeaderSegment> segments = {LeaderSegment{}};

    double velocity_at(double t) const;
    void validate() const;
};

enum class ManeuverKind { cut_in, cut_out };

/// A cut-in inserts a vehicle at platoon slot `position` (1..N+1); a cut-out
/// removes the vehicle at slot `position` under the indexing at event time.
struct ManeuverEvent {
    ManeuverKind kind = ManeuverKind::cut_in;
    double time_s = 0.0;
    int position = 1;
    std::optional<VehicleParams> params;       // cut-in only
    std::optional<double> entry_position_m;    // default: midpoint of the entered gap
    std::optional<double> entry_velocity_mps;  // default: predecessor's current speed
    std::optional<double> entry_torque;        // default: h(entry velocity)
};

struct MetricLearningConfig {
    bool enabled = false;
    AdmmOptions options;
};

struct Tolerances {
    double position_m = 0.1;
    double velocity_mps = 0.05;
    double collision_margin_m = 0.0;
};

/// Manual stage-cost weights used when metric learning is off.
WeightSet default_weights();

/// Zero out Q for unpinned vehicles and G for vehicles without in-neighbors.
WeightSet apply_weight_pattern(const WeightSet& base, const Topology& topology, int slot);

/// Full simulation description.  Vehicles must have one entry per follower;
/// initial states default to the desired formation at the leader's speed.
struct Scenario {
    std::string name = "scenario";
    TopologyKind topology = TopologyKind::PF;
    int n_followers = 1;
    PhysicalConstants constants;
    int horizon = 20;
    double desired_gap_m = 10.0;
    double duration_s = 10.0;
    LeaderProfile leader;
    std::vector<VehicleParams> vehicles;
    std::optional<std::vector<VehicleState>> initial_states;
    std::vector<ManeuverEvent> events;
    WeightSet base_weights = default_weights();
    SolverOptions solver;
    MetricLearningConfig learning;
    Tolerances tolerances;

    /// Throws std::invalid_argument describing the violated requirement.
    void validate() const;
};

struct VehicleRecord {
    int id = 0;
    int slot = 0;
    VehicleState state;                 // state at the step's time, before the control
    double control = 0.0;               // first optimal input, applied to the plant
    double spacing_error_m = 0.0;       // s_pred - s_i - d
    double velocity_error_mps = 0.0;    // v_i - v_0
    double cost = 0.0;                  // achieved objective J_i*
    double terminal_residual = 0.0;
    std::vector<OutputVec> predicted;   // optimal horizon outputs
    std::vector<OutputVec> assumed;     // communicated horizon outputs
    std::vector<double> predicted_controls;    // optimal horizon inputs
    std::vector<double> equilibrium_controls;  // h(v) along the optimal horizon
    WeightSet weights;
    Eigen::Matrix2d q_cone = Eigen::Matrix2d::Zero();  // cone-feasible copy of Q (Theta)
};

struct AdmmIterationRecord {
    double primal_residual = 0.0;
    InvariantMargins margins;
};

struct StepRecord {
    double t = 0.0;
    double leader_position_m = 0.0;
    double leader_velocity_mps = 0.0;
    std::vector<VehicleRecord> vehicles;
    double total_cost = 0.0;
    std::vector<AdmmIterationRecord> admm;  // one entry per sweep when learning
};

struct AppliedManeuver {
    double time_s = 0.0;
    ManeuverKind kind = ManeuverKind::cut_in;
    int slot = 0;
    int vehicle_id = 0;
};

struct PlatoonLog {
    double dt_s = 0.1;
    double desired_gap_m = 10.0;
    int horizon = 20;
    TopologyKind kind = TopologyKind::PF;
    std::vector<StepRecord> steps;
    std::vector<AppliedManeuver> maneuvers;
};

struct TconvBound {
    int steps = 0;
    double seconds = 0.0;
};

/// Worst-case re-convergence time after the scheduled maneuvers: the latest
/// maneuver time plus N + N_ci - N_co, exposed both as a pure step count and
/// as the literal seconds arithmetic used alongside maneuver times.
TconvBound t_conv_bound(int n_initial, std::span<const ManeuverEvent> events, double dt_s);

/// Run the scenario: per step, apply due maneuvers, solve every vehicle's
/// horizon problem against the previously exchanged assumed trajectories,
/// apply the first inputs, then shift and exchange.
PlatoonLog run(const Scenario& scenario);

/// First time at or after the last maneuver from which every vehicle meets
/// both error tolerances for the rest of the log; nullopt if never.
std::optional<double> detect_convergence(const PlatoonLog& log, double tol_pos_m,
                                         double tol_vel_mps);

/// True iff every consecutive pair keeps a positive gap (above margin) at
/// every logged step.
bool check_collision_free(const PlatoonLog& log, double margin_m = 0.0);

}  // namespace platoon
