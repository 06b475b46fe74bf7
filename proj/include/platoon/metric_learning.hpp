#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "platoon/mpc.hpp"
#include "platoon/topology.hpp"

namespace platoon {

/// Squared metric distance (x1 - x2)^T A (x1 - x2).
double metric(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const Eigen::MatrixXd& A);

/// Factor B with A = B B^T from the eigendecomposition of a PSD matrix.
/// Throws if A is not symmetric or has an eigenvalue below -1e-10.
Eigen::MatrixXd factorize(const Eigen::MatrixXd& A);

/// Projection onto the epsilon-positive-definite cone: eigenvalues clipped
/// up to epsilon.  The input must already be symmetric.
Eigen::MatrixXd project_epd(const Eigen::MatrixXd& A, double epsilon);

/// Coordinates of points in the metric subspace of A, i.e. B^T x per point.
std::vector<Eigen::VectorXd> project_subspace(std::span<const Eigen::VectorXd> points,
                                              const Eigen::MatrixXd& A);

struct AdmmOptions {
    double rho = 0.1;
    double epsilon = 0.01;
    double learning_rate = 0.1;
    int admm_iterations = 10;
    int gradient_iterations = 10;
    std::uint64_t seed = 0;
};

/// Consensus variables of one vehicle: its weights, the cone-feasible copy
/// Theta of Q and the scaled dual Omega.
struct VehicleAdmmVars {
    WeightSet weights;
    Eigen::Matrix2d theta = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d omega = Eigen::Matrix2d::Zero();
};

struct AdmmState {
    std::vector<VehicleAdmmVars> vehicles;
    int iteration = 0;
};

/// Random feasible initialization: symmetric Gaussian samples projected into
/// the epsilon-PD cone, with the zero patterns required by the topology.
VehicleAdmmVars admm_init_vehicle(bool pinned, bool has_in_neighbors, const AdmmOptions& opts,
                                  std::mt19937_64& rng);
AdmmState admm_init(const Topology& topology, const AdmmOptions& opts, std::mt19937_64& rng);

/// Constant gradients of the stage cost with respect to each weight matrix,
/// accumulated from a solved trajectory: sums of outer products of the stage
/// residuals (d|x|_A / dA = x x^T).
struct WeightGradients {
    Eigen::Matrix2d dQ = Eigen::Matrix2d::Zero();
    double dR = 0.0;
    Eigen::Matrix2d dF = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d dG = Eigen::Matrix2d::Zero();
};

WeightGradients weight_gradients(const HorizonTrajectory& traj,
                                 std::span<const OutputVec> assumed_self,
                                 const NeighborData& neighbors,
                                 std::span<const OutputVec> desired, const VehicleParams& p,
                                 const PhysicalConstants& c);

/// Smallest slack of each feasibility condition over the platoon; negative
/// values mean a violation of that magnitude.
struct InvariantMargins {
    double theta_cone = 0.0;    // min lambda_min(Theta) - eps
    double r_cone = 0.0;        // min R - eps
    double g_cone = 0.0;        // min lambda_min(G) - eps over vehicles with in-neighbors
    double g_zero = 0.0;        // max |G| entry over vehicles without in-neighbors (want 0)
    double f_stability = 0.0;   // min lambda_min(F - sum_j G_j); lambda_min(F) - eps if O_i empty
    double q_zero = 0.0;        // max |Q| entry over unpinned vehicles (want 0)

    bool ok(double tol = 1e-10) const {
        return theta_cone >= -tol && r_cone >= -tol && g_cone >= -tol && g_zero <= tol &&
               f_stability >= -tol && q_zero <= tol;
    }
};

InvariantMargins check_invariants(const AdmmState& state, const Topology& topology,
                                  double epsilon);

/// Aggregate primal residual sqrt(sum_i |Q_i - Theta_i|_F^2).
double primal_residual(const AdmmState& state);

/// One weight-update pass (everything except the control re-solve): the
/// proximal Q step, the closed-form Theta projection, the dual step, and the
/// projected-gradient R/G/F steps.  All G updates complete before any F
/// update so each stability projection sees the current out-neighbor sums.
void admm_update_weights(AdmmState& state, std::span<const WeightGradients> grads,
                         const Topology& topology, const AdmmOptions& opts);

/// Per-vehicle inputs of one ADMM sweep; warm_controls is carried across
/// sweeps within a platoon step.
struct AdmmVehicleContext {
    VehicleParams params;
    VehicleState x0;
    std::vector<OutputVec> assumed_self;
    NeighborData neighbors;
    std::vector<OutputVec> desired;
    std::vector<double> warm_controls;
};

struct AdmmSweepOutcome {
    std::vector<SolveReport> reports;
    double primal_residual = 0.0;
    InvariantMargins margins;
};

/// One full sweep: re-solve every vehicle's horizon problem with the current
/// weights, then update all consensus variables from the fresh residuals.
AdmmSweepOutcome admm_step(AdmmState& state, std::vector<AdmmVehicleContext>& context,
                           const Topology& topology, const PhysicalConstants& consts,
                           const SolverOptions& solver_opts, const AdmmOptions& opts);

}  // namespace platoon
