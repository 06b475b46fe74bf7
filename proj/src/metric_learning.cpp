#include "platoon/metric_learning.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace platoon {

namespace {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

constexpr double kSymmetryTol = 1e-12;

void require_symmetric(const MatrixXd& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("matrix must be square");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
        throw std::invalid_argument("matrix must be symmetric; symmetrize before projecting");
}

Vector2d to_vec(const OutputVec& y) { return {y.position_m, y.velocity_mps}; }

Matrix2d project_epd2(const Matrix2d& A, double eps) {
    Eigen::SelfAdjointEigenSolver<Matrix2d> es(A);
    Vector2d clipped = es.eigenvalues().cwiseMax(eps);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const Matrix2d& A) {
    return Eigen::SelfAdjointEigenSolver<Matrix2d>(A).eigenvalues().minCoeff();
}

Matrix2d random_epd2(double eps, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix2d S;
    const double a = gauss(rng), b = gauss(rng), d = gauss(rng);
    S << a, b, b, d;
    return project_epd2(S, eps);
}

}  // namespace

double metric(const VectorXd& x1, const VectorXd& x2, const MatrixXd& A) {
    if (x1.size() != x2.size() || A.rows() != x1.size() || A.cols() != x1.size())
        throw std::invalid_argument("metric dimension mismatch");
    const VectorXd d = x1 - x2;
    return d.dot(A * d);
}

MatrixXd factorize(const MatrixXd& A) {
    require_symmetric(A);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    VectorXd evals = es.eigenvalues();
    if (evals.minCoeff() < -1e-10)
        throw std::invalid_argument("matrix is not positive semi-definite");
    return es.eigenvectors() * evals.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

MatrixXd project_epd(const MatrixXd& A, double epsilon) {
    require_symmetric(A);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    VectorXd clipped = es.eigenvalues().cwiseMax(epsilon);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<VectorXd> project_subspace(std::span<const VectorXd> points, const MatrixXd& A) {
    const MatrixXd Bt = factorize(A).transpose();
    std::vector<VectorXd> out;
    out.reserve(points.size());
    for (const auto& x : points) {
        if (x.size() != Bt.cols()) throw std::invalid_argument("point dimension mismatch");
        out.push_back(Bt * x);
    }
    return out;
}

VehicleAdmmVars admm_init_vehicle(bool pinned, bool has_in_neighbors, const AdmmOptions& opts,
                                  std::mt19937_64& rng) {
    VehicleAdmmVars v;
    v.weights.Q = pinned ? random_epd2(opts.epsilon, rng) : Matrix2d::Zero();
    v.theta = random_epd2(opts.epsilon, rng);
    v.omega.setZero();
    std::normal_distribution<double> gauss(0.0, 1.0);
    v.weights.R = std::max(opts.epsilon, std::abs(gauss(rng)));
    v.weights.F = random_epd2(opts.epsilon, rng);
    v.weights.G = has_in_neighbors ? random_epd2(opts.epsilon, rng) : Matrix2d::Zero();
    return v;
}

AdmmState admm_init(const Topology& topology, const AdmmOptions& opts, std::mt19937_64& rng) {
    AdmmState state;
    const int n = topology.n_followers();
    state.vehicles.reserve(n);
    for (int i = 1; i <= n; ++i)
        state.vehicles.push_back(
            admm_init_vehicle(topology.pinned(i), !topology.in_neighbors(i).empty(), opts, rng));
    // Feasibility of the stability condition F_i - sum_{j in O_i} G_j >= 0 is
    // restored by scaling F up where the random draw violates it.
    for (int i = 1; i <= n; ++i) {
        Matrix2d sum_g = Matrix2d::Zero();
        for (int j : topology.out_neighbors(i)) sum_g += state.vehicles[j - 1].weights.G;
        Matrix2d& F = state.vehicles[i - 1].weights.F;
        const double deficit = min_eigenvalue(F - sum_g);
        if (deficit < 0.0) F += (-deficit) * Matrix2d::Identity();
    }
    return state;
}

WeightGradients weight_gradients(const HorizonTrajectory& traj,
                                 std::span<const OutputVec> assumed_self,
                                 const NeighborData& neighbors,
                                 std::span<const OutputVec> desired, const VehicleParams& p,
                                 const PhysicalConstants& c) {
    const int np = traj.horizon();
    WeightGradients g;
    for (int k = 0; k < np; ++k) {
        const Vector2d y = to_vec(traj.outputs[k]);
        if (neighbors.pinned()) {
            const Vector2d d = y - to_vec(desired[k]);
            g.dQ += d * d.transpose();
        }
        const double ru =
            traj.controls[k] - equilibrium_torque(p, c, traj.states[k].velocity_mps);
        g.dR += ru * ru;
        const Vector2d df = y - to_vec(assumed_self[k]);
        g.dF += df * df.transpose();
        for (const auto& f : neighbors.followers) {
            const Vector2d dg = y - to_vec(f.assumed[k]) + Vector2d(f.gap_m, 0.0);
            g.dG += dg * dg.transpose();
        }
    }
    return g;
}

InvariantMargins check_invariants(const AdmmState& state, const Topology& topology,
                                  double epsilon) {
    InvariantMargins m;
    const double inf = std::numeric_limits<double>::infinity();
    m.theta_cone = m.r_cone = m.g_cone = m.f_stability = inf;
    m.g_zero = m.q_zero = 0.0;

    const int n = topology.n_followers();
    for (int i = 1; i <= n; ++i) {
        const VehicleAdmmVars& v = state.vehicles[i - 1];
        m.theta_cone = std::min(m.theta_cone, min_eigenvalue(v.theta) - epsilon);
        m.r_cone = std::min(m.r_cone, v.weights.R - epsilon);
        if (!topology.in_neighbors(i).empty())
            m.g_cone = std::min(m.g_cone, min_eigenvalue(v.weights.G) - epsilon);
        else
            m.g_zero = std::max(m.g_zero, v.weights.G.cwiseAbs().maxCoeff());
        const auto out = topology.out_neighbors(i);
        if (out.empty()) {
            m.f_stability = std::min(m.f_stability, min_eigenvalue(v.weights.F) - epsilon);
        } else {
            Matrix2d sum_g = Matrix2d::Zero();
            for (int j : out) sum_g += state.vehicles[j - 1].weights.G;
            m.f_stability = std::min(m.f_stability, min_eigenvalue(v.weights.F - sum_g));
        }
        if (!topology.pinned(i))
            m.q_zero = std::max(m.q_zero, v.weights.Q.cwiseAbs().maxCoeff());
    }
    return m;
}

double primal_residual(const AdmmState& state) {
    double sum = 0.0;
    for (const auto& v : state.vehicles) sum += (v.weights.Q - v.theta).squaredNorm();
    return std::sqrt(sum);
}

void admm_update_weights(AdmmState& state, std::span<const WeightGradients> grads,
                         const Topology& topology, const AdmmOptions& opts) {
    const int n = topology.n_followers();
    if (static_cast<int>(state.vehicles.size()) != n ||
        static_cast<int>(grads.size()) != n)
        throw std::invalid_argument("ADMM state/gradient size mismatch");

    for (int i = 1; i <= n; ++i) {
        VehicleAdmmVars& v = state.vehicles[i - 1];
        const WeightGradients& g = grads[i - 1];

        // Q update: proximal gradient descent, or pinned-pattern zero.
        if (!topology.pinned(i)) {
            v.weights.Q.setZero();
        } else {
            for (int it = 0; it < opts.gradient_iterations; ++it)
                v.weights.Q -= opts.learning_rate *
                               (g.dQ + opts.rho * (v.weights.Q - v.theta + v.omega));
        }
        // Theta update in closed form, then the dual step.
        v.theta = project_epd2(v.weights.Q + v.omega, opts.epsilon);
        v.omega += v.weights.Q - v.theta;

        // R update: projected gradient onto R >= eps.
        for (int it = 0; it < opts.gradient_iterations; ++it)
            v.weights.R = std::max(opts.epsilon, v.weights.R - opts.learning_rate * g.dR);

        // G update: projected gradient onto the eps-PD cone, or zero pattern.
        if (topology.in_neighbors(i).empty()) {
            v.weights.G.setZero();
        } else {
            for (int it = 0; it < opts.gradient_iterations; ++it)
                v.weights.G =
                    project_epd2(v.weights.G - opts.learning_rate * g.dG, opts.epsilon);
        }
    }

    // F updates run after every G so the stability projection uses the
    // current out-neighbor sums.
    for (int i = 1; i <= n; ++i) {
        VehicleAdmmVars& v = state.vehicles[i - 1];
        const WeightGradients& g = grads[i - 1];
        const auto out = topology.out_neighbors(i);
        if (out.empty()) {
            for (int it = 0; it < opts.gradient_iterations; ++it)
                v.weights.F =
                    project_epd2(v.weights.F - opts.learning_rate * g.dF, opts.epsilon);
        } else {
            Matrix2d shift = Matrix2d::Zero();
            for (int j : out) shift += state.vehicles[j - 1].weights.G;
            for (int it = 0; it < opts.gradient_iterations; ++it)
                v.weights.F =
                    shift + project_epd2(v.weights.F - opts.learning_rate * g.dF - shift, 0.0);
        }
    }
    ++state.iteration;
}

AdmmSweepOutcome admm_step(AdmmState& state, std::vector<AdmmVehicleContext>& context,
                           const Topology& topology, const PhysicalConstants& consts,
                           const SolverOptions& solver_opts, const AdmmOptions& opts) {
    const int n = topology.n_followers();
    if (static_cast<int>(context.size()) != n || static_cast<int>(state.vehicles.size()) != n)
        throw std::invalid_argument("ADMM context size mismatch");

    AdmmSweepOutcome out;
    out.reports.reserve(n);
    std::vector<WeightGradients> grads(n);
    for (int i = 0; i < n; ++i) {
        AdmmVehicleContext& ctx = context[i];
        SolveReport report =
            solve(ctx.x0, ctx.assumed_self, ctx.neighbors, ctx.desired,
                  state.vehicles[i].weights, ctx.params, consts, solver_opts,
                  ctx.warm_controls);
        ctx.warm_controls = report.controls;
        grads[i] = weight_gradients(report.trajectory, ctx.assumed_self, ctx.neighbors,
                                    ctx.desired, ctx.params, consts);
        out.reports.push_back(std::move(report));
    }

    admm_update_weights(state, grads, topology, opts);
    out.primal_residual = primal_residual(state);
    out.margins = check_invariants(state, topology, opts.epsilon);
    return out;
}

}  // namespace platoon
