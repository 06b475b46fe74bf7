#include "platoon/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace platoon {

namespace {

using Eigen::Vector2d;
using Eigen::Vector3d;

Vector2d to_vec(const OutputVec& y) { return {y.position_m, y.velocity_mps}; }

double quad_form(const Eigen::Matrix2d& A, const Vector2d& d) { return d.dot(A * d); }

// d h / d v for h(v) = (r / eta) (C_A v^2 + m g f)
double equilibrium_torque_slope(const VehicleParams& p, double v) {
    return p.tire_radius_m / p.driveline_efficiency * 2.0 * p.aero_drag_coeff * v;
}

double clamp_control(const VehicleParams& p, double u) {
    return std::clamp(u, p.u_min, p.u_max);
}

// Single-vehicle horizon problem with references and terminal targets resolved.
struct Problem {
    const VehicleParams& p;
    const PhysicalConstants& c;
    VehicleState x0;
    std::span<const OutputVec> assumed_self;
    const NeighborData& nbr;
    std::span<const OutputVec> desired;
    const WeightSet& w;
    int np = 0;

    bool has_terminal = false;
    Vector2d terminal_output_target = Vector2d::Zero();
    double torque_scale = 0.0;  // converts the torque equation into m/s-per-step units

    void resolve_terminal() {
        torque_scale = p.driveline_efficiency / (p.tire_radius_m * p.mass_kg) * c.dt_s;
        Vector2d acc = Vector2d::Zero();
        int count = 0;
        for (const auto& f : nbr.followers) {
            acc += to_vec(f.assumed[np]) - Vector2d(f.gap_m, 0.0);
            ++count;
        }
        if (nbr.leader) {
            acc += to_vec(nbr.leader->assumed[np]) - Vector2d(nbr.leader->gap_m, 0.0);
            ++count;
        }
        if (count == 0)
            throw std::invalid_argument("information set is empty; the spanning-tree "
                                        "assumption guarantees at least one source");
        terminal_output_target = acc / count;
        has_terminal = true;
    }

    double stage_cost(int k, const Vector2d& y, double v, double u) const {
        double cost = 0.0;
        if (nbr.pinned()) cost += quad_form(w.Q, y - to_vec(desired[k]));
        const double ru = u - equilibrium_torque(p, c, v);
        cost += w.R * ru * ru;
        cost += quad_form(w.F, y - to_vec(assumed_self[k]));
        for (const auto& f : nbr.followers)
            cost += quad_form(w.G, y - to_vec(f.assumed[k]) + Vector2d(f.gap_m, 0.0));
        return cost;
    }

    // 2-vector d(stage cost)/dy plus the extra velocity term from the R component.
    Vector2d stage_grad_output(int k, const Vector2d& y) const {
        Vector2d g = Vector2d::Zero();
        if (nbr.pinned()) g += 2.0 * (w.Q * (y - to_vec(desired[k])));
        g += 2.0 * (w.F * (y - to_vec(assumed_self[k])));
        for (const auto& f : nbr.followers)
            g += 2.0 * (w.G * (y - to_vec(f.assumed[k]) + Vector2d(f.gap_m, 0.0)));
        return g;
    }

    void roll(std::span<const double> u, std::vector<VehicleState>& xs) const {
        xs.resize(np + 1);
        xs[0] = x0;
        for (int k = 0; k < np; ++k) xs[k + 1] = step(p, c, xs[k], u[k]);
    }

    Vector3d constraints(const std::vector<VehicleState>& xs) const {
        const VehicleState& xT = xs[np];
        return {xT.position_m - terminal_output_target.x(),
                xT.velocity_mps - terminal_output_target.y(),
                torque_scale * (xT.torque - equilibrium_torque(p, c, xT.velocity_mps))};
    }

    double stage_sum(std::span<const double> u, const std::vector<VehicleState>& xs) const {
        double cost = 0.0;
        for (int k = 0; k < np; ++k)
            cost += stage_cost(k, {xs[k].position_m, xs[k].velocity_mps}, xs[k].velocity_mps, u[k]);
        return cost;
    }

    // Penalized objective J + lambda.c + (mu/2)|c|^2; cons/J reported separately.
    double eval(std::span<const double> u, const Vector3d& lambda, double mu,
                std::vector<VehicleState>& xs, double& bare, Vector3d& cons) const {
        roll(u, xs);
        bare = stage_sum(u, xs);
        double value = bare;
        if (has_terminal) {
            cons = constraints(xs);
            value += lambda.dot(cons) + 0.5 * mu * cons.squaredNorm();
        } else {
            cons.setZero();
        }
        return value;
    }

    // Same as eval but also fills the gradient via the adjoint recursion.
    double eval_grad(std::span<const double> u, const Vector3d& lambda, double mu,
                     std::vector<VehicleState>& xs, std::vector<double>& grad, double& bare,
                     Vector3d& cons) const {
        const double value = eval(u, lambda, mu, xs, bare, cons);
        grad.assign(np, 0.0);

        const double dt = c.dt_s;
        Vector3d costate = Vector3d::Zero();
        if (has_terminal) {
            const Vector3d nu = lambda + mu * cons;
            const double hp_T = equilibrium_torque_slope(p, xs[np].velocity_mps);
            costate.x() = nu.x();
            costate.y() = nu.y() - nu.z() * torque_scale * hp_T;
            costate.z() = nu.z() * torque_scale;
        }
        for (int k = np - 1; k >= 0; --k) {
            const VehicleState& xk = xs[k];
            const double ru = u[k] - equilibrium_torque(p, c, xk.velocity_mps);
            grad[k] = 2.0 * w.R * ru + dt / p.inertial_lag_s * costate.z();

            const Vector2d gy = stage_grad_output(k, {xk.position_m, xk.velocity_mps});
            Vector3d lx;
            lx.x() = gy.x();
            lx.y() = gy.y() - 2.0 * w.R * ru * equilibrium_torque_slope(p, xk.velocity_mps);
            lx.z() = 0.0;

            const double dv_dv = 1.0 - 2.0 * p.aero_drag_coeff * xk.velocity_mps * dt / p.mass_kg;
            const double dv_dT = dt / p.mass_kg * p.driveline_efficiency / p.tire_radius_m;
            const double dT_dT = 1.0 - dt / p.inertial_lag_s;
            Vector3d prop;
            prop.x() = costate.x();
            prop.y() = dt * costate.x() + dv_dv * costate.y();
            prop.z() = dv_dT * costate.y() + dT_dT * costate.z();
            costate = lx + prop;
        }
        return value;
    }
};

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void validate_references(int np, std::span<const OutputVec> assumed_self,
                         const NeighborData& nbr, std::span<const OutputVec> desired) {
    require(np >= 1, "horizon must contain at least one step");
    require(static_cast<int>(assumed_self.size()) == np + 1,
            "assumed output sequence length mismatch");
    for (const auto& f : nbr.followers)
        require(static_cast<int>(f.assumed.size()) == np + 1,
                "neighbor output sequence length mismatch");
    if (nbr.leader)
        require(static_cast<int>(nbr.leader->assumed.size()) == np + 1,
                "leader output sequence length mismatch");
    if (nbr.pinned())
        require(static_cast<int>(desired.size()) == np + 1,
                "desired output sequence length mismatch");
    else
        require(desired.empty() || static_cast<int>(desired.size()) == np + 1,
                "desired output sequence length mismatch");
}

struct InnerResult {
    int iterations = 0;
    bool stationary = false;
};

// Monotone projected gradient with Barzilai-Borwein steps and Armijo backtracking.
InnerResult minimize_inner(const Problem& prob, std::vector<double>& u, const Vector3d& lambda,
                           double mu, int max_iters) {
    const int np = prob.np;
    const double range = prob.p.u_max - prob.p.u_min;
    const double step_tol = 1e-7 * range;

    std::vector<VehicleState> xs;
    std::vector<double> grad(np), grad_old(np), trial(np);
    double bare = 0.0;
    Vector3d cons;

    double f = prob.eval_grad(u, lambda, mu, xs, grad, bare, cons);

    double grad_inf = 0.0;
    for (double g : grad) grad_inf = std::max(grad_inf, std::abs(g));
    double alpha = grad_inf > 0.0 ? 0.01 * range / grad_inf : 1.0;

    InnerResult res;
    for (int it = 0; it < max_iters; ++it) {
        double move = 0.0;
        for (int k = 0; k < np; ++k) {
            trial[k] = clamp_control(prob.p, u[k] - alpha * grad[k]);
            move = std::max(move, std::abs(trial[k] - u[k]));
        }
        if (move <= step_tol) {
            res.stationary = true;
            break;
        }

        bool accepted = false;
        double f_trial = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            double dir_deriv = 0.0;
            for (int k = 0; k < np; ++k) dir_deriv += grad[k] * (trial[k] - u[k]);
            f_trial = prob.eval(trial, lambda, mu, xs, bare, cons);
            if (f_trial <= f + 1e-4 * dir_deriv) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
            move = 0.0;
            for (int k = 0; k < np; ++k) {
                trial[k] = clamp_control(prob.p, u[k] - alpha * grad[k]);
                move = std::max(move, std::abs(trial[k] - u[k]));
            }
            if (move <= 1e-14 * range) break;
        }
        if (!accepted) {
            res.stationary = true;
            break;
        }

        grad_old = grad;
        double ss = 0.0, sy = 0.0;
        std::swap(u, trial);  // u <- accepted point; trial now holds the old u
        f = prob.eval_grad(u, lambda, mu, xs, grad, bare, cons);
        for (int k = 0; k < np; ++k) {
            const double s = u[k] - trial[k];
            const double y = grad[k] - grad_old[k];
            ss += s * s;
            sy += s * y;
        }
        alpha = sy > 1e-300 ? std::clamp(ss / sy, 1e-12, 1e12) : alpha * 2.0;
        ++res.iterations;
    }
    return res;
}

}  // namespace

HorizonTrajectory rollout(const VehicleParams& p, const PhysicalConstants& c,
                          const VehicleState& x0, std::span<const double> controls) {
    HorizonTrajectory traj;
    traj.controls.assign(controls.begin(), controls.end());
    traj.states.resize(controls.size() + 1);
    traj.outputs.resize(controls.size() + 1);
    traj.states[0] = x0;
    traj.outputs[0] = output_of(x0);
    for (std::size_t k = 0; k < controls.size(); ++k) {
        traj.states[k + 1] = step(p, c, traj.states[k], controls[k]);
        traj.outputs[k + 1] = output_of(traj.states[k + 1]);
    }
    return traj;
}

double objective(const HorizonTrajectory& traj, std::span<const OutputVec> assumed_self,
                 const NeighborData& neighbors, std::span<const OutputVec> desired,
                 const WeightSet& w, const VehicleParams& p, const PhysicalConstants& c) {
    const int np = traj.horizon();
    validate_references(np, assumed_self, neighbors, desired);
    require(static_cast<int>(traj.states.size()) == np + 1, "trajectory state length mismatch");
    require(static_cast<int>(traj.outputs.size()) == np + 1, "trajectory output length mismatch");

    Problem prob{p, c, traj.states[0], assumed_self, neighbors, desired, w, np};
    double cost = 0.0;
    for (int k = 0; k < np; ++k)
        cost += prob.stage_cost(k, to_vec(traj.outputs[k]), traj.states[k].velocity_mps,
                                traj.controls[k]);
    return cost;
}

std::vector<double> objective_gradient(const VehicleParams& p, const PhysicalConstants& c,
                                       const VehicleState& x0, std::span<const double> controls,
                                       std::span<const OutputVec> assumed_self,
                                       const NeighborData& neighbors,
                                       std::span<const OutputVec> desired, const WeightSet& w) {
    const int np = static_cast<int>(controls.size());
    validate_references(np, assumed_self, neighbors, desired);
    Problem prob{p, c, x0, assumed_self, neighbors, desired, w, np};

    std::vector<VehicleState> xs;
    std::vector<double> grad;
    double bare = 0.0;
    Vector3d cons;
    prob.eval_grad(controls, Vector3d::Zero(), 0.0, xs, grad, bare, cons);
    return grad;
}

SolveReport solve(const VehicleState& x0, std::span<const OutputVec> assumed_self,
                  const NeighborData& neighbors, std::span<const OutputVec> desired,
                  const WeightSet& w, const VehicleParams& p, const PhysicalConstants& c,
                  const SolverOptions& opts, std::span<const double> warm_start) {
    const int np = static_cast<int>(assumed_self.size()) - 1;
    validate_references(np, assumed_self, neighbors, desired);
    require(warm_start.empty() || static_cast<int>(warm_start.size()) == np,
            "warm start length mismatch");

    Problem prob{p, c, x0, assumed_self, neighbors, desired, w, np};
    prob.resolve_terminal();

    std::vector<double> u(np);
    if (warm_start.empty()) {
        const double hold = clamp_control(p, equilibrium_torque(p, c, x0.velocity_mps));
        std::fill(u.begin(), u.end(), hold);
    } else {
        for (int k = 0; k < np; ++k) u[k] = clamp_control(p, warm_start[k]);
    }

    Vector3d lambda = Vector3d::Zero();
    double mu = opts.penalty_initial;

    SolveReport report;
    std::vector<VehicleState> xs;
    Vector3d cons;
    double bare = 0.0;
    double prev_norm = std::numeric_limits<double>::infinity();
    bool stationary = false;
    int outer = 0;

    for (outer = 0; outer < opts.max_outer; ++outer) {
        const InnerResult inner = minimize_inner(prob, u, lambda, mu, opts.max_inner);
        report.inner_iterations += inner.iterations;
        stationary = inner.stationary;

        prob.eval(u, lambda, mu, xs, bare, cons);
        const double cnorm = cons.cwiseAbs().maxCoeff();
        if (cnorm <= opts.terminal_tol && stationary) {
            ++outer;
            break;
        }
        lambda += mu * cons;
        if (cnorm > 0.25 * prev_norm) mu *= opts.penalty_growth;
        prev_norm = cnorm;
    }
    report.outer_iterations = outer;

    prob.eval(u, Vector3d::Zero(), 0.0, xs, bare, cons);
    const Vector3d final_cons = prob.constraints(xs);
    report.terminal_residual = final_cons.cwiseAbs().maxCoeff();
    report.objective_value = bare;
    report.controls = u;
    report.trajectory = rollout(p, c, x0, u);
    if (report.terminal_residual <= opts.terminal_tol)
        report.status = (outer < opts.max_outer || stationary) ? SolveStatus::converged
                                                               : SolveStatus::max_iterations;
    else
        report.status = SolveStatus::infeasible_terminal;
    return report;
}

HorizonTrajectory shift_assumed(const HorizonTrajectory& prev, const VehicleParams& p,
                                const PhysicalConstants& c) {
    const int np = prev.horizon();
    require(np >= 1, "cannot shift an empty trajectory");
    require(static_cast<int>(prev.states.size()) == np + 1, "trajectory state length mismatch");

    std::vector<double> controls(prev.controls.begin() + 1, prev.controls.end());
    const double hold =
        clamp_control(p, equilibrium_torque(p, c, prev.states[np].velocity_mps));
    controls.push_back(hold);
    return rollout(p, c, prev.states[1], controls);
}

}  // namespace platoon
