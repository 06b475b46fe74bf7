// Acceptance suite: runs every top-level requirement end to end and prints
// one PASS/FAIL line per criterion.  Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "platoon/coordinator.hpp"
#include "platoon/metric_learning.hpp"
#include "platoon/mpc.hpp"
#include "platoon/scenario.hpp"
#include "test_helpers.hpp"

#ifndef PLATOON_SCENARIO_DIR
#define PLATOON_SCENARIO_DIR "scenarios"
#endif

using namespace platoon;
using platoon::testing::make_static_scenario;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& details) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, details.c_str());
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario paper_scenario() {
    return parse_scenario(std::string(PLATOON_SCENARIO_DIR) + "/paper_sec6.json");
}

const std::vector<TopologyKind> kAllKinds{TopologyKind::PF, TopologyKind::PLF,
                                          TopologyKind::TPF, TopologyKind::TPLF};

Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng, double scale = 2.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = g(rng);
    return m;
}

// mean over the horizon of the F-projected predicted/assumed separation
double f_subspace_separation(const VehicleRecord& v) {
    const Eigen::Matrix2d Bt = factorize(v.weights.F).transpose();
    double total = 0.0;
    for (std::size_t k = 0; k < v.predicted.size(); ++k) {
        const Eigen::Vector2d dp(v.predicted[k].position_m - v.assumed[k].position_m,
                                 v.predicted[k].velocity_mps - v.assumed[k].velocity_mps);
        total += (Bt * dp).norm();
    }
    return total / static_cast<double>(v.predicted.size());
}

const StepRecord* step_at(const PlatoonLog& log, double t) {
    for (const auto& rec : log.steps)
        if (std::abs(rec.t - t) < 1e-9) return &rec;
    return nullptr;
}

// ---------------------------------------------------------------------------

void criterion_1_paper_reproduction() {
    bool ok = true;
    std::string details = "paper scenario reproduction:";
    for (TopologyKind kind : kAllKinds) {
        Scenario sc = paper_scenario();
        sc.topology = kind;
        const auto t0 = std::chrono::steady_clock::now();
        const PlatoonLog log = run(sc);
        const double elapsed = seconds_since(t0);
        const auto conv = detect_convergence(log, 0.1, 0.05);
        const bool collision = check_collision_free(log);
        const bool this_ok =
            conv.has_value() && *conv <= 11.0 + 1e-9 && collision && elapsed < 60.0;
        ok = ok && this_ok;
        char buf[128];
        std::snprintf(buf, sizeof(buf), " %s conv=%.1fs coll_free=%d (%.1fs)",
                      to_string(kind).c_str(), conv.value_or(-1.0), collision ? 1 : 0,
                      elapsed);
        details += buf;
    }
    report(1, ok, details);
}

void criterion_2_tconv_formula() {
    auto cut = [](ManeuverKind kind, double t) {
        ManeuverEvent ev;
        ev.kind = kind;
        ev.time_s = t;
        ev.position = 1;
        if (kind == ManeuverKind::cut_in) ev.params = default_vehicle_params(0);
        return ev;
    };
    bool ok = true;
    {
        const std::vector<ManeuverEvent> events{cut(ManeuverKind::cut_in, 2.0),
                                                cut(ManeuverKind::cut_out, 4.0)};
        ok = ok && t_conv_bound(7, events, 0.1).seconds == 11.0;
    }
    ok = ok && t_conv_bound(7, {}, 0.1).steps == 7 && t_conv_bound(7, {}, 0.1).seconds == 7.0;
    for (int n : {3, 5, 9}) {
        const double dt = 0.1;
        const std::vector<ManeuverEvent> in_first{cut(ManeuverKind::cut_in, 0.0),
                                                  cut(ManeuverKind::cut_out, n * dt)};
        const std::vector<ManeuverEvent> out_first{cut(ManeuverKind::cut_out, 0.0),
                                                   cut(ManeuverKind::cut_in, n * dt)};
        ok = ok && t_conv_bound(n, in_first, dt).steps == 2 * n;
        ok = ok && t_conv_bound(n, out_first, dt).steps == 2 * n;
    }
    report(2, ok, "t_conv formula anchored cases (11 s / N / 2N) exact");
}

void criterion_3_static_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst = 0.0;
    for (int n = 1; n <= 3; ++n) {
        for (TopologyKind kind : kAllKinds) {
            Scenario sc = make_static_scenario(kind, n, 1.5, 2.0, 1.0,
                                               static_cast<unsigned>(10 * n + 1));
            const PlatoonLog log = run(sc);
            const int np = log.horizon;
            const double tol = (n + 1) * sc.solver.terminal_tol;
            for (std::size_t k = n; k < log.steps.size(); ++k) {
                const StepRecord& rec = log.steps[k];
                for (const auto& v : rec.vehicles) {
                    const double s_des = rec.leader_position_m +
                                         rec.leader_velocity_mps * np * log.dt_s -
                                         v.slot * log.desired_gap_m;
                    const double err = std::max(
                        std::abs(v.predicted[np].position_m - s_des),
                        std::abs(v.predicted[np].velocity_mps - rec.leader_velocity_mps));
                    worst = std::max(worst, err / tol);
                    ok = ok && err <= tol;
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 10.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "static N<=3 terminal outputs at desired within N steps "
                  "(worst=%.2fx of (N+1)*tol, %.1fs)",
                  worst, elapsed);
    report(3, ok, buf);
}

void criterion_4_lyapunov() {
    bool ok = true;
    double worst = 0.0;
    for (auto [kind, n] : {std::pair{TopologyKind::PF, 4}, std::pair{TopologyKind::TPLF, 3}}) {
        Scenario sc = make_static_scenario(kind, n, 6.0, 1.5, 0.8,
                                           static_cast<unsigned>(n + 50));
        const PlatoonLog log = run(sc);
        if (log.steps.size() < 51) ok = false;
        for (std::size_t k = 0; k + 1 < log.steps.size(); ++k) {
            const double now = log.steps[k].total_cost;
            const double next = log.steps[k + 1].total_cost;
            const double slack = 1e-6 * std::max(1.0, now);
            worst = std::max(worst, next - now);
            ok = ok && next <= now + slack;
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "total cost non-increasing on static runs over 60 steps "
                  "(worst step delta=%.2e)",
                  worst);
    report(4, ok, buf);
}

void criterion_5_epd_projection() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    const double eps = 0.01;
    bool ok = true;
    for (int dim : {2, 5}) {
        for (int trial = 0; trial < 1000; ++trial) {
            const Eigen::MatrixXd A = random_symmetric(dim, rng);
            const Eigen::MatrixXd P = project_epd(A, eps);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
            ok = ok && es.eigenvalues().minCoeff() >= eps - 1e-12;
            ok = ok && (project_epd(P, eps) - P).cwiseAbs().maxCoeff() <= 1e-12;
            if (trial < 10) {
                const double dist = (P - A).norm();
                for (int sample = 0; sample < 100; ++sample) {
                    const Eigen::MatrixXd X = project_epd(random_symmetric(dim, rng), eps);
                    ok = ok && dist <= (X - A).norm() + 1e-12;
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 5.0;
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "eps-PD projection: clipping, idempotence, sampled optimality on "
                  "2x2 and 5x5 (%.1fs)",
                  elapsed);
    report(5, ok, buf);
}

void criterion_6_metric_duality() {
    std::mt19937_64 rng(424242);
    bool ok = true;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int dim = trial % 2 == 0 ? 2 : 5;
        const Eigen::MatrixXd A = project_epd(random_symmetric(dim, rng), 0.01);
        const Eigen::MatrixXd B = factorize(A);
        const Eigen::VectorXd x1 = Eigen::VectorXd::Random(dim) * 10.0;
        const Eigen::VectorXd x2 = Eigen::VectorXd::Random(dim) * 10.0;
        const double direct = metric(x1, x2, A);
        const double projected = (B.transpose() * (x1 - x2)).squaredNorm();
        const double rel = std::abs(direct - projected) / std::max(1.0, std::abs(direct));
        worst = std::max(worst, rel);
        ok = ok && rel <= 1e-10;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "metric equals projected squared norm on 1000 triples (worst rel=%.1e)",
                  worst);
    report(6, ok, buf);
}

void criterion_7_solver() {
    bool ok_grad = true, ok_eq = true, ok_box = true, ok_dyn = true;
    std::mt19937_64 rng(1337);
    std::normal_distribution<double> g(0.0, 1.0);
    const PhysicalConstants consts;

    // (a) objective gradient vs central differences on 100 random instances
    double worst_grad = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int np = 5 + static_cast<int>(rng() % 8);
        VehicleParams p = default_vehicle_params(static_cast<int>(rng() % 8));
        const VehicleState x0{10.0 * g(rng), 20.0 + g(rng), 200.0 + 50.0 * g(rng)};
        std::vector<double> controls(np);
        for (auto& u : controls) u = 250.0 + 200.0 * g(rng);
        std::vector<OutputVec> assumed(np + 1), desired(np + 1);
        NeighborData nbr;
        NeighborTrajectory f1;
        f1.id = 1;
        f1.gap_m = 10.0;
        f1.assumed.resize(np + 1);
        NeighborTrajectory leader;
        leader.id = 0;
        leader.gap_m = 20.0;
        leader.assumed.resize(np + 1);
        for (int k = 0; k <= np; ++k) {
            assumed[k] = {x0.position_m + 2.0 * k * consts.dt_s + 0.2 * g(rng), 20.0 + 0.2 * g(rng)};
            desired[k] = {x0.position_m + 2.0 * k * consts.dt_s + 0.2 * g(rng), 20.0};
            f1.assumed[k] = {x0.position_m + 10.0 + 0.3 * g(rng), 20.0 + 0.2 * g(rng)};
            leader.assumed[k] = {x0.position_m + 20.0 + 0.1 * g(rng), 20.0};
        }
        nbr.followers.push_back(f1);
        nbr.leader = leader;
        WeightSet w;
        auto psd = [&] {
            Eigen::Matrix2d m;
            const double a = g(rng), b = g(rng), d = g(rng);
            m << a, b, b, d;
            return Eigen::Matrix2d(m * m.transpose());
        };
        w.Q = psd();
        w.F = psd();
        w.G = psd();
        w.R = 0.05 * std::abs(g(rng));

        const auto grad = objective_gradient(p, consts, x0, controls, assumed, nbr, desired, w);
        double num = 0.0, den = 0.0;
        for (int k = 0; k < np; ++k) {
            const double h = 1e-3 * (1.0 + std::abs(controls[k]));
            auto up = controls, down = controls;
            up[k] += h;
            down[k] -= h;
            const double fu = objective(rollout(p, consts, x0, up), assumed, nbr, desired, w,
                                        p, consts);
            const double fd = objective(rollout(p, consts, x0, down), assumed, nbr, desired,
                                        w, p, consts);
            const double fdg = (fu - fd) / (2.0 * h);
            num += (grad[k] - fdg) * (grad[k] - fdg);
            den += fdg * fdg;
        }
        const double rel = std::sqrt(num) / std::max(1.0, std::sqrt(den));
        worst_grad = std::max(worst_grad, rel);
        ok_grad = ok_grad && rel <= 1e-5;
    }

    // (b) equilibrium platoon: zero cost, u = h(v0)
    {
        Scenario sc = make_static_scenario(TopologyKind::PLF, 5, 2.0);
        const PlatoonLog log = run(sc);
        for (const auto& rec : log.steps)
            for (const auto& v : rec.vehicles) {
                ok_eq = ok_eq && v.cost <= 1e-10;
                const VehicleParams p = sc.vehicles[v.slot - 1];
                ok_eq = ok_eq &&
                        std::abs(v.control - equilibrium_torque(p, consts, 20.0)) <= 1e-9;
            }
    }

    // (c) exact box feasibility and (d) dynamic feasibility on aggressive solves
    for (int trial = 0; trial < 10; ++trial) {
        const int np = 20;
        VehicleParams p = default_vehicle_params(trial % 8);
        const VehicleState x0{-40.0 - 5.0 * trial, 18.0, 150.0};
        NeighborData nbr;
        NeighborTrajectory leader;
        leader.id = 0;
        leader.gap_m = 10.0;
        leader.assumed.resize(np + 1);
        for (int k = 0; k <= np; ++k) leader.assumed[k] = {2.0 * k * consts.dt_s, 20.0};
        nbr.leader = leader;
        std::vector<OutputVec> desired = leader.assumed;
        for (auto& y : desired) y.position_m -= 10.0;
        WeightSet w = default_weights();
        const SolveReport rep = solve(x0, desired, nbr, desired, w, p, consts, SolverOptions{});
        for (double u : rep.controls) ok_box = ok_box && u >= p.u_min && u <= p.u_max;
        const HorizonTrajectory resim = rollout(p, consts, x0, rep.controls);
        for (std::size_t k = 0; k < resim.states.size(); ++k) {
            ok_dyn = ok_dyn &&
                     std::abs(resim.states[k].position_m -
                              rep.trajectory.states[k].position_m) <= 1e-10 &&
                     std::abs(resim.states[k].velocity_mps -
                              rep.trajectory.states[k].velocity_mps) <= 1e-10 &&
                     std::abs(resim.states[k].torque - rep.trajectory.states[k].torque) <=
                         1e-10;
        }
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "solver: gradient rel<=1e-5 (worst=%.1e)=%d, equilibrium zero-cost=%d, "
                  "exact box=%d, dynamic feasibility<=1e-10=%d",
                  worst_grad, ok_grad ? 1 : 0, ok_eq ? 1 : 0, ok_box ? 1 : 0, ok_dyn ? 1 : 0);
    report(7, ok_grad && ok_eq && ok_box && ok_dyn, buf);
}

struct LearningRun {
    TopologyKind kind;
    Scenario scenario;
    PlatoonLog log;
};

std::vector<LearningRun> learning_runs() {
    std::vector<LearningRun> runs;
    for (TopologyKind kind : kAllKinds) {
        Scenario sc = paper_scenario();
        sc.topology = kind;
        sc.learning.enabled = true;
        runs.push_back({kind, sc, run(sc)});
    }
    return runs;
}

void criterion_8_admm(const std::vector<LearningRun>& runs) {
    const LearningRun* pf = nullptr;
    for (const auto& r : runs)
        if (r.kind == TopologyKind::PF) pf = &r;
    bool ok = pf != nullptr;
    double first = 0.0, last = 0.0;
    bool margins_ok = true;
    if (pf) {
        const int sweeps = pf->scenario.learning.options.admm_iterations;
        std::vector<double> aggregate(sweeps, 0.0);
        for (const auto& rec : pf->log.steps) {
            ok = ok && static_cast<int>(rec.admm.size()) == sweeps;
            for (std::size_t s = 0; s < rec.admm.size(); ++s) {
                aggregate[s] += rec.admm[s].primal_residual;
                margins_ok = margins_ok && rec.admm[s].margins.ok(1e-10);
            }
        }
        first = aggregate.front();
        last = aggregate.back();
        ok = ok && last < 0.5 * first && margins_ok;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "ADMM primal residual |Q-Theta|_F: kappa=10 at %.1f%% of kappa=1 "
                  "(%.3f -> %.3f), cone/stability invariants every sweep=%d",
                  first > 0 ? 100.0 * last / first : 0.0, first, last, margins_ok ? 1 : 0);
    report(8, ok, buf);
}

void criterion_9_learning_convergence(const std::vector<LearningRun>& runs) {
    bool ok = true;
    std::string details = "metric learning on:";
    for (const auto& r : runs) {
        const auto conv = detect_convergence(r.log, 0.1, 0.05);
        const bool collision = check_collision_free(r.log);
        bool sep_ok = true;
        for (const auto& m : r.log.maneuvers) {
            const StepRecord* at = step_at(r.log, m.time_s);
            const StepRecord* later = step_at(r.log, m.time_s + 1.0);
            if (!at || !later) {
                sep_ok = false;
                continue;
            }
            // the most-affected vehicle at the maneuver step
            double best = -1.0;
            int best_id = -1;
            for (const auto& v : at->vehicles) {
                const double s = f_subspace_separation(v);
                if (s > best) {
                    best = s;
                    best_id = v.id;
                }
            }
            double later_sep = -1.0;
            for (const auto& v : later->vehicles)
                if (v.id == best_id) later_sep = f_subspace_separation(v);
            sep_ok = sep_ok && later_sep >= 0.0 && best > later_sep;
        }
        const bool this_ok = conv.has_value() && *conv <= 11.0 + 1e-9 && collision && sep_ok;
        ok = ok && this_ok;
        char buf[96];
        std::snprintf(buf, sizeof(buf), " %s conv=%.1fs coll=%d sep_decay=%d",
                      to_string(r.kind).c_str(), conv.value_or(-1.0), collision ? 1 : 0,
                      sep_ok ? 1 : 0);
        details += buf;
    }
    report(9, ok, details);
}

void criterion_10_stability_condition(const std::vector<LearningRun>& runs) {
    bool ok = true;
    double worst = 1e300;
    for (const auto& r : runs)
        for (const auto& rec : r.log.steps)
            for (const auto& sweep : rec.admm) {
                worst = std::min(worst, sweep.margins.f_stability);
                ok = ok && sweep.margins.f_stability >= -1e-10;
            }
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "min eig(F_i - sum G_j) >= -1e-10 after every sweep, all topologies "
                  "(min margin=%.2e)",
                  worst);
    report(10, ok, buf);
}

}  // namespace

int main() {
    std::printf("== acceptance suite ==\n");
    const auto t0 = std::chrono::steady_clock::now();

    criterion_1_paper_reproduction();
    criterion_2_tconv_formula();
    criterion_3_static_convergence();
    criterion_4_lyapunov();
    criterion_5_epd_projection();
    criterion_6_metric_duality();
    criterion_7_solver();

    const auto runs = learning_runs();
    criterion_8_admm(runs);
    criterion_9_learning_convergence(runs);
    criterion_10_stability_condition(runs);

    std::printf("== %s (%d failure%s, %.1fs) ==\n", failures == 0 ? "ALL PASS" : "FAILURES",
                failures, failures == 1 ? "" : "s", seconds_since(t0));
    return failures;
}
