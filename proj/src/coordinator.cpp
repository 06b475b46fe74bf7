#include "platoon/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "platoon/log.hpp"

namespace platoon {

double LeaderProfile::velocity_at(double t) const {
    double start = 0.0;
    for (const auto& seg : segments) {
        if (t < seg.until_s || &seg == &segments.back()) {
            if (!std::isfinite(seg.until_s) || seg.until_s <= start || t >= seg.until_s)
                return seg.v_end_mps == seg.v_start_mps || t >= seg.until_s ? seg.v_end_mps
                                                                            : seg.v_start_mps;
            const double f = (t - start) / (seg.until_s - start);
            return seg.v_start_mps + f * (seg.v_end_mps - seg.v_start_mps);
        }
        start = seg.until_s;
    }
    return segments.empty() ? 0.0 : segments.back().v_end_mps;
}

void LeaderProfile::validate() const {
    if (segments.empty()) throw std::invalid_argument("leader profile needs at least one segment");
    double prev = 0.0;
    for (const auto& seg : segments) {
        if (seg.v_start_mps < 0.0 || seg.v_end_mps < 0.0)
            throw std::invalid_argument("leader velocity must be non-negative");
        if (std::isfinite(seg.until_s)) {
            if (seg.until_s <= prev)
                throw std::invalid_argument("leader segments must have increasing end times");
            prev = seg.until_s;
        }
    }
}

WeightSet default_weights() {
    WeightSet w;
    w.Q = Eigen::Vector2d(10.0, 10.0).asDiagonal();
    w.R = 0.01;
    w.F = Eigen::Vector2d(12.0, 12.0).asDiagonal();
    w.G = Eigen::Vector2d(5.0, 5.0).asDiagonal();
    return w;
}

WeightSet apply_weight_pattern(const WeightSet& base, const Topology& topology, int slot) {
    WeightSet w = base;
    if (!topology.pinned(slot)) w.Q.setZero();
    if (topology.in_neighbors(slot).empty()) w.G.setZero();
    return w;
}

void Scenario::validate() const {
    constants.validate();
    leader.validate();
    if (n_followers < 1) throw std::invalid_argument("scenario needs at least one follower");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least one step");
    if (!(desired_gap_m > 0.0)) throw std::invalid_argument("desired gap must be positive");
    if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
    if (static_cast<int>(vehicles.size()) != n_followers)
        throw std::invalid_argument("scenario must list parameters for every follower");
    for (const auto& p : vehicles) p.validate();
    if (initial_states && static_cast<int>(initial_states->size()) != n_followers)
        throw std::invalid_argument("initial states must match the follower count");
    if (solver.max_outer < 1 || solver.max_inner < 1 || !(solver.terminal_tol > 0.0))
        throw std::invalid_argument("solver options out of range");
    if (learning.enabled &&
        (!(learning.options.rho > 0.0) || !(learning.options.epsilon > 0.0) ||
         learning.options.admm_iterations < 1 || learning.options.gradient_iterations < 1))
        throw std::invalid_argument("metric-learning options out of range");

    double prev_time = 0.0;
    int n = n_followers;
    for (const auto& ev : events) {
        if (ev.time_s < prev_time)
            throw std::invalid_argument("maneuver events must be sorted by time");
        prev_time = ev.time_s;
        if (ev.time_s < 0.0) throw std::invalid_argument("maneuver time must be non-negative");
        if (ev.time_s > duration_s)
            throw std::invalid_argument("duration must cover every maneuver time");
        if (ev.kind == ManeuverKind::cut_in) {
            if (ev.position < 1 || ev.position > n + 1)
                throw std::invalid_argument("cut-in slot out of range at event time");
            if (!ev.params)
                throw std::invalid_argument("cut-in event needs vehicle parameters");
            ev.params->validate();
            ++n;
        } else {
            if (n == 0)
                throw std::invalid_argument("cut-out from an empty platoon");
            if (ev.position < 1 || ev.position > n)
                throw std::invalid_argument("cut-out slot out of range at event time");
            --n;
        }
        if (n == 0)
            throw std::invalid_argument(
                "maneuver leaves the platoon without followers, so no topology can keep a "
                "spanning tree rooted at the leader (Assumption 1)");
        if (!Topology::build(topology, n).has_leader_spanning_tree())
            throw std::invalid_argument(
                "topology after maneuver violates the leader spanning-tree assumption "
                "(Assumption 1)");
    }
}

TconvBound t_conv_bound(int n_initial, std::span<const ManeuverEvent> events, double dt_s) {
    if (!(dt_s > 0.0)) throw std::invalid_argument("dt must be positive");
    int n_ci = 0, n_co = 0;
    double latest = 0.0;
    for (const auto& ev : events) {
        (ev.kind == ManeuverKind::cut_in ? n_ci : n_co)++;
        latest = std::max(latest, ev.time_s);
    }
    const int terms = n_initial + n_ci - n_co;
    if (terms <= 0)
        throw std::invalid_argument("degenerate platoon: N + N_ci - N_co must be positive");
    TconvBound b;
    b.seconds = latest + terms;
    b.steps = static_cast<int>(std::llround(latest / dt_s)) + terms;
    return b;
}

namespace {

struct VehicleSlot {
    int id = 0;
    VehicleParams params;
    VehicleState state;
    HorizonTrajectory assumed;
    WeightSet weights;
};

std::vector<OutputVec> leader_extrapolation(double s0, double v0, int np, double dt) {
    std::vector<OutputVec> out(np + 1);
    for (int k = 0; k <= np; ++k) out[k] = {s0 + v0 * k * dt, v0};
    return out;
}

std::vector<OutputVec> shifted(const std::vector<OutputVec>& ref, double offset) {
    std::vector<OutputVec> out = ref;
    for (auto& y : out) y.position_m -= offset;
    return out;
}

HorizonTrajectory constant_hold_trajectory(const VehicleParams& p, const PhysicalConstants& c,
                                           const VehicleState& x0, int np) {
    const double hold =
        std::clamp(equilibrium_torque(p, c, x0.velocity_mps), p.u_min, p.u_max);
    std::vector<double> controls(np, hold);
    return rollout(p, c, x0, controls);
}

class Simulation {
public:
    explicit Simulation(const Scenario& sc)
        : sc_(sc),
          topo_(Topology::build(sc.topology, sc.n_followers)),
          rng_(sc.learning.options.seed) {
        sc_.validate();
        leader_pos_ = sc.leader.initial_position_m;
        const double v0 = sc.leader.velocity_at(0.0);
        slots_.reserve(sc.n_followers);
        for (int i = 1; i <= sc.n_followers; ++i) {
            VehicleSlot slot;
            slot.params = sc.vehicles[i - 1];
            slot.id = slot.params.id > 0 ? slot.params.id : i;
            slot.params.id = slot.id;
            if (sc.initial_states)
                slot.state = (*sc.initial_states)[i - 1];
            else
                slot.state = desired_state(leader_pos_, v0, i * sc.desired_gap_m, slot.params,
                                           sc.constants);
            slots_.push_back(std::move(slot));
        }
        next_id_ = 0;
        for (const auto& s : slots_) next_id_ = std::max(next_id_, s.id);
        for (auto& s : slots_)
            s.assumed = constant_hold_trajectory(s.params, sc_.constants, s.state, sc_.horizon);
        if (sc_.learning.enabled)
            admm_ = admm_init(topo_, sc_.learning.options, rng_);
        refresh_manual_weights();

        log_.dt_s = sc.constants.dt_s;
        log_.desired_gap_m = sc.desired_gap_m;
        log_.horizon = sc.horizon;
        log_.kind = sc.topology;
    }

    PlatoonLog run() {
        const int n_steps = static_cast<int>(std::llround(sc_.duration_s / sc_.constants.dt_s));
        std::size_t next_event = 0;
        for (int step_idx = 0; step_idx < n_steps; ++step_idx) {
            const double t = step_idx * sc_.constants.dt_s;
            while (next_event < sc_.events.size() &&
                   sc_.events[next_event].time_s <= t + 1e-9) {
                apply_event(sc_.events[next_event], t);
                ++next_event;
            }
            advance(t);
        }
        return std::move(log_);
    }

private:
    void refresh_manual_weights() {
        for (int i = 1; i <= topo_.n_followers(); ++i) {
            if (sc_.learning.enabled)
                slots_[i - 1].weights = admm_.vehicles[i - 1].weights;
            else
                slots_[i - 1].weights = apply_weight_pattern(sc_.base_weights, topo_, i);
        }
    }

    void apply_event(const ManeuverEvent& ev, double t) {
        const int n = topo_.n_followers();
        AppliedManeuver applied{t, ev.kind, ev.position, 0};
        if (ev.kind == ManeuverKind::cut_in) {
            const int p = ev.position;
            const double v0 = sc_.leader.velocity_at(t);
            const double pred_pos = p == 1 ? leader_pos_ : slots_[p - 2].state.position_m;
            const double pred_vel = p == 1 ? v0 : slots_[p - 2].state.velocity_mps;

            VehicleSlot slot;
            slot.params = *ev.params;
            slot.id = slot.params.id > 0 ? slot.params.id : ++next_id_;
            next_id_ = std::max(next_id_, slot.id);
            slot.params.id = slot.id;

            double entry_pos;
            if (ev.entry_position_m)
                entry_pos = *ev.entry_position_m;
            else if (p <= n)
                entry_pos = 0.5 * (pred_pos + slots_[p - 1].state.position_m);
            else
                entry_pos = pred_pos - sc_.desired_gap_m;
            const double entry_vel = ev.entry_velocity_mps.value_or(pred_vel);
            const double entry_torque = ev.entry_torque.value_or(
                equilibrium_torque(slot.params, sc_.constants, entry_vel));
            slot.state = {entry_pos, entry_vel, entry_torque};
            slot.assumed =
                constant_hold_trajectory(slot.params, sc_.constants, slot.state, sc_.horizon);

            slots_.insert(slots_.begin() + (p - 1), std::move(slot));
            topo_ = topo_.insert_vehicle(p);
            if (sc_.learning.enabled)
                admm_.vehicles.insert(
                    admm_.vehicles.begin() + (p - 1),
                    admm_init_vehicle(topo_.pinned(p), !topo_.in_neighbors(p).empty(),
                                      sc_.learning.options, rng_));
            applied.vehicle_id = slots_[p - 1].id;
            PLATOON_LOG_INFO("cut-in at t=%.2fs slot %d (vehicle %d)", t, p, applied.vehicle_id);
        } else {
            const int q = ev.position;
            if (q < 1 || q > n) throw std::invalid_argument("cut-out slot out of range");
            applied.vehicle_id = slots_[q - 1].id;
            slots_.erase(slots_.begin() + (q - 1));
            topo_ = topo_.remove_vehicle(q);
            if (sc_.learning.enabled) admm_.vehicles.erase(admm_.vehicles.begin() + (q - 1));
            PLATOON_LOG_INFO("cut-out at t=%.2fs slot %d (vehicle %d)", t, q,
                             applied.vehicle_id);
        }
        if (!topo_.has_leader_spanning_tree())
            throw std::runtime_error("topology lost the leader spanning tree after a maneuver");
        refresh_manual_weights();
        log_.maneuvers.push_back(applied);
    }

    void advance(double t) {
        const int n = topo_.n_followers();
        const int np = sc_.horizon;
        const double dt = sc_.constants.dt_s;
        const double d = sc_.desired_gap_m;
        const double v0 = sc_.leader.velocity_at(t);
        const auto leader_out = leader_extrapolation(leader_pos_, v0, np, dt);

        std::vector<AdmmVehicleContext> ctx(n);
        for (int i = 1; i <= n; ++i) {
            AdmmVehicleContext& c = ctx[i - 1];
            const VehicleSlot& slot = slots_[i - 1];
            c.params = slot.params;
            c.x0 = slot.state;
            c.assumed_self = slot.assumed.outputs;
            c.desired = shifted(leader_out, i * d);
            for (int j : topo_.in_neighbors(i))
                c.neighbors.followers.push_back(
                    {slots_[j - 1].id, slots_[j - 1].assumed.outputs, (i - j) * d});
            if (topo_.pinned(i))
                c.neighbors.leader = NeighborTrajectory{0, leader_out, i * d};
            c.warm_controls = slot.assumed.controls;
        }

        StepRecord rec;
        rec.t = t;
        rec.leader_position_m = leader_pos_;
        rec.leader_velocity_mps = v0;

        std::vector<SolveReport> reports;
        if (sc_.learning.enabled) {
            for (int sweep = 0; sweep < sc_.learning.options.admm_iterations; ++sweep) {
                AdmmSweepOutcome outcome = admm_step(admm_, ctx, topo_, sc_.constants,
                                                     sc_.solver, sc_.learning.options);
                rec.admm.push_back({outcome.primal_residual, outcome.margins});
                if (sweep + 1 == sc_.learning.options.admm_iterations)
                    reports = std::move(outcome.reports);
            }
            refresh_manual_weights();
        } else {
            reports.reserve(n);
            for (int i = 1; i <= n; ++i) {
                const AdmmVehicleContext& c = ctx[i - 1];
                reports.push_back(solve(c.x0, c.assumed_self, c.neighbors, c.desired,
                                        slots_[i - 1].weights, c.params, sc_.constants,
                                        sc_.solver, c.warm_controls));
            }
        }

        rec.vehicles.resize(n);
        for (int i = 1; i <= n; ++i) {
            const VehicleSlot& slot = slots_[i - 1];
            const SolveReport& rep = reports[i - 1];
            if (!std::isfinite(rep.objective_value) ||
                !std::isfinite(rep.trajectory.states.back().position_m))
                throw std::runtime_error("solver produced a non-finite iterate");
            if (rep.status == SolveStatus::infeasible_terminal)
                PLATOON_LOG_DEBUG("terminal residual %.3e above tolerance (t=%.2fs vehicle %d)",
                                  rep.terminal_residual, t, slot.id);
            VehicleRecord& vr = rec.vehicles[i - 1];
            vr.id = slot.id;
            vr.slot = i;
            vr.state = slot.state;
            vr.control = rep.controls.front();
            const double pred_pos =
                i == 1 ? leader_pos_ : slots_[i - 2].state.position_m;
            vr.spacing_error_m = pred_pos - slot.state.position_m - d;
            vr.velocity_error_mps = slot.state.velocity_mps - v0;
            vr.cost = rep.objective_value;
            vr.terminal_residual = rep.terminal_residual;
            vr.predicted = rep.trajectory.outputs;
            vr.assumed = slot.assumed.outputs;
            vr.predicted_controls = rep.controls;
            vr.equilibrium_controls.reserve(rep.controls.size());
            for (std::size_t k = 0; k < rep.controls.size(); ++k)
                vr.equilibrium_controls.push_back(equilibrium_torque(
                    slot.params, sc_.constants, rep.trajectory.states[k].velocity_mps));
            vr.weights = slot.weights;
            vr.q_cone = sc_.learning.enabled ? admm_.vehicles[i - 1].theta : slot.weights.Q;
            rec.total_cost += rep.objective_value;
        }
        log_.steps.push_back(std::move(rec));

        for (int i = 1; i <= n; ++i) {
            slots_[i - 1].state = step(slots_[i - 1].params, sc_.constants,
                                       slots_[i - 1].state, reports[i - 1].controls.front());
            slots_[i - 1].assumed =
                shift_assumed(reports[i - 1].trajectory, slots_[i - 1].params, sc_.constants);
        }
        leader_pos_ += v0 * dt;
    }

    Scenario sc_;
    Topology topo_;
    std::mt19937_64 rng_;
    std::vector<VehicleSlot> slots_;
    AdmmState admm_;
    double leader_pos_ = 0.0;
    int next_id_ = 0;
    PlatoonLog log_;
};

}  // namespace

PlatoonLog run(const Scenario& scenario) {
    Simulation sim(scenario);
    return sim.run();
}

std::optional<double> detect_convergence(const PlatoonLog& log, double tol_pos_m,
                                         double tol_vel_mps) {
    if (log.steps.empty()) return std::nullopt;
    double t_last = 0.0;
    for (const auto& m : log.maneuvers) t_last = std::max(t_last, m.time_s);

    const auto step_ok = [&](const StepRecord& r) {
        for (const auto& v : r.vehicles)
            if (std::abs(v.spacing_error_m) > tol_pos_m ||
                std::abs(v.velocity_error_mps) > tol_vel_mps)
                return false;
        return true;
    };

    std::size_t first_ok = log.steps.size();
    for (std::size_t idx = log.steps.size(); idx-- > 0;) {
        if (!step_ok(log.steps[idx])) break;
        first_ok = idx;
    }
    if (first_ok == log.steps.size()) return std::nullopt;
    return std::max(log.steps[first_ok].t, t_last);
}

bool check_collision_free(const PlatoonLog& log, double margin_m) {
    for (const auto& rec : log.steps) {
        double pred = rec.leader_position_m;
        for (const auto& v : rec.vehicles) {
            if (!(pred - v.state.position_m > margin_m)) return false;
            pred = v.state.position_m;
        }
    }
    return true;
}

}  // namespace platoon
