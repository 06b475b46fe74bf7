#include "platoon/scenario.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "platoon/metric_learning.hpp"

namespace platoon {

using nlohmann::json;

namespace {

// Heterogeneous defaults for mid-size passenger vehicles.  These are this
// project's documented reference fleet, not values from any dataset.
constexpr std::array<VehicleParams, 8> kDefaultFleet = {{
    {1650.0, 1.10, 0.015, 0.45, 0.310, 0.92, -3200.0, 3200.0, 0},
    {1500.0, 0.95, 0.014, 0.38, 0.300, 0.90, -3000.0, 3000.0, 0},
    {1805.0, 1.25, 0.016, 0.52, 0.330, 0.88, -3600.0, 3600.0, 0},
    {1420.0, 0.90, 0.013, 0.35, 0.290, 0.93, -2800.0, 2800.0, 0},
    {1725.0, 1.15, 0.017, 0.48, 0.320, 0.89, -3400.0, 3400.0, 0},
    {1560.0, 1.00, 0.015, 0.40, 0.300, 0.91, -3100.0, 3100.0, 0},
    {1880.0, 1.30, 0.018, 0.55, 0.340, 0.87, -3700.0, 3700.0, 0},
    {1470.0, 0.92, 0.014, 0.36, 0.295, 0.92, -2900.0, 2900.0, 0},
}};

json matrix_to_json(const Eigen::Matrix2d& m) {
    return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

Eigen::Matrix2d matrix_from_json(const json& j) {
    Eigen::Matrix2d m;
    m << j.at(0).at(0).get<double>(), j.at(0).at(1).get<double>(),
        j.at(1).at(0).get<double>(), j.at(1).at(1).get<double>();
    return m;
}

json params_to_json(const VehicleParams& p) {
    json j;
    j["mass_kg"] = p.mass_kg;
    j["aero_drag_coeff"] = p.aero_drag_coeff;
    j["rolling_resist_coeff"] = p.rolling_resist_coeff;
    j["inertial_lag_s"] = p.inertial_lag_s;
    j["tire_radius_m"] = p.tire_radius_m;
    j["driveline_efficiency"] = p.driveline_efficiency;
    j["u_min"] = p.u_min;
    j["u_max"] = p.u_max;
    if (p.id > 0) j["id"] = p.id;
    return j;
}

VehicleParams params_from_json(const json& j, const VehicleParams& base) {
    VehicleParams p = base;
    p.mass_kg = j.value("mass_kg", p.mass_kg);
    p.aero_drag_coeff = j.value("aero_drag_coeff", p.aero_drag_coeff);
    p.rolling_resist_coeff = j.value("rolling_resist_coeff", p.rolling_resist_coeff);
    p.inertial_lag_s = j.value("inertial_lag_s", p.inertial_lag_s);
    p.tire_radius_m = j.value("tire_radius_m", p.tire_radius_m);
    p.driveline_efficiency = j.value("driveline_efficiency", p.driveline_efficiency);
    p.u_min = j.value("u_min", p.u_min);
    p.u_max = j.value("u_max", p.u_max);
    p.id = j.value("id", p.id);
    return p;
}

json leader_to_json(const LeaderProfile& leader) {
    json j;
    j["initial_position_m"] = leader.initial_position_m;
    json segs = json::array();
    for (const auto& seg : leader.segments) {
        json s;
        if (std::isfinite(seg.until_s)) s["until_s"] = seg.until_s;
        if (seg.v_start_mps == seg.v_end_mps) {
            s["velocity_mps"] = seg.v_start_mps;
        } else {
            s["velocity_from_mps"] = seg.v_start_mps;
            s["velocity_to_mps"] = seg.v_end_mps;
        }
        segs.push_back(std::move(s));
    }
    j["segments"] = std::move(segs);
    return j;
}

LeaderProfile leader_from_json(const json& j) {
    LeaderProfile leader;
    leader.initial_position_m = j.value("initial_position_m", 0.0);
    if (j.contains("segments")) {
        leader.segments.clear();
        for (const auto& s : j.at("segments")) {
            LeaderSegment seg;
            seg.until_s = s.value("until_s", std::numeric_limits<double>::infinity());
            if (s.contains("velocity_mps")) {
                seg.v_start_mps = seg.v_end_mps = s.at("velocity_mps").get<double>();
            } else {
                seg.v_start_mps = s.at("velocity_from_mps").get<double>();
                seg.v_end_mps = s.at("velocity_to_mps").get<double>();
            }
            leader.segments.push_back(seg);
        }
    }
    return leader;
}

json event_to_json(const ManeuverEvent& ev) {
    json j;
    j["kind"] = ev.kind == ManeuverKind::cut_in ? "cut_in" : "cut_out";
    j["time_s"] = ev.time_s;
    j["position"] = ev.position;
    if (ev.params) j["params"] = params_to_json(*ev.params);
    json entry;
    if (ev.entry_position_m) entry["position_m"] = *ev.entry_position_m;
    if (ev.entry_velocity_mps) entry["velocity_mps"] = *ev.entry_velocity_mps;
    if (ev.entry_torque) entry["torque"] = *ev.entry_torque;
    if (!entry.empty()) j["entry"] = std::move(entry);
    return j;
}

ManeuverEvent event_from_json(const json& j) {
    ManeuverEvent ev;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "cut_in")
        ev.kind = ManeuverKind::cut_in;
    else if (kind == "cut_out")
        ev.kind = ManeuverKind::cut_out;
    else
        throw ScenarioError("unknown maneuver kind: " + kind);
    ev.time_s = j.at("time_s").get<double>();
    ev.position = j.at("position").get<int>();
    if (j.contains("params")) ev.params = params_from_json(j.at("params"), VehicleParams{});
    if (j.contains("entry")) {
        const json& e = j.at("entry");
        if (e.contains("position_m")) ev.entry_position_m = e.at("position_m").get<double>();
        if (e.contains("velocity_mps"))
            ev.entry_velocity_mps = e.at("velocity_mps").get<double>();
        if (e.contains("torque")) ev.entry_torque = e.at("torque").get<double>();
    }
    return ev;
}

Scenario scenario_from_json(const json& j) {
    Scenario sc;
    sc.name = j.value("name", sc.name);
    sc.topology = topology_kind_from_string(j.value("topology", "pf"));
    sc.n_followers = j.value("n_followers", sc.n_followers);
    sc.constants.dt_s = j.value("dt_s", sc.constants.dt_s);
    sc.constants.gravity_mps2 = j.value("gravity_mps2", sc.constants.gravity_mps2);
    sc.horizon = j.value("horizon", sc.horizon);
    sc.desired_gap_m = j.value("desired_gap_m", sc.desired_gap_m);
    sc.duration_s = j.value("duration_s", sc.duration_s);
    if (j.contains("leader")) sc.leader = leader_from_json(j.at("leader"));

    if (j.contains("vehicles")) {
        sc.vehicles.clear();
        int idx = 0;
        for (const auto& v : j.at("vehicles"))
            sc.vehicles.push_back(params_from_json(v, default_vehicle_params(idx++)));
    } else {
        sc.vehicles = default_fleet(sc.n_followers);
    }

    if (j.contains("initial_states")) {
        std::vector<VehicleState> states;
        for (const auto& s : j.at("initial_states"))
            states.push_back({s.at("position_m").get<double>(),
                              s.at("velocity_mps").get<double>(),
                              s.value("torque", 0.0)});
        sc.initial_states = std::move(states);
    }

    if (j.contains("events"))
        for (const auto& e : j.at("events")) sc.events.push_back(event_from_json(e));

    if (j.contains("weights")) {
        const json& w = j.at("weights");
        if (w.contains("q")) sc.base_weights.Q = matrix_from_json(w.at("q"));
        if (w.contains("r")) sc.base_weights.R = w.at("r").get<double>();
        if (w.contains("f")) sc.base_weights.F = matrix_from_json(w.at("f"));
        if (w.contains("g")) sc.base_weights.G = matrix_from_json(w.at("g"));
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        sc.solver.max_outer = s.value("max_outer", sc.solver.max_outer);
        sc.solver.max_inner = s.value("max_inner", sc.solver.max_inner);
        sc.solver.terminal_tol = s.value("terminal_tol", sc.solver.terminal_tol);
        sc.solver.penalty_growth = s.value("penalty_growth", sc.solver.penalty_growth);
        sc.solver.penalty_initial = s.value("penalty_initial", sc.solver.penalty_initial);
    }
    if (j.contains("metric_learning")) {
        const json& m = j.at("metric_learning");
        sc.learning.enabled = m.value("enabled", sc.learning.enabled);
        sc.learning.options.rho = m.value("rho", sc.learning.options.rho);
        sc.learning.options.epsilon = m.value("epsilon", sc.learning.options.epsilon);
        sc.learning.options.learning_rate =
            m.value("learning_rate", sc.learning.options.learning_rate);
        sc.learning.options.admm_iterations =
            m.value("admm_iterations", sc.learning.options.admm_iterations);
        sc.learning.options.gradient_iterations =
            m.value("gradient_iterations", sc.learning.options.gradient_iterations);
        sc.learning.options.seed = m.value("seed", sc.learning.options.seed);
    }
    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        sc.tolerances.position_m = t.value("position_m", sc.tolerances.position_m);
        sc.tolerances.velocity_mps = t.value("velocity_mps", sc.tolerances.velocity_mps);
        sc.tolerances.collision_margin_m =
            t.value("collision_margin_m", sc.tolerances.collision_margin_m);
    }
    return sc;
}

json scenario_to_json(const Scenario& sc) {
    json j;
    j["name"] = sc.name;
    j["topology"] = to_string(sc.topology);
    j["n_followers"] = sc.n_followers;
    j["dt_s"] = sc.constants.dt_s;
    j["gravity_mps2"] = sc.constants.gravity_mps2;
    j["horizon"] = sc.horizon;
    j["desired_gap_m"] = sc.desired_gap_m;
    j["duration_s"] = sc.duration_s;
    j["leader"] = leader_to_json(sc.leader);
    json vehicles = json::array();
    for (const auto& p : sc.vehicles) vehicles.push_back(params_to_json(p));
    j["vehicles"] = std::move(vehicles);
    if (sc.initial_states) {
        json states = json::array();
        for (const auto& s : *sc.initial_states)
            states.push_back({{"position_m", s.position_m},
                              {"velocity_mps", s.velocity_mps},
                              {"torque", s.torque}});
        j["initial_states"] = std::move(states);
    }
    if (!sc.events.empty()) {
        json events = json::array();
        for (const auto& e : sc.events) events.push_back(event_to_json(e));
        j["events"] = std::move(events);
    }
    j["weights"] = {{"q", matrix_to_json(sc.base_weights.Q)},
                    {"r", sc.base_weights.R},
                    {"f", matrix_to_json(sc.base_weights.F)},
                    {"g", matrix_to_json(sc.base_weights.G)}};
    j["solver"] = {{"max_outer", sc.solver.max_outer},
                   {"max_inner", sc.solver.max_inner},
                   {"terminal_tol", sc.solver.terminal_tol},
                   {"penalty_growth", sc.solver.penalty_growth},
                   {"penalty_initial", sc.solver.penalty_initial}};
    j["metric_learning"] = {{"enabled", sc.learning.enabled},
                            {"rho", sc.learning.options.rho},
                            {"epsilon", sc.learning.options.epsilon},
                            {"learning_rate", sc.learning.options.learning_rate},
                            {"admm_iterations", sc.learning.options.admm_iterations},
                            {"gradient_iterations", sc.learning.options.gradient_iterations},
                            {"seed", sc.learning.options.seed}};
    j["tolerances"] = {{"position_m", sc.tolerances.position_m},
                       {"velocity_mps", sc.tolerances.velocity_mps},
                       {"collision_margin_m", sc.tolerances.collision_margin_m}};
    return j;
}

void format_value(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out += buf;
}

}  // namespace

VehicleParams default_vehicle_params(int index) {
    if (index < 0) throw std::invalid_argument("fleet index must be non-negative");
    return kDefaultFleet[static_cast<std::size_t>(index) % kDefaultFleet.size()];
}

std::vector<VehicleParams> default_fleet(int n) {
    std::vector<VehicleParams> fleet;
    fleet.reserve(n);
    for (int i = 0; i < n; ++i) fleet.push_back(default_vehicle_params(i));
    return fleet;
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scenario_from_json_text(text);
}

Scenario scenario_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioError(std::string("scenario parse error: ") + e.what());
    }
    Scenario sc;
    try {
        sc = scenario_from_json(j);
        sc.validate();
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("invalid scenario: ") + e.what());
    }
    return sc;
}

std::string scenario_to_json_text(const Scenario& scenario, int indent) {
    return scenario_to_json(scenario).dump(indent) + "\n";
}

RunSummary summarize(const Scenario& scenario, const PlatoonLog& log) {
    RunSummary s;
    s.scenario_name = scenario.name;
    s.topology = to_string(scenario.topology);
    s.dt_s = scenario.constants.dt_s;
    s.duration_s = scenario.duration_s;
    s.seed = scenario.learning.options.seed;
    s.learning_enabled = scenario.learning.enabled;
    s.bound = t_conv_bound(scenario.n_followers, scenario.events, scenario.constants.dt_s);
    s.converged_at_s =
        detect_convergence(log, scenario.tolerances.position_m, scenario.tolerances.velocity_mps);
    s.collision_free = check_collision_free(log, scenario.tolerances.collision_margin_m);
    for (const auto& rec : log.steps) {
        s.total_cost.push_back(rec.total_cost);
        for (const auto& v : rec.vehicles) {
            s.max_spacing_error_m = std::max(s.max_spacing_error_m, std::abs(v.spacing_error_m));
            s.max_velocity_error_mps =
                std::max(s.max_velocity_error_mps, std::abs(v.velocity_error_mps));
        }
        if (!rec.admm.empty()) {
            std::vector<double> residuals;
            residuals.reserve(rec.admm.size());
            for (const auto& it : rec.admm) residuals.push_back(it.primal_residual);
            s.admm_primal_residual.push_back(std::move(residuals));
        }
    }
    return s;
}

void write_trace_csv(const PlatoonLog& log, const std::string& path) {
    std::string out = "t,vehicle_id,s,v,T,u,spacing_error,velocity_error\n";
    for (const auto& rec : log.steps) {
        for (const auto& v : rec.vehicles) {
            format_value(out, rec.t);
            out += ',';
            out += std::to_string(v.id);
            out += ',';
            format_value(out, v.state.position_m);
            out += ',';
            format_value(out, v.state.velocity_mps);
            out += ',';
            format_value(out, v.state.torque);
            out += ',';
            format_value(out, v.control);
            out += ',';
            format_value(out, v.spacing_error_m);
            out += ',';
            format_value(out, v.velocity_error_mps);
            out += '\n';
        }
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    file << out;
}

void write_summary_json(const RunSummary& summary, const std::string& path) {
    json j;
    j["scenario"] = summary.scenario_name;
    j["topology"] = summary.topology;
    j["dt_s"] = summary.dt_s;
    j["duration_s"] = summary.duration_s;
    j["seed"] = summary.seed;
    j["metric_learning"] = summary.learning_enabled;
    j["t_conv_bound"] = {{"steps", summary.bound.steps}, {"seconds", summary.bound.seconds}};
    if (summary.converged_at_s)
        j["converged_at_s"] = *summary.converged_at_s;
    else
        j["converged_at_s"] = nullptr;
    j["collision_free"] = summary.collision_free;
    j["max_spacing_error_m"] = summary.max_spacing_error_m;
    j["max_velocity_error_mps"] = summary.max_velocity_error_mps;
    j["total_cost"] = summary.total_cost;
    if (!summary.admm_primal_residual.empty())
        j["admm_primal_residual"] = summary.admm_primal_residual;
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    file << j.dump(2) << "\n";
}

namespace {

void append_subspace_row(std::string& out, double t, int id, int k, const char* which,
                         double c1, double c2) {
    format_value(out, t);
    out += ',';
    out += std::to_string(id);
    out += ',';
    out += std::to_string(k);
    out += ',';
    out += which;
    out += ',';
    format_value(out, c1);
    out += ',';
    format_value(out, c2);
    out += '\n';
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    file << content;
}

Eigen::Vector2d project2(const Eigen::Matrix2d& Bt, const OutputVec& y) {
    return Bt * Eigen::Vector2d(y.position_m, y.velocity_mps);
}

}  // namespace

void write_subspace_csvs(const PlatoonLog& log, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const std::string header = "t,vehicle_id,horizon_index,which,coord1,coord2\n";
    std::string q_csv = header, r_csv = header, f_csv = header, g_csv = header;

    for (const auto& rec : log.steps) {
        const int n = static_cast<int>(rec.vehicles.size());
        const Topology topo = Topology::build(log.kind, n);
        for (int i = 1; i <= n; ++i) {
            const VehicleRecord& v = rec.vehicles[i - 1];
            const int np = static_cast<int>(v.predicted.size()) - 1;

            const Eigen::Matrix2d Bf = factorize(v.weights.F).transpose();
            for (int k = 0; k <= np; ++k) {
                const auto p = project2(Bf, v.predicted[k]);
                const auto a = project2(Bf, v.assumed[k]);
                append_subspace_row(f_csv, rec.t, v.id, k, "predicted", p.x(), p.y());
                append_subspace_row(f_csv, rec.t, v.id, k, "assumed", a.x(), a.y());
            }

            if (topo.pinned(i)) {
                const Eigen::Matrix2d Bq = factorize(v.q_cone).transpose();
                for (int k = 0; k <= np; ++k) {
                    const OutputVec des{rec.leader_position_m +
                                            rec.leader_velocity_mps * k * log.dt_s -
                                            i * log.desired_gap_m,
                                        rec.leader_velocity_mps};
                    const auto p = project2(Bq, v.predicted[k]);
                    const auto dd = project2(Bq, des);
                    append_subspace_row(q_csv, rec.t, v.id, k, "predicted", p.x(), p.y());
                    append_subspace_row(q_csv, rec.t, v.id, k, "desired", dd.x(), dd.y());
                }
            }

            const auto in_nbrs = topo.in_neighbors(i);
            if (!in_nbrs.empty()) {
                const Eigen::Matrix2d Bg = factorize(v.weights.G).transpose();
                for (int k = 0; k <= np; ++k) {
                    Eigen::Vector2d target = Eigen::Vector2d::Zero();
                    for (int j : in_nbrs) {
                        const OutputVec& yj = rec.vehicles[j - 1].assumed[k];
                        target += Eigen::Vector2d(yj.position_m - (i - j) * log.desired_gap_m,
                                                  yj.velocity_mps);
                    }
                    target /= static_cast<double>(in_nbrs.size());
                    const auto p = project2(Bg, v.predicted[k]);
                    const Eigen::Vector2d a = Bg * target;
                    append_subspace_row(g_csv, rec.t, v.id, k, "predicted", p.x(), p.y());
                    append_subspace_row(g_csv, rec.t, v.id, k, "assumed", a.x(), a.y());
                }
            }

            const double b = std::sqrt(std::max(0.0, v.weights.R));
            for (std::size_t k = 0; k < v.predicted_controls.size(); ++k) {
                append_subspace_row(r_csv, rec.t, v.id, static_cast<int>(k), "predicted",
                                    b * v.predicted_controls[k], 0.0);
                append_subspace_row(r_csv, rec.t, v.id, static_cast<int>(k), "equilibrium",
                                    b * v.equilibrium_controls[k], 0.0);
            }
        }
    }

    write_file((fs::path(directory) / "subspace_q.csv").string(), q_csv);
    write_file((fs::path(directory) / "subspace_r.csv").string(), r_csv);
    write_file((fs::path(directory) / "subspace_f.csv").string(), f_csv);
    write_file((fs::path(directory) / "subspace_g.csv").string(), g_csv);
}

}  // namespace platoon
