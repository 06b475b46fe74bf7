#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "platoon/coordinator.hpp"
#include "platoon/metric_learning.hpp"
#include "platoon/mpc.hpp"
#include "platoon/scenario.hpp"
#include "platoon/topology.hpp"
#include "platoon/vehicle.hpp"

namespace py = pybind11;
using namespace platoon;

namespace {

py::dict summary_to_dict(const RunSummary& s) {
    py::dict d;
    d["scenario"] = s.scenario_name;
    d["topology"] = s.topology;
    d["dt_s"] = s.dt_s;
    d["duration_s"] = s.duration_s;
    d["seed"] = s.seed;
    d["metric_learning"] = s.learning_enabled;
    d["t_conv_bound"] =
        py::dict(py::arg("steps") = s.bound.steps, py::arg("seconds") = s.bound.seconds);
    d["converged_at_s"] = s.converged_at_s ? py::cast(*s.converged_at_s) : py::none();
    d["collision_free"] = s.collision_free;
    d["max_spacing_error_m"] = s.max_spacing_error_m;
    d["max_velocity_error_mps"] = s.max_velocity_error_mps;
    d["total_cost"] = s.total_cost;
    d["admm_primal_residual"] = s.admm_primal_residual;
    return d;
}

void apply_overrides(Scenario& sc, const std::optional<std::string>& topology,
                     const std::optional<bool>& metric_learning,
                     const std::optional<std::uint64_t>& seed) {
    if (topology) sc.topology = topology_kind_from_string(*topology);
    if (metric_learning) sc.learning.enabled = *metric_learning;
    if (seed) sc.learning.options.seed = *seed;
    sc.validate();
}

py::dict run_to_dict(const Scenario& sc, const std::optional<std::string>& out_dir,
                     bool emit_subspaces) {
    const PlatoonLog log = run(sc);
    const RunSummary summary = summarize(sc, log);
    if (out_dir) {
        write_trace_csv(log, *out_dir + "/trace.csv");
        write_summary_json(summary, *out_dir + "/summary.json");
        if (emit_subspaces) write_subspace_csvs(log, *out_dir);
    }
    return summary_to_dict(summary);
}

std::vector<ManeuverEvent> events_from_pairs(
    const std::vector<std::pair<std::string, double>>& pairs) {
    std::vector<ManeuverEvent> events;
    for (const auto& [kind, time_s] : pairs) {
        ManeuverEvent ev;
        if (kind == "cut_in")
            ev.kind = ManeuverKind::cut_in;
        else if (kind == "cut_out")
            ev.kind = ManeuverKind::cut_out;
        else
            throw std::invalid_argument("maneuver kind must be cut_in or cut_out");
        ev.time_s = time_s;
        events.push_back(ev);
    }
    return events;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Distributed nonlinear MPC platoon simulator with ADMM metric learning";

    py::class_<PhysicalConstants>(m, "PhysicalConstants")
        .def(py::init<>())
        .def_readwrite("gravity_mps2", &PhysicalConstants::gravity_mps2)
        .def_readwrite("dt_s", &PhysicalConstants::dt_s);

    py::class_<VehicleParams>(m, "VehicleParams")
        .def(py::init<>())
        .def_readwrite("mass_kg", &VehicleParams::mass_kg)
        .def_readwrite("aero_drag_coeff", &VehicleParams::aero_drag_coeff)
        .def_readwrite("rolling_resist_coeff", &VehicleParams::rolling_resist_coeff)
        .def_readwrite("inertial_lag_s", &VehicleParams::inertial_lag_s)
        .def_readwrite("tire_radius_m", &VehicleParams::tire_radius_m)
        .def_readwrite("driveline_efficiency", &VehicleParams::driveline_efficiency)
        .def_readwrite("u_min", &VehicleParams::u_min)
        .def_readwrite("u_max", &VehicleParams::u_max)
        .def_readwrite("id", &VehicleParams::id);

    py::class_<VehicleState>(m, "VehicleState")
        .def(py::init<>())
        .def(py::init<double, double, double>(), py::arg("position_m"),
             py::arg("velocity_mps"), py::arg("torque"))
        .def_readwrite("position_m", &VehicleState::position_m)
        .def_readwrite("velocity_mps", &VehicleState::velocity_mps)
        .def_readwrite("torque", &VehicleState::torque)
        .def("__repr__", [](const VehicleState& x) {
            return "VehicleState(s=" + std::to_string(x.position_m) +
                   ", v=" + std::to_string(x.velocity_mps) +
                   ", T=" + std::to_string(x.torque) + ")";
        });

    py::class_<OutputVec>(m, "OutputVec")
        .def(py::init<>())
        .def(py::init<double, double>(), py::arg("position_m"), py::arg("velocity_mps"))
        .def_readwrite("position_m", &OutputVec::position_m)
        .def_readwrite("velocity_mps", &OutputVec::velocity_mps);

    m.def("drag_force", &drag_force, py::arg("params"), py::arg("constants"),
          py::arg("velocity_mps"));
    m.def("equilibrium_torque", &equilibrium_torque, py::arg("params"), py::arg("constants"),
          py::arg("velocity_mps"));
    m.def("step", &step, py::arg("params"), py::arg("constants"), py::arg("state"),
          py::arg("u"));
    m.def("desired_state", &desired_state, py::arg("leader_pos_m"), py::arg("leader_vel_mps"),
          py::arg("index_gap_m"), py::arg("params"), py::arg("constants"));
    m.def("default_vehicle_params", &default_vehicle_params, py::arg("index"));

    py::class_<Topology>(m, "Topology")
        .def_static(
            "build",
            [](const std::string& kind, int n) {
                return Topology::build(topology_kind_from_string(kind), n);
            },
            py::arg("kind"), py::arg("n_followers"))
        .def_property_readonly("n_followers", &Topology::n_followers)
        .def_property_readonly("kind", [](const Topology& t) { return to_string(t.kind()); })
        .def("edge", &Topology::edge, py::arg("i"), py::arg("j"))
        .def("pinned", &Topology::pinned, py::arg("i"))
        .def("in_neighbors", &Topology::in_neighbors, py::arg("i"))
        .def("out_neighbors", &Topology::out_neighbors, py::arg("i"))
        .def("info_set", &Topology::info_set, py::arg("i"))
        .def("has_leader_spanning_tree", &Topology::has_leader_spanning_tree)
        .def("remove_vehicle", &Topology::remove_vehicle, py::arg("i"))
        .def("insert_vehicle", &Topology::insert_vehicle, py::arg("position"));

    m.def("metric", &metric, py::arg("x1"), py::arg("x2"), py::arg("A"));
    m.def("factorize", &factorize, py::arg("A"));
    m.def("project_epd", &project_epd, py::arg("A"), py::arg("epsilon"));
    m.def(
        "project_subspace",
        [](const std::vector<Eigen::VectorXd>& points, const Eigen::MatrixXd& A) {
            return project_subspace(points, A);
        },
        py::arg("points"), py::arg("A"));

    py::class_<WeightSet>(m, "WeightSet")
        .def(py::init<>())
        .def_readwrite("Q", &WeightSet::Q)
        .def_readwrite("R", &WeightSet::R)
        .def_readwrite("F", &WeightSet::F)
        .def_readwrite("G", &WeightSet::G);

    py::class_<NeighborTrajectory>(m, "NeighborTrajectory")
        .def(py::init<>())
        .def_readwrite("id", &NeighborTrajectory::id)
        .def_readwrite("assumed", &NeighborTrajectory::assumed)
        .def_readwrite("gap_m", &NeighborTrajectory::gap_m);

    py::class_<NeighborData>(m, "NeighborData")
        .def(py::init<>())
        .def_readwrite("followers", &NeighborData::followers)
        .def_readwrite("leader", &NeighborData::leader)
        .def("pinned", &NeighborData::pinned);

    py::class_<SolverOptions>(m, "SolverOptions")
        .def(py::init<>())
        .def_readwrite("max_outer", &SolverOptions::max_outer)
        .def_readwrite("max_inner", &SolverOptions::max_inner)
        .def_readwrite("terminal_tol", &SolverOptions::terminal_tol)
        .def_readwrite("penalty_growth", &SolverOptions::penalty_growth)
        .def_readwrite("penalty_initial", &SolverOptions::penalty_initial);

    py::class_<HorizonTrajectory>(m, "HorizonTrajectory")
        .def(py::init<>())
        .def_readwrite("controls", &HorizonTrajectory::controls)
        .def_readwrite("states", &HorizonTrajectory::states)
        .def_readwrite("outputs", &HorizonTrajectory::outputs)
        .def("horizon", &HorizonTrajectory::horizon);

    py::enum_<SolveStatus>(m, "SolveStatus")
        .value("converged", SolveStatus::converged)
        .value("max_iterations", SolveStatus::max_iterations)
        .value("infeasible_terminal", SolveStatus::infeasible_terminal);

    py::class_<SolveReport>(m, "SolveReport")
        .def_readonly("controls", &SolveReport::controls)
        .def_readonly("trajectory", &SolveReport::trajectory)
        .def_readonly("objective_value", &SolveReport::objective_value)
        .def_readonly("terminal_residual", &SolveReport::terminal_residual)
        .def_readonly("outer_iterations", &SolveReport::outer_iterations)
        .def_readonly("inner_iterations", &SolveReport::inner_iterations)
        .def_readonly("status", &SolveReport::status);

    m.def("rollout",
          [](const VehicleParams& p, const PhysicalConstants& c, const VehicleState& x0,
             const std::vector<double>& controls) { return rollout(p, c, x0, controls); });
    m.def(
        "objective",
        [](const HorizonTrajectory& traj, const std::vector<OutputVec>& assumed_self,
           const NeighborData& nbr, const std::vector<OutputVec>& desired, const WeightSet& w,
           const VehicleParams& p, const PhysicalConstants& c) {
            return objective(traj, assumed_self, nbr, desired, w, p, c);
        },
        py::arg("trajectory"), py::arg("assumed_self"), py::arg("neighbors"),
        py::arg("desired"), py::arg("weights"), py::arg("params"), py::arg("constants"));
    m.def(
        "solve",
        [](const VehicleState& x0, const std::vector<OutputVec>& assumed_self,
           const NeighborData& nbr, const std::vector<OutputVec>& desired, const WeightSet& w,
           const VehicleParams& p, const PhysicalConstants& c, const SolverOptions& opts,
           const std::vector<double>& warm_start) {
            return solve(x0, assumed_self, nbr, desired, w, p, c, opts, warm_start);
        },
        py::arg("x0"), py::arg("assumed_self"), py::arg("neighbors"), py::arg("desired"),
        py::arg("weights"), py::arg("params"), py::arg("constants"),
        py::arg("options") = SolverOptions{},
        py::arg("warm_start") = std::vector<double>{});
    m.def("shift_assumed",
          [](const HorizonTrajectory& prev, const VehicleParams& p,
             const PhysicalConstants& c) { return shift_assumed(prev, p, c); });

    m.def(
        "t_conv_bound",
        [](int n_initial, const std::vector<std::pair<std::string, double>>& events,
           double dt_s) {
            const auto evs = events_from_pairs(events);
            const TconvBound b = t_conv_bound(n_initial, evs, dt_s);
            return py::dict(py::arg("steps") = b.steps, py::arg("seconds") = b.seconds);
        },
        py::arg("n_initial"), py::arg("events"), py::arg("dt_s") = 0.1);

    m.def(
        "run_scenario",
        [](const std::string& path, const std::optional<std::string>& out_dir,
           const std::optional<std::string>& topology, const std::optional<bool>& learning,
           const std::optional<std::uint64_t>& seed, bool emit_subspaces) {
            Scenario sc = parse_scenario(path);
            apply_overrides(sc, topology, learning, seed);
            return run_to_dict(sc, out_dir, emit_subspaces);
        },
        py::arg("path"), py::arg("out_dir") = py::none(), py::arg("topology") = py::none(),
        py::arg("metric_learning") = py::none(), py::arg("seed") = py::none(),
        py::arg("emit_subspaces") = false);
    m.def(
        "run_scenario_text",
        [](const std::string& text, const std::optional<std::string>& out_dir,
           const std::optional<std::string>& topology, const std::optional<bool>& learning,
           const std::optional<std::uint64_t>& seed, bool emit_subspaces) {
            Scenario sc = scenario_from_json_text(text);
            apply_overrides(sc, topology, learning, seed);
            return run_to_dict(sc, out_dir, emit_subspaces);
        },
        py::arg("text"), py::arg("out_dir") = py::none(), py::arg("topology") = py::none(),
        py::arg("metric_learning") = py::none(), py::arg("seed") = py::none(),
        py::arg("emit_subspaces") = false);
    m.def("validate_scenario_file", [](const std::string& path) {
        parse_scenario(path);
        return true;
    });

    py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_ValueError);

#ifdef VERSION_INFO
#define PLATOON_STR2(x) #x
#define PLATOON_STR(x) PLATOON_STR2(x)
    m.attr("__version__") = PLATOON_STR(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
