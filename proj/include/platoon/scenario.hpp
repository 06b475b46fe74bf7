#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon/coordinator.hpp"

namespace platoon {

/// Parse or validation failure with the violated requirement in the message.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Documented non-paper default parameter set; entries cycle for large fleets.
VehicleParams default_vehicle_params(int index);
std::vector<VehicleParams> default_fleet(int n);

/// JSON scenario parsing.  Unspecified fields take the documented defaults;
/// the result has been validated.  Throws ScenarioError.
Scenario parse_scenario(const std::string& path);
Scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const Scenario& scenario, int indent = 2);

struct RunSummary {
    std::string scenario_name;
    std::string topology;
    double dt_s = 0.1;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
    bool learning_enabled = false;
    TconvBound bound;
    std::optional<double> converged_at_s;
    bool collision_free = true;
    double max_spacing_error_m = 0.0;
    double max_velocity_error_mps = 0.0;
    std::vector<double> total_cost;                        // per step
    std::vector<std::vector<double>> admm_primal_residual; // per step, per sweep
};

RunSummary summarize(const Scenario& scenario, const PlatoonLog& log);

/// trace.csv: t,vehicle_id,s,v,T,u,spacing_error,velocity_error with
/// 9-significant-digit decimals in a fixed column order.
void write_trace_csv(const PlatoonLog& log, const std::string& path);

void write_summary_json(const RunSummary& summary, const std::string& path);

/// subspace_{q,r,f,g}.csv: t,vehicle_id,horizon_index,which,coord1,coord2,
/// the horizon points projected through each weight matrix's factor.
void write_subspace_csvs(const PlatoonLog& log, const std::string& directory);

}  // namespace platoon
