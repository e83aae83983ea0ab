#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "funnelsim/controllers.hpp"
#include "funnelsim/integrator.hpp"
#include "funnelsim/scenario.hpp"

namespace fsim {

enum class ControllerKind { kFilterFunnel, kComparison };

/// Slices of the closed-loop state vector
/// [x1 (m), x2 (m), controller state, operator internal state].
struct StateLayout {
    int m = 1;
    int ctrl_offset = 0;
    int ctrl_dim = 0;  // m for the filter controller, 2m for the comparison one
    int internal_offset = 0;
    int internal_dim = 0;
    int total = 0;
};

struct Metrics {
    double max_funnel_occupancy = 0.0;       // max_t phi(t) ||e(t)||, target < 1
    std::optional<double> max_theta_ratio;   // filter controller: max_t ||theta||/theta_hat
    double sup_u = 0.0;                      // max_t ||u(t)||
    double tv_u = 0.0;                       // total variation of u over the grid
    std::optional<double> final_abs_error;   // ||e(t_end)||, completed runs only
};

struct RunResult {
    std::string label;
    ControllerKind controller = ControllerKind::kFilterFunnel;
    bool refused = false;  // infeasible scenario refused before integration
    std::optional<FeasibilityReport> feasibility;  // filter controller runs
    Trajectory trajectory;
    Metrics metrics;
    StateLayout layout;
    double theta_hat = 0.0;  // filter controller runs
    FunnelFunction funnel;   // reporting funnel (the scenario's phi)
    ReferenceSignal reference;

    bool completed() const { return !refused && trajectory.completed(); }
};

/// Assembled closed-loop problem, ready for integrate(). The operator
/// instance is owned here and captured by the problem callbacks.
struct ClosedLoop {
    OdeProblem problem;
    StateLayout layout;
    std::shared_ptr<CausalOperator> op;
};

ClosedLoop build_filter_closed_loop(const PlantModel& plant, const FilterControllerParams& ctrl,
                                    const SimSpec& sim);

ClosedLoop build_comparison_closed_loop(const PlantModel& plant,
                                        const ComparisonControllerParams& ctrl,
                                        const FunnelFunction& reporting_phi, const SimSpec& sim);

/// Checks feasibility (filter controller), integrates the closed loop and
/// computes the run metrics. Infeasible filter scenarios are refused
/// (refused = true, report attached) unless allow_infeasible is set.
RunResult run_scenario(const Scenario& s, bool allow_infeasible = false);

/// sup over the shared output grid of ||y_a(t) - y_b(t)||.
double output_sup_distance(const RunResult& a, const RunResult& b);

struct SweepRow {
    double value = 0.0;
    std::string status;  // "completed", "refused", "barrier-breach", ... or "error"
    std::optional<Metrics> metrics;
    std::optional<double> sup_distance_to_first;
    std::string note;
};

struct SweepTable {
    std::string parameter;
    std::vector<SweepRow> rows;
};

/// One run per value of the dotted scenario parameter, in the given order.
/// Per-run failures are recorded in the table; the sweep continues.
SweepTable sweep(const Scenario& s, const std::string& parameter_path,
                 const std::vector<double>& values);

struct CompareResult {
    RunResult a;
    RunResult b;
    bool shared_funnel_ok = false;  // both errors inside the common funnel
    double max_occupancy_a = 0.0;   // under scenario a's funnel
    double max_occupancy_b = 0.0;
};

/// Runs both scenarios (which must share plant, reference, dimension and time
/// span; throws std::invalid_argument otherwise) and verifies both errors
/// stay inside the common funnel.
CompareResult compare(const Scenario& a, const Scenario& b);

const char* status_name(RunStatus status);

}  // namespace fsim
