#include "funnelsim/harness.hpp"

#include <algorithm>
#include <cmath>

namespace fsim {

const char* status_name(RunStatus status) {
    switch (status) {
        case RunStatus::kCompleted:
            return "completed";
        case RunStatus::kBarrierBreach:
            return "barrier-breach";
        case RunStatus::kStepUnderflow:
            return "step-underflow";
    }
    return "unknown";
}

namespace {

StateLayout make_layout(int m, int ctrl_dim, int internal_dim) {
    StateLayout layout;
    layout.m = m;
    layout.ctrl_offset = 2 * m;
    layout.ctrl_dim = ctrl_dim;
    layout.internal_offset = 2 * m + ctrl_dim;
    layout.internal_dim = internal_dim;
    layout.total = layout.internal_offset + internal_dim;
    return layout;
}

Vec initial_state(const PlantModel& plant, const Vec& ctrl0, const Vec& eta0) {
    Vec x0(2 * plant.m + ctrl0.size() + eta0.size());
    x0 << plant.y0, plant.ydot0, ctrl0, eta0;
    return x0;
}

void apply_sim(OdeProblem& problem, const SimSpec& sim) {
    problem.t0 = 0.0;
    problem.t_end = sim.t_end;
    problem.rel_tol = sim.rel_tol;
    problem.abs_tol = sim.abs_tol;
    problem.output_dt = sim.output_dt;
}

void wire_operator(OdeProblem& problem, const std::shared_ptr<CausalOperator>& op,
                   const PlantModel& plant, const StateLayout& layout) {
    op->reset(0.0, plant.y0);
    if (const auto hint = op->max_step_hint()) {
        problem.max_step = *hint;
        problem.accept_hook = [op, layout](double t, const Vec& x) {
            op->record(t, x.segment(0, layout.m), x.segment(layout.m, layout.m));
        };
    }
}

}  // namespace

ClosedLoop build_filter_closed_loop(const PlantModel& plant, const FilterControllerParams& ctrl,
                                    const SimSpec& sim) {
    if (ctrl.dim() != plant.m) {
        throw std::invalid_argument("closed loop: controller dimension must match plant");
    }
    const int m = plant.m;
    auto op = std::shared_ptr<CausalOperator>(make_operator(plant.op, m));
    const StateLayout layout = make_layout(m, m, op->internal_dim());

    ClosedLoop loop{OdeProblem{}, layout, op};
    OdeProblem& problem = loop.problem;
    apply_sim(problem, sim);
    problem.x0 = initial_state(plant, ctrl.xi0, op->initial_internal());
    problem.input_dim = m;
    problem.diagnostic_names = {"phi", "occupancy", "theta_norm"};

    problem.rhs = [plant, ctrl, op, layout](double t, const Vec& x, Vec& dxdt,
                                            std::string* reason) -> bool {
        const auto y = x.segment(0, layout.m);
        const auto x2 = x.segment(layout.m, layout.m);
        const auto xi = x.segment(layout.ctrl_offset, layout.ctrl_dim);

        const auto control = filter_control_output(ctrl, xi, y, t, reason);
        if (!control) return false;

        Vec eta;
        if (layout.internal_dim > 0) {
            eta = x.segment(layout.internal_offset, layout.internal_dim);
        }
        const Vec w = op->output_integrated(t, y, x2, eta);
        auto [x1_dot, x2_dot] = plant_rhs(plant, t, y, x2, control->u, w);

        dxdt.resize(layout.total);
        dxdt.segment(0, layout.m) = x1_dot;
        dxdt.segment(layout.m, layout.m) = x2_dot;
        dxdt.segment(layout.ctrl_offset, layout.ctrl_dim) = filter_state_deriv(xi, control->u);
        if (layout.internal_dim > 0) {
            Vec eta_dot;
            op->internal_deriv(t, eta, y, eta_dot);
            dxdt.segment(layout.internal_offset, layout.internal_dim) = eta_dot;
        }
        return true;
    };

    problem.sample_map = [ctrl, layout](double t, const Vec& x, Vec& input, Vec& diag,
                                        std::string* reason) -> bool {
        const auto y = x.segment(0, layout.m);
        const auto xi = x.segment(layout.ctrl_offset, layout.ctrl_dim);
        const auto control = filter_control_output(ctrl, xi, y, t, reason);
        if (!control) return false;
        input = control->u;
        diag[0] = ctrl.phi.eval(t);
        diag[1] = control->funnel_occupancy;
        diag[2] = control->theta.norm();
        return true;
    };

    wire_operator(problem, op, plant, layout);
    return loop;
}

ClosedLoop build_comparison_closed_loop(const PlantModel& plant,
                                        const ComparisonControllerParams& ctrl,
                                        const FunnelFunction& reporting_phi, const SimSpec& sim) {
    if (ctrl.dim() != plant.m) {
        throw std::invalid_argument("closed loop: controller dimension must match plant");
    }
    const int m = plant.m;
    auto op = std::shared_ptr<CausalOperator>(make_operator(plant.op, m));
    const StateLayout layout = make_layout(m, 2 * m, op->internal_dim());

    ClosedLoop loop{OdeProblem{}, layout, op};
    OdeProblem& problem = loop.problem;
    apply_sim(problem, sim);
    Vec ctrl0(2 * m);
    ctrl0 << ctrl.z1_0, ctrl.z2_0;
    problem.x0 = initial_state(plant, ctrl0, op->initial_internal());
    problem.input_dim = m;
    problem.diagnostic_names = {"phi", "occupancy", "k0", "k1", "k2"};

    problem.rhs = [plant, ctrl, op, layout](double t, const Vec& x, Vec& dxdt,
                                            std::string* reason) -> bool {
        const auto y = x.segment(0, layout.m);
        const auto x2 = x.segment(layout.m, layout.m);
        const auto z1 = x.segment(layout.ctrl_offset, layout.m);
        const auto z2 = x.segment(layout.ctrl_offset + layout.m, layout.m);

        const auto control = comparison_control_output(ctrl, z1, z2, y, t, reason);
        if (!control) return false;
        const auto deriv = comparison_state_deriv(ctrl, z1, z2, y, control->u, t, reason);
        if (!deriv) return false;

        Vec eta;
        if (layout.internal_dim > 0) {
            eta = x.segment(layout.internal_offset, layout.internal_dim);
        }
        const Vec w = op->output_integrated(t, y, x2, eta);
        auto [x1_dot, x2_dot] = plant_rhs(plant, t, y, x2, control->u, w);

        dxdt.resize(layout.total);
        dxdt.segment(0, layout.m) = x1_dot;
        dxdt.segment(layout.m, layout.m) = x2_dot;
        dxdt.segment(layout.ctrl_offset, layout.m) = deriv->z1_dot;
        dxdt.segment(layout.ctrl_offset + layout.m, layout.m) = deriv->z2_dot;
        if (layout.internal_dim > 0) {
            Vec eta_dot;
            op->internal_deriv(t, eta, y, eta_dot);
            dxdt.segment(layout.internal_offset, layout.internal_dim) = eta_dot;
        }
        return true;
    };

    const FunnelFunction phi = reporting_phi;
    const ReferenceSignal y_ref = ctrl.y_ref;
    problem.sample_map = [ctrl, phi, y_ref, layout](double t, const Vec& x, Vec& input,
                                                    Vec& diag, std::string* reason) -> bool {
        const auto y = x.segment(0, layout.m);
        const auto z1 = x.segment(layout.ctrl_offset, layout.m);
        const auto z2 = x.segment(layout.ctrl_offset + layout.m, layout.m);
        const auto control = comparison_control_output(ctrl, z1, z2, y, t, reason);
        if (!control) return false;
        input = control->u;
        const double p = phi.eval(t);
        diag[0] = p;
        diag[1] = p * (y - y_ref.eval(t)).norm();
        diag[2] = control->k0;
        diag[3] = control->k1;
        diag[4] = control->k2;
        return true;
    };

    wire_operator(problem, op, plant, layout);
    return loop;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

int diag_index(const Trajectory& traj, const std::string& name) {
    for (std::size_t i = 0; i < traj.diagnostic_names.size(); ++i) {
        if (traj.diagnostic_names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

Metrics compute_metrics(const Trajectory& traj, const ReferenceSignal& y_ref,
                        const StateLayout& layout, std::optional<double> theta_hat) {
    Metrics metrics;
    if (traj.times.empty()) return metrics;

    const int occ = diag_index(traj, "occupancy");
    const int theta = diag_index(traj, "theta_norm");

    double max_theta_norm = 0.0;
    for (std::size_t j = 0; j < traj.times.size(); ++j) {
        if (occ >= 0) {
            metrics.max_funnel_occupancy =
                std::max(metrics.max_funnel_occupancy, traj.diagnostics[j][occ]);
        }
        if (theta >= 0) max_theta_norm = std::max(max_theta_norm, traj.diagnostics[j][theta]);
        metrics.sup_u = std::max(metrics.sup_u, traj.inputs[j].norm());
        if (j > 0) metrics.tv_u += (traj.inputs[j] - traj.inputs[j - 1]).norm();
    }
    if (theta >= 0 && theta_hat) metrics.max_theta_ratio = max_theta_norm / *theta_hat;

    if (traj.completed()) {
        const std::size_t last = traj.times.size() - 1;
        const Vec e_final =
            traj.states[last].segment(0, layout.m) - y_ref.eval(traj.times[last]);
        metrics.final_abs_error = e_final.norm();
    }
    return metrics;
}

}  // namespace

RunResult run_scenario(const Scenario& s, bool allow_infeasible) {
    const PlantModel plant = s.plant_model();

    if (const auto* filter = std::get_if<FilterControllerSpec>(&s.controller)) {
        FilterControllerParams params(filter->theta_hat, filter->xi0, s.funnel, s.reference);
        RunResult result{s.label,
                         ControllerKind::kFilterFunnel,
                         false,
                         check_feasibility(params, plant.y0, 0.0),
                         Trajectory{},
                         Metrics{},
                         StateLayout{},
                         filter->theta_hat,
                         s.funnel,
                         s.reference};
        if (!result.feasibility->feasible && !allow_infeasible) {
            result.refused = true;
            return result;
        }
        ClosedLoop loop = build_filter_closed_loop(plant, params, s.sim);
        result.layout = loop.layout;
        result.trajectory = integrate(loop.problem);
        result.metrics = compute_metrics(result.trajectory, s.reference, loop.layout,
                                         filter->theta_hat);
        return result;
    }

    const auto& cmp = std::get<ComparisonControllerSpec>(s.controller);
    ComparisonControllerParams params(cmp.p1, cmp.p2, cmp.q1, cmp.q2, cmp.Gamma_tilde, cmp.phi0,
                                      cmp.phi1, cmp.phi2, cmp.z1_0, cmp.z2_0, s.reference);
    RunResult result{s.label,
                     ControllerKind::kComparison,
                     false,
                     std::nullopt,
                     Trajectory{},
                     Metrics{},
                     StateLayout{},
                     0.0,
                     s.funnel,
                     s.reference};
    ClosedLoop loop = build_comparison_closed_loop(plant, params, s.funnel, s.sim);
    result.layout = loop.layout;
    result.trajectory = integrate(loop.problem);
    result.metrics = compute_metrics(result.trajectory, s.reference, loop.layout, std::nullopt);
    return result;
}

double output_sup_distance(const RunResult& a, const RunResult& b) {
    const std::size_t n = std::min(a.trajectory.times.size(), b.trajectory.times.size());
    double sup = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Vec ya = a.trajectory.states[j].segment(0, a.layout.m);
        const Vec yb = b.trajectory.states[j].segment(0, b.layout.m);
        sup = std::max(sup, (ya - yb).norm());
    }
    return sup;
}

SweepTable sweep(const Scenario& s, const std::string& parameter_path,
                 const std::vector<double>& values) {
    SweepTable table;
    table.parameter = parameter_path;

    std::optional<RunResult> first_run;  // the first value's run, the distance base
    for (const double value : values) {
        SweepRow row;
        row.value = value;
        const bool is_first_value = table.rows.empty();
        try {
            const Scenario variant = with_parameter(s, parameter_path, value);
            RunResult run = run_scenario(variant);
            if (run.refused) {
                row.status = "refused";
                row.note = run.feasibility ? run.feasibility->violated_hypothesis : "";
            } else {
                row.status = status_name(run.trajectory.termination.status);
                row.metrics = run.metrics;
                if (!run.trajectory.termination.reason.empty()) {
                    row.note = run.trajectory.termination.reason;
                }
                if (is_first_value) {
                    row.sup_distance_to_first = 0.0;
                    first_run = std::move(run);
                } else if (first_run) {
                    row.sup_distance_to_first = output_sup_distance(*first_run, run);
                }
            }
        } catch (const std::exception& e) {
            row.status = "error";
            row.note = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

CompareResult compare(const Scenario& a, const Scenario& b) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("compare: scenarios must share the output dimension m");
    }
    if (!(a.reference == b.reference)) {
        throw std::invalid_argument("compare: scenarios must share the reference signal");
    }
    if (!(a.plant == b.plant)) {
        throw std::invalid_argument("compare: scenarios must share the plant");
    }
    if (a.sim.t_end != b.sim.t_end) {
        throw std::invalid_argument("compare: scenarios must share the time span");
    }

    CompareResult result{run_scenario(a), run_scenario(b), false, 0.0, 0.0};

    const auto occupancy_under = [&](const RunResult& run) {
        double max_occ = 0.0;
        for (std::size_t j = 0; j < run.trajectory.times.size(); ++j) {
            const double t = run.trajectory.times[j];
            const Vec e = run.trajectory.states[j].segment(0, run.layout.m) -
                          run.reference.eval(t);
            max_occ = std::max(max_occ, a.funnel.eval(t) * e.norm());
        }
        return max_occ;
    };
    result.max_occupancy_a = occupancy_under(result.a);
    result.max_occupancy_b = occupancy_under(result.b);
    result.shared_funnel_ok = result.a.completed() && result.b.completed() &&
                              result.max_occupancy_a < 1.0 && result.max_occupancy_b < 1.0;
    return result;
}

}  // namespace fsim
