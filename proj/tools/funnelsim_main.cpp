// funnelsim command-line front end.
//
// Subcommands:
//   run <scenario> [--out csv] [--svg path] [--allow-infeasible]
//   check <scenario>
//   sweep <scenario> --param <path> --values v1,v2,...
//   compare <a> <b> [--svg path] [--out csv]
//
// Exit codes: 0 success, 2 feasibility refusal, 3 barrier breach or step
// underflow, 4 configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "funnelsim/csv_io.hpp"
#include "funnelsim/harness.hpp"
#include "funnelsim/scenario.hpp"
#include "funnelsim/svg_plot.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRefused = 2;
constexpr int kExitBreach = 3;
constexpr int kExitConfig = 4;

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void print_metrics(const fsim::Metrics& m, const std::string& indent) {
    std::cout << indent << "max_funnel_occupancy = " << fmt6(m.max_funnel_occupancy) << "\n";
    if (m.max_theta_ratio) {
        std::cout << indent << "max_theta_ratio      = " << fmt6(*m.max_theta_ratio) << "\n";
    }
    std::cout << indent << "sup_u                = " << fmt6(m.sup_u) << "\n";
    std::cout << indent << "tv_u                 = " << fmt6(m.tv_u) << "\n";
    if (m.final_abs_error) {
        std::cout << indent << "final_abs_error      = " << fmt6(*m.final_abs_error) << "\n";
    }
}

void print_feasibility(const fsim::FeasibilityReport& report) {
    std::cout << "feasibility: " << (report.feasible ? "feasible" : "INFEASIBLE") << "\n";
    std::cout << "  e(t0)           = [";
    for (Eigen::Index i = 0; i < report.e0.size(); ++i) {
        std::cout << (i > 0 ? ", " : "") << fmt6(report.e0[i]);
    }
    std::cout << "]\n";
    std::cout << "  phi^2||e||^2    = " << fmt6(report.g0) << "\n";
    if (report.theta0) {
        std::cout << "  ||theta(t0)||   = " << fmt6(report.theta0->norm()) << "\n";
    }
    if (!report.feasible) {
        std::cout << "  violated: " << report.violated_hypothesis << "\n";
    }
}

int status_exit_code(const fsim::RunResult& result) {
    if (result.refused) return kExitRefused;
    return result.completed() ? kExitOk : kExitBreach;
}

void print_run_summary(const fsim::RunResult& result) {
    const auto& term = result.trajectory.termination;
    std::cout << "status: " << fsim::status_name(term.status);
    if (term.status != fsim::RunStatus::kCompleted) {
        std::cout << " at t=" << fmt6(term.time);
        if (!term.reason.empty()) std::cout << " (" << term.reason << ")";
    }
    std::cout << "\nsamples: " << result.trajectory.times.size()
              << ", accepted steps: " << result.trajectory.accepted_steps
              << ", rejected (error/barrier): " << result.trajectory.rejected_error_steps
              << "/" << result.trajectory.rejected_barrier_steps << "\n";
    print_metrics(result.metrics, "  ");
}

std::vector<double> parse_values(const std::string& list) {
    std::vector<double> values;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("bad numeric value '" + item + "'");
        values.push_back(v);
    }
    return values;
}

void print_funnel_admissibility(const fsim::Scenario& scenario) {
    const auto report =
        fsim::validate_class_G(scenario.funnel, scenario.sim.t_end, scenario.sim.output_dt);
    const char* verdict = report.verdict == fsim::Verdict::kPass   ? "pass"
                          : report.verdict == fsim::Verdict::kWarn ? "warn"
                                                                   : "FAIL";
    std::cout << "funnel admissibility: " << verdict << " (inf=" << fmt6(report.inf_value)
              << ", sup=" << fmt6(report.sup_value)
              << ", sup|phi_dot|=" << fmt6(report.sup_abs_deriv) << ")";
    if (!report.notes.empty()) std::cout << " -- " << report.notes;
    std::cout << "\n";
}

int cmd_run(const std::string& scenario_path, const std::string& csv_path,
            const std::string& svg_path, bool allow_infeasible) {
    const fsim::Scenario scenario = fsim::load_scenario(scenario_path);
    print_funnel_admissibility(scenario);
    const fsim::RunResult result = fsim::run_scenario(scenario, allow_infeasible);

    if (result.feasibility) print_feasibility(*result.feasibility);
    if (result.refused) {
        std::cout << "run refused (pass --allow-infeasible to integrate anyway)\n";
        return kExitRefused;
    }

    print_run_summary(result);
    if (!csv_path.empty()) {
        fsim::write_csv(result, csv_path);
        std::cout << "wrote " << csv_path << "\n";
    }
    if (!svg_path.empty()) {
        fsim::write_svg(result, svg_path);
        std::cout << "wrote " << svg_path << "\n";
    }
    return status_exit_code(result);
}

int cmd_check(const std::string& scenario_path) {
    const fsim::Scenario scenario = fsim::load_scenario(scenario_path);
    print_funnel_admissibility(scenario);
    if (const auto* filter = std::get_if<fsim::FilterControllerSpec>(&scenario.controller)) {
        fsim::FilterControllerParams params(filter->theta_hat, filter->xi0, scenario.funnel,
                                            scenario.reference);
        const auto report = fsim::check_feasibility(params, scenario.plant_model().y0, 0.0);
        print_feasibility(report);
        return report.feasible ? kExitOk : kExitRefused;
    }
    // The comparison controller has no filter hypotheses; report the initial
    // gain denominators instead.
    const auto& cmp = std::get<fsim::ComparisonControllerSpec>(scenario.controller);
    const fsim::PlantModel plant = scenario.plant_model();
    const fsim::Vec e0 = cmp.z1_0 - scenario.reference.eval(0.0);
    const fsim::Vec innovation = plant.y0 - cmp.z1_0;
    const double d2 = 1.0 - std::pow(cmp.phi2.eval(0.0), 2) * innovation.squaredNorm();
    const double d0 = 1.0 - std::pow(cmp.phi0.eval(0.0), 2) * e0.squaredNorm();
    std::cout << "comparison controller: initial gain denominators\n"
              << "  1 - phi2^2||y0 - z1_0||^2 = " << fmt6(d2) << "\n"
              << "  1 - phi0^2||e0||^2        = " << fmt6(d0) << "\n";
    const bool ok = d2 > 0.0 && d0 > 0.0;
    std::cout << (ok ? "initial gains well defined\n" : "initial gain barrier violated\n");
    return ok ? kExitOk : kExitRefused;
}

int cmd_sweep(const std::string& scenario_path, const std::string& param,
              const std::string& values_list) {
    const fsim::Scenario scenario = fsim::load_scenario(scenario_path);
    const std::vector<double> values = parse_values(values_list);
    const fsim::SweepTable table = fsim::sweep(scenario, param, values);

    std::cout << "sweep over " << table.parameter << "\n";
    std::printf("%12s  %-14s %12s %12s %12s %12s %14s\n", "value", "status", "max_occ",
                "theta_ratio", "sup_u", "tv_u", "dist_to_first");
    bool any_refused = false, any_failed = false;
    for (const auto& row : table.rows) {
        std::string occ = "-", ratio = "-", sup = "-", tv = "-", dist = "-";
        if (row.metrics) {
            occ = fmt6(row.metrics->max_funnel_occupancy);
            if (row.metrics->max_theta_ratio) ratio = fmt6(*row.metrics->max_theta_ratio);
            sup = fmt6(row.metrics->sup_u);
            tv = fmt6(row.metrics->tv_u);
        }
        if (row.sup_distance_to_first) dist = fmt6(*row.sup_distance_to_first);
        std::printf("%12s  %-14s %12s %12s %12s %12s %14s\n", fmt6(row.value).c_str(),
                    row.status.c_str(), occ.c_str(), ratio.c_str(), sup.c_str(), tv.c_str(),
                    dist.c_str());
        if (!row.note.empty()) std::printf("%14s note: %s\n", "", row.note.c_str());
        if (row.status == "refused") any_refused = true;
        if (row.status != "completed" && row.status != "refused") any_failed = true;
    }
    if (any_failed) return kExitBreach;
    if (any_refused) return kExitRefused;
    return kExitOk;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& svg_path, const std::string& csv_path) {
    const fsim::Scenario a = fsim::load_scenario(path_a);
    const fsim::Scenario b = fsim::load_scenario(path_b);
    const fsim::CompareResult result = fsim::compare(a, b);

    for (const auto* side : {&result.a, &result.b}) {
        std::cout << "--- " << (side->label.empty() ? "(unlabeled)" : side->label) << " ---\n";
        if (side->refused) {
            std::cout << "refused: "
                      << (side->feasibility ? side->feasibility->violated_hypothesis : "") << "\n";
            continue;
        }
        print_run_summary(*side);
    }
    std::cout << "shared-funnel verdict: "
              << (result.shared_funnel_ok ? "both errors inside the common funnel"
                                          : "VIOLATED or incomplete")
              << " (max occupancy a=" << fmt6(result.max_occupancy_a)
              << ", b=" << fmt6(result.max_occupancy_b) << ")\n";

    if (result.a.refused || result.b.refused) return kExitRefused;
    if (!csv_path.empty()) {
        fsim::write_compare_csv(result, csv_path);
        std::cout << "wrote " << csv_path << "\n";
    }
    if (!svg_path.empty()) {
        fsim::write_svg_pair(result.a, result.b, svg_path);
        std::cout << "wrote " << svg_path << "\n";
    }
    if (!result.a.completed() || !result.b.completed() || !result.shared_funnel_ok) {
        return kExitBreach;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"funnel-controller simulation harness"};
    app.require_subcommand(1);

    std::string scenario_path, scenario_b_path, csv_path, svg_path, param, values_list;
    bool allow_infeasible = false;

    auto* run = app.add_subcommand("run", "simulate one scenario");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--out", csv_path, "CSV output path");
    run->add_option("--svg", svg_path, "SVG plot path");
    run->add_flag("--allow-infeasible", allow_infeasible,
                  "integrate even when the feasibility check fails");

    auto* check = app.add_subcommand("check", "feasibility check only");
    check->add_option("scenario", scenario_path, "scenario file")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "run a scenario for several parameter values");
    sweep_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    sweep_cmd->add_option("--param", param, "dotted parameter path, e.g. controller.theta_hat")
        ->required();
    sweep_cmd->add_option("--values", values_list, "comma-separated values")->required();

    auto* compare_cmd = app.add_subcommand("compare", "run two scenarios side by side");
    compare_cmd->add_option("a", scenario_path, "first scenario")->required();
    compare_cmd->add_option("b", scenario_b_path, "second scenario")->required();
    compare_cmd->add_option("--svg", svg_path, "paired SVG plot path");
    compare_cmd->add_option("--out", csv_path, "paired CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(scenario_path, csv_path, svg_path, allow_infeasible);
        if (check->parsed()) return cmd_check(scenario_path);
        if (sweep_cmd->parsed()) return cmd_sweep(scenario_path, param, values_list);
        if (compare_cmd->parsed()) {
            return cmd_compare(scenario_path, scenario_b_path, svg_path, csv_path);
        }
    } catch (const fsim::ScenarioParseError& e) {
        std::cerr << "scenario parse error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fsim::ScenarioValidationError& e) {
        std::cerr << "scenario validation error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
