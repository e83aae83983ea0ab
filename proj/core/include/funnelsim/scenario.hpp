#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "funnelsim/plant.hpp"
#include "funnelsim/signals.hpp"
#include "funnelsim/types.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Scenario: the validated, typed form of a scenario file. Strict schema:
// unknown keys are rejected, dimensions must agree across plant, controller
// and reference, and all family parameters are range-checked at load time.
// ---------------------------------------------------------------------------

struct BenchmarkPlantSpec {
    double a = 0.0;
    double b = 1.0;
    Vec y0 = Vec::Zero(1);
    Vec ydot0 = Vec::Zero(1);
    bool operator==(const BenchmarkPlantSpec& other) const {
        return a == other.a && b == other.b && y0 == other.y0 && ydot0 == other.ydot0;
    }
};

struct GeneralPlantSpec {
    PlantModel model;
    bool operator==(const GeneralPlantSpec& other) const { return model == other.model; }
};

using PlantSpec = std::variant<BenchmarkPlantSpec, GeneralPlantSpec>;

struct FilterControllerSpec {
    double theta_hat = 0.1;
    Vec xi0 = Vec::Zero(1);
    bool operator==(const FilterControllerSpec& other) const {
        return theta_hat == other.theta_hat && xi0 == other.xi0;
    }
};

struct ComparisonControllerSpec {
    double p1 = 0.0, p2 = 0.0, q1 = 0.0, q2 = 0.0;
    Mat Gamma_tilde;
    FunnelFunction phi0, phi1, phi2;
    Vec z1_0, z2_0;
    bool operator==(const ComparisonControllerSpec& other) const;
};

using ControllerSpec = std::variant<FilterControllerSpec, ComparisonControllerSpec>;

struct SimSpec {
    double t_end = 20.0;
    double rel_tol = 1e-8;
    double abs_tol = 1e-6;
    double output_dt = 1e-2;
    bool operator==(const SimSpec&) const = default;
};

struct Scenario {
    std::string label;
    PlantSpec plant;
    ControllerSpec controller;
    FunnelFunction funnel;  // the filter controller's phi / the reporting funnel
    ReferenceSignal reference;
    SimSpec sim;

    int dim() const;
    /// Materializes the plant (benchmark specs expand to the pendulum model
    /// with their initial state applied).
    PlantModel plant_model() const;

    bool operator==(const Scenario& other) const;
};

/// Loads and validates a scenario file. Throws ScenarioParseError (malformed
/// JSON, with position info) or ScenarioValidationError (schema violation,
/// naming the offending field).
Scenario load_scenario(const std::filesystem::path& path);

/// Same, from an in-memory document.
Scenario scenario_from_json_text(const std::string& text,
                                 const std::string& origin = "<string>");

/// Canonical JSON form; load(scenario_to_json_text(s)) == s. Throws for
/// scenarios holding custom (non-serializable) funnel functions.
std::string scenario_to_json_text(const Scenario& s);

void save_scenario(const Scenario& s, const std::filesystem::path& path);

/// Returns a copy of the scenario with the scalar at the dotted key path
/// (e.g. "controller.theta_hat" or "plant.a") replaced, revalidating the
/// result. Throws ScenarioValidationError if the path does not resolve to a
/// scalar.
Scenario with_parameter(const Scenario& s, const std::string& dotted_path, double value);

}  // namespace fsim
