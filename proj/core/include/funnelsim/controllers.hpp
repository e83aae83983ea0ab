#pragma once

#include <optional>
#include <string>

#include "funnelsim/signals.hpp"
#include "funnelsim/types.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Filter-based funnel controller
//
//   e(t)     = y(t) - y_ref(t)
//   xi_dot   = -xi + u
//   theta    = xi + e / (1 - phi^2 ||e||^2)
//   u        = -theta / (theta_hat^2 - ||theta||^2)
//
// The controller is derivative-free: it reads neither y_dot nor y_ref_dot.
// ---------------------------------------------------------------------------

struct FilterControllerParams {
    double theta_hat;   // constant funnel radius for theta, > 0
    Vec xi0;            // filter initial value
    FunnelFunction phi;
    ReferenceSignal y_ref;

    FilterControllerParams(double theta_hat, Vec xi0, FunnelFunction phi, ReferenceSignal y_ref);
    int dim() const { return static_cast<int>(xi0.size()); }
};

/// Outcome of checking the closed-loop feasibility hypotheses at start time:
/// the initial error must lie strictly inside the funnel and the initial
/// theta strictly inside the theta_hat ball.
struct FeasibilityReport {
    bool feasible = false;
    Vec e0;
    double g0 = 0.0;                  // phi(t0)^2 ||e0||^2
    std::optional<Vec> theta0;        // defined when g0 < 1
    std::string violated_hypothesis;  // empty when feasible
};

FeasibilityReport check_feasibility(const FilterControllerParams& params, const Vec& y0,
                                    double t0);

struct FilterControlOutput {
    Vec u;
    Vec theta;
    Vec xi_star;                    // -e / (1 - phi^2 ||e||^2)
    double funnel_occupancy = 0.0;  // phi ||e||
    double theta_ratio = 0.0;       // ||theta|| / theta_hat
};

/// Control law evaluation. Returns nullopt (a barrier signal for the
/// integrator, not an error) when phi^2||e||^2 >= 1 or ||theta|| >= theta_hat;
/// the optional reason output names the violated barrier.
std::optional<FilterControlOutput> filter_control_output(const FilterControllerParams& params,
                                                         const Vec& xi, const Vec& y, double t,
                                                         std::string* barrier_reason = nullptr);

/// Filter dynamics xi_dot = -xi + u.
Vec filter_state_deriv(const Vec& xi, const Vec& u);

// ---------------------------------------------------------------------------
// Observer-based comparison controller
//
//   z1_dot = z2 + (q1 + p1 k2)(y - z1)
//   z2_dot = (q2 + p2 k2)(y - z1) + Gamma_tilde u
//   e0 = z1 - y_ref,  e1 = e0_dot + k0 e0,  u = -k1 e1
//   k0 = 1/(1 - phi0^2||e0||^2), k1 = 1/(1 - phi1^2||e1||^2),
//   k2 = 1/(1 - phi2^2||y - z1||^2)
//
// e0_dot is formed algebraically as z1_dot - y_ref_dot; no numerical
// differentiation of measurements is involved.
// ---------------------------------------------------------------------------

struct ComparisonControllerParams {
    double p1, p2, q1, q2;
    Mat Gamma_tilde;  // invertible, checked at construction
    FunnelFunction phi0, phi1, phi2;
    Vec z1_0, z2_0;
    ReferenceSignal y_ref;

    ComparisonControllerParams(double p1, double p2, double q1, double q2, Mat Gamma_tilde,
                               FunnelFunction phi0, FunnelFunction phi1, FunnelFunction phi2,
                               Vec z1_0, Vec z2_0, ReferenceSignal y_ref);
    int dim() const { return static_cast<int>(z1_0.size()); }
};

struct ComparisonControlOutput {
    Vec u;
    Vec e0, e1;
    Vec z1_dot;
    double k0 = 0.0, k1 = 0.0, k2 = 0.0;
};

/// Returns nullopt when any gain denominator is <= 0 (barrier signal).
std::optional<ComparisonControlOutput> comparison_control_output(
    const ComparisonControllerParams& params, const Vec& z1, const Vec& z2, const Vec& y,
    double t, std::string* barrier_reason = nullptr);

struct ComparisonStateDeriv {
    Vec z1_dot, z2_dot;
};

/// Auxiliary-variable dynamics for a given input u. Recomputes k2; returns
/// nullopt on the same barrier condition.
std::optional<ComparisonStateDeriv> comparison_state_deriv(
    const ComparisonControllerParams& params, const Vec& z1, const Vec& z2, const Vec& y,
    const Vec& u, double t, std::string* barrier_reason = nullptr);

}  // namespace fsim
