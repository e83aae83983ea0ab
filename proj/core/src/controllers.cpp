#include "funnelsim/controllers.hpp"

#include <Eigen/LU>
#include <cmath>

namespace fsim {

namespace {

void set_reason(std::string* out, const char* reason) {
    if (out != nullptr) *out = reason;
}

}  // namespace

// ---------------------------------------------------------------------------
// Filter controller
// ---------------------------------------------------------------------------

FilterControllerParams::FilterControllerParams(double theta_hat_in, Vec xi0_in,
                                               FunnelFunction phi_in, ReferenceSignal y_ref_in)
    : theta_hat(theta_hat_in),
      xi0(std::move(xi0_in)),
      phi(std::move(phi_in)),
      y_ref(std::move(y_ref_in)) {
    if (!(theta_hat > 0.0) || !std::isfinite(theta_hat)) {
        throw std::invalid_argument("FilterControllerParams: theta_hat must be positive");
    }
    if (xi0.size() != y_ref.dim()) {
        throw std::invalid_argument("FilterControllerParams: xi0 dimension must match y_ref");
    }
}

FeasibilityReport check_feasibility(const FilterControllerParams& params, const Vec& y0,
                                    double t0) {
    FeasibilityReport report;
    const double phi0 = params.phi.eval(t0);
    report.e0 = y0 - params.y_ref.eval(t0);
    report.g0 = phi0 * phi0 * report.e0.squaredNorm();

    if (!(report.g0 < 1.0)) {
        report.feasible = false;
        report.violated_hypothesis =
            "initial-error hypothesis violated: phi(t0)^2 * ||y(t0) - y_ref(t0)||^2 "
            "must be < 1";
        return report;
    }

    Vec theta0 = params.xi0 + report.e0 / (1.0 - report.g0);
    const double theta_norm = theta0.norm();
    report.theta0 = std::move(theta0);

    if (!(theta_norm < params.theta_hat)) {
        report.feasible = false;
        report.violated_hypothesis =
            "filter-initialization hypothesis violated: ||xi0 + e(t0)/(1 - "
            "phi(t0)^2*||e(t0)||^2)|| must be < theta_hat";
        return report;
    }

    report.feasible = true;
    return report;
}

std::optional<FilterControlOutput> filter_control_output(const FilterControllerParams& params,
                                                         const Vec& xi, const Vec& y, double t,
                                                         std::string* barrier_reason) {
    const double phi = params.phi.eval(t);
    FilterControlOutput out;
    Vec e = y - params.y_ref.eval(t);
    const double e_sq = e.squaredNorm();
    const double gate = phi * phi * e_sq;
    if (!(gate < 1.0)) {  // also catches non-finite states
        set_reason(barrier_reason, "funnel barrier: phi(t)^2*||e(t)||^2 >= 1");
        return std::nullopt;
    }
    const double denom = 1.0 - gate;

    out.theta = xi + e / denom;
    const double theta_sq = out.theta.squaredNorm();
    const double theta_gap = params.theta_hat * params.theta_hat - theta_sq;
    if (!(theta_gap > 0.0)) {
        set_reason(barrier_reason, "theta barrier: ||theta(t)|| >= theta_hat");
        return std::nullopt;
    }

    out.u = -out.theta / theta_gap;
    out.xi_star = -e / denom;
    out.funnel_occupancy = phi * std::sqrt(e_sq);
    out.theta_ratio = std::sqrt(theta_sq) / params.theta_hat;
    return out;
}

Vec filter_state_deriv(const Vec& xi, const Vec& u) { return u - xi; }

// ---------------------------------------------------------------------------
// Comparison controller
// ---------------------------------------------------------------------------

ComparisonControllerParams::ComparisonControllerParams(double p1_in, double p2_in, double q1_in,
                                                       double q2_in, Mat Gamma_tilde_in,
                                                       FunnelFunction phi0_in,
                                                       FunnelFunction phi1_in,
                                                       FunnelFunction phi2_in, Vec z1_0_in,
                                                       Vec z2_0_in, ReferenceSignal y_ref_in)
    : p1(p1_in),
      p2(p2_in),
      q1(q1_in),
      q2(q2_in),
      Gamma_tilde(std::move(Gamma_tilde_in)),
      phi0(std::move(phi0_in)),
      phi1(std::move(phi1_in)),
      phi2(std::move(phi2_in)),
      z1_0(std::move(z1_0_in)),
      z2_0(std::move(z2_0_in)),
      y_ref(std::move(y_ref_in)) {
    const int m = y_ref.dim();
    if (Gamma_tilde.rows() != m || Gamma_tilde.cols() != m) {
        throw std::invalid_argument("ComparisonControllerParams: Gamma_tilde must be m x m");
    }
    if (z1_0.size() != m || z2_0.size() != m) {
        throw std::invalid_argument(
            "ComparisonControllerParams: z1_0 and z2_0 must have dimension m");
    }
    Eigen::FullPivLU<Mat> lu(Gamma_tilde);
    if (!lu.isInvertible()) {
        throw std::invalid_argument("ComparisonControllerParams: Gamma_tilde must be invertible");
    }
}

namespace {

/// k = 1/(1 - phi^2 ||v||^2) with a barrier when the denominator is <= 0.
std::optional<double> funnel_gain(const FunnelFunction& phi, const Vec& v, double t) {
    const double p = phi.eval(t);
    const double denom = 1.0 - p * p * v.squaredNorm();
    if (!(denom > 0.0)) return std::nullopt;
    return 1.0 / denom;
}

}  // namespace

std::optional<ComparisonControlOutput> comparison_control_output(
    const ComparisonControllerParams& params, const Vec& z1, const Vec& z2, const Vec& y,
    double t, std::string* barrier_reason) {
    ComparisonControlOutput out;

    const Vec innovation = y - z1;
    const auto k2 = funnel_gain(params.phi2, innovation, t);
    if (!k2) {
        set_reason(barrier_reason, "comparison gain barrier: 1 - phi2^2*||y - z1||^2 <= 0");
        return std::nullopt;
    }
    out.k2 = *k2;
    out.z1_dot = z2 + (params.q1 + params.p1 * out.k2) * innovation;

    out.e0 = z1 - params.y_ref.eval(t);
    const auto k0 = funnel_gain(params.phi0, out.e0, t);
    if (!k0) {
        set_reason(barrier_reason, "comparison gain barrier: 1 - phi0^2*||e0||^2 <= 0");
        return std::nullopt;
    }
    out.k0 = *k0;

    const Vec e0_dot = out.z1_dot - params.y_ref.deriv(t);
    out.e1 = e0_dot + out.k0 * out.e0;
    const auto k1 = funnel_gain(params.phi1, out.e1, t);
    if (!k1) {
        set_reason(barrier_reason, "comparison gain barrier: 1 - phi1^2*||e1||^2 <= 0");
        return std::nullopt;
    }
    out.k1 = *k1;

    out.u = -out.k1 * out.e1;
    return out;
}

std::optional<ComparisonStateDeriv> comparison_state_deriv(
    const ComparisonControllerParams& params, const Vec& z1, const Vec& z2, const Vec& y,
    const Vec& u, double t, std::string* barrier_reason) {
    const Vec innovation = y - z1;
    const auto k2 = funnel_gain(params.phi2, innovation, t);
    if (!k2) {
        set_reason(barrier_reason, "comparison gain barrier: 1 - phi2^2*||y - z1||^2 <= 0");
        return std::nullopt;
    }
    ComparisonStateDeriv d;
    d.z1_dot = z2 + (params.q1 + params.p1 * (*k2)) * innovation;
    d.z2_dot = (params.q2 + params.p2 * (*k2)) * innovation + params.Gamma_tilde * u;
    return d;
}

}  // namespace fsim
