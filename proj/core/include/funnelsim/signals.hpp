#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "funnelsim/types.hpp"

namespace fsim {

enum class FunnelFamily {
    kConstant,
    kSaturatingQuadratic,  // kappa*(1-(t/T-1)^2) for t<=T, kappa afterwards
    kLogistic,             // 1/(exp(-t)+1)
    kComposite,            // reciprocal sum of two components
    kCustom,               // arbitrary callables, not loadable from scenario files
};

/// Performance function phi. The funnel radius at time t is 1/phi(t);
/// phi(t) = 0 means an infinite radius. Immutable and cheap to copy, so a
/// single instance can be shared across concurrent runs.
class FunnelFunction {
public:
    static FunnelFunction constant(double value);
    static FunnelFunction saturating_quadratic(double kappa, double t_sat);
    static FunnelFunction logistic();
    static FunnelFunction composite(FunnelFunction a, FunnelFunction b);
    static FunnelFunction custom(std::function<double(double)> eval,
                                 std::function<double(double)> deriv);

    /// phi(t). Throws std::domain_error for t < 0.
    double eval(double t) const;
    /// d/dt phi(t); right-hand derivative at family breakpoints.
    double deriv(double t) const;

    FunnelFamily family() const;
    double value() const;   // kConstant
    double kappa() const;   // kSaturatingQuadratic
    double t_sat() const;   // kSaturatingQuadratic
    FunnelFunction child_a() const;  // kComposite
    FunnelFunction child_b() const;  // kComposite

    /// Structural equality on family and parameters; custom instances
    /// compare by identity.
    bool operator==(const FunnelFunction& other) const;

private:
    struct Impl;
    explicit FunnelFunction(std::shared_ptr<const Impl> impl);
    std::shared_ptr<const Impl> impl_;
};

/// (phi(t), phi_dot(t)) in one call.
std::pair<double, double> funnel_eval(const FunnelFunction& phi, double t);

/// Reciprocal-sum composite (phi_a^-1 + phi_b^-1)^-1, with value 0 wherever
/// either component is 0 (infinite-radius limit).
FunnelFunction funnel_composite(const FunnelFunction& phi_a, const FunnelFunction& phi_b);

enum class Verdict { kPass, kWarn, kFail };

/// Sampled check of the funnel-function admissibility conditions
/// (bounded, bounded derivative, positive infimum).
struct ValidationReport {
    Verdict verdict = Verdict::kPass;
    double inf_value = 0.0;
    double sup_value = 0.0;
    double sup_abs_deriv = 0.0;
    std::string notes;
};

/// Samples phi on [0, horizon] with the given grid step and reports
/// inf/sup of phi and sup of |phi_dot| together with a verdict:
///   pass - positive infimum on the grid, no decay toward zero
///   warn - phi = 0 only at isolated samples (run permitted, radius infinite there)
///   fail - non-finite or negative values, zeros on an interval, or
///          monotone decay toward zero at the horizon
ValidationReport validate_class_G(const FunnelFunction& phi, double horizon, double grid_step);

struct SinusoidTerm {
    double amplitude = 0.0;
    double omega = 0.0;
    double phase = 0.0;
    bool operator==(const SinusoidTerm&) const = default;
};

enum class ReferenceFamily { kConstant, kScaledCosine, kSinusoidSum };

/// Reference trajectory y_ref with analytic first and second derivatives.
class ReferenceSignal {
public:
    static ReferenceSignal constant(Vec values);
    /// y_i(t) = amplitude_i * cos(omega * t)
    static ReferenceSignal scaled_cosine(Vec amplitude, double omega);
    /// y_i(t) = sum_j a_ij * cos(w_ij * t + p_ij), one term list per component
    static ReferenceSignal sinusoid_sum(std::vector<std::vector<SinusoidTerm>> components);

    int dim() const;
    /// Throws std::domain_error for t < 0.
    Vec eval(double t) const;
    Vec deriv(double t) const;
    Vec second_deriv(double t) const;

    ReferenceFamily family() const;
    const Vec& values() const;      // kConstant
    const Vec& amplitude() const;   // kScaledCosine
    double omega() const;           // kScaledCosine
    const std::vector<std::vector<SinusoidTerm>>& components() const;  // kSinusoidSum

    bool operator==(const ReferenceSignal& other) const;

private:
    struct Impl;
    explicit ReferenceSignal(std::shared_ptr<const Impl> impl);
    std::shared_ptr<const Impl> impl_;
};

/// (y_ref(t), y_ref_dot(t)) in one call.
std::pair<Vec, Vec> reference_eval(const ReferenceSignal& r, double t);

}  // namespace fsim
