#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "funnelsim/types.hpp"

namespace fsim {

/// Right-hand side callback. Fills dxdt and returns true, or returns false
/// when (t, x) lies outside the admissible set (a barrier signal, not an
/// error), optionally naming the barrier. The callback must be deterministic
/// in (t, x).
using OdeRhs =
    std::function<bool(double t, const Vec& x, Vec& dxdt, std::string* barrier_reason)>;

/// Per-sample observer used to fill the input and diagnostic columns of the
/// output grid. Returning false rejects the enclosing step (barrier at an
/// output sample), which keeps accepted samples inside the admissible set.
using SampleMap = std::function<bool(double t, const Vec& x, Vec& input, Vec& diagnostics,
                                     std::string* barrier_reason)>;

/// Invoked once per accepted step with the new step endpoint.
using AcceptHook = std::function<void(double t, const Vec& x)>;

struct OdeProblem {
    OdeRhs rhs;
    Vec x0;
    double t0 = 0.0;
    double t_end = 1.0;
    double rel_tol = 1e-8;
    double abs_tol = 1e-6;
    double output_dt = 1e-2;
    /// Steps are fatal below this; defaults to 1e-12 * (t_end - t0) when 0.
    double min_step = 0.0;
    /// Upper step bound (e.g. the delay length of a delay operator).
    std::optional<double> max_step;

    SampleMap sample_map;  // optional
    AcceptHook accept_hook;  // optional
    std::vector<std::string> diagnostic_names;
    int input_dim = 0;

    /// Throws std::invalid_argument on malformed fields.
    void validate() const;
};

enum class RunStatus { kCompleted, kBarrierBreach, kStepUnderflow };

struct TerminationInfo {
    RunStatus status = RunStatus::kCompleted;
    double time = 0.0;   // t_end when completed, else breach/underflow time
    std::string reason;  // barrier description for kBarrierBreach
};

/// Dense-sampled result of one integration. Samples lie on the uniform
/// output grid, are strictly increasing in time, start at t0, end at t_end
/// for completed runs, and never contain non-finite numbers.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> inputs;       // filled when the problem has a sample_map
    std::vector<Vec> diagnostics;  // aligned with diagnostic_names
    std::vector<std::string> diagnostic_names;
    TerminationInfo termination;

    long accepted_steps = 0;
    long rejected_error_steps = 0;
    long rejected_barrier_steps = 0;
    long rhs_evaluations = 0;

    bool completed() const { return termination.status == RunStatus::kCompleted; }
};

/// One accepted Dormand-Prince step together with its quartic dense-output
/// coefficients (Hermite data at both endpoints plus a fifth condition from
/// the stage derivatives).
struct StepRecord {
    double t = 0.0;
    double h = 0.0;
    Vec r1, r2, r3, r4, r5;
};

/// Evaluates the dense interpolant at t_query in [t, t + h]: exact at both
/// endpoints in state and derivative, O(h^4) accurate inside. Throws
/// std::domain_error outside the step.
Vec dense_eval(const StepRecord& rec, double t_query);

struct Rk45StepResult {
    bool barrier = false;
    std::string barrier_reason;
    Vec x_next;                   // 5th-order solution
    double error_estimate = 0.0;  // weighted RMS of the embedded 4(5) difference
    StepRecord dense;
    Vec k_last;  // stage-7 derivative, reusable as k1 of the next step (FSAL)
};

/// One Dormand-Prince 4(5) step from (t, x) with step size h > 0 under the
/// given tolerances. A cached first-stage derivative may be supplied.
/// Propagates a barrier signal if any stage evaluation hits one.
Rk45StepResult rk45_step(const OdeRhs& rhs, double t, const Vec& x, double h, double abs_tol,
                         double rel_tol, const Vec* k1 = nullptr);

/// Adaptive Dormand-Prince 4(5) integration with PI step-size control
/// (safety 0.9, step-ratio clamp [0.2, 5.0]), barrier-aware rejection
/// (h -> h/2 on a barrier signal, bypassing the error controller) and dense
/// output on the uniform grid. Termination is reported in the Trajectory;
/// throws only on malformed problems.
Trajectory integrate(const OdeProblem& problem);

}  // namespace fsim
