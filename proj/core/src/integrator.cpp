#include "funnelsim/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace fsim {

namespace {

// Dormand-Prince 4(5) tableau (7 stages, FSAL).
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0, kC5 = 8.0 / 9.0;
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                 kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
// 5th-order weights (stage 7 equals the step endpoint).
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
// Error weights: 5th-order minus embedded 4th-order.
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                 kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;
// Dense-output coefficients.
constexpr double kD1 = -12715105075.0 / 11282082432.0;
constexpr double kD3 = 87487479700.0 / 32700410799.0;
constexpr double kD4 = -10690763975.0 / 1880347072.0;
constexpr double kD5 = 701980252875.0 / 199316789632.0;
constexpr double kD6 = -1453857185.0 / 822651844.0;
constexpr double kD7 = 69997945.0 / 29380423.0;

// Step-size controller constants.
constexpr double kSafety = 0.9;
constexpr double kMinRatio = 0.2;
constexpr double kMaxRatio = 5.0;
constexpr double kPiAlpha = 0.17;  // 1/5 - 0.75 * beta
constexpr double kPiBeta = 0.04;

double weighted_sq_sum(const Vec& err, const Vec& x_old, const Vec& x_new, double abs_tol,
                       double rel_tol) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double scale =
            abs_tol + rel_tol * std::max(std::abs(x_old[i]), std::abs(x_new[i]));
        const double q = err[i] / scale;
        sum += q * q;
    }
    return sum;
}

double weighted_rms(const Vec& err, const Vec& x_old, const Vec& x_new, double abs_tol,
                    double rel_tol) {
    return std::sqrt(weighted_sq_sum(err, x_old, x_new, abs_tol, rel_tol) /
                     static_cast<double>(err.size()));
}

// The accept/reject loop controls the weighted 2-norm, a sqrt(n)-tighter
// criterion than the reported RMS estimate; it bounds the max-norm control of
// the reference solver family.
double weighted_l2(const Vec& err, const Vec& x_old, const Vec& x_new, double abs_tol,
                   double rel_tol) {
    return std::sqrt(weighted_sq_sum(err, x_old, x_new, abs_tol, rel_tol));
}

struct StepWorkspace {
    Vec k1, k2, k3, k4, k5, k6, k7;
    Vec x_stage, x_next, err_vec;
    void resize(Eigen::Index n) {
        for (Vec* v : {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &x_stage, &x_next, &err_vec}) {
            v->resize(n);
        }
    }
};

/// Core step kernel. Returns 0 on success, 1 on barrier. ws.k1 must hold the
/// derivative at (t, x).
int dopri5_stages(const OdeRhs& rhs, double t, const Vec& x, double h, StepWorkspace& ws,
                  std::string* barrier_reason, long& evals) {
    const auto eval = [&](double tt, const Vec& xx, Vec& k) {
        ++evals;
        return rhs(tt, xx, k, barrier_reason);
    };

    ws.x_stage = x + h * (kA21 * ws.k1);
    if (!eval(t + kC2 * h, ws.x_stage, ws.k2)) return 1;

    ws.x_stage = x + h * (kA31 * ws.k1 + kA32 * ws.k2);
    if (!eval(t + kC3 * h, ws.x_stage, ws.k3)) return 1;

    ws.x_stage = x + h * (kA41 * ws.k1 + kA42 * ws.k2 + kA43 * ws.k3);
    if (!eval(t + kC4 * h, ws.x_stage, ws.k4)) return 1;

    ws.x_stage = x + h * (kA51 * ws.k1 + kA52 * ws.k2 + kA53 * ws.k3 + kA54 * ws.k4);
    if (!eval(t + kC5 * h, ws.x_stage, ws.k5)) return 1;

    ws.x_stage =
        x + h * (kA61 * ws.k1 + kA62 * ws.k2 + kA63 * ws.k3 + kA64 * ws.k4 + kA65 * ws.k5);
    if (!eval(t + h, ws.x_stage, ws.k6)) return 1;

    ws.x_next = x + h * (kB1 * ws.k1 + kB3 * ws.k3 + kB4 * ws.k4 + kB5 * ws.k5 + kB6 * ws.k6);
    if (!eval(t + h, ws.x_next, ws.k7)) return 1;

    ws.err_vec = h * (kE1 * ws.k1 + kE3 * ws.k3 + kE4 * ws.k4 + kE5 * ws.k5 + kE6 * ws.k6 +
                      kE7 * ws.k7);
    return 0;
}

StepRecord make_dense_record(double t, double h, const Vec& x, const StepWorkspace& ws) {
    StepRecord rec;
    rec.t = t;
    rec.h = h;
    rec.r1 = x;
    rec.r2 = ws.x_next - x;
    rec.r3 = h * ws.k1 - rec.r2;
    rec.r4 = rec.r2 - h * ws.k7 - rec.r3;
    rec.r5 = h * (kD1 * ws.k1 + kD3 * ws.k3 + kD4 * ws.k4 + kD5 * ws.k5 + kD6 * ws.k6 +
                  kD7 * ws.k7);
    return rec;
}

}  // namespace

Vec dense_eval(const StepRecord& rec, double t_query) {
    const double slack = 1e-9 * std::max(std::abs(rec.h), 1e-300);
    if (t_query < rec.t - slack || t_query > rec.t + rec.h + slack) {
        throw std::domain_error("dense_eval: query time outside the step interval");
    }
    double theta = (t_query - rec.t) / rec.h;
    theta = std::clamp(theta, 0.0, 1.0);
    const double theta1 = 1.0 - theta;
    return rec.r1 +
           theta * (rec.r2 + theta1 * (rec.r3 + theta * (rec.r4 + theta1 * rec.r5)));
}

Rk45StepResult rk45_step(const OdeRhs& rhs, double t, const Vec& x, double h, double abs_tol,
                         double rel_tol, const Vec* k1) {
    if (!(h > 0.0)) throw std::invalid_argument("rk45_step: h must be positive");
    if (!x.allFinite()) throw std::invalid_argument("rk45_step: state must be finite");

    Rk45StepResult result;
    StepWorkspace ws;
    ws.resize(x.size());
    long evals = 0;
    std::string reason;

    if (k1 != nullptr) {
        ws.k1 = *k1;
    } else if (!rhs(t, x, ws.k1, &reason)) {
        result.barrier = true;
        result.barrier_reason = reason;
        return result;
    }

    if (dopri5_stages(rhs, t, x, h, ws, &reason, evals) != 0) {
        result.barrier = true;
        result.barrier_reason = reason;
        return result;
    }

    result.x_next = ws.x_next;
    result.error_estimate = weighted_rms(ws.err_vec, x, ws.x_next, abs_tol, rel_tol);
    result.dense = make_dense_record(t, h, x, ws);
    result.k_last = ws.k7;
    return result;
}

void OdeProblem::validate() const {
    if (!rhs) throw std::invalid_argument("OdeProblem: rhs callback is required");
    if (x0.size() == 0) throw std::invalid_argument("OdeProblem: empty initial state");
    if (!x0.allFinite()) throw std::invalid_argument("OdeProblem: initial state must be finite");
    if (!(t_end > t0)) throw std::invalid_argument("OdeProblem: t_end must exceed t0");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
        throw std::invalid_argument("OdeProblem: tolerances must be positive");
    }
    if (!(output_dt > 0.0)) throw std::invalid_argument("OdeProblem: output_dt must be positive");
    const double h_min = min_step > 0.0 ? min_step : 1e-12 * (t_end - t0);
    if (!(h_min > 0.0) || !(h_min < output_dt)) {
        throw std::invalid_argument("OdeProblem: min_step must be positive and below output_dt");
    }
    if (max_step && !(*max_step > 0.0)) {
        throw std::invalid_argument("OdeProblem: max_step must be positive");
    }
}

namespace {

std::vector<double> build_output_grid(double t0, double t_end, double dt) {
    std::vector<double> grid;
    const double span = t_end - t0;
    grid.reserve(static_cast<std::size_t>(span / dt) + 2);
    for (int i = 0;; ++i) {
        const double tg = t0 + static_cast<double>(i) * dt;
        if (tg >= t_end - 1e-9 * span) {
            grid.push_back(t_end);
            break;
        }
        grid.push_back(tg);
    }
    return grid;
}

/// Standard starting-step heuristic: match the scale of the first derivative,
/// refine with one explicit Euler probe.
double initial_step(const OdeRhs& rhs, double t0, const Vec& x0, const Vec& f0, double abs_tol,
                    double rel_tol, double h_max, long& evals) {
    const auto scaled_norm = [&](const Vec& v, const Vec& ref) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double scale = abs_tol + rel_tol * std::abs(ref[i]);
            const double q = v[i] / scale;
            sum += q * q;
        }
        return std::sqrt(sum / static_cast<double>(v.size()));
    };

    const double d0 = scaled_norm(x0, x0);
    const double d1 = scaled_norm(f0, x0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
    h0 = std::min(h0, h_max);

    Vec x1 = x0 + h0 * f0;
    Vec f1(x0.size());
    ++evals;
    if (!rhs(t0 + h0, x1, f1, nullptr) || !f1.allFinite()) {
        return std::max(1e-6 * h_max, std::min(h0 * 1e-2, h_max));
    }
    const double d2 = scaled_norm(f1 - f0, x0) / h0;

    double h1;
    if (std::max(d1, d2) <= 1e-15) {
        h1 = std::max(1e-6, h0 * 1e-3);
    } else {
        h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
    }
    return std::min({100.0 * h0, h1, h_max});
}

struct PendingSample {
    double t;
    Vec state;
    Vec input;
    Vec diag;
};

}  // namespace

Trajectory integrate(const OdeProblem& problem) {
    problem.validate();

    const double t0 = problem.t0;
    const double t_end = problem.t_end;
    const double span = t_end - t0;
    const double h_min = problem.min_step > 0.0 ? problem.min_step : 1e-12 * span;
    const double h_max = problem.max_step ? std::min(*problem.max_step, span) : span;

    Trajectory traj;
    traj.diagnostic_names = problem.diagnostic_names;

    const std::vector<double> grid = build_output_grid(t0, t_end, problem.output_dt);

    Vec x = problem.x0;
    double t = t0;

    const auto emit_sample = [&](double ts, const Vec& xs, std::string* reason) -> bool {
        Vec input(problem.input_dim);
        Vec diag(static_cast<Eigen::Index>(problem.diagnostic_names.size()));
        if (problem.sample_map) {
            if (!problem.sample_map(ts, xs, input, diag, reason)) return false;
            if (!input.allFinite() || !diag.allFinite()) {
                if (reason != nullptr) *reason = "non-finite sample diagnostics";
                return false;
            }
        }
        traj.times.push_back(ts);
        traj.states.push_back(xs);
        if (problem.sample_map) {
            traj.inputs.push_back(std::move(input));
            traj.diagnostics.push_back(std::move(diag));
        }
        return true;
    };

    // The initial state must be strictly inside the admissible set; a barrier
    // here terminates immediately with an empty sample list.
    std::string reason;
    Vec f0(x.size());
    ++traj.rhs_evaluations;
    if (!problem.rhs(t0, x, f0, &reason) || !f0.allFinite()) {
        traj.termination = {RunStatus::kBarrierBreach, t0,
                            reason.empty() ? "barrier at initial state" : reason};
        return traj;
    }
    if (!emit_sample(t0, x, &reason)) {
        traj.termination = {RunStatus::kBarrierBreach, t0, reason};
        return traj;
    }
    std::size_t grid_idx = 1;

    double h = initial_step(problem.rhs, t0, x, f0, problem.abs_tol, problem.rel_tol, h_max,
                            traj.rhs_evaluations);
    h = std::max(h, h_min);

    StepWorkspace ws;
    ws.resize(x.size());
    ws.k1 = f0;

    double facold = 1e-4;
    std::vector<PendingSample> pending;

    constexpr long kMaxAttempts = 100'000'000;
    long attempts = 0;

    while (t < t_end) {
        if (++attempts > kMaxAttempts) {
            throw std::runtime_error("integrate: step-attempt limit exceeded");
        }

        bool final_step = false;
        if (t + h >= t_end) {
            h = t_end - t;
            final_step = true;
        }

        reason.clear();
        const int stage_status =
            dopri5_stages(problem.rhs, t, x, h, ws, &reason, traj.rhs_evaluations);

        if (stage_status != 0) {
            // Barrier inside the step: halve and retry; the error estimate is
            // meaningless outside the admissible set.
            ++traj.rejected_barrier_steps;
            const double h_new = 0.5 * h;
            if (h_new < h_min) {
                traj.termination = {RunStatus::kBarrierBreach, t, reason};
                return traj;
            }
            h = h_new;
            continue;
        }

        double err = weighted_l2(ws.err_vec, x, ws.x_next, problem.abs_tol, problem.rel_tol);
        const bool finite = ws.x_next.allFinite() && std::isfinite(err);

        if (!finite || err > 1.0) {
            ++traj.rejected_error_steps;
            const double shrink =
                finite ? std::max(kMinRatio, kSafety * std::pow(err, -0.2)) : kMinRatio;
            const double h_new = h * shrink;
            if (h_new < h_min) {
                traj.termination = {RunStatus::kStepUnderflow, t, "step size underflow"};
                return traj;
            }
            h = h_new;
            continue;
        }

        const double t_next = final_step ? t_end : t + h;
        const StepRecord rec = make_dense_record(t, h, x, ws);

        // Output samples covered by this step; a barrier at a sample rejects
        // the whole step so that accepted samples always satisfy the barriers.
        pending.clear();
        bool sample_barrier = false;
        double barrier_time = t_next;
        std::size_t idx = grid_idx;
        while (idx < grid.size() && grid[idx] <= t_next + 1e-12 * std::max(1.0, std::abs(t_next))) {
            const double tg = std::min(grid[idx], t_next);
            PendingSample s;
            s.t = tg;
            s.state = dense_eval(rec, tg);
            if (!s.state.allFinite()) {
                sample_barrier = true;
                barrier_time = tg;
                reason = "non-finite dense-output sample";
                break;
            }
            s.input.resize(problem.input_dim);
            s.diag.resize(static_cast<Eigen::Index>(problem.diagnostic_names.size()));
            if (problem.sample_map) {
                if (!problem.sample_map(tg, s.state, s.input, s.diag, &reason)) {
                    sample_barrier = true;
                    barrier_time = tg;
                    break;
                }
                if (!s.input.allFinite() || !s.diag.allFinite()) {
                    sample_barrier = true;
                    barrier_time = tg;
                    reason = "non-finite sample diagnostics";
                    break;
                }
            }
            pending.push_back(std::move(s));
            ++idx;
        }

        if (sample_barrier) {
            ++traj.rejected_barrier_steps;
            const double h_new = 0.5 * h;
            if (h_new < h_min) {
                traj.termination = {RunStatus::kBarrierBreach, barrier_time, reason};
                return traj;
            }
            h = h_new;
            continue;
        }

        // Commit the step.
        for (auto& s : pending) {
            traj.times.push_back(s.t);
            traj.states.push_back(std::move(s.state));
            if (problem.sample_map) {
                traj.inputs.push_back(std::move(s.input));
                traj.diagnostics.push_back(std::move(s.diag));
            }
        }
        grid_idx = idx;
        ++traj.accepted_steps;

        t = t_next;
        x = ws.x_next;
        ws.k1 = ws.k7;  // FSAL
        if (problem.accept_hook) problem.accept_hook(t, x);

        // PI step-size update.
        double growth;
        if (err <= 0.0) {
            growth = kMaxRatio;
        } else {
            growth = kSafety * std::pow(facold, kPiBeta) / std::pow(err, kPiAlpha);
            growth = std::clamp(growth, kMinRatio, kMaxRatio);
        }
        facold = std::max(err, 1e-4);
        h = std::min(h * growth, h_max);
        h = std::max(h, h_min);
    }

    traj.termination = {RunStatus::kCompleted, t_end, ""};
    return traj;
}

}  // namespace fsim
