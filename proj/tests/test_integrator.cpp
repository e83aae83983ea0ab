#include <doctest.h>

#include <cmath>

#include "funnelsim/integrator.hpp"

using namespace fsim;

namespace {

const OdeRhs kDecay = [](double, const Vec& x, Vec& dxdt, std::string*) {
    dxdt = -x;
    return true;
};

const OdeRhs kHarmonic = [](double, const Vec& x, Vec& dxdt, std::string*) {
    dxdt.resize(2);
    dxdt[0] = x[1];
    dxdt[1] = -x[0];
    return true;
};

OdeProblem decay_problem(double rel_tol, double abs_tol) {
    OdeProblem p;
    p.rhs = kDecay;
    p.x0 = Vec::Constant(1, 1.0);
    p.t0 = 0.0;
    p.t_end = 1.0;
    p.rel_tol = rel_tol;
    p.abs_tol = abs_tol;
    p.output_dt = 0.1;
    return p;
}

// Fixed-step propagation with rk45_step; the basis of the order study.
double fixed_step_final_error(double h, int steps) {
    Vec x = Vec::Constant(1, 1.0);
    double t = 0.0;
    for (int i = 0; i < steps; ++i) {
        const auto res = rk45_step(kDecay, t, x, h, 1e-6, 1e-8);
        REQUIRE(!res.barrier);
        x = res.x_next;
        t += h;
    }
    return std::abs(x[0] - std::exp(-t));
}

}  // namespace

TEST_CASE("rk45_step: zero field is exact") {
    const OdeRhs zero = [](double, const Vec& x, Vec& dxdt, std::string*) {
        dxdt = Vec::Zero(x.size());
        return true;
    };
    const Vec x0 = Vec::Constant(3, 1.25);
    const auto res = rk45_step(zero, 0.0, x0, 0.5, 1e-6, 1e-8);
    CHECK(!res.barrier);
    CHECK((res.x_next - x0).norm() == 0.0);
    CHECK(res.error_estimate == 0.0);
}

TEST_CASE("rk45_step: one decay step matches the analytic flow") {
    const auto res = rk45_step(kDecay, 0.0, Vec::Constant(1, 1.0), 0.1, 1e-6, 1e-8);
    CHECK(!res.barrier);
    CHECK(std::abs(res.x_next[0] - std::exp(-0.1)) <= 1e-8);
}

TEST_CASE("rk45_step: near-blow-up step yields a rejecting error estimate") {
    const OdeRhs square = [](double, const Vec& x, Vec& dxdt, std::string*) {
        dxdt = x.array().square();
        return true;
    };
    // x(t) = 1/(1-t) blows up at t = 1; a step of 0.9 cannot be accurate.
    const auto res = rk45_step(square, 0.0, Vec::Constant(1, 1.0), 0.9, 1e-6, 1e-8);
    CHECK(!res.barrier);
    CHECK(res.error_estimate > 1.0);
}

TEST_CASE("rk45_step propagates stage barriers") {
    const OdeRhs guarded = [](double, const Vec& x, Vec& dxdt, std::string* reason) {
        if (x[0] > 1.05) {
            if (reason) *reason = "x too large";
            return false;
        }
        dxdt = x;
        return true;
    };
    const auto res = rk45_step(guarded, 0.0, Vec::Constant(1, 1.0), 0.5, 1e-6, 1e-8);
    CHECK(res.barrier);
    CHECK(res.barrier_reason == "x too large");
}

TEST_CASE("integrate: exponential decay at the benchmark tolerances") {
    const Trajectory traj = integrate(decay_problem(1e-8, 1e-6));
    REQUIRE(traj.completed());
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == 1.0);
    CHECK(std::abs(traj.states.back()[0] - std::exp(-1.0)) <= 1e-7);
}

TEST_CASE("integrate: harmonic oscillator returns to its start after one period") {
    OdeProblem p;
    p.rhs = kHarmonic;
    p.x0 = Vec::Zero(2);
    p.x0[0] = 1.0;
    p.t_end = 2.0 * M_PI;
    p.rel_tol = 1e-8;
    p.abs_tol = 1e-6;
    p.output_dt = 0.01;
    const Trajectory traj = integrate(p);
    REQUIRE(traj.completed());
    CHECK(std::abs(traj.states.back()[0] - 1.0) <= 1e-6);
    CHECK(std::abs(traj.states.back()[1]) <= 1e-6);

    // Energy sanity: (x^2 + v^2)/2 drift over one period.
    double max_drift = 0.0;
    for (const Vec& x : traj.states) {
        max_drift = std::max(max_drift, std::abs(0.5 * x.squaredNorm() - 0.5));
    }
    CHECK(max_drift <= 1e-5);
}

TEST_CASE("empirical convergence order of the fixed-step scheme is at least 4.5") {
    const double e1 = fixed_step_final_error(0.1, 10);
    const double e2 = fixed_step_final_error(0.05, 20);
    const double e3 = fixed_step_final_error(0.025, 40);
    const double order12 = std::log2(e1 / e2);
    const double order23 = std::log2(e2 / e3);
    CHECK(order12 >= 4.5);
    CHECK(order23 >= 4.5);
}

TEST_CASE("dense_eval: endpoints are reproduced exactly") {
    const Vec x0 = Vec::Constant(1, 1.0);
    const auto res = rk45_step(kDecay, 0.0, x0, 0.2, 1e-6, 1e-8);
    REQUIRE(!res.barrier);
    CHECK(dense_eval(res.dense, 0.0)[0] == x0[0]);
    CHECK(dense_eval(res.dense, 0.2)[0] == res.x_next[0]);
    CHECK_THROWS_AS(dense_eval(res.dense, 0.3), std::domain_error);
    CHECK_THROWS_AS(dense_eval(res.dense, -0.1), std::domain_error);
}

TEST_CASE("dense_eval: interior error scales like h^4") {
    const auto midpoint_error = [](double h) {
        const auto res = rk45_step(kDecay, 0.0, Vec::Constant(1, 1.0), h, 1e-6, 1e-8);
        REQUIRE(!res.barrier);
        return std::abs(dense_eval(res.dense, 0.5 * h)[0] - std::exp(-0.5 * h));
    };
    const double e1 = midpoint_error(0.4);
    const double e2 = midpoint_error(0.2);
    const double order = std::log2(e1 / e2);
    CHECK(order >= 3.5);
    CHECK(e2 <= 1e-6);
}

TEST_CASE("integrate is deterministic") {
    OdeProblem p;
    p.rhs = kHarmonic;
    p.x0 = Vec::Zero(2);
    p.x0[0] = 1.0;
    p.t_end = 5.0;
    p.output_dt = 0.05;
    const Trajectory a = integrate(p);
    const Trajectory b = integrate(p);
    REQUIRE(a.times.size() == b.times.size());
    for (std::size_t j = 0; j < a.times.size(); ++j) {
        CHECK(a.times[j] == b.times[j]);
        CHECK((a.states[j].array() == b.states[j].array()).all());
    }
    CHECK(a.accepted_steps == b.accepted_steps);
}

TEST_CASE("tightening the relative tolerance does not hurt the final error") {
    const auto final_error = [](const OdeRhs& rhs, Vec x0, double t_end,
                                const Vec& exact, double rel_tol) {
        OdeProblem p;
        p.rhs = rhs;
        p.x0 = std::move(x0);
        p.t_end = t_end;
        p.rel_tol = rel_tol;
        p.abs_tol = 1e-12;
        p.output_dt = t_end / 10.0;
        const Trajectory traj = integrate(p);
        REQUIRE(traj.completed());
        return (traj.states.back() - exact).norm();
    };

    const Vec exact_decay = Vec::Constant(1, std::exp(-1.0));
    CHECK(final_error(kDecay, Vec::Constant(1, 1.0), 1.0, exact_decay, 1e-8) <=
          final_error(kDecay, Vec::Constant(1, 1.0), 1.0, exact_decay, 1e-6) + 1e-12);

    Vec h0 = Vec::Zero(2);
    h0[0] = 1.0;
    Vec h_exact(2);
    h_exact << 1.0, 0.0;
    CHECK(final_error(kHarmonic, h0, 2.0 * M_PI, h_exact, 1e-8) <=
          final_error(kHarmonic, h0, 2.0 * M_PI, h_exact, 1e-6) + 1e-12);
}

TEST_CASE("integrate: barrier collision terminates with a breach status") {
    OdeProblem p;
    p.rhs = [](double, const Vec& x, Vec& dxdt, std::string* reason) {
        if (x[0] >= 0.5) {
            if (reason) *reason = "boundary hit";
            return false;
        }
        dxdt = Vec::Constant(1, 1.0);
        return true;
    };
    p.x0 = Vec::Zero(1);
    p.t_end = 1.0;
    p.output_dt = 0.01;
    const Trajectory traj = integrate(p);
    CHECK(traj.termination.status == RunStatus::kBarrierBreach);
    CHECK(traj.termination.reason == "boundary hit");
    CHECK(std::abs(traj.termination.time - 0.5) <= 1e-6);
    // Barrier soundness: accepted samples never violate the barrier.
    for (const Vec& x : traj.states) CHECK(x[0] < 0.5);
}

TEST_CASE("integrate: persistent non-finite derivatives underflow the step size") {
    OdeProblem p;
    p.rhs = [](double t, const Vec&, Vec& dxdt, std::string*) {
        dxdt = Vec::Constant(1, t > 0.3 ? std::nan("") : 1.0);
        return true;
    };
    p.x0 = Vec::Zero(1);
    p.t_end = 1.0;
    p.output_dt = 0.01;
    const Trajectory traj = integrate(p);
    CHECK(traj.termination.status == RunStatus::kStepUnderflow);
    CHECK(traj.termination.time <= 0.3 + 1e-9);
    for (const Vec& x : traj.states) CHECK(x.allFinite());
}

TEST_CASE("integrate: barrier at the initial state reports an immediate breach") {
    OdeProblem p;
    p.rhs = [](double, const Vec&, Vec&, std::string* reason) {
        if (reason) *reason = "outside admissible set";
        return false;
    };
    p.x0 = Vec::Zero(1);
    p.t_end = 1.0;
    p.output_dt = 0.01;
    const Trajectory traj = integrate(p);
    CHECK(traj.termination.status == RunStatus::kBarrierBreach);
    CHECK(traj.termination.time == 0.0);
    CHECK(traj.times.empty());
}

TEST_CASE("integrate: uniform grid covers [t0, t_end] with the expected count") {
    OdeProblem p;
    p.rhs = kDecay;
    p.x0 = Vec::Constant(1, 1.0);
    p.t_end = 20.0;
    p.output_dt = 0.01;
    const Trajectory traj = integrate(p);
    REQUIRE(traj.completed());
    CHECK(traj.times.size() == 2001);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == 20.0);
    for (std::size_t j = 1; j < traj.times.size(); ++j) {
        CHECK(traj.times[j] > traj.times[j - 1]);
    }
}

TEST_CASE("OdeProblem validation rejects malformed setups") {
    OdeProblem p;
    p.rhs = kDecay;
    p.x0 = Vec::Constant(1, 1.0);
    p.t_end = -1.0;
    CHECK_THROWS_AS(integrate(p), std::invalid_argument);
    p.t_end = 1.0;
    p.rel_tol = 0.0;
    CHECK_THROWS_AS(integrate(p), std::invalid_argument);
    p.rel_tol = 1e-8;
    p.min_step = 1.0;  // not below output_dt
    p.output_dt = 0.5;
    CHECK_THROWS_AS(integrate(p), std::invalid_argument);
}

TEST_CASE("max_step hint caps the step size") {
    OdeProblem p;
    p.rhs = kDecay;
    p.x0 = Vec::Constant(1, 1.0);
    p.t_end = 2.0;
    p.output_dt = 0.05;
    p.max_step = 0.03;
    const Trajectory traj = integrate(p);
    REQUIRE(traj.completed());
    CHECK(traj.accepted_steps >= static_cast<long>(2.0 / 0.03));
}
