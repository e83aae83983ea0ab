#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "funnelsim/types.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Plant nonlinearity f : R^q -> R^m. Shipped families act componentwise and
// therefore require q == m.
// ---------------------------------------------------------------------------

enum class NonlinearityKind {
    kPendulumSine,  // f(v) = -a * sin(v)
    kCubic,         // f(v) = alpha * v^3
    kTanh,          // f(v) = gain * tanh(v)
};

struct Nonlinearity {
    NonlinearityKind kind = NonlinearityKind::kPendulumSine;
    double param = 0.0;

    static Nonlinearity pendulum_sine(double a);
    static Nonlinearity cubic(double alpha);
    static Nonlinearity tanh_gain(double gain);

    Vec apply(const Vec& v) const;
    bool operator==(const Nonlinearity&) const = default;
};

// ---------------------------------------------------------------------------
// Causal operators
// ---------------------------------------------------------------------------

enum class OperatorKind { kMemoryless, kDelay, kLinearInternal, kSaturatedDerivative };

/// Immutable operator description. Construction validates the parameters
/// (delay tau > 0, A Hurwitz, saturation s > 0).
struct OperatorConfig {
    OperatorKind kind = OperatorKind::kMemoryless;
    double tau = 0.0;         // kDelay
    Mat A;                    // kLinearInternal: eta_dot = A eta + B y, output eta
    Mat B;
    Vec eta0;
    double saturation = 0.0;  // kSaturatedDerivative: componentwise clamp of ydot

    static OperatorConfig memoryless();
    static OperatorConfig delay(double tau);
    static OperatorConfig linear_internal(Mat A, Mat B, Vec eta0);
    static OperatorConfig saturated_derivative(double s);

    /// Output dimension q for input dimension m.
    int output_dim(int m) const;
    /// Throws if the config is inconsistent with input dimension m.
    void validate_for_input_dim(int m) const;

    bool operator==(const OperatorConfig& other) const;
};

/// Runtime operator instance. Carries per-run mutable state (delay history,
/// internal-dynamics state) and must be confined to one run at a time;
/// create a fresh instance per run via make_operator().
///
/// Two usage modes:
///  - standalone: drive sequentially with record() at increasing times and
///    query with output(); used by the probes.
///  - integrated: the internal-dynamics state (internal_dim() components) is
///    appended to the closed-loop ODE state and advanced by the integrator;
///    query with output_integrated(). The delay history is fed through
///    record() on accepted integration steps.
class CausalOperator {
public:
    virtual ~CausalOperator() = default;

    virtual int input_dim() const = 0;
    virtual int output_dim() const = 0;

    /// Number of operator states appended to the closed-loop ODE state.
    virtual int internal_dim() const { return 0; }
    virtual Vec initial_internal() const { return Vec(); }
    virtual void internal_deriv(double /*t*/, const Vec& /*eta*/, const Vec& /*y*/,
                                Vec& out) const {
        out.resize(0);
    }

    /// Re-initializes per-run state; y0 provides the constant pre-history
    /// extension for delays.
    virtual void reset(double t0, const Vec& y0);
    /// Appends a history knot / advances internal state to time t. Times must
    /// be nondecreasing.
    virtual void record(double /*t*/, const Vec& /*y*/, const Vec& /*ydot*/) {}

    /// Operator output at time t (standalone mode). Throws OperatorStateError
    /// if internal state has not been advanced far enough.
    virtual Vec output(double t, const Vec& y, const Vec& ydot) const = 0;

    /// Operator output when the internal state is carried by the ODE state.
    virtual Vec output_integrated(double t, const Vec& y, const Vec& ydot,
                                  const Vec& /*eta*/) const {
        return output(t, y, ydot);
    }

    /// Step-size cap required for sound history lookups (delay: tau).
    virtual std::optional<double> max_step_hint() const { return std::nullopt; }
};

std::unique_ptr<CausalOperator> make_operator(const OperatorConfig& config, int m);

/// Standalone operator output: projection of the spec operation onto the
/// runtime instance.
Vec operator_eval(const CausalOperator& T, double t, const Vec& y, const Vec& ydot);

/// Negative control for the causality probe: outputs y(t + lookahead) read
/// from the driving signal itself. Deliberately violates causality; not a
/// member of the admissible operator class.
class AnticipatingOperator : public CausalOperator {
public:
    AnticipatingOperator(std::function<Vec(double)> future, int m, double lookahead);
    int input_dim() const override { return m_; }
    int output_dim() const override { return m_; }
    Vec output(double t, const Vec& y, const Vec& ydot) const override;

private:
    std::function<Vec(double)> future_;
    int m_ = 1;
    double lookahead_ = 0.0;
};

// ---------------------------------------------------------------------------
// Plant
// ---------------------------------------------------------------------------

/// Second-order plant  x1_dot = x2,  x2_dot = R1 x1 + R2 x2 + f(w) + Gamma u
/// with w the causal-operator output. Immutable after construction.
struct PlantModel {
    int m = 1;
    Mat R1, R2, Gamma;
    Nonlinearity f;
    OperatorConfig op;
    Vec y0;     // y(0)
    Vec ydot0;  // y_dot(0)

    PlantModel(int m, Mat R1, Mat R2, Mat Gamma, Nonlinearity f, OperatorConfig op,
               Vec y0, Vec ydot0);

    bool operator==(const PlantModel& other) const;
};

/// The pendulum benchmark  y_ddot + a sin(y) = b u  as a PlantModel
/// (m = 1, R1 = R2 = 0, Gamma = b, f(v) = -a sin v, memoryless operator,
/// zero initial state). Rejects b <= 0.
PlantModel make_benchmark(double a, double b);

/// Plant dynamics: returns (x1_dot, x2_dot) given the operator output w.
std::pair<Vec, Vec> plant_rhs(const PlantModel& P, double t, const Vec& x1, const Vec& x2,
                              const Vec& u, const Vec& w);

// ---------------------------------------------------------------------------
// Property probes
// ---------------------------------------------------------------------------

/// A test signal pair (y, ydot) given as closed-form callables. The two slots
/// are independent arguments to the operator, so ydot need not be the
/// derivative of y.
struct AnalyticSignal {
    std::function<Vec(double)> y;
    std::function<Vec(double)> ydot;
};

using OperatorFactory = std::function<std::unique_ptr<CausalOperator>(const AnalyticSignal&)>;

struct CausalityProbeResult {
    bool pass = false;
    double max_mismatch = 0.0;  // over [0, t_split]
};

/// Drives fresh operator instances with two signals that coincide on
/// [0, t_split] and checks the outputs coincide there. The factory may wire
/// the operator to the signal it will be driven with (that is exactly what an
/// anticipating operator does).
CausalityProbeResult probe_causality(const OperatorFactory& factory, const AnalyticSignal& a,
                                     const AnalyticSignal& b, double t_split, double t_end,
                                     double dt);

/// Convenience overload for honest operators described by a config.
CausalityProbeResult probe_causality(const OperatorConfig& config, int m,
                                     const AnalyticSignal& a, const AnalyticSignal& b,
                                     double t_split, double t_end, double dt);

/// Estimates the BIBO constant c1 = max over the suite of sup_t ||T(y, ydot)(t)||
/// for signals with sup ||y|| <= c0 (checked on the grid).
double probe_bibo(const OperatorConfig& config, int m, double c0,
                  const std::vector<AnalyticSignal>& suite, double t_end, double dt);

}  // namespace fsim
