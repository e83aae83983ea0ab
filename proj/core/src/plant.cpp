#include "funnelsim/plant.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace fsim {

namespace {

bool mat_equal(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return a.size() == 0 || (a.array() == b.array()).all();
}

bool vec_equal(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) return false;
    return a.size() == 0 || (a.array() == b.array()).all();
}

double time_slack(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

}  // namespace

// ---------------------------------------------------------------------------
// Nonlinearity
// ---------------------------------------------------------------------------

Nonlinearity Nonlinearity::pendulum_sine(double a) {
    if (!std::isfinite(a)) throw std::invalid_argument("pendulum_sine: parameter must be finite");
    return Nonlinearity{NonlinearityKind::kPendulumSine, a};
}

Nonlinearity Nonlinearity::cubic(double alpha) {
    if (!std::isfinite(alpha)) throw std::invalid_argument("cubic: parameter must be finite");
    return Nonlinearity{NonlinearityKind::kCubic, alpha};
}

Nonlinearity Nonlinearity::tanh_gain(double gain) {
    if (!std::isfinite(gain)) throw std::invalid_argument("tanh_gain: parameter must be finite");
    return Nonlinearity{NonlinearityKind::kTanh, gain};
}

Vec Nonlinearity::apply(const Vec& v) const {
    switch (kind) {
        case NonlinearityKind::kPendulumSine:
            return -param * v.array().sin();
        case NonlinearityKind::kCubic:
            return param * v.array().cube();
        case NonlinearityKind::kTanh:
            return param * v.array().tanh();
    }
    return Vec::Zero(v.size());
}

// ---------------------------------------------------------------------------
// OperatorConfig
// ---------------------------------------------------------------------------

OperatorConfig OperatorConfig::memoryless() { return OperatorConfig{}; }

OperatorConfig OperatorConfig::delay(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw std::invalid_argument("delay operator: tau must be positive");
    }
    OperatorConfig c;
    c.kind = OperatorKind::kDelay;
    c.tau = tau;
    return c;
}

OperatorConfig OperatorConfig::linear_internal(Mat A, Mat B, Vec eta0) {
    if (A.rows() == 0 || A.rows() != A.cols()) {
        throw std::invalid_argument("linear_internal: A must be square and nonempty");
    }
    if (B.rows() != A.rows()) {
        throw std::invalid_argument("linear_internal: B must have as many rows as A");
    }
    if (eta0.size() != A.rows()) {
        throw std::invalid_argument("linear_internal: eta0 size must match A");
    }
    Eigen::EigenSolver<Mat> es(A);
    if (es.info() != Eigen::Success) {
        throw std::invalid_argument("linear_internal: eigenvalue computation for A failed");
    }
    if (es.eigenvalues().real().maxCoeff() >= 0.0) {
        throw std::invalid_argument(
            "linear_internal: A must be Hurwitz (all eigenvalues with negative real part)");
    }
    OperatorConfig c;
    c.kind = OperatorKind::kLinearInternal;
    c.A = std::move(A);
    c.B = std::move(B);
    c.eta0 = std::move(eta0);
    return c;
}

OperatorConfig OperatorConfig::saturated_derivative(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw std::invalid_argument("saturated_derivative: saturation level must be positive");
    }
    OperatorConfig c;
    c.kind = OperatorKind::kSaturatedDerivative;
    c.saturation = s;
    return c;
}

int OperatorConfig::output_dim(int m) const {
    return kind == OperatorKind::kLinearInternal ? static_cast<int>(A.rows()) : m;
}

void OperatorConfig::validate_for_input_dim(int m) const {
    if (kind == OperatorKind::kLinearInternal && B.cols() != m) {
        throw std::invalid_argument("linear_internal: B must have m columns");
    }
}

bool OperatorConfig::operator==(const OperatorConfig& other) const {
    if (kind != other.kind) return false;
    switch (kind) {
        case OperatorKind::kMemoryless:
            return true;
        case OperatorKind::kDelay:
            return tau == other.tau;
        case OperatorKind::kLinearInternal:
            return mat_equal(A, other.A) && mat_equal(B, other.B) && vec_equal(eta0, other.eta0);
        case OperatorKind::kSaturatedDerivative:
            return saturation == other.saturation;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Operator implementations
// ---------------------------------------------------------------------------

void CausalOperator::reset(double /*t0*/, const Vec& /*y0*/) {}

namespace {

/// T(y, ydot)(t) = y(t). Causal and 1-Lipschitz by construction.
class MemorylessOperator final : public CausalOperator {
public:
    explicit MemorylessOperator(int m) : m_(m) {}
    int input_dim() const override { return m_; }
    int output_dim() const override { return m_; }
    Vec output(double /*t*/, const Vec& y, const Vec& /*ydot*/) const override { return y; }

private:
    int m_;
};

/// T(y, ydot)(t) = clamp(ydot(t), -s, s) componentwise. The clamp is
/// 1-Lipschitz, and the output is bounded by s regardless of either input.
class SaturatedDerivativeOperator final : public CausalOperator {
public:
    SaturatedDerivativeOperator(int m, double s) : m_(m), s_(s) {}
    int input_dim() const override { return m_; }
    int output_dim() const override { return m_; }
    Vec output(double /*t*/, const Vec& /*y*/, const Vec& ydot) const override {
        return ydot.cwiseMin(s_).cwiseMax(-s_);
    }

private:
    int m_;
    double s_;
};

/// Pure time delay y(t - tau): causal and 1-Lipschitz in the first argument
/// (a shift), independent of the second. History is a buffer of accepted
/// knots (t_i, y_i); lookups interpolate with a cubic Lagrange polynomial
/// through the four knots nearest the query, which keeps the reconstruction
/// at the integrator's interpolation order while never reading the ydot
/// argument. Times before the initial knot use the constant pre-history
/// extension.
class DelayOperator final : public CausalOperator {
public:
    DelayOperator(int m, double tau) : m_(m), tau_(tau) {}

    int input_dim() const override { return m_; }
    int output_dim() const override { return m_; }
    std::optional<double> max_step_hint() const override { return tau_; }

    void reset(double t0, const Vec& y0) override {
        knot_times_.assign(1, t0);
        knot_values_.assign(1, y0);
    }

    void record(double t, const Vec& y, const Vec& /*ydot*/) override {
        if (knot_times_.empty()) {
            knot_times_.push_back(t);
            knot_values_.push_back(y);
            return;
        }
        const double last = knot_times_.back();
        if (t <= last + time_slack(t)) {
            if (t < last - time_slack(t)) {
                throw std::logic_error("DelayOperator::record: times must be nondecreasing");
            }
            knot_values_.back() = y;  // refresh the knot at (numerically) the same time
            return;
        }
        knot_times_.push_back(t);
        knot_values_.push_back(y);
    }

    Vec output(double t, const Vec& /*y*/, const Vec& /*ydot*/) const override {
        if (knot_times_.empty()) {
            throw OperatorStateError("DelayOperator: reset() must be called before output()");
        }
        return history_at(t - tau_);
    }

private:
    Vec history_at(double s) const {
        const double t0 = knot_times_.front();
        if (s <= t0) return knot_values_.front();  // constant pre-history extension
        const double last = knot_times_.back();
        if (s > last + time_slack(s)) {
            throw OperatorStateError("DelayOperator: history not advanced to requested time");
        }
        s = std::min(s, last);

        const auto upper = std::upper_bound(knot_times_.begin(), knot_times_.end(), s);
        std::size_t hi = static_cast<std::size_t>(upper - knot_times_.begin());
        if (hi >= knot_times_.size()) hi = knot_times_.size() - 1;
        const std::size_t lo = hi >= 2 ? hi - 2 : 0;
        const std::size_t end = std::min(knot_times_.size() - 1, hi + 1);

        // Lagrange interpolation through the chosen window.
        Vec result = Vec::Zero(m_);
        for (std::size_t j = lo; j <= end; ++j) {
            double weight = 1.0;
            for (std::size_t k = lo; k <= end; ++k) {
                if (k == j) continue;
                weight *= (s - knot_times_[k]) / (knot_times_[j] - knot_times_[k]);
            }
            result += weight * knot_values_[j];
        }
        return result;
    }

    int m_;
    double tau_;
    std::vector<double> knot_times_;
    std::vector<Vec> knot_values_;
};

/// Linear internal dynamics eta_dot = A eta + B y with output eta; the
/// solution map of a stable linear system is causal and Lipschitz in the
/// driving input on bounded intervals. In
/// integrated mode eta rides along in the closed-loop state vector; in
/// standalone mode record() advances eta with classic RK4 substeps over each
/// knot interval, interpolating y linearly between knots.
class LinearInternalOperator final : public CausalOperator {
public:
    LinearInternalOperator(int m, Mat A, Mat B, Vec eta0)
        : m_(m), A_(std::move(A)), B_(std::move(B)), eta0_(std::move(eta0)) {
        eta_ = eta0_;
    }

    int input_dim() const override { return m_; }
    int output_dim() const override { return static_cast<int>(A_.rows()); }
    int internal_dim() const override { return static_cast<int>(A_.rows()); }
    Vec initial_internal() const override { return eta0_; }

    void internal_deriv(double /*t*/, const Vec& eta, const Vec& y, Vec& out) const override {
        out.noalias() = A_ * eta;
        out.noalias() += B_ * y;
    }

    void reset(double t0, const Vec& y0) override {
        eta_ = eta0_;
        t_cur_ = t0;
        y_prev_ = y0;
        initialized_ = true;
    }

    void record(double t, const Vec& y, const Vec& /*ydot*/) override {
        if (!initialized_) {
            throw OperatorStateError("LinearInternalOperator: reset() before record()");
        }
        if (t < t_cur_ - time_slack(t)) {
            throw std::logic_error("LinearInternalOperator::record: times must be nondecreasing");
        }
        const double span = t - t_cur_;
        if (span > 0.0) {
            const int substeps = std::max(1, static_cast<int>(std::ceil(span / 0.01)));
            const double h = span / substeps;
            for (int i = 0; i < substeps; ++i) {
                const double s0 = t_cur_ + i * h;
                rk4_substep(s0, h, t, y);
            }
        }
        t_cur_ = t;
        y_prev_ = y;
    }

    Vec output(double t, const Vec& /*y*/, const Vec& /*ydot*/) const override {
        if (!initialized_) {
            throw OperatorStateError("LinearInternalOperator: reset() before output()");
        }
        if (std::abs(t - t_cur_) > time_slack(t)) {
            throw OperatorStateError("LinearInternalOperator: state not advanced to requested time");
        }
        return eta_;
    }

    Vec output_integrated(double /*t*/, const Vec& /*y*/, const Vec& /*ydot*/,
                          const Vec& eta) const override {
        return eta;
    }

private:
    // One RK4 substep of eta_dot = A eta + B y_lin(s) starting at s0; y is
    // interpolated linearly between (t_cur_, y_prev_) and (t_knot, y_knot).
    void rk4_substep(double s0, double h, double t_knot, const Vec& y_knot) {
        const auto y_at = [&](double s) -> Vec {
            const double span = t_knot - t_cur_;
            const double w = span > 0.0 ? (s - t_cur_) / span : 1.0;
            return (1.0 - w) * y_prev_ + w * y_knot;
        };
        const auto f = [&](double s, const Vec& eta) -> Vec { return A_ * eta + B_ * y_at(s); };
        const Vec k1 = f(s0, eta_);
        const Vec k2 = f(s0 + 0.5 * h, eta_ + 0.5 * h * k1);
        const Vec k3 = f(s0 + 0.5 * h, eta_ + 0.5 * h * k2);
        const Vec k4 = f(s0 + h, eta_ + h * k3);
        eta_ += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    int m_;
    Mat A_, B_;
    Vec eta0_;
    Vec eta_;
    Vec y_prev_;
    double t_cur_ = 0.0;
    bool initialized_ = false;
};

}  // namespace

std::unique_ptr<CausalOperator> make_operator(const OperatorConfig& config, int m) {
    if (m < 1) throw std::invalid_argument("make_operator: input dimension must be >= 1");
    config.validate_for_input_dim(m);
    switch (config.kind) {
        case OperatorKind::kMemoryless:
            return std::make_unique<MemorylessOperator>(m);
        case OperatorKind::kDelay:
            return std::make_unique<DelayOperator>(m, config.tau);
        case OperatorKind::kLinearInternal:
            return std::make_unique<LinearInternalOperator>(m, config.A, config.B, config.eta0);
        case OperatorKind::kSaturatedDerivative:
            return std::make_unique<SaturatedDerivativeOperator>(m, config.saturation);
    }
    throw std::invalid_argument("make_operator: unknown operator kind");
}

Vec operator_eval(const CausalOperator& T, double t, const Vec& y, const Vec& ydot) {
    if (t < 0.0) throw std::domain_error("operator_eval: time must be nonnegative");
    return T.output(t, y, ydot);
}

AnticipatingOperator::AnticipatingOperator(std::function<Vec(double)> future, int m,
                                           double lookahead)
    : future_(std::move(future)), m_(m), lookahead_(lookahead) {
    if (!future_) throw std::invalid_argument("AnticipatingOperator: future callable required");
    if (!(lookahead_ > 0.0)) {
        throw std::invalid_argument("AnticipatingOperator: lookahead must be positive");
    }
}

Vec AnticipatingOperator::output(double t, const Vec& /*y*/, const Vec& /*ydot*/) const {
    return future_(t + lookahead_);
}

// ---------------------------------------------------------------------------
// PlantModel
// ---------------------------------------------------------------------------

PlantModel::PlantModel(int m_in, Mat R1_in, Mat R2_in, Mat Gamma_in, Nonlinearity f_in,
                       OperatorConfig op_in, Vec y0_in, Vec ydot0_in)
    : m(m_in),
      R1(std::move(R1_in)),
      R2(std::move(R2_in)),
      Gamma(std::move(Gamma_in)),
      f(f_in),
      op(std::move(op_in)),
      y0(std::move(y0_in)),
      ydot0(std::move(ydot0_in)) {
    if (m < 1) throw std::invalid_argument("PlantModel: m must be >= 1");
    const auto check_square = [&](const Mat& M, const char* name) {
        if (M.rows() != m || M.cols() != m) {
            throw std::invalid_argument(std::string("PlantModel: ") + name + " must be m x m");
        }
    };
    check_square(R1, "R1");
    check_square(R2, "R2");
    check_square(Gamma, "Gamma");
    if (y0.size() != m || ydot0.size() != m) {
        throw std::invalid_argument("PlantModel: initial state must have dimension m");
    }

    const Mat sym = 0.5 * (Gamma + Gamma.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument(
            "PlantModel: Gamma must be positive definite (symmetric part)");
    }

    op.validate_for_input_dim(m);
    if (op.output_dim(m) != m) {
        throw std::invalid_argument(
            "PlantModel: shipped nonlinearities act componentwise and require operator "
            "output dimension q == m");
    }
}

bool PlantModel::operator==(const PlantModel& other) const {
    return m == other.m && mat_equal(R1, other.R1) && mat_equal(R2, other.R2) &&
           mat_equal(Gamma, other.Gamma) && f == other.f && op == other.op &&
           vec_equal(y0, other.y0) && vec_equal(ydot0, other.ydot0);
}

PlantModel make_benchmark(double a, double b) {
    if (!(b > 0.0)) {
        throw std::invalid_argument("make_benchmark: b must be positive (Gamma = b > 0)");
    }
    const int m = 1;
    Mat zero = Mat::Zero(m, m);
    Mat gamma(m, m);
    gamma(0, 0) = b;
    return PlantModel(m, zero, zero, gamma, Nonlinearity::pendulum_sine(a),
                      OperatorConfig::memoryless(), Vec::Zero(m), Vec::Zero(m));
}

std::pair<Vec, Vec> plant_rhs(const PlantModel& P, double /*t*/, const Vec& x1, const Vec& x2,
                              const Vec& u, const Vec& w) {
    Vec x2_dot = P.R1 * x1 + P.R2 * x2 + P.f.apply(w) + P.Gamma * u;
    return {x2, std::move(x2_dot)};
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

namespace {

std::vector<double> probe_grid(double t_end, double dt) {
    if (!(t_end > 0.0) || !(dt > 0.0)) {
        throw std::invalid_argument("probe grid: t_end and dt must be positive");
    }
    std::vector<double> times;
    const int n = static_cast<int>(std::floor(t_end / dt + 1e-9));
    times.reserve(static_cast<std::size_t>(n) + 2);
    for (int i = 0; i <= n; ++i) times.push_back(i * dt);
    if (times.back() < t_end - 1e-12) times.push_back(t_end);
    return times;
}

std::vector<Vec> drive_operator(CausalOperator& op, const AnalyticSignal& sig,
                                const std::vector<double>& times) {
    op.reset(times.front(), sig.y(times.front()));
    std::vector<Vec> outputs;
    outputs.reserve(times.size());
    for (const double t : times) {
        const Vec y = sig.y(t);
        const Vec yd = sig.ydot(t);
        op.record(t, y, yd);
        outputs.push_back(op.output(t, y, yd));
    }
    return outputs;
}

}  // namespace

CausalityProbeResult probe_causality(const OperatorFactory& factory, const AnalyticSignal& a,
                                     const AnalyticSignal& b, double t_split, double t_end,
                                     double dt) {
    if (!(t_split > 0.0) || !(t_split < t_end)) {
        throw std::invalid_argument("probe_causality: need 0 < t_split < t_end");
    }
    const auto times = probe_grid(t_end, dt);
    auto op_a = factory(a);
    auto op_b = factory(b);
    const auto out_a = drive_operator(*op_a, a, times);
    const auto out_b = drive_operator(*op_b, b, times);

    CausalityProbeResult result;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] > t_split + 1e-12) break;
        result.max_mismatch =
            std::max(result.max_mismatch, (out_a[i] - out_b[i]).norm());
    }
    result.pass = result.max_mismatch <= 1e-12;
    return result;
}

CausalityProbeResult probe_causality(const OperatorConfig& config, int m,
                                     const AnalyticSignal& a, const AnalyticSignal& b,
                                     double t_split, double t_end, double dt) {
    const OperatorFactory factory = [&config, m](const AnalyticSignal&) {
        return make_operator(config, m);
    };
    return probe_causality(factory, a, b, t_split, t_end, dt);
}

double probe_bibo(const OperatorConfig& config, int m, double c0,
                  const std::vector<AnalyticSignal>& suite, double t_end, double dt) {
    if (!(c0 > 0.0)) throw std::invalid_argument("probe_bibo: c0 must be positive");
    const auto times = probe_grid(t_end, dt);

    double c1 = 0.0;
    for (const auto& sig : suite) {
        for (const double t : times) {
            if (sig.y(t).norm() > c0 * (1.0 + 1e-9)) {
                throw std::invalid_argument(
                    "probe_bibo: suite signal violates the first-argument bound c0");
            }
        }
        auto op = make_operator(config, m);
        const auto outputs = drive_operator(*op, sig, times);
        for (const Vec& w : outputs) c1 = std::max(c1, w.norm());
    }
    return c1;
}

}  // namespace fsim
