#include "funnelsim/signals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fsim {

namespace {

void require_nonnegative_time(double t, const char* what) {
    if (t < 0.0) {
        throw std::domain_error(std::string(what) + ": time must be nonnegative, got " + std::to_string(t));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// FunnelFunction
// ---------------------------------------------------------------------------

struct FunnelFunction::Impl {
    FunnelFamily family = FunnelFamily::kConstant;
    double value = 0.0;    // constant
    double kappa = 0.0;    // saturating quadratic
    double t_sat = 0.0;
    std::shared_ptr<const Impl> child_a;
    std::shared_ptr<const Impl> child_b;
    std::function<double(double)> custom_eval;
    std::function<double(double)> custom_deriv;

    double eval(double t) const {
        switch (family) {
            case FunnelFamily::kConstant:
                return value;
            case FunnelFamily::kSaturatingQuadratic: {
                if (t >= t_sat) return kappa;
                const double w = t / t_sat - 1.0;
                return kappa * (1.0 - w * w);
            }
            case FunnelFamily::kLogistic:
                return 1.0 / (std::exp(-t) + 1.0);
            case FunnelFamily::kComposite: {
                const double a = child_a->eval(t);
                const double b = child_b->eval(t);
                const double s = a + b;
                if (s == 0.0) return 0.0;  // both components vanish
                return a * b / s;
            }
            case FunnelFamily::kCustom:
                return custom_eval(t);
        }
        return 0.0;
    }

    double deriv(double t) const {
        switch (family) {
            case FunnelFamily::kConstant:
                return 0.0;
            case FunnelFamily::kSaturatingQuadratic: {
                if (t >= t_sat) return 0.0;  // right-hand derivative at the breakpoint
                const double w = t / t_sat - 1.0;
                return -2.0 * kappa * w / t_sat;
            }
            case FunnelFamily::kLogistic: {
                const double em = std::exp(-t);
                const double den = em + 1.0;
                return em / (den * den);
            }
            case FunnelFamily::kComposite: {
                const double a = child_a->eval(t);
                const double b = child_b->eval(t);
                const double da = child_a->deriv(t);
                const double db = child_b->deriv(t);
                const double s = a + b;
                if (s == 0.0) {
                    // Both components vanish; if both grow linearly the
                    // composite grows like their reciprocal-sum slope.
                    const double sd = da + db;
                    return sd == 0.0 ? 0.0 : da * db / sd;
                }
                return (da * b * b + db * a * a) / (s * s);
            }
            case FunnelFamily::kCustom:
                return custom_deriv(t);
        }
        return 0.0;
    }

    bool equals(const Impl& other) const {
        if (family != other.family) return false;
        switch (family) {
            case FunnelFamily::kConstant:
                return value == other.value;
            case FunnelFamily::kSaturatingQuadratic:
                return kappa == other.kappa && t_sat == other.t_sat;
            case FunnelFamily::kLogistic:
                return true;
            case FunnelFamily::kComposite:
                return (child_a == other.child_a || child_a->equals(*other.child_a)) &&
                       (child_b == other.child_b || child_b->equals(*other.child_b));
            case FunnelFamily::kCustom:
                return this == &other;
        }
        return false;
    }
};

FunnelFunction::FunnelFunction(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

FunnelFunction FunnelFunction::constant(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument("constant funnel value must be finite and nonnegative");
    }
    auto impl = std::make_shared<Impl>();
    impl->family = FunnelFamily::kConstant;
    impl->value = value;
    return FunnelFunction(std::move(impl));
}

FunnelFunction FunnelFunction::saturating_quadratic(double kappa, double t_sat) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw std::invalid_argument("saturating_quadratic: kappa must be positive");
    }
    if (!(t_sat > 0.0) || !std::isfinite(t_sat)) {
        throw std::invalid_argument("saturating_quadratic: t_sat must be positive");
    }
    auto impl = std::make_shared<Impl>();
    impl->family = FunnelFamily::kSaturatingQuadratic;
    impl->kappa = kappa;
    impl->t_sat = t_sat;
    return FunnelFunction(std::move(impl));
}

FunnelFunction FunnelFunction::logistic() {
    auto impl = std::make_shared<Impl>();
    impl->family = FunnelFamily::kLogistic;
    return FunnelFunction(std::move(impl));
}

FunnelFunction FunnelFunction::composite(FunnelFunction a, FunnelFunction b) {
    auto impl = std::make_shared<Impl>();
    impl->family = FunnelFamily::kComposite;
    impl->child_a = a.impl_;
    impl->child_b = b.impl_;
    return FunnelFunction(std::move(impl));
}

FunnelFunction FunnelFunction::custom(std::function<double(double)> eval,
                                      std::function<double(double)> deriv) {
    if (!eval || !deriv) {
        throw std::invalid_argument("custom funnel requires both eval and deriv callables");
    }
    auto impl = std::make_shared<Impl>();
    impl->family = FunnelFamily::kCustom;
    impl->custom_eval = std::move(eval);
    impl->custom_deriv = std::move(deriv);
    return FunnelFunction(std::move(impl));
}

double FunnelFunction::eval(double t) const {
    require_nonnegative_time(t, "FunnelFunction::eval");
    return impl_->eval(t);
}

double FunnelFunction::deriv(double t) const {
    require_nonnegative_time(t, "FunnelFunction::deriv");
    return impl_->deriv(t);
}

FunnelFamily FunnelFunction::family() const { return impl_->family; }
double FunnelFunction::value() const { return impl_->value; }
double FunnelFunction::kappa() const { return impl_->kappa; }
double FunnelFunction::t_sat() const { return impl_->t_sat; }

FunnelFunction FunnelFunction::child_a() const {
    if (!impl_->child_a) throw std::logic_error("child_a: not a composite funnel");
    return FunnelFunction(impl_->child_a);
}

FunnelFunction FunnelFunction::child_b() const {
    if (!impl_->child_b) throw std::logic_error("child_b: not a composite funnel");
    return FunnelFunction(impl_->child_b);
}

bool FunnelFunction::operator==(const FunnelFunction& other) const {
    if (impl_ == other.impl_) return true;
    return impl_->equals(*other.impl_);
}

std::pair<double, double> funnel_eval(const FunnelFunction& phi, double t) {
    require_nonnegative_time(t, "funnel_eval");
    return {phi.eval(t), phi.deriv(t)};
}

FunnelFunction funnel_composite(const FunnelFunction& phi_a, const FunnelFunction& phi_b) {
    return FunnelFunction::composite(phi_a, phi_b);
}

// ---------------------------------------------------------------------------
// validate_class_G
// ---------------------------------------------------------------------------

ValidationReport validate_class_G(const FunnelFunction& phi, double horizon, double grid_step) {
    if (!(horizon > 0.0)) throw std::invalid_argument("validate_class_G: horizon must be positive");
    if (!(grid_step > 0.0)) throw std::invalid_argument("validate_class_G: grid_step must be positive");

    std::vector<double> times;
    for (double t = 0.0; t < horizon + 0.5 * grid_step; t += grid_step) {
        times.push_back(std::min(t, horizon));
    }
    if (times.back() < horizon) times.push_back(horizon);

    std::vector<double> vals(times.size());
    ValidationReport report;
    report.inf_value = std::numeric_limits<double>::infinity();
    report.sup_value = -std::numeric_limits<double>::infinity();
    report.sup_abs_deriv = 0.0;

    bool finite = true;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double v = phi.eval(times[i]);
        const double d = phi.deriv(times[i]);
        vals[i] = v;
        if (!std::isfinite(v) || !std::isfinite(d)) finite = false;
        report.inf_value = std::min(report.inf_value, v);
        report.sup_value = std::max(report.sup_value, v);
        report.sup_abs_deriv = std::max(report.sup_abs_deriv, std::abs(d));
    }

    if (!finite) {
        report.verdict = Verdict::kFail;
        report.notes = "non-finite value or derivative on the sampling grid";
        return report;
    }

    constexpr double kZeroTol = 1e-12;
    if (report.inf_value < -kZeroTol) {
        report.verdict = Verdict::kFail;
        report.notes = "funnel function takes negative values";
        return report;
    }

    // Zeros: isolated zeros give an infinite radius at single instants and
    // are tolerated; zeros on an interval are not.
    bool has_zero = false;
    bool adjacent_zeros = false;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (std::abs(vals[i]) <= kZeroTol) {
            has_zero = true;
            if (i + 1 < vals.size() && std::abs(vals[i + 1]) <= kZeroTol) adjacent_zeros = true;
        }
    }
    if (adjacent_zeros) {
        report.verdict = Verdict::kFail;
        report.notes = "funnel function vanishes on an interval of the grid";
        return report;
    }

    // Monotone-decay heuristic: a strictly decreasing tail whose infimum sits
    // at the horizon and is tiny relative to the sup indicates decay toward
    // zero, so the positive-infimum condition cannot hold on [0, inf).
    const std::size_t n = vals.size();
    const std::size_t tail = std::max<std::size_t>(10, n / 4);
    if (n > tail + 1) {
        bool strictly_decreasing = true;
        for (std::size_t i = n - tail; i + 1 < n; ++i) {
            if (!(vals[i + 1] < vals[i])) {
                strictly_decreasing = false;
                break;
            }
        }
        const bool inf_at_horizon = vals.back() <= report.inf_value + kZeroTol;
        const bool tiny = vals.back() <= 0.01 * report.sup_value;
        if (strictly_decreasing && inf_at_horizon && tiny) {
            report.verdict = Verdict::kFail;
            report.notes = "decays monotonically toward zero at the horizon; inf phi > 0 not plausible";
            return report;
        }
    }

    if (has_zero) {
        std::ostringstream os;
        os << "inf phi = 0 attained at isolated grid points only";
        report.verdict = Verdict::kWarn;
        report.notes = os.str();
        return report;
    }

    report.verdict = Verdict::kPass;
    return report;
}

// ---------------------------------------------------------------------------
// ReferenceSignal
// ---------------------------------------------------------------------------

struct ReferenceSignal::Impl {
    ReferenceFamily family = ReferenceFamily::kConstant;
    Vec values;     // constant
    Vec amplitude;  // scaled cosine
    double omega = 0.0;
    std::vector<std::vector<SinusoidTerm>> components;
    int dim = 0;
};

ReferenceSignal::ReferenceSignal(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

ReferenceSignal ReferenceSignal::constant(Vec values) {
    if (values.size() == 0) throw std::invalid_argument("constant reference needs at least one component");
    auto impl = std::make_shared<Impl>();
    impl->family = ReferenceFamily::kConstant;
    impl->dim = static_cast<int>(values.size());
    impl->values = std::move(values);
    return ReferenceSignal(std::move(impl));
}

ReferenceSignal ReferenceSignal::scaled_cosine(Vec amplitude, double omega) {
    if (amplitude.size() == 0) throw std::invalid_argument("scaled_cosine reference needs at least one component");
    if (!std::isfinite(omega)) throw std::invalid_argument("scaled_cosine: omega must be finite");
    auto impl = std::make_shared<Impl>();
    impl->family = ReferenceFamily::kScaledCosine;
    impl->dim = static_cast<int>(amplitude.size());
    impl->amplitude = std::move(amplitude);
    impl->omega = omega;
    return ReferenceSignal(std::move(impl));
}

ReferenceSignal ReferenceSignal::sinusoid_sum(std::vector<std::vector<SinusoidTerm>> components) {
    if (components.empty()) throw std::invalid_argument("sinusoid_sum reference needs at least one component");
    auto impl = std::make_shared<Impl>();
    impl->family = ReferenceFamily::kSinusoidSum;
    impl->dim = static_cast<int>(components.size());
    impl->components = std::move(components);
    return ReferenceSignal(std::move(impl));
}

int ReferenceSignal::dim() const { return impl_->dim; }

Vec ReferenceSignal::eval(double t) const {
    require_nonnegative_time(t, "ReferenceSignal::eval");
    const Impl& im = *impl_;
    switch (im.family) {
        case ReferenceFamily::kConstant:
            return im.values;
        case ReferenceFamily::kScaledCosine:
            return im.amplitude * std::cos(im.omega * t);
        case ReferenceFamily::kSinusoidSum: {
            Vec out = Vec::Zero(im.dim);
            for (int i = 0; i < im.dim; ++i) {
                for (const auto& term : im.components[static_cast<std::size_t>(i)]) {
                    out[i] += term.amplitude * std::cos(term.omega * t + term.phase);
                }
            }
            return out;
        }
    }
    return Vec::Zero(im.dim);
}

Vec ReferenceSignal::deriv(double t) const {
    require_nonnegative_time(t, "ReferenceSignal::deriv");
    const Impl& im = *impl_;
    switch (im.family) {
        case ReferenceFamily::kConstant:
            return Vec::Zero(im.dim);
        case ReferenceFamily::kScaledCosine:
            return im.amplitude * (-im.omega * std::sin(im.omega * t));
        case ReferenceFamily::kSinusoidSum: {
            Vec out = Vec::Zero(im.dim);
            for (int i = 0; i < im.dim; ++i) {
                for (const auto& term : im.components[static_cast<std::size_t>(i)]) {
                    out[i] -= term.amplitude * term.omega * std::sin(term.omega * t + term.phase);
                }
            }
            return out;
        }
    }
    return Vec::Zero(im.dim);
}

Vec ReferenceSignal::second_deriv(double t) const {
    require_nonnegative_time(t, "ReferenceSignal::second_deriv");
    const Impl& im = *impl_;
    switch (im.family) {
        case ReferenceFamily::kConstant:
            return Vec::Zero(im.dim);
        case ReferenceFamily::kScaledCosine:
            return im.amplitude * (-im.omega * im.omega * std::cos(im.omega * t));
        case ReferenceFamily::kSinusoidSum: {
            Vec out = Vec::Zero(im.dim);
            for (int i = 0; i < im.dim; ++i) {
                for (const auto& term : im.components[static_cast<std::size_t>(i)]) {
                    out[i] -= term.amplitude * term.omega * term.omega *
                              std::cos(term.omega * t + term.phase);
                }
            }
            return out;
        }
    }
    return Vec::Zero(im.dim);
}

ReferenceFamily ReferenceSignal::family() const { return impl_->family; }
const Vec& ReferenceSignal::values() const { return impl_->values; }
const Vec& ReferenceSignal::amplitude() const { return impl_->amplitude; }
double ReferenceSignal::omega() const { return impl_->omega; }
const std::vector<std::vector<SinusoidTerm>>& ReferenceSignal::components() const {
    return impl_->components;
}

bool ReferenceSignal::operator==(const ReferenceSignal& other) const {
    if (impl_ == other.impl_) return true;
    const Impl& a = *impl_;
    const Impl& b = *other.impl_;
    if (a.family != b.family || a.dim != b.dim) return false;
    switch (a.family) {
        case ReferenceFamily::kConstant:
            return a.values == b.values;
        case ReferenceFamily::kScaledCosine:
            return a.amplitude == b.amplitude && a.omega == b.omega;
        case ReferenceFamily::kSinusoidSum:
            return a.components == b.components;
    }
    return false;
}

std::pair<Vec, Vec> reference_eval(const ReferenceSignal& r, double t) {
    require_nonnegative_time(t, "reference_eval");
    return {r.eval(t), r.deriv(t)};
}

}  // namespace fsim
