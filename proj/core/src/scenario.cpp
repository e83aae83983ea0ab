#include "funnelsim/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "funnelsim/controllers.hpp"

namespace fsim {

using nlohmann::json;

bool ComparisonControllerSpec::operator==(const ComparisonControllerSpec& other) const {
    return p1 == other.p1 && p2 == other.p2 && q1 == other.q1 && q2 == other.q2 &&
           Gamma_tilde.rows() == other.Gamma_tilde.rows() &&
           Gamma_tilde.cols() == other.Gamma_tilde.cols() &&
           (Gamma_tilde.size() == 0 ||
            (Gamma_tilde.array() == other.Gamma_tilde.array()).all()) &&
           phi0 == other.phi0 && phi1 == other.phi1 && phi2 == other.phi2 &&
           z1_0 == other.z1_0 && z2_0 == other.z2_0;
}

int Scenario::dim() const {
    if (const auto* bench = std::get_if<BenchmarkPlantSpec>(&plant)) {
        (void)bench;
        return 1;
    }
    return std::get<GeneralPlantSpec>(plant).model.m;
}

PlantModel Scenario::plant_model() const {
    if (const auto* bench = std::get_if<BenchmarkPlantSpec>(&plant)) {
        PlantModel model = make_benchmark(bench->a, bench->b);
        model.y0 = bench->y0;
        model.ydot0 = bench->ydot0;
        return model;
    }
    return std::get<GeneralPlantSpec>(plant).model;
}

bool Scenario::operator==(const Scenario& other) const {
    return label == other.label && plant == other.plant && controller == other.controller &&
           funnel == other.funnel && reference == other.reference && sim == other.sim;
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void fail(const std::string& ctx, const std::string& message) {
    throw ScenarioValidationError(ctx + ": " + message);
}

const json& require_key(const json& obj, const char* key, const std::string& ctx) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(ctx, std::string("missing required key '") + key + "'");
    return *it;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    if (!obj.is_object()) fail(ctx, "expected an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) fail(ctx, "unknown key '" + item.key() + "'");
    }
}

double get_number(const json& obj, const char* key, const std::string& ctx) {
    const json& v = require_key(obj, key, ctx);
    if (!v.is_number()) fail(ctx + "." + key, "must be a number");
    return v.get<double>();
}

double get_positive(const json& obj, const char* key, const std::string& ctx) {
    const double v = get_number(obj, key, ctx);
    if (!(v > 0.0)) fail(ctx + "." + key, "must be positive");
    return v;
}

std::string get_type_tag(const json& obj, const std::string& ctx) {
    const json& v = require_key(obj, "type", ctx);
    if (!v.is_string()) fail(ctx + ".type", "must be a string");
    return v.get<std::string>();
}

Vec parse_vector(const json& v, const std::string& ctx) {
    if (!v.is_array() || v.empty()) fail(ctx, "must be a nonempty array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(ctx, "must contain only numbers");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

Vec get_vector(const json& obj, const char* key, const std::string& ctx) {
    return parse_vector(require_key(obj, key, ctx), ctx + "." + key);
}

Mat parse_matrix(const json& v, const std::string& ctx) {
    if (!v.is_array() || v.empty()) fail(ctx, "must be a nonempty array of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].empty()) fail(ctx, "rows must be nonempty arrays");
        if (i == 0) {
            cols = v[i].size();
        } else if (v[i].size() != cols) {
            fail(ctx, "rows must all have the same length");
        }
    }
    Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (!v[i][j].is_number()) fail(ctx, "must contain only numbers");
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                v[i][j].get<double>();
        }
    }
    return out;
}

Mat get_matrix(const json& obj, const char* key, const std::string& ctx) {
    return parse_matrix(require_key(obj, key, ctx), ctx + "." + key);
}

// ---- funnel ----------------------------------------------------------------

FunnelFunction parse_funnel(const json& obj, const std::string& ctx) {
    const std::string type = get_type_tag(obj, ctx);
    if (type == "constant") {
        check_keys(obj, {"type", "value"}, ctx);
        const double value = get_number(obj, "value", ctx);
        if (value < 0.0) fail(ctx + ".value", "must be nonnegative");
        return FunnelFunction::constant(value);
    }
    if (type == "saturating_quadratic") {
        check_keys(obj, {"type", "kappa", "t_sat"}, ctx);
        return FunnelFunction::saturating_quadratic(get_positive(obj, "kappa", ctx),
                                                    get_positive(obj, "t_sat", ctx));
    }
    if (type == "logistic") {
        check_keys(obj, {"type"}, ctx);
        return FunnelFunction::logistic();
    }
    if (type == "composite") {
        check_keys(obj, {"type", "a", "b"}, ctx);
        return FunnelFunction::composite(parse_funnel(require_key(obj, "a", ctx), ctx + ".a"),
                                         parse_funnel(require_key(obj, "b", ctx), ctx + ".b"));
    }
    fail(ctx + ".type",
         "unknown funnel family '" + type +
             "' (expected constant, saturating_quadratic, logistic or composite)");
}

json funnel_to_json(const FunnelFunction& phi) {
    json obj;
    switch (phi.family()) {
        case FunnelFamily::kConstant:
            obj["type"] = "constant";
            obj["value"] = phi.value();
            return obj;
        case FunnelFamily::kSaturatingQuadratic:
            obj["type"] = "saturating_quadratic";
            obj["kappa"] = phi.kappa();
            obj["t_sat"] = phi.t_sat();
            return obj;
        case FunnelFamily::kLogistic:
            obj["type"] = "logistic";
            return obj;
        case FunnelFamily::kComposite:
            obj["type"] = "composite";
            obj["a"] = funnel_to_json(phi.child_a());
            obj["b"] = funnel_to_json(phi.child_b());
            return obj;
        case FunnelFamily::kCustom:
            break;
    }
    throw ScenarioValidationError("custom funnel functions cannot be serialized");
}

// ---- reference -------------------------------------------------------------

ReferenceSignal parse_reference(const json& obj, const std::string& ctx) {
    const std::string type = get_type_tag(obj, ctx);
    if (type == "constant") {
        check_keys(obj, {"type", "values"}, ctx);
        return ReferenceSignal::constant(get_vector(obj, "values", ctx));
    }
    if (type == "scaled_cosine") {
        check_keys(obj, {"type", "amplitude", "omega"}, ctx);
        return ReferenceSignal::scaled_cosine(get_vector(obj, "amplitude", ctx),
                                              get_number(obj, "omega", ctx));
    }
    if (type == "sinusoid_sum") {
        check_keys(obj, {"type", "components"}, ctx);
        const json& comps = require_key(obj, "components", ctx);
        if (!comps.is_array() || comps.empty()) {
            fail(ctx + ".components", "must be a nonempty array (one term list per component)");
        }
        std::vector<std::vector<SinusoidTerm>> components;
        for (std::size_t i = 0; i < comps.size(); ++i) {
            const std::string comp_ctx = ctx + ".components[" + std::to_string(i) + "]";
            if (!comps[i].is_array()) fail(comp_ctx, "must be an array of terms");
            std::vector<SinusoidTerm> terms;
            for (std::size_t j = 0; j < comps[i].size(); ++j) {
                const json& term = comps[i][j];
                const std::string term_ctx = comp_ctx + "[" + std::to_string(j) + "]";
                check_keys(term, {"amplitude", "omega", "phase"}, term_ctx);
                SinusoidTerm st;
                st.amplitude = get_number(term, "amplitude", term_ctx);
                st.omega = get_number(term, "omega", term_ctx);
                st.phase = term.contains("phase") ? get_number(term, "phase", term_ctx) : 0.0;
                terms.push_back(st);
            }
            components.push_back(std::move(terms));
        }
        return ReferenceSignal::sinusoid_sum(std::move(components));
    }
    fail(ctx + ".type", "unknown reference family '" + type +
                            "' (expected constant, scaled_cosine or sinusoid_sum)");
}

json vector_to_json(const Vec& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json reference_to_json(const ReferenceSignal& r) {
    json obj;
    switch (r.family()) {
        case ReferenceFamily::kConstant:
            obj["type"] = "constant";
            obj["values"] = vector_to_json(r.values());
            return obj;
        case ReferenceFamily::kScaledCosine:
            obj["type"] = "scaled_cosine";
            obj["amplitude"] = vector_to_json(r.amplitude());
            obj["omega"] = r.omega();
            return obj;
        case ReferenceFamily::kSinusoidSum: {
            obj["type"] = "sinusoid_sum";
            json comps = json::array();
            for (const auto& terms : r.components()) {
                json list = json::array();
                for (const auto& term : terms) {
                    json t;
                    t["amplitude"] = term.amplitude;
                    t["omega"] = term.omega;
                    t["phase"] = term.phase;
                    list.push_back(std::move(t));
                }
                comps.push_back(std::move(list));
            }
            obj["components"] = std::move(comps);
            return obj;
        }
    }
    throw ScenarioValidationError("unserializable reference signal");
}

// ---- plant -----------------------------------------------------------------

Nonlinearity parse_nonlinearity(const json& obj, const std::string& ctx) {
    const std::string type = get_type_tag(obj, ctx);
    if (type == "pendulum_sine") {
        check_keys(obj, {"type", "a"}, ctx);
        return Nonlinearity::pendulum_sine(get_number(obj, "a", ctx));
    }
    if (type == "cubic") {
        check_keys(obj, {"type", "alpha"}, ctx);
        return Nonlinearity::cubic(get_number(obj, "alpha", ctx));
    }
    if (type == "tanh") {
        check_keys(obj, {"type", "gain"}, ctx);
        return Nonlinearity::tanh_gain(get_number(obj, "gain", ctx));
    }
    fail(ctx + ".type",
         "unknown nonlinearity '" + type + "' (expected pendulum_sine, cubic or tanh)");
}

json nonlinearity_to_json(const Nonlinearity& f) {
    json obj;
    switch (f.kind) {
        case NonlinearityKind::kPendulumSine:
            obj["type"] = "pendulum_sine";
            obj["a"] = f.param;
            return obj;
        case NonlinearityKind::kCubic:
            obj["type"] = "cubic";
            obj["alpha"] = f.param;
            return obj;
        case NonlinearityKind::kTanh:
            obj["type"] = "tanh";
            obj["gain"] = f.param;
            return obj;
    }
    throw ScenarioValidationError("unserializable nonlinearity");
}

OperatorConfig parse_operator(const json& obj, const std::string& ctx) {
    const std::string type = get_type_tag(obj, ctx);
    try {
        if (type == "memoryless") {
            check_keys(obj, {"type"}, ctx);
            return OperatorConfig::memoryless();
        }
        if (type == "delay") {
            check_keys(obj, {"type", "tau"}, ctx);
            return OperatorConfig::delay(get_positive(obj, "tau", ctx));
        }
        if (type == "linear_internal") {
            check_keys(obj, {"type", "A", "B", "eta0"}, ctx);
            return OperatorConfig::linear_internal(get_matrix(obj, "A", ctx),
                                                   get_matrix(obj, "B", ctx),
                                                   get_vector(obj, "eta0", ctx));
        }
        if (type == "saturated_derivative") {
            check_keys(obj, {"type", "s"}, ctx);
            return OperatorConfig::saturated_derivative(get_positive(obj, "s", ctx));
        }
    } catch (const std::invalid_argument& e) {
        fail(ctx, e.what());
    }
    fail(ctx + ".type",
         "unknown operator '" + type +
             "' (expected memoryless, delay, linear_internal or saturated_derivative)");
}

json operator_to_json(const OperatorConfig& op) {
    json obj;
    switch (op.kind) {
        case OperatorKind::kMemoryless:
            obj["type"] = "memoryless";
            return obj;
        case OperatorKind::kDelay:
            obj["type"] = "delay";
            obj["tau"] = op.tau;
            return obj;
        case OperatorKind::kLinearInternal:
            obj["type"] = "linear_internal";
            obj["A"] = matrix_to_json(op.A);
            obj["B"] = matrix_to_json(op.B);
            obj["eta0"] = vector_to_json(op.eta0);
            return obj;
        case OperatorKind::kSaturatedDerivative:
            obj["type"] = "saturated_derivative";
            obj["s"] = op.saturation;
            return obj;
    }
    throw ScenarioValidationError("unserializable operator");
}

PlantSpec parse_plant(const json& obj, const std::string& ctx) {
    const std::string type = get_type_tag(obj, ctx);
    if (type == "benchmark") {
        check_keys(obj, {"type", "a", "b", "y0", "ydot0"}, ctx);
        BenchmarkPlantSpec spec;
        spec.a = get_number(obj, "a", ctx);
        spec.b = get_number(obj, "b", ctx);
        if (!(spec.b > 0.0)) fail(ctx + ".b", "must be positive (Gamma = b > 0)");
        spec.y0 = obj.contains("y0") ? get_vector(obj, "y0", ctx) : Vec::Zero(1);
        spec.ydot0 = obj.contains("ydot0") ? get_vector(obj, "ydot0", ctx) : Vec::Zero(1);
        if (spec.y0.size() != 1 || spec.ydot0.size() != 1) {
            fail(ctx, "benchmark plant initial state must have dimension 1");
        }
        return spec;
    }
    if (type == "general") {
        check_keys(obj, {"type", "m", "R1", "R2", "Gamma", "f", "operator", "y0", "ydot0"}, ctx);
        const json& mval = require_key(obj, "m", ctx);
        if (!mval.is_number_integer() || mval.get<int>() < 1) {
            fail(ctx + ".m", "must be a positive integer");
        }
        const int m = mval.get<int>();
        try {
            PlantModel model(m, get_matrix(obj, "R1", ctx), get_matrix(obj, "R2", ctx),
                             get_matrix(obj, "Gamma", ctx),
                             parse_nonlinearity(require_key(obj, "f", ctx), ctx + ".f"),
                             parse_operator(require_key(obj, "operator", ctx), ctx + ".operator"),
                             get_vector(obj, "y0", ctx), get_vector(obj, "ydot0", ctx));
            return GeneralPlantSpec{std::move(model)};
        } catch (const std::invalid_argument& e) {
            fail(ctx, e.what());
        }
    }
    fail(ctx + ".type", "unknown plant type '" + type + "' (expected benchmark or general)");
}

json plant_to_json(const PlantSpec& plant) {
    json obj;
    if (const auto* bench = std::get_if<BenchmarkPlantSpec>(&plant)) {
        obj["type"] = "benchmark";
        obj["a"] = bench->a;
        obj["b"] = bench->b;
        obj["y0"] = vector_to_json(bench->y0);
        obj["ydot0"] = vector_to_json(bench->ydot0);
        return obj;
    }
    const PlantModel& model = std::get<GeneralPlantSpec>(plant).model;
    obj["type"] = "general";
    obj["m"] = model.m;
    obj["R1"] = matrix_to_json(model.R1);
    obj["R2"] = matrix_to_json(model.R2);
    obj["Gamma"] = matrix_to_json(model.Gamma);
    obj["f"] = nonlinearity_to_json(model.f);
    obj["operator"] = operator_to_json(model.op);
    obj["y0"] = vector_to_json(model.y0);
    obj["ydot0"] = vector_to_json(model.ydot0);
    return obj;
}

// ---- controller ------------------------------------------------------------

ControllerSpec parse_controller(const json& obj, const std::string& ctx) {
    const std::string type = get_type_tag(obj, ctx);
    if (type == "filter_funnel") {
        check_keys(obj, {"type", "theta_hat", "xi0"}, ctx);
        FilterControllerSpec spec;
        spec.theta_hat = get_number(obj, "theta_hat", ctx);
        if (!(spec.theta_hat > 0.0)) fail(ctx, "theta_hat must be positive");
        spec.xi0 = get_vector(obj, "xi0", ctx);
        return spec;
    }
    if (type == "comparison") {
        check_keys(obj,
                   {"type", "p1", "p2", "q1", "q2", "Gamma_tilde", "phi0", "phi1", "phi2",
                    "z1_0", "z2_0"},
                   ctx);
        ComparisonControllerSpec spec{
            get_number(obj, "p1", ctx),
            get_number(obj, "p2", ctx),
            get_number(obj, "q1", ctx),
            get_number(obj, "q2", ctx),
            get_matrix(obj, "Gamma_tilde", ctx),
            parse_funnel(require_key(obj, "phi0", ctx), ctx + ".phi0"),
            parse_funnel(require_key(obj, "phi1", ctx), ctx + ".phi1"),
            parse_funnel(require_key(obj, "phi2", ctx), ctx + ".phi2"),
            get_vector(obj, "z1_0", ctx),
            get_vector(obj, "z2_0", ctx)};
        return spec;
    }
    fail(ctx + ".type",
         "unknown controller '" + type + "' (expected filter_funnel or comparison)");
}

json controller_to_json(const ControllerSpec& ctrl) {
    json obj;
    if (const auto* filter = std::get_if<FilterControllerSpec>(&ctrl)) {
        obj["type"] = "filter_funnel";
        obj["theta_hat"] = filter->theta_hat;
        obj["xi0"] = vector_to_json(filter->xi0);
        return obj;
    }
    const auto& cmp = std::get<ComparisonControllerSpec>(ctrl);
    obj["type"] = "comparison";
    obj["p1"] = cmp.p1;
    obj["p2"] = cmp.p2;
    obj["q1"] = cmp.q1;
    obj["q2"] = cmp.q2;
    obj["Gamma_tilde"] = matrix_to_json(cmp.Gamma_tilde);
    obj["phi0"] = funnel_to_json(cmp.phi0);
    obj["phi1"] = funnel_to_json(cmp.phi1);
    obj["phi2"] = funnel_to_json(cmp.phi2);
    obj["z1_0"] = vector_to_json(cmp.z1_0);
    obj["z2_0"] = vector_to_json(cmp.z2_0);
    return obj;
}

// ---- sim block and cross-field validation ----------------------------------

SimSpec parse_sim(const json& obj, const std::string& ctx) {
    check_keys(obj, {"t_end", "rel_tol", "abs_tol", "output_dt"}, ctx);
    SimSpec sim;
    sim.t_end = get_positive(obj, "t_end", ctx);
    sim.rel_tol = get_positive(obj, "rel_tol", ctx);
    sim.abs_tol = get_positive(obj, "abs_tol", ctx);
    sim.output_dt = get_positive(obj, "output_dt", ctx);
    if (!(sim.output_dt < sim.t_end)) fail(ctx + ".output_dt", "must be below t_end");
    return sim;
}

void cross_validate(const Scenario& s) {
    const int m = s.dim();
    if (s.reference.dim() != m) {
        throw ScenarioValidationError("reference: dimension " +
                                      std::to_string(s.reference.dim()) +
                                      " does not match plant dimension " + std::to_string(m));
    }
    if (const auto* filter = std::get_if<FilterControllerSpec>(&s.controller)) {
        if (filter->xi0.size() != m) {
            throw ScenarioValidationError("controller.xi0: dimension must match plant dimension");
        }
    } else {
        const auto& cmp = std::get<ComparisonControllerSpec>(s.controller);
        // Constructing the params validates Gamma_tilde invertibility and dims.
        try {
            ComparisonControllerParams params(cmp.p1, cmp.p2, cmp.q1, cmp.q2, cmp.Gamma_tilde,
                                              cmp.phi0, cmp.phi1, cmp.phi2, cmp.z1_0, cmp.z2_0,
                                              s.reference);
        } catch (const std::invalid_argument& e) {
            throw ScenarioValidationError(std::string("controller: ") + e.what());
        }
    }
}

Scenario parse_scenario(const json& root) {
    check_keys(root, {"label", "plant", "controller", "funnel", "reference", "sim"}, "scenario");
    std::string label;
    if (root.contains("label")) {
        if (!root["label"].is_string()) {
            throw ScenarioValidationError("scenario.label: must be a string");
        }
        label = root["label"].get<std::string>();
    }
    Scenario s{label,
               parse_plant(require_key(root, "plant", "scenario"), "plant"),
               parse_controller(require_key(root, "controller", "scenario"), "controller"),
               parse_funnel(require_key(root, "funnel", "scenario"), "funnel"),
               parse_reference(require_key(root, "reference", "scenario"), "reference"),
               parse_sim(require_key(root, "sim", "scenario"), "sim")};
    cross_validate(s);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

Scenario scenario_from_json_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioParseError(origin + ": " + e.what());
    }
    if (!root.is_object()) {
        throw ScenarioValidationError(origin + ": top-level value must be an object");
    }
    return parse_scenario(root);
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ScenarioParseError("cannot open scenario file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return scenario_from_json_text(buffer.str(), path.string());
}

std::string scenario_to_json_text(const Scenario& s) {
    json root;
    if (!s.label.empty()) root["label"] = s.label;
    root["plant"] = plant_to_json(s.plant);
    root["controller"] = controller_to_json(s.controller);
    root["funnel"] = funnel_to_json(s.funnel);
    root["reference"] = reference_to_json(s.reference);
    json sim;
    sim["t_end"] = s.sim.t_end;
    sim["rel_tol"] = s.sim.rel_tol;
    sim["abs_tol"] = s.sim.abs_tol;
    sim["output_dt"] = s.sim.output_dt;
    root["sim"] = std::move(sim);
    return root.dump(2) + "\n";
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open file for writing: " + path.string());
    }
    out << scenario_to_json_text(s);
}

Scenario with_parameter(const Scenario& s, const std::string& dotted_path, double value) {
    json root = json::parse(scenario_to_json_text(s));

    std::vector<std::string> segments;
    std::string segment;
    std::istringstream stream(dotted_path);
    while (std::getline(stream, segment, '.')) {
        if (segment.empty()) {
            throw ScenarioValidationError("parameter path '" + dotted_path +
                                          "' contains an empty segment");
        }
        segments.push_back(segment);
    }
    if (segments.empty()) {
        throw ScenarioValidationError("parameter path must not be empty");
    }

    json* node = &root;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        if (!node->is_object() || !node->contains(segments[i])) {
            throw ScenarioValidationError("parameter path '" + dotted_path +
                                          "' does not resolve: missing '" + segments[i] + "'");
        }
        node = &(*node)[segments[i]];
    }
    const std::string& leaf = segments.back();
    if (!node->is_object() || !node->contains(leaf) || !(*node)[leaf].is_number()) {
        throw ScenarioValidationError("parameter path '" + dotted_path +
                                      "' does not resolve to a scalar");
    }
    (*node)[leaf] = value;
    return parse_scenario(root);
}

}  // namespace fsim
