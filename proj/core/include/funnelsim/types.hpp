#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when a scenario file cannot be parsed as JSON.
class ScenarioParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a scenario parses but violates the schema. The message
/// names the offending field.
class ScenarioValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a stateful operator is queried past the time it has been
/// advanced to.
class OperatorStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline bool all_finite(const Vec& v) {
    return v.allFinite();
}

}  // namespace fsim
