#pragma once

#include <stdexcept>
#include <string>

namespace etlsched {

// invalid configuration (bad JSON, out-of-range parameter); CLI maps this to exit 2
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// malformed workload (cycle, dangling edge)
class WorkloadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// illegal assignment (full node, memory exceeded); callers treat this as an invalid action
class AssignmentRejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// non-finite value in training or simulation; CLI maps this to exit 3
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace etlsched
