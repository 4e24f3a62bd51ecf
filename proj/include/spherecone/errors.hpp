#pragma once

#include <stdexcept>
#include <string>

namespace spherecone {

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateTriangle : DomainError {
    using DomainError::DomainError;
};

struct TopologyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NeedsRefinement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NearCriticalLevel : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SaddleInInterval : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EstimateInapplicable : DomainError {
    using DomainError::DomainError;
};

struct ArcTooLong : DomainError {
    using DomainError::DomainError;
};

struct BasepointOnLoop : DomainError {
    using DomainError::DomainError;
};

struct NotEssential : DomainError {
    using DomainError::DomainError;
};

struct NotHalfInteger : DomainError {
    using DomainError::DomainError;
};

struct LoopThroughCone : DomainError {
    using DomainError::DomainError;
};

struct TooManyPoints : DomainError {
    using DomainError::DomainError;
};

struct WrongRegime : DomainError {
    using DomainError::DomainError;
};

struct UnknownFamily : DomainError {
    using DomainError::DomainError;
};

} // namespace spherecone
