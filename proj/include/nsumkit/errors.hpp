#pragma once

#include <stdexcept>
#include <string>

namespace nsumkit {

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Caller omitted required input (e.g. Killworth model without degrees).
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Sample carries no information about N (sum of degrees is zero).
struct DegenerateSampleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model/method combination with no closed form.
struct UnsupportedError : std::logic_error {
    using std::logic_error::logic_error;
};

// Computation refused on size grounds (ERGM beyond M = 1000).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_domain(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

} // namespace detail
} // namespace nsumkit
