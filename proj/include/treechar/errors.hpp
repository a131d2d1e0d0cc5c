#pragma once

#include <stdexcept>
#include <string>

namespace treechar {

struct Error : std::runtime_error {
    explicit Error(const std::string& m) : std::runtime_error(m) {}
};

// Significant p-adic digits dropped below 1; never silently truncated.
struct PrecisionExhausted : Error {
    explicit PrecisionExhausted(const std::string& m) : Error("precision exhausted: " + m) {}
};

struct SingularMatrix : Error {
    explicit SingularMatrix(const std::string& m) : Error("singular matrix: " + m) {}
};

struct NotRegular : Error {
    explicit NotRegular(const std::string& m) : Error("not regular semisimple: " + m) {}
};

struct NotCompact : Error {
    explicit NotCompact(const std::string& m) : Error("not a compact element: " + m) {}
};

struct BudgetExceeded : Error {
    explicit BudgetExceeded(const std::string& m) : Error("budget exceeded: " + m) {}
};

struct WindowEscape : Error {
    explicit WindowEscape(const std::string& m) : Error("support escapes window: " + m) {}
};

struct NonCycle : Error {
    explicit NonCycle(const std::string& m) : Error("not a cycle: " + m) {}
};

struct DepthInsufficient : Error {
    explicit DepthInsufficient(const std::string& m) : Error("depth insufficient: " + m) {}
};

struct NicenessFailure : Error {
    explicit NicenessFailure(const std::string& m) : Error("niceness violated: " + m) {}
};

struct FacetNotFixed : Error {
    explicit FacetNotFixed(const std::string& m) : Error("facet not fixed: " + m) {}
};

struct FiberCoercionError : Error {
    explicit FiberCoercionError(const std::string& m) : Error("fiber coercion failed: " + m) {}
};

struct KTooLarge : Error {
    explicit KTooLarge(const std::string& m) : Error("K-constancy precondition failed: " + m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config error: " + m) {}
};

}  // namespace treechar
