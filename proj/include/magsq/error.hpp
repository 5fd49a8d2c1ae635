#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace magsq {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedSpaceError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class InvariantError : public Error { public: using Error::Error; };
class StepSizeError : public Error { public: using Error::Error; };
class DegenerateFitError : public Error { public: using Error::Error; };
class ModelError : public Error { public: using Error::Error; };

/// Collects non-fatal warnings (truncation guards, under-determined fits).
/// Callers own the instance; library functions only append to it.
struct Diagnostics {
    std::vector<std::string> messages;

    void warn(std::string msg) { messages.push_back(std::move(msg)); }
    bool empty() const noexcept { return messages.empty(); }
    std::size_t size() const noexcept { return messages.size(); }
};

inline void warn_if(Diagnostics* diag, bool cond, const std::string& msg) {
    if (cond && diag != nullptr) diag->warn(msg);
}

}  // namespace magsq
