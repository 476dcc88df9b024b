#pragma once

#include <stdexcept>
#include <string>

namespace homophily {

/// Base class for every failure raised by the library. The `module` tag names
/// the subsystem (corpus, flow, sampler, ...) so the CLI can print a one-line,
/// machine-parsable diagnostic.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(message), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

}  // namespace homophily
