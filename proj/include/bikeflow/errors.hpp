#pragma once

#include <stdexcept>
#include <string>

namespace bikeflow {

/// Base for every error raised by the engine. `code()` is a stable,
/// machine-readable token used by the service layer and the CLI.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    [[nodiscard]] const std::string& code() const noexcept { return code_; }

  private:
    std::string code_;
};

/// Caller broke an operation's precondition (bad argument, wrong stage).
class PreconditionError : public Error {
  public:
    explicit PreconditionError(const std::string& message) : Error("precondition", message) {}
    PreconditionError(std::string code, const std::string& message)
        : Error(std::move(code), message) {}
};

class NotFoundError : public Error {
  public:
    explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

/// Stored artifact content does not match the hash recorded in the run log.
class IntegrityError : public Error {
  public:
    IntegrityError(std::string artifact, const std::string& message)
        : Error("integrity", message), artifact_(std::move(artifact)) {}

    [[nodiscard]] const std::string& artifact() const noexcept { return artifact_; }

  private:
    std::string artifact_;
};

}  // namespace bikeflow
