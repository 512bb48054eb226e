#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

namespace crules {

// All library failures carry a stable machine-readable code plus a JSON
// details object so callers (notably the CLI) can emit structured
// diagnostics without parsing message strings.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(std::move(code)), details_(std::move(details)) {}

  const std::string& code() const { return code_; }
  const nlohmann::json& details() const { return details_; }

  nlohmann::json to_json() const {
    return nlohmann::json{{"error", code_}, {"message", what()}, {"details", details_}};
  }

private:
  std::string code_;
  nlohmann::json details_;
};

inline Error invalid_argument_error(const std::string& message, nlohmann::json details = nlohmann::json::object()) {
  return Error("invalid-argument", message, std::move(details));
}

}  // namespace crules
