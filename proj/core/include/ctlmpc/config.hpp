#pragma once

#include "ctlmpc/simulator.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctlmpc {

/// A scenario as loaded from JSON: every quantity already in seconds.
using ScenarioConfig = Scenario;

class ConfigError : public std::runtime_error {
 public:
  struct Issue {
    std::string field;  // dotted path, e.g. "limits.u_min[0]"
    std::string message;
  };

  ConfigError(std::string source, std::size_t line, std::size_t column, const std::string& message);
  ConfigError(std::string source, std::vector<Issue> issues);

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }  // 0 when not a syntax error
  std::size_t column() const { return column_; }
  const std::vector<Issue>& issues() const { return issues_; }

 private:
  std::string source_;
  std::size_t line_ = 0;
  std::size_t column_ = 0;
  std::vector<Issue> issues_;
};

/// Parses and validates; `source` names the input in error messages.
ScenarioConfig parse_config(const std::string& text, const std::string& source = "<string>");
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical JSON in seconds; parse_config(serialize_config(s)) == s.
std::string serialize_config(const ScenarioConfig& scenario);

}  // namespace ctlmpc
