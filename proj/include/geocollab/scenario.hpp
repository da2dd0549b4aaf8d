#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geocollab/geo_anchor.hpp"

namespace geocollab::sim {

struct ScenarioClient {
  std::string name;
  std::string session;
};

/// One step of a scenario. `clients` is already expanded from the `client`
/// selector ("name", "prefix*" or "*") or the `clients` list.
struct ScenarioEvent {
  std::optional<std::int64_t> at_ms;  // offset from scenario start
  std::string op;
  std::vector<std::string> clients;
  Json args = Json::object();
};

struct ScenarioAssertion {
  std::string name;  // defaults to the check name
  std::string check;
  std::vector<std::string> clients;
  Json args = Json::object();
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  Json server = Json::object();  // ServerConfig overrides
  std::int64_t timeout_ms = 30000;
  std::vector<ScenarioClient> clients;
  std::vector<ScenarioEvent> events;
  std::vector<ScenarioAssertion> assertions;
};

/// Throws Error(ScenarioInvalid) naming the offending field.
Scenario parse_scenario(const Json& j);
Scenario load_scenario(const std::filesystem::path& path);

struct AssertionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  bool passed = false;
  std::int64_t elapsed_ms = 0;
  std::vector<AssertionResult> assertions;
  Json clients = Json::object();  // per-client final state and transcript
};

Json to_json(const ScenarioReport& r);

struct RunOptions {
  bool transcripts = true;
};

/// Spawns a server in-process, puts a fault proxy in front of every client,
/// executes the events in order and evaluates the assertions at quiescence.
/// Throws Error(ScenarioInvalid) for events that cannot run and
/// Error(Timeout) when quiescence is not reached within timeout_ms.
ScenarioReport run_scenario(const Scenario& s, const RunOptions& opts = {});

}  // namespace geocollab::sim
