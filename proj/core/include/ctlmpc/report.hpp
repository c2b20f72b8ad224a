#pragma once

#include "ctlmpc/config.hpp"
#include "ctlmpc/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ctlmpc {

enum class ControllerChoice { Ct, Dt, Both };
ControllerChoice parse_controller_choice(const std::string& s);
NoiseMode parse_noise_mode(const std::string& s);

/// "5,15,25" -> {5, 15, 25}. Throws std::invalid_argument on empty or bad lists.
std::vector<double> parse_ts_list(const std::string& s);
/// "1..10" or "1,4,9".
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

/// Fixed column order:
/// controller, t, zbar_1.., y_1.., z_1.., u_1.., d_1.., xi_1.., eta_1.., stage_cost, qp_iters, controller_tick
void write_results_csv(std::ostream& os, const Scenario& scenario, const std::vector<SimResult>& runs);
std::string results_header(const Scenario& scenario);

/// summary.json content.
std::string summary_json(const Scenario& scenario, const std::vector<SimResult>& runs,
                         const std::optional<std::string>& error = std::nullopt);

/// Line chart of outputs (with references) and inputs against time.
std::string outputs_svg(const Scenario& scenario, const std::vector<SimResult>& runs);
std::string inputs_svg(const Scenario& scenario, const std::vector<SimResult>& runs);

struct RunOptions {
  ControllerChoice controller = ControllerChoice::Both;
  std::optional<double> ts_controller;  // seconds
  std::optional<std::uint64_t> seed;
  std::optional<NoiseMode> mode;
  std::filesystem::path out = ".";
  bool plot = false;
};

struct RunReport {
  Scenario scenario;  // after overrides
  std::vector<SimResult> runs;
  std::optional<std::string> error;  // QP failure, if any
  int exit_code = 0;
};

Scenario apply_overrides(Scenario scenario, const RunOptions& options);

/// Simulates and writes results.csv, summary.json and optionally SVG plots.
RunReport run(const Scenario& scenario, const RunOptions& options);

struct SweepRow {
  double ts_controller = 0.0;
  std::uint64_t seed = 0;
  ControllerKind kind = ControllerKind::Continuous;
  SimMetrics metrics;
  bool failed = false;
};

/// One row per (Ts^c, seed, controller); writes sweep.csv into `out`.
std::vector<SweepRow> sweep(const Scenario& scenario, const std::vector<double>& ts_list,
                            const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out,
                            std::optional<NoiseMode> mode = std::nullopt);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace ctlmpc
