#pragma once

// Subcommands of the wqed tool. Each writes its outputs plus a manifest.json
// into the output directory and returns the process exit code. Library errors
// propagate as wqed::Error; main() maps them onto exit codes.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "run_config.hpp"
#include "wqed/calibration.hpp"
#include "wqed/timetag.hpp"

namespace wqed::app {

inline constexpr const char* kToolName = "wqed";
const char* tool_version() noexcept;

/// Library versions and build facts recorded in every manifest.
nlohmann::json version_info();

std::string config_hash(const RunConfig& config);

/// Collects output files and writes manifest.json with a per-file FNV-1a digest.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& config);

  void add_output(const std::filesystem::path& path);
  void add_input(const std::filesystem::path& path);
  void warn(const std::string& message);
  nlohmann::json& extra() noexcept { return extra_; }
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  nlohmann::json config_;
  std::string hash_;
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::string> warnings_;
  nlohmann::json extra_ = nlohmann::json::object();
};

void ensure_output_dir(const std::filesystem::path& dir);

int cmd_simulate(const RunConfig& config, std::ostream& log);

struct AnalyzeOptions {
  std::vector<std::filesystem::path> inputs;
  std::optional<int> monte_carlo;  // explicit request; refused for density maps
};

int cmd_analyze(const RunConfig& config, const AnalyzeOptions& options, std::ostream& log);

enum class CalibrateMode { saturation, shift };

struct CalibrateOptions {
  CalibrateMode mode = CalibrateMode::saturation;
  std::vector<std::filesystem::path> scans;
  std::optional<std::filesystem::path> calibration;  // saturation report (shift mode)
  std::optional<std::filesystem::path> drift;        // power_uW,center_MHz (shift mode)
  std::optional<ScanRole> default_role;               // for files without a role column
};

int cmd_calibrate(const RunConfig& config, const CalibrateOptions& options, std::ostream& log);

struct IngestOptions {
  std::vector<std::filesystem::path> inputs;
  std::vector<ChannelPair> channels{ChannelPair{}};
  std::vector<PairSelection> selections{PairSelection::same_pulse,
                                        PairSelection::subsequent_pulse};
};

int cmd_ingest(const RunConfig& config, const IngestOptions& options, std::ostream& log);

struct SynthOptions {
  std::size_t pulse_index = 0;  // entry of the sigma_over_tau sweep
};

int cmd_synth_tags(const RunConfig& config, const SynthOptions& options, std::ostream& log);

// Scan files: CSV with header power_uW,detuning_MHz,counts[,role]. Rows are
// grouped into one scan per (role, power) in order of first appearance.
std::vector<SpectrumScan> read_scan_csv(const std::filesystem::path& path,
                                        std::optional<ScanRole> default_role = std::nullopt);
void write_scan_csv(const std::filesystem::path& path, const std::vector<SpectrumScan>& scans);

struct DriftPoints {
  std::vector<double> powers;   // uW
  std::vector<double> centers;  // rad/ns
};

/// CSV with header power_uW,center_MHz.
DriftPoints read_drift_csv(const std::filesystem::path& path);

/// Reads the "calibration" and "gamma_total" blocks of a saturation report.
FluxConstants read_calibration_report(const std::filesystem::path& path);

}  // namespace wqed::app
