#pragma once

// Time-tag processing: clock referencing of detector clicks, pulsed coincidence
// histograms (same pulse / subsequent pulse) and synthesis of tag streams from
// simulated densities.
//
// Binary tag file: a sequence of 9-byte little-endian records
//   u8  channel id
//   u64 timestamp in picoseconds since acquisition start
// with a JSON sidecar "<file>.json" declaring the channel ids.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "wqed/correlation_map.hpp"

namespace wqed {

struct TimeTagRecord {
  std::uint8_t channel = 0;
  std::uint64_t timestamp = 0;  // ps

  friend bool operator==(const TimeTagRecord&, const TimeTagRecord&) = default;
};

inline constexpr std::size_t kTimeTagRecordBytes = 9;

struct AcquisitionConfig {
  double rep_period = 1000.0 / 33.0;  // ns
  double pulse_separation = 30.0;     // ns
  std::map<int, Channel> channel_map{{1, Channel::transmission},
                                     {2, Channel::transmission},
                                     {3, Channel::reflection},
                                     {4, Channel::reflection}};
  int clock_channel = 0;
  double gate_width = 0.0;  // ns; 0 selects rep_period / 2
  int max_missing_clocks = 10;

  double gate() const noexcept { return gate_width > 0.0 ? gate_width : 0.5 * rep_period; }
  void validate() const;
  std::vector<int> detectors(Channel ch) const;
};

nlohmann::json to_json(const AcquisitionConfig& c);
AcquisitionConfig acquisition_from_json(const nlohmann::json& j);

struct ClockedEvent {
  std::uint64_t pulse = 0;
  double time = 0.0;  // ns after the pulse's clock tick
  std::uint8_t detector = 0;
  Channel channel = Channel::transmission;
};

struct IngestStats {
  std::uint64_t records = 0;
  std::uint64_t clock_ticks = 0;         // observed
  std::uint64_t interpolated_ticks = 0;  // filled across short gaps
  std::uint64_t detector_events = 0;     // referenced and inside the gate
  std::uint64_t dropped_out_of_gate = 0;
  std::uint64_t dropped_before_clock = 0;
  std::uint64_t unknown_channel = 0;
  double mean_period = 0.0;  // ns, from consecutive observed ticks

  std::uint64_t pulses() const noexcept { return clock_ticks + interpolated_ticks; }
};

nlohmann::json to_json(const IngestStats& s);

/// Streaming clock referencing. Records may be fed in chunks of any size; the
/// emitted events do not depend on the chunking. Each detector click is tied to
/// the nearest preceding clock tick; gaps of up to max_missing_clocks periods are
/// bridged by interpolated ticks, longer gaps raise ErrorKind::clock_gap.
class Ingestor {
 public:
  using Sink = std::function<void(const ClockedEvent&)>;

  Ingestor(AcquisitionConfig config, Sink sink);

  void feed(std::span<const TimeTagRecord> records);
  void feed(const TimeTagRecord& record);
  /// Resolves events after the last tick and checks the clock period (1%).
  void finish();

  const IngestStats& stats() const noexcept { return stats_; }
  const AcquisitionConfig& config() const noexcept { return config_; }

 private:
  struct Tick {
    std::uint64_t time;  // ps
    std::uint64_t pulse;
  };
  void on_clock(std::uint64_t t);
  void resolve(std::uint64_t t, std::uint8_t detector, Channel ch);
  void emit(const Tick& tick, std::uint64_t t, std::uint8_t detector, Channel ch);
  double period_ps() const noexcept;

  AcquisitionConfig config_;
  Sink sink_;
  IngestStats stats_;
  std::deque<Tick> ticks_;  // recent history, oldest first
  std::vector<TimeTagRecord> pending_;  // clicks after the newest tick
  std::map<int, std::uint64_t> last_time_;
  std::uint64_t observed_intervals_ = 0;
  double interval_sum_ps_ = 0.0;
  bool finished_ = false;
};

/// Ingests a whole in-memory stream.
std::vector<ClockedEvent> ingest(std::span<const TimeTagRecord> records,
                                 const AcquisitionConfig& config, IngestStats* stats = nullptr);

enum class PairSelection { same_pulse, subsequent_pulse };

std::string_view to_string(PairSelection s) noexcept;
PairSelection parse_pair_selection(std::string_view text);

struct G2Request {
  ChannelPair channels;
  PairSelection selection = PairSelection::same_pulse;
};

struct PairStats {
  std::uint64_t pulses_with_events = 0;
  std::uint64_t singles_only_pulses = 0;      // exactly one click in the pulse
  std::uint64_t same_pulse_pairs = 0;         // unordered click pairs within a pulse
  std::uint64_t cross_pulse_pairs = 0;        // click pairs between pulses k and k+1
  std::uint64_t same_detector_pairs = 0;      // within a pulse, excluded from histograms
  std::uint64_t events = 0;
};

/// Accumulates coincidence histograms for several requests in one pass. Events
/// may arrive out of pulse order by at most one pulse.
///
/// Pair rules: within a channel only clicks on different detectors form a pair
/// (t1 from the lower detector id); for "tr" t1 is the transmission click. For
/// subsequent_pulse t1 is taken in pulse k and t2 in pulse k + 1. Every pair of
/// three or more clicks counts.
class CoincidenceBuilder {
 public:
  CoincidenceBuilder(const AcquisitionConfig& config, std::vector<G2Request> requests,
                     double d_t);

  void add(const ClockedEvent& e);
  /// Flushes and returns one counts map per request (empty selections give zero maps).
  std::vector<CorrelationMap> finish(const IngestStats* ingest_stats = nullptr);

  const PairStats& stats() const noexcept { return stats_; }

 private:
  void close_pulse(std::uint64_t pulse, std::vector<ClockedEvent> events);
  void count_pair(const G2Request& req, Eigen::MatrixXd& h, const ClockedEvent& a,
                  const ClockedEvent& b) const;
  Eigen::Index bin_of(double t) const noexcept;

  AcquisitionConfig config_;
  std::vector<G2Request> requests_;
  double d_t_;
  Eigen::Index bins_;
  std::vector<Eigen::MatrixXd> hist_;
  PairStats stats_;
  std::map<std::uint64_t, std::vector<ClockedEvent>> open_;  // pulses still accepting clicks
  std::uint64_t newest_pulse_ = 0;
  std::optional<std::uint64_t> closed_pulse_;  // most recently closed
  std::vector<ClockedEvent> closed_;
  bool finished_ = false;
};

/// Single-request convenience wrapper.
CorrelationMap build_g2(std::span<const ClockedEvent> events, const AcquisitionConfig& config,
                        ChannelPair channels, PairSelection selection, double d_t,
                        const IngestStats* ingest_stats = nullptr);

// Synthesis.

struct SynthesisInput {
  CorrelationMap tt;  // probability densities on a common window
  CorrelationMap rr;
  CorrelationMap tr;
  IntensityTrace g1_t;
  IntensityTrace g1_r;
};

struct SynthesisOptions {
  std::uint64_t pulses = 1000;
  double mean_photons = 0.05;   // detected clicks per pulse over all detectors
  double jitter_t_fwhm = 0.03;  // ns
  double jitter_r_fwhm = 0.15;  // ns
  bool jitter = true;
  double window_offset = 0.0;   // ns between the clock tick and the window start
  std::uint64_t seed = 0;
};

struct SynthesisReport {
  double efficiency = 0.0;  // scale applied to G1 (and squared to G2)
  double p_single_t = 0.0;
  double p_single_r = 0.0;
  double p_pair_tt = 0.0;
  double p_pair_rr = 0.0;
  double p_pair_tr = 0.0;
  double clipped_single_mass = 0.0;  // negative single densities set to zero
  std::uint64_t records = 0;
  std::uint64_t detector_records = 0;
  std::uint64_t dead_time_drops = 0;  // second click on one detector within a pulse
};

nlohmann::json to_json(const SynthesisReport& r);

/// Draws, per pulse, nothing, one click or one click pair so that single-click
/// densities follow efficiency * G1 and pair densities follow efficiency^2 * G2.
/// Clicks are routed uniformly to the detectors of their channel. Deterministic
/// given the seed; records reach the sink in timestamp order.
SynthesisReport synthesize_tags(const SynthesisInput& input, const AcquisitionConfig& config,
                                const SynthesisOptions& options,
                                const std::function<void(const TimeTagRecord&)>& sink);

// File I/O.

nlohmann::json timetag_sidecar(const AcquisitionConfig& config, std::uint64_t records,
                               const nlohmann::json& extra = nlohmann::json::object());

class TimeTagWriter {
 public:
  TimeTagWriter(const std::filesystem::path& path, const AcquisitionConfig& config, bool csv = false);
  ~TimeTagWriter();
  TimeTagWriter(const TimeTagWriter&) = delete;
  TimeTagWriter& operator=(const TimeTagWriter&) = delete;

  void write(const TimeTagRecord& r);
  /// Flushes the payload and writes the sidecar.
  void close(const nlohmann::json& extra = nlohmann::json::object());
  std::uint64_t records() const noexcept { return records_; }

 private:
  std::filesystem::path path_;
  AcquisitionConfig config_;
  bool csv_;
  std::unique_ptr<std::ofstream> os_;
  std::string buffer_;
  std::uint64_t records_ = 0;
  bool closed_ = false;
};

/// Reads the sidecar next to a tag file.
nlohmann::json read_timetag_sidecar(const std::filesystem::path& path);

/// Streams the records of a tag file in chunks to `consume`. The format is
/// taken from the sidecar ("binary" or "csv").
void read_timetags(const std::filesystem::path& path,
                   const std::function<void(std::span<const TimeTagRecord>)>& consume,
                   std::size_t chunk = 1 << 16);

}  // namespace wqed
