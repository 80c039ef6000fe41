#include "wqed/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wqed/errors.hpp"
#include "wqed/map_io.hpp"
#include "wqed/rng.hpp"

namespace wqed {

void AcquisitionConfig::validate() const {
  require(std::isfinite(rep_period) && rep_period > 0.0, ErrorKind::config,
          "rep_period must be > 0");
  require(std::isfinite(pulse_separation) && pulse_separation > 0.0, ErrorKind::config,
          "pulse_separation must be > 0");
  require(std::abs(pulse_separation - rep_period) <= 0.05 * rep_period, ErrorKind::config,
          "pulse_separation must match rep_period within 5%");
  require(gate() > 0.0 && gate() <= rep_period, ErrorKind::config,
          "gate_width must be in (0, rep_period]");
  require(clock_channel >= 0 && clock_channel <= 255, ErrorKind::config,
          "clock channel id must fit in a byte");
  require(max_missing_clocks >= 0, ErrorKind::config, "max_missing_clocks must be >= 0");
  require(!channel_map.empty(), ErrorKind::config, "channel map declares no detectors");
  for (const auto& [id, ch] : channel_map) {
    require(id >= 0 && id <= 255, ErrorKind::config, "detector ids must fit in a byte");
    require(id != clock_channel, ErrorKind::config, "a detector id equals the clock channel");
  }
}

std::vector<int> AcquisitionConfig::detectors(Channel ch) const {
  std::vector<int> out;
  for (const auto& [id, c] : channel_map)
    if (c == ch) out.push_back(id);
  return out;
}

nlohmann::json to_json(const AcquisitionConfig& c) {
  nlohmann::json map = nlohmann::json::object();
  for (const auto& [id, ch] : c.channel_map) map[std::to_string(id)] = std::string(1, channel_letter(ch));
  return {{"rep_period_ns", c.rep_period},
          {"pulse_separation_ns", c.pulse_separation},
          {"clock_channel", c.clock_channel},
          {"gate_width_ns", c.gate()},
          {"max_missing_clocks", c.max_missing_clocks},
          {"channel_map", map}};
}

AcquisitionConfig acquisition_from_json(const nlohmann::json& j) {
  AcquisitionConfig c;
  try {
    c.rep_period = j.value("rep_period_ns", c.rep_period);
    c.pulse_separation = j.value("pulse_separation_ns", c.pulse_separation);
    c.clock_channel = j.value("clock_channel", c.clock_channel);
    c.gate_width = j.value("gate_width_ns", 0.0);
    c.max_missing_clocks = j.value("max_missing_clocks", c.max_missing_clocks);
    if (j.contains("channel_map")) {
      c.channel_map.clear();
      for (const auto& [key, value] : j.at("channel_map").items()) {
        const std::string v = value.get<std::string>();
        require(v == "t" || v == "r", ErrorKind::config,
                "channel_map values must be \"t\" or \"r\" (got \"" + v + "\")");
        c.channel_map[std::stoi(key)] = v == "t" ? Channel::transmission : Channel::reflection;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("acquisition: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorKind::config, "acquisition: channel_map keys must be integers");
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const IngestStats& s) {
  return {{"records", s.records},
          {"clock_ticks", s.clock_ticks},
          {"interpolated_ticks", s.interpolated_ticks},
          {"pulses", s.pulses()},
          {"detector_events", s.detector_events},
          {"dropped_out_of_gate", s.dropped_out_of_gate},
          {"dropped_before_clock", s.dropped_before_clock},
          {"unknown_channel", s.unknown_channel},
          {"mean_period_ns", s.mean_period}};
}

namespace {
constexpr std::size_t kTickHistory = 4096;
constexpr std::uint64_t kPeriodCheckAfter = 1000;
}  // namespace

Ingestor::Ingestor(AcquisitionConfig config, Sink sink)
    : config_(std::move(config)), sink_(std::move(sink)) {
  config_.validate();
}

double Ingestor::period_ps() const noexcept {
  return observed_intervals_ > 0 ? interval_sum_ps_ / static_cast<double>(observed_intervals_)
                                 : config_.rep_period * 1000.0;
}

void Ingestor::feed(std::span<const TimeTagRecord> records) {
  for (const TimeTagRecord& r : records) feed(r);
}

void Ingestor::feed(const TimeTagRecord& r) {
  require(!finished_, ErrorKind::config, "ingestor already finished");
  ++stats_.records;
  const int id = r.channel;
  auto last = last_time_.find(id);
  if (last != last_time_.end() && r.timestamp < last->second) {
    std::ostringstream os;
    os << "timestamps on channel " << id << " go backwards (" << r.timestamp << " ps after "
       << last->second << " ps)";
    fail(ErrorKind::stream_corruption, os.str());
  }
  if (id == config_.clock_channel) {
    last_time_[id] = r.timestamp;
    on_clock(r.timestamp);
    return;
  }
  const auto ch = config_.channel_map.find(id);
  if (ch == config_.channel_map.end()) {
    ++stats_.unknown_channel;
    return;
  }
  last_time_[id] = r.timestamp;
  if (ticks_.empty()) {
    ++stats_.dropped_before_clock;
  } else if (r.timestamp >= ticks_.back().time) {
    pending_.push_back(r);
  } else {
    resolve(r.timestamp, r.channel, ch->second);
  }
}

void Ingestor::on_clock(std::uint64_t t) {
  if (!ticks_.empty()) {
    const Tick last = ticks_.back();
    const double interval = static_cast<double>(t - last.time);
    const double periods = interval / period_ps();
    const auto m = static_cast<std::uint64_t>(std::llround(periods));
    if (m < 1) {
      std::ostringstream os;
      os << "clock ticks " << interval << " ps apart, far below the configured period";
      fail(ErrorKind::stream_corruption, os.str());
    }
    if (m - 1 > static_cast<std::uint64_t>(config_.max_missing_clocks)) {
      std::ostringstream os;
      os << "clock gap of " << m - 1 << " missing periods after " << last.time
         << " ps (limit " << config_.max_missing_clocks << ")";
      fail(ErrorKind::clock_gap, os.str());
    }
    if (m == 1) {
      ++observed_intervals_;
      interval_sum_ps_ += interval;
      if (observed_intervals_ == kPeriodCheckAfter) {
        const double mean = period_ps() / 1000.0;
        if (std::abs(mean - config_.rep_period) > 0.01 * config_.rep_period) {
          std::ostringstream os;
          os << "clock period " << mean << " ns differs from rep_period " << config_.rep_period
             << " ns by more than 1%";
          fail(ErrorKind::clock_gap, os.str());
        }
      }
    }
    for (std::uint64_t j = 1; j < m; ++j) {
      const auto ti = last.time + static_cast<std::uint64_t>(std::llround(
                                      interval * static_cast<double>(j) / static_cast<double>(m)));
      ticks_.push_back({ti, last.pulse + j});
      ++stats_.interpolated_ticks;
    }
    ticks_.push_back({t, last.pulse + m});
  } else {
    ticks_.push_back({t, 0});
  }
  ++stats_.clock_ticks;
  while (ticks_.size() > kTickHistory) ticks_.pop_front();

  if (pending_.empty()) return;
  std::stable_sort(pending_.begin(), pending_.end(),
                   [](const TimeTagRecord& a, const TimeTagRecord& b) { return a.timestamp < b.timestamp; });
  std::size_t k = 0;
  for (; k < pending_.size() && pending_[k].timestamp < t; ++k)
    resolve(pending_[k].timestamp, pending_[k].channel, config_.channel_map.at(pending_[k].channel));
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(k));
}

void Ingestor::resolve(std::uint64_t t, std::uint8_t detector, Channel ch) {
  auto it = std::upper_bound(ticks_.begin(), ticks_.end(), t,
                             [](std::uint64_t v, const Tick& tick) { return v < tick.time; });
  if (it == ticks_.begin()) {
    if (stats_.clock_ticks <= kTickHistory) {
      ++stats_.dropped_before_clock;
      return;
    }
    fail(ErrorKind::stream_corruption, "click is older than the retained clock history");
  }
  emit(*std::prev(it), t, detector, ch);
}

void Ingestor::emit(const Tick& tick, std::uint64_t t, std::uint8_t detector, Channel ch) {
  const double time = static_cast<double>(t - tick.time) * 1e-3;
  if (time >= config_.gate()) {
    ++stats_.dropped_out_of_gate;
    return;
  }
  ++stats_.detector_events;
  sink_(ClockedEvent{tick.pulse, time, detector, ch});
}

void Ingestor::finish() {
  if (finished_) return;
  finished_ = true;
  if (!pending_.empty()) {
    std::stable_sort(pending_.begin(), pending_.end(), [](const TimeTagRecord& a, const TimeTagRecord& b) {
      return a.timestamp < b.timestamp;
    });
    const Tick last = ticks_.back();
    const double period = period_ps();
    for (const TimeTagRecord& r : pending_) {
      const auto n = static_cast<std::uint64_t>(static_cast<double>(r.timestamp - last.time) / period);
      if (n > static_cast<std::uint64_t>(config_.max_missing_clocks)) {
        std::ostringstream os;
        os << "clicks continue " << n << " periods after the last clock tick";
        fail(ErrorKind::clock_gap, os.str());
      }
      const Tick tick{last.time + static_cast<std::uint64_t>(std::llround(period * static_cast<double>(n))),
                      last.pulse + n};
      emit(tick.time <= r.timestamp ? tick : last, r.timestamp, r.channel,
           config_.channel_map.at(r.channel));
    }
    pending_.clear();
  }
  if (observed_intervals_ > 0) {
    stats_.mean_period = period_ps() / 1000.0;
    if (std::abs(stats_.mean_period - config_.rep_period) > 0.01 * config_.rep_period) {
      std::ostringstream os;
      os << "clock period " << stats_.mean_period << " ns differs from rep_period "
         << config_.rep_period << " ns by more than 1%";
      fail(ErrorKind::clock_gap, os.str());
    }
  }
}

std::vector<ClockedEvent> ingest(std::span<const TimeTagRecord> records,
                                 const AcquisitionConfig& config, IngestStats* stats) {
  std::vector<ClockedEvent> out;
  Ingestor ing(config, [&](const ClockedEvent& e) { out.push_back(e); });
  ing.feed(records);
  ing.finish();
  if (stats) *stats = ing.stats();
  return out;
}

std::string_view to_string(PairSelection s) noexcept {
  return s == PairSelection::same_pulse ? "same_pulse" : "subsequent_pulse";
}

PairSelection parse_pair_selection(std::string_view text) {
  if (text == "same_pulse" || text == "same") return PairSelection::same_pulse;
  if (text == "subsequent_pulse" || text == "subsequent") return PairSelection::subsequent_pulse;
  fail(ErrorKind::config, "unknown pair selection '" + std::string(text) + "'");
}

CoincidenceBuilder::CoincidenceBuilder(const AcquisitionConfig& config,
                                       std::vector<G2Request> requests, double d_t)
    : config_(config), requests_(std::move(requests)), d_t_(d_t) {
  config_.validate();
  require(!requests_.empty(), ErrorKind::config, "no coincidence maps requested");
  require(std::isfinite(d_t) && d_t > 0.0, ErrorKind::config, "histogram d_t must be > 0");
  const double n = config_.gate() / d_t;
  require(std::abs(n - std::round(n)) <= 1e-6 * n && std::round(n) >= 2.0, ErrorKind::config,
          "histogram d_t must divide the gate width");
  bins_ = static_cast<Eigen::Index>(std::round(n));
  hist_.assign(requests_.size(), Eigen::MatrixXd::Zero(bins_, bins_));
}

Eigen::Index CoincidenceBuilder::bin_of(double t) const noexcept {
  const auto b = static_cast<Eigen::Index>(t / d_t_);
  return std::clamp<Eigen::Index>(b, 0, bins_ - 1);
}

void CoincidenceBuilder::add(const ClockedEvent& e) {
  require(!finished_, ErrorKind::config, "coincidence builder already finished");
  if (closed_pulse_ && e.pulse <= *closed_pulse_) {
    std::ostringstream os;
    os << "click for pulse " << e.pulse << " arrived after that pulse was closed";
    fail(ErrorKind::stream_corruption, os.str());
  }
  open_[e.pulse].push_back(e);
  newest_pulse_ = std::max(newest_pulse_, e.pulse);
  while (!open_.empty() && open_.begin()->first + 1 < newest_pulse_) {
    auto node = open_.extract(open_.begin());
    close_pulse(node.key(), std::move(node.mapped()));
  }
}

void CoincidenceBuilder::count_pair(const G2Request& req, Eigen::MatrixXd& h,
                                    const ClockedEvent& a, const ClockedEvent& b) const {
  const ChannelPair& cp = req.channels;
  if (cp.same()) {
    if (a.channel != cp.first || b.channel != cp.first) return;
    if (req.selection == PairSelection::same_pulse) {
      if (a.detector == b.detector) return;
      const ClockedEvent& lo = a.detector < b.detector ? a : b;
      const ClockedEvent& hi = a.detector < b.detector ? b : a;
      h(bin_of(lo.time), bin_of(hi.time)) += 1.0;
    } else {
      h(bin_of(a.time), bin_of(b.time)) += 1.0;
    }
    return;
  }
  if (a.channel == cp.first && b.channel == cp.second) {
    h(bin_of(a.time), bin_of(b.time)) += 1.0;
  } else if (req.selection == PairSelection::same_pulse && b.channel == cp.first &&
             a.channel == cp.second) {
    h(bin_of(b.time), bin_of(a.time)) += 1.0;
  }
}

void CoincidenceBuilder::close_pulse(std::uint64_t pulse, std::vector<ClockedEvent> events) {
  const std::size_t n = events.size();
  stats_.events += n;
  if (n > 0) ++stats_.pulses_with_events;
  if (n == 1) ++stats_.singles_only_pulses;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++stats_.same_pulse_pairs;
      if (events[i].detector == events[j].detector) ++stats_.same_detector_pairs;
      for (std::size_t r = 0; r < requests_.size(); ++r)
        if (requests_[r].selection == PairSelection::same_pulse)
          count_pair(requests_[r], hist_[r], events[i], events[j]);
    }
  if (closed_pulse_ && *closed_pulse_ + 1 == pulse) {
    for (const ClockedEvent& a : closed_)
      for (const ClockedEvent& b : events) {
        ++stats_.cross_pulse_pairs;
        for (std::size_t r = 0; r < requests_.size(); ++r)
          if (requests_[r].selection == PairSelection::subsequent_pulse)
            count_pair(requests_[r], hist_[r], a, b);
      }
  }
  closed_pulse_ = pulse;
  closed_ = std::move(events);
}

std::vector<CorrelationMap> CoincidenceBuilder::finish(const IngestStats* ingest_stats) {
  if (!finished_) {
    finished_ = true;
    while (!open_.empty()) {
      auto node = open_.extract(open_.begin());
      close_pulse(node.key(), std::move(node.mapped()));
    }
  }
  std::vector<CorrelationMap> out;
  for (std::size_t r = 0; r < requests_.size(); ++r) {
    CorrelationMap m;
    m.d_t = d_t_;
    m.t_origin = 0.5 * d_t_;
    m.values = hist_[r];
    m.channels = requests_[r].channels;
    m.kind = MapKind::counts;
    nlohmann::json& meta = m.meta;
    meta["source"] = "timetags";
    meta["selection"] = std::string(to_string(requests_[r].selection));
    meta["gate_width_ns"] = config_.gate();
    meta["rep_period_ns"] = config_.rep_period;
    meta["pairs_in_map"] = m.values.sum();
    meta["pair_stats"] = {{"events", stats_.events},
                          {"pulses_with_events", stats_.pulses_with_events},
                          {"singles_only_pulses", stats_.singles_only_pulses},
                          {"same_pulse_pairs", stats_.same_pulse_pairs},
                          {"cross_pulse_pairs", stats_.cross_pulse_pairs},
                          {"same_detector_pairs", stats_.same_detector_pairs}};
    if (ingest_stats) {
      meta["total_pulses"] = ingest_stats->pulses();
      meta["ingest"] = to_json(*ingest_stats);
    } else {
      meta["total_pulses"] = closed_pulse_ ? *closed_pulse_ + 1 : 0;
    }
    if (m.values.sum() == 0.0) meta["warning"] = "empty selection: no pairs in this map";
    out.push_back(std::move(m));
  }
  return out;
}

CorrelationMap build_g2(std::span<const ClockedEvent> events, const AcquisitionConfig& config,
                        ChannelPair channels, PairSelection selection, double d_t,
                        const IngestStats* ingest_stats) {
  CoincidenceBuilder b(config, {G2Request{channels, selection}}, d_t);
  for (const ClockedEvent& e : events) b.add(e);
  return std::move(b.finish(ingest_stats).front());
}

nlohmann::json to_json(const SynthesisReport& r) {
  return {{"efficiency", r.efficiency},
          {"p_single_t", r.p_single_t},
          {"p_single_r", r.p_single_r},
          {"p_pair_tt", r.p_pair_tt},
          {"p_pair_rr", r.p_pair_rr},
          {"p_pair_tr", r.p_pair_tr},
          {"clipped_single_mass", r.clipped_single_mass},
          {"records", r.records},
          {"detector_records", r.detector_records},
          {"dead_time_drops", r.dead_time_drops}};
}

namespace {

// Cumulative table over nonnegative weights; sample() returns an index.
class Discrete {
 public:
  explicit Discrete(std::vector<double> weights) : cum_(std::move(weights)) {
    double acc = 0.0;
    for (double& w : cum_) {
      acc += w;
      w = acc;
    }
  }
  double total() const noexcept { return cum_.empty() ? 0.0 : cum_.back(); }
  std::size_t sample(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, total())(rng);
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1);
  }

 private:
  std::vector<double> cum_;
};

void check_same_window(const CorrelationMap& ref, const CorrelationMap& m, const char* name) {
  require(m.kind == MapKind::probability_density, ErrorKind::config,
          std::string("synthesis needs probability density maps (") + name + ")");
  require(m.rows() == ref.rows() && m.cols() == ref.cols() &&
              std::abs(m.d_t - ref.d_t) <= 1e-12 * ref.d_t &&
              std::abs(m.t_origin - ref.t_origin) <= 1e-9,
          ErrorKind::config, std::string("synthesis maps must share one window (") + name + ")");
}

}  // namespace

SynthesisReport synthesize_tags(const SynthesisInput& in, const AcquisitionConfig& config,
                                const SynthesisOptions& options,
                                const std::function<void(const TimeTagRecord&)>& sink) {
  config.validate();
  for (const CorrelationMap* m : {&in.tt, &in.rr, &in.tr}) m->validate();
  require(in.tt.rows() == in.tt.cols(), ErrorKind::config, "synthesis maps must be square");
  check_same_window(in.tt, in.tt, "tt");
  check_same_window(in.tt, in.rr, "rr");
  check_same_window(in.tt, in.tr, "tr");
  require(in.tt.channels == ChannelPair::parse("tt") && in.rr.channels == ChannelPair::parse("rr") &&
              in.tr.channels == ChannelPair::parse("tr"),
          ErrorKind::config, "synthesis expects tt, rr and tr maps");
  const auto n = static_cast<std::size_t>(in.tt.rows());
  for (const IntensityTrace* g : {&in.g1_t, &in.g1_r}) {
    require(g->values.size() == n && std::abs(g->d_t - in.tt.d_t) <= 1e-12 * in.tt.d_t &&
                std::abs(g->t_origin - in.tt.t_origin) <= 1e-9,
            ErrorKind::config, "singles traces must share the map window");
    for (double v : g->values)
      require(std::isfinite(v) && v >= 0.0, ErrorKind::config, "singles must be nonnegative");
  }
  require(options.pulses >= 1, ErrorKind::config, "synthesis needs at least one pulse");
  require(options.mean_photons >= 0.0, ErrorKind::config, "mean_photons must be >= 0");
  require(options.jitter_t_fwhm >= 0.0 && options.jitter_r_fwhm >= 0.0, ErrorKind::config,
          "jitter must be >= 0");

  const double d = in.tt.d_t;
  const double window = static_cast<double>(n) * d;
  require(options.window_offset >= 0.0 && options.window_offset + window <= config.rep_period,
          ErrorKind::config, "simulation window does not fit inside one repetition period");

  SynthesisReport rep;
  const double singles_mass = (in.g1_t.integral() + in.g1_r.integral());
  const double eta = singles_mass > 0.0 ? options.mean_photons / singles_mass : 0.0;
  rep.efficiency = eta;

  // Single-click densities (per bin mass) after removing the pair marginals.
  std::vector<double> st(n);
  std::vector<double> sr(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double pair_t = eta * eta * (in.tt.values.row(jj).sum() + in.tr.values.row(jj).sum()) * d;
    const double pair_r = eta * eta * (in.rr.values.row(jj).sum() + in.tr.values.col(jj).sum()) * d;
    double vt = (eta * in.g1_t.values[j] - pair_t) * d;
    double vr = (eta * in.g1_r.values[j] - pair_r) * d;
    if (vt < 0.0) rep.clipped_single_mass += -vt, vt = 0.0;
    if (vr < 0.0) rep.clipped_single_mass += -vr, vr = 0.0;
    st[j] = vt;
    sr[j] = vr;
  }
  auto flat = [&](const CorrelationMap& m, double scale) {
    std::vector<double> w(n * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t l = 0; l < n; ++l)
        w[j * n + l] = scale * m.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
    return w;
  };
  const Discrete single_t(st);
  const Discrete single_r(sr);
  // Same-channel maps count each unordered pair twice over the full square.
  const Discrete pair_tt(flat(in.tt, 0.5 * eta * eta * d * d));
  const Discrete pair_rr(flat(in.rr, 0.5 * eta * eta * d * d));
  const Discrete pair_tr(flat(in.tr, eta * eta * d * d));
  rep.p_single_t = single_t.total();
  rep.p_single_r = single_r.total();
  rep.p_pair_tt = pair_tt.total();
  rep.p_pair_rr = pair_rr.total();
  rep.p_pair_tr = pair_tr.total();
  const double p_any = rep.p_single_t + rep.p_single_r + rep.p_pair_tt + rep.p_pair_rr + rep.p_pair_tr;
  require(p_any <= 1.0, ErrorKind::config,
          "mean photon number too high: click probabilities per pulse exceed one");

  const std::vector<int> det_t = config.detectors(Channel::transmission);
  const std::vector<int> det_r = config.detectors(Channel::reflection);
  require(rep.p_single_t + rep.p_pair_tt + rep.p_pair_tr == 0.0 || !det_t.empty(), ErrorKind::config,
          "no transmission detector in the channel map");
  require(rep.p_single_r + rep.p_pair_rr + rep.p_pair_tr == 0.0 || !det_r.empty(), ErrorKind::config,
          "no reflection detector in the channel map");

  const auto rep_ps = static_cast<std::uint64_t>(std::llround(config.rep_period * 1000.0));
  const double sigma_t = options.jitter ? options.jitter_t_fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)) : 0.0;
  const double sigma_r = options.jitter ? options.jitter_r_fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)) : 0.0;
  const auto clock = static_cast<std::uint8_t>(config.clock_channel);

  struct Click {
    std::uint64_t ps;
    std::uint8_t detector;
  };
  constexpr std::uint64_t kBlock = 1 << 16;
  Rng rng;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Click> clicks;

  auto make_click = [&](std::size_t bin, Channel ch) {
    const std::vector<int>& dets = ch == Channel::transmission ? det_t : det_r;
    const double sigma = ch == Channel::transmission ? sigma_t : sigma_r;
    double t = options.window_offset + (static_cast<double>(bin) + unit(rng)) * d;
    if (sigma > 0.0) t += sigma * normal(rng);
    t = std::clamp(t, 0.0, config.rep_period - 1e-3);
    const auto det = static_cast<std::uint8_t>(
        dets[std::min<std::size_t>(dets.size() - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(dets.size())))]);
    clicks.push_back({static_cast<std::uint64_t>(std::llround(t * 1000.0)), det});
  };

  for (std::uint64_t k = 0; k < options.pulses; ++k) {
    if (k % kBlock == 0) rng = make_rng(options.seed, "synthesize_tags", k / kBlock);
    const std::uint64_t tick = k * rep_ps;
    sink(TimeTagRecord{clock, tick});
    ++rep.records;

    clicks.clear();
    double u = unit(rng);
    if ((u -= rep.p_single_t) < 0.0) {
      make_click(single_t.sample(rng), Channel::transmission);
    } else if ((u -= rep.p_single_r) < 0.0) {
      make_click(single_r.sample(rng), Channel::reflection);
    } else if ((u -= rep.p_pair_tt) < 0.0) {
      const std::size_t b = pair_tt.sample(rng);
      make_click(b / n, Channel::transmission);
      make_click(b % n, Channel::transmission);
    } else if ((u -= rep.p_pair_rr) < 0.0) {
      const std::size_t b = pair_rr.sample(rng);
      make_click(b / n, Channel::reflection);
      make_click(b % n, Channel::reflection);
    } else if ((u -= rep.p_pair_tr) < 0.0) {
      const std::size_t b = pair_tr.sample(rng);
      make_click(b / n, Channel::transmission);
      make_click(b % n, Channel::reflection);
    }
    if (clicks.empty()) continue;
    std::sort(clicks.begin(), clicks.end(), [](const Click& a, const Click& b) {
      return a.ps != b.ps ? a.ps < b.ps : a.detector < b.detector;
    });
    if (clicks.size() == 2 && clicks[0].detector == clicks[1].detector) {
      // One detector cannot register a second click within its dead time.
      clicks.pop_back();
      ++rep.dead_time_drops;
    }
    for (const Click& c : clicks) {
      sink(TimeTagRecord{c.detector, tick + c.ps});
      ++rep.records;
      ++rep.detector_records;
    }
  }
  return rep;
}

nlohmann::json timetag_sidecar(const AcquisitionConfig& config, std::uint64_t records,
                               const nlohmann::json& extra) {
  nlohmann::json channels = nlohmann::json::object();
  channels[std::to_string(config.clock_channel)] = "clock";
  for (const auto& [id, ch] : config.channel_map) channels[std::to_string(id)] = std::string(1, channel_letter(ch));
  nlohmann::json j = {{"format", "wqed-timetags"},
                      {"version", 1},
                      {"record_bytes", kTimeTagRecordBytes},
                      {"timestamp_unit", "ps"},
                      {"records", records},
                      {"channels", channels},
                      {"acquisition", to_json(config)}};
  if (!extra.empty()) j["meta"] = extra;
  return j;
}

namespace {
std::filesystem::path sidecar_path(const std::filesystem::path& p) { return p.string() + ".json"; }
}  // namespace

TimeTagWriter::TimeTagWriter(const std::filesystem::path& path, const AcquisitionConfig& config,
                             bool csv)
    : path_(path), config_(config), csv_(csv) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  os_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*os_) fail(ErrorKind::io, "cannot write " + path.string());
  if (csv_) buffer_ = "channel,timestamp_ps\n";
}

TimeTagWriter::~TimeTagWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void TimeTagWriter::write(const TimeTagRecord& r) {
  if (csv_) {
    buffer_ += std::to_string(r.channel);
    buffer_ += ',';
    buffer_ += std::to_string(r.timestamp);
    buffer_ += '\n';
  } else {
    buffer_.push_back(static_cast<char>(r.channel));
    put_u64le(buffer_, r.timestamp);
  }
  ++records_;
  if (buffer_.size() >= (1u << 20)) {
    os_->write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    buffer_.clear();
    if (!*os_) fail(ErrorKind::io, "failed writing " + path_.string());
  }
}

void TimeTagWriter::close(const nlohmann::json& extra) {
  if (closed_) return;
  closed_ = true;
  os_->write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  buffer_.clear();
  os_->close();
  if (!*os_) fail(ErrorKind::io, "failed writing " + path_.string());
  nlohmann::json side = timetag_sidecar(config_, records_, extra);
  side["encoding"] = csv_ ? "csv" : "binary";
  write_text_file(sidecar_path(path_), side.dump(2) + "\n");
}

nlohmann::json read_timetag_sidecar(const std::filesystem::path& path) {
  const std::filesystem::path side = sidecar_path(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(side));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, "malformed sidecar " + side.string() + ": " + e.what());
  }
  if (j.value("format", "") != "wqed-timetags") fail(ErrorKind::io, side.string() + " is not a time-tag sidecar");
  return j;
}

void read_timetags(const std::filesystem::path& path,
                   const std::function<void(std::span<const TimeTagRecord>)>& consume,
                   std::size_t chunk) {
  const nlohmann::json side = read_timetag_sidecar(path);
  const std::string encoding = side.value("encoding", "binary");
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<TimeTagRecord> batch;
  batch.reserve(chunk);
  std::uint64_t seen = 0;
  if (encoding == "binary") {
    std::string bytes(chunk * kTimeTagRecordBytes, '\0');
    while (is) {
      is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      const auto got = static_cast<std::size_t>(is.gcount());
      if (got % kTimeTagRecordBytes != 0) fail(ErrorKind::io, path.string() + ": truncated record");
      batch.clear();
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
      for (std::size_t off = 0; off < got; off += kTimeTagRecordBytes)
        batch.push_back({p[off], get_u64le(p + off + 1)});
      seen += batch.size();
      if (!batch.empty()) consume(batch);
    }
  } else if (encoding == "csv") {
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) fail(ErrorKind::io, path.string() + ": malformed csv record");
      try {
        const int ch = std::stoi(line.substr(0, comma));
        require(ch >= 0 && ch <= 255, ErrorKind::io, path.string() + ": channel id out of range");
        batch.push_back({static_cast<std::uint8_t>(ch), std::stoull(line.substr(comma + 1))});
      } catch (const std::logic_error&) {
        fail(ErrorKind::io, path.string() + ": malformed csv record");
      }
      if (batch.size() == chunk) {
        seen += batch.size();
        consume(batch);
        batch.clear();
      }
    }
    seen += batch.size();
    if (!batch.empty()) consume(batch);
  } else {
    fail(ErrorKind::io, "unknown time-tag encoding '" + encoding + "'");
  }
  if (side.contains("records") && side["records"].get<std::uint64_t>() != seen) {
    std::ostringstream os;
    os << path.string() << ": sidecar declares " << side["records"].get<std::uint64_t>()
       << " records, file holds " << seen;
    fail(ErrorKind::io, os.str());
  }
}

}  // namespace wqed
