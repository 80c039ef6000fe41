// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: wqed_acceptance [--work-dir DIR] [--only N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "app/commands.hpp"
#include "app/run_config.hpp"
#include "bloch.hpp"
#include "calibration_generator.hpp"
#include "collision_model.hpp"
#include "wqed/calibration.hpp"
#include "wqed/dynamics.hpp"
#include "wqed/errors.hpp"
#include "wqed/map_io.hpp"
#include "wqed/scattering.hpp"
#include "wqed/schmidt.hpp"
#include "wqed/timetag.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wqed;

namespace {

constexpr double kGamma = 4.364;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok: " : "FAILED: ") + what);
  }
  void info(const std::string& what) { notes.push_back("info: " + what); }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

oracle::Emitter to_oracle(const EmitterParams& p) { return {p.gamma_total, p.beta, p.gamma_deph}; }

EmitterParams lossy() {
  EmitterParams p;
  p.beta = 0.9;
  p.gamma_deph = 0.3;
  return p;
}

const ChannelPair kTT = ChannelPair::parse("tt");
const ChannelPair kRR = ChannelPair::parse("rr");

// 1 ------------------------------------------------------------------------

void transfer_identities(Outcome& o) {
  const EmitterParams p;
  const double t0 = std::norm(transfer_function(p, 0.0).t);
  o.check(t0 < 1e-12, "|t(0)|^2 = " + fmt(t0) + " < 1e-12");
  double worst = 0.0;
  for (int k = -2000; k <= 2000; ++k) {
    const auto c = transfer_function(p, 10.0 * p.gamma_total * k / 2000.0);
    worst = std::max(worst, std::abs(std::norm(c.t) + std::norm(c.r) - 1.0));
  }
  o.check(worst < 1e-9, "max ||t|^2 + |r|^2 - 1| over +-10 gamma = " + fmt(worst));
}

// 2 ------------------------------------------------------------------------

void free_decay(Outcome& o) {
  EmitterParams p;
  p.gamma_total = kGamma;
  const TimeGrid grid(0.0, 5.0 / p.gamma_total, 0.001);
  const auto traj = propagate(p, DriveField::zero(grid), SystemState::excited());
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    worst = std::max(worst, std::abs(traj.states[i].excited_population() -
                                     std::exp(-p.gamma_total * grid.time(i))));
  o.check(worst < 1e-4, "max |rho_ee - exp(-gamma t)| over 5 lifetimes = " + fmt(worst));
}

// 3 ------------------------------------------------------------------------

void saturation_consistency(Outcome& o) {
  const EmitterParams p = lossy();
  for (double s : {0.01, 0.1, 1.0, 2.3}) {
    // Omega^2 = gamma_R |a|^2 and S = 4 Omega^2 / (gamma gamma2).
    const double a = std::sqrt(s * p.gamma_total * p.gamma2() / (4.0 * p.gamma_right()));
    const double rho_ee = steady_state(p, a, 0.0).rho(1, 1).real();
    const double expected = s / (2.0 * (1.0 + s));
    o.check(std::abs(rho_ee / expected - 1.0) < 0.01,
            "S = " + fmt(s) + ": rho_ee = " + fmt(rho_ee, 8) + " vs S/(2(1+S)) = " + fmt(expected, 8));
  }
  CalibrationParams cal;
  cal.beta = 0.9;
  cal.gamma_deph = 0.3;
  const double n_c = flux_constants(cal, kGamma).n_c;
  const double independent = std::pow(1.0 + 2.0 * 0.3 / kGamma, 2) / (4.0 * 0.81);
  o.check(std::abs(n_c - independent) < 1e-12 && std::abs(n_c - 0.399) < 5e-4,
          "n_c(beta 0.9, gamma_0 0.3) = " + fmt(n_c, 6));
  const double dev = std::abs(n_c / 0.42 - 1.0);
  o.check(dev <= 0.06, "reference value ~0.42, relative difference " + fmt(100.0 * dev, 3) + "%");
}

// 4 ------------------------------------------------------------------------

void collision_oracle(Outcome& o) {
  const EmitterParams p;
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.01);
  const auto g = g2_map(p, pulse, kTT, MapWindow{-1.6, 3.2}, 0.2);
  Eigen::VectorXd centers(g.rows());
  for (Eigen::Index j = 0; j < g.rows(); ++j) centers(j) = g.time(j);
  const Eigen::MatrixXd ref = oracle::coherent_g2_tt(p, pulse, -2.2, 3.3, 0.005, centers);
  const double mx = g.values.maxCoeff();
  double worst = 0.0, worst_bulk = 0.0;
  int n = 0, within = 0, n_bulk = 0, within_bulk = 0;
  for (Eigen::Index j = 0; j < g.rows(); ++j)
    for (Eigen::Index l = 0; l < g.cols(); ++l) {
      if (g.values(j, l) <= 1e-6 * mx) continue;
      const double rel = std::abs(ref(j, l) / g.values(j, l) - 1.0);
      ++n;
      within += rel < 0.02;
      worst = std::max(worst, rel);
      if (g.values(j, l) > 1e-2 * mx) {
        ++n_bulk;
        within_bulk += rel < 0.02;
        worst_bulk = std::max(worst_bulk, rel);
      }
    }
  o.check(g.rows() <= 24, fmt(g.rows()) + " bins per axis");
  o.check(worst < 0.02, "bins above 1e-6 of max: " + fmt(within) + "/" + fmt(n) +
                            " within 2%, worst relative deviation " + fmt(worst));
  o.info("bins above 1e-2 of max: " + fmt(within_bulk) + "/" + fmt(n_bulk) +
         " within 2%, worst " + fmt(worst_bulk));
  o.info("the deviations sit near the node of the one-photon transmitted amplitude, where "
         "three-photon terms of the coherent input (absent from a two-excitation model) dominate");
}

// 5 ------------------------------------------------------------------------

void reflection_antibunching(Outcome& o) {
  const EmitterParams p;
  double worst = 0.0;
  for (double n : {0.001, 0.05, 0.5}) {
    const auto pulse = PulseSpec::gaussian(0.34, 0.0, n);
    const auto m = g2_map(p, pulse, kRR, default_window(p, pulse), 0.02);
    for (Eigen::Index j = 0; j < m.rows(); ++j) worst = std::max(worst, std::abs(m.values(j, j)));
  }
  // Maps are limited to weak pulses; stronger drives go through the correlator directly.
  for (double n : {2.0, 20.0, 200.0}) {
    const auto pulse = PulseSpec::gaussian(0.34, 0.0, n);
    const TimeGrid grid(-1.5, 2.5, default_step(p, pulse));
    const CorrelatorEngine engine(p, build_drive(pulse, grid, p.gamma_total));
    for (std::size_t i = 0; i < grid.size(); ++i)
      worst = std::max(worst, std::abs(engine.g2(Channel::reflection, Channel::reflection, i, i)));
  }
  o.check(worst == 0.0, "max |G2_rr(t, t)| over pulses of 1e-3..200 photons = " + fmt(worst));

  const auto pulse = PulseSpec::gaussian(1.5 * p.lifetime(), 0.0, 0.01);
  const auto m = g2_map(p, pulse, kRR, default_window(p, pulse), 0.02);
  const auto cut = linecuts(m).antidiagonal;
  std::size_t zero = 0, low = 0;
  for (std::size_t k = 0; k < cut.values.size(); ++k)
    if (std::abs(cut.coordinate(k)) < std::abs(cut.coordinate(zero))) zero = k;
  // Minimum over the delays the pulse populates (|delay| up to 4 sigma).
  double peak = 0.0;
  for (std::size_t k = 0; k < cut.values.size(); ++k) {
    if (std::abs(cut.coordinate(k)) > 4.0 * pulse.sigma) continue;
    if (std::abs(cut.coordinate(low)) > 4.0 * pulse.sigma || cut.values[k] < cut.values[low]) low = k;
    peak = std::max(peak, cut.values[k]);
  }
  o.check(low == zero && std::abs(cut.coordinate(zero)) < 1e-9,
          "antidiagonal minimum at delay " + fmt(cut.coordinate(low)) + " ns, dip/peak = " +
              fmt(cut.values[zero] / peak));
}

// 6 ------------------------------------------------------------------------

SynthesisInput synthesis_input(const EmitterParams& p, const PulseSpec& pulse, MapWindow w, double d_t) {
  const PulseSimulation sim(p, pulse, w, d_t);
  SynthesisInput in;
  in.tt = sim.g2_map(kTT);
  in.rr = sim.g2_map(kRR);
  in.tr = sim.g2_map(ChannelPair::parse("tr"));
  in.g1_t = sim.intensity_trace(Channel::transmission);
  in.g1_r = sim.intensity_trace(Channel::reflection);
  return in;
}

void bunching_trend(Outcome& o) {
  const EmitterParams p;
  std::vector<double> tc;
  double worst_ref = 0.0;
  std::string listing;
  for (double r : {0.44, 1.0, 1.5, 2.0}) {
    const auto pulse = PulseSpec::gaussian(r * p.lifetime(), 0.0, 0.01);
    const PulseSimulation sim(p, pulse, default_window(p, pulse), 0.02);
    tc.push_back(schmidt_decompose(sim.g2_map(kTT)).t_c);
    worst_ref = std::max(worst_ref, schmidt_decompose(sim.reference_map(kTT)).t_c);
    listing += (listing.empty() ? "" : ", ") + fmt(tc.back());
  }
  bool increasing = true;
  for (std::size_t k = 1; k < tc.size(); ++k) increasing = increasing && tc[k] > tc[k - 1];
  o.check(increasing, "T_c(tt) at sigma/tau 0.44, 1, 1.5, 2: " + listing + " strictly increasing");
  o.check(worst_ref < 1e-6, "max T_c of reference maps = " + fmt(worst_ref));

  AcquisitionConfig acq;
  acq.gate_width = app::kCliGateWidth;
  const auto in = synthesis_input(p, PulseSpec::gaussian(0.34, 0.0, 0.01), MapWindow{-2.5, 2.5}, 0.02);
  SynthesisOptions so;
  so.pulses = 10'000'000;
  so.mean_photons = 0.2;
  so.seed = 6;
  CoincidenceBuilder builder(acq, {{kTT, PairSelection::subsequent_pulse}}, 0.02);
  Ingestor ingestor(acq, [&](const ClockedEvent& e) { builder.add(e); });
  synthesize_tags(in, acq, so, [&](const TimeTagRecord& r) { ingestor.feed(r); });
  ingestor.finish();
  const auto maps = builder.finish(&ingestor.stats());
  const double pairs = maps[0].total();
  MonteCarloOptions mc;
  mc.rebin_factor = 25;
  mc.seed = 6;
  const auto r = monte_carlo_tc(maps[0], mc);
  o.check(pairs >= 1e4, "subsequent-pulse tt pairs = " + fmt(pairs, 6));
  o.check(r.t_c < 0.05, "subsequent-pulse T_c = " + fmt(r.t_c) + " +- " + fmt(r.t_c_err) + " (0.5 ns bins)");
}

// 7 ------------------------------------------------------------------------

void cw_limit(Outcome& o) {
  const EmitterParams p = lossy();
  const double sigma = 10.0 * p.lifetime();
  // Peak saturation parameter of one.
  const double a2 = p.gamma_total * p.gamma2() / (4.0 * p.gamma_right());
  const double n = a2 * std::sqrt(2.0 * std::numbers::pi) * sigma;
  const auto pulse = PulseSpec::gaussian(sigma, 0.0, n);
  const TimeGrid grid(-5.0 * sigma, 5.0 * sigma, default_step(p, pulse));
  const CorrelatorEngine engine(p, build_drive(pulse, grid, p.gamma_total));
  const std::size_t c = grid.index_of(0.0);
  const double g1 = engine.intensity(Channel::transmission, c);
  const double g2 = engine.g2(Channel::transmission, Channel::transmission, c, c) / (g1 * g1);
  const double a = std::sqrt(a2);
  const auto rho = oracle::steady_state(to_oracle(p), a, 0.0);
  const double ref = oracle::transmitted_g2_zero(to_oracle(p), a, rho);
  o.check(std::abs(g2 / ref - 1.0) < 0.05,
          "g2(0) at pulse center = " + fmt(g2) + ", steady state " + fmt(ref));
}

// 8 ------------------------------------------------------------------------

CorrelationMap density(const Eigen::MatrixXd& v) {
  CorrelationMap m;
  m.d_t = 0.1;
  m.values = v;
  return m;
}

void schmidt_arithmetic(Outcome& o) {
  Eigen::VectorXd u(6), w(6);
  u << 0.1, 0.5, 1.0, 0.7, 0.2, 0.05;
  w << 0.3, 0.9, 0.4, 0.2, 0.1, 0.6;
  const Eigen::MatrixXd amp = u * w.transpose();
  const double rank1 = schmidt_decompose(density(amp.cwiseAbs2())).t_c;
  o.check(std::abs(rank1) <= 1e-12, "rank-1 T_c = " + fmt(rank1));
  const double diag = schmidt_decompose(density(Eigen::MatrixXd::Identity(4, 4))).t_c;
  o.check(diag == 0.75, "uniform 4x4 diagonal T_c = " + fmt(diag, 17));

  std::vector<CorrelationMap> maps{density(amp.cwiseAbs2()), density(Eigen::MatrixXd::Identity(4, 4)),
                                   density(Eigen::MatrixXd::Random(9, 7).cwiseAbs())};
  for (double r : {0.44, 2.0}) {
    const auto pulse = PulseSpec::gaussian(r / kGamma, 0.0, 0.05);
    maps.push_back(g2_map(EmitterParams{}, pulse, kTT, default_window(EmitterParams{}, pulse), 0.04));
  }
  double worst = 0.0;
  for (const auto& m : maps) {
    double s = 0.0;
    for (double l : schmidt_decompose(m).singular_values) s += l * l;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  o.check(worst < 1e-9, "max |sum lambda^2 - 1| over " + fmt(maps.size()) + " maps = " + fmt(worst));
}

// 9 ------------------------------------------------------------------------

void calibration_round_trip(Outcome& o) {
  const oracle::SaturationTruth t;
  std::vector<double> grid;
  for (int k = 0; k < 61; ++k) grid.push_back(-5.0 * kGamma + 10.0 * kGamma * k / 60.0);
  double worst = 0.0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto scans = oracle::saturation_scans(t, {0.5, 2.0, 5.0, 10.0, 20.0, 40.0}, grid, 0.01, seed);
    const auto fit = fit_saturation(scans, kGamma);
    const double db = std::abs(fit.params.beta / t.beta - 1.0);
    const double dg = std::abs(fit.params.gamma_deph / t.gamma0 - 1.0);
    const double da = std::abs(fit.params.alpha_cal / t.alpha - 1.0);
    worst = std::max({worst, db, dg, da});
    o.info("seed " + fmt(seed) + ": beta " + fmt(fit.params.beta) + ", gamma_0 " +
           fmt(fit.params.gamma_deph) + ", alpha " + fmt(fit.params.alpha_cal));
  }
  o.check(worst < 0.05, "saturation fit, worst relative error " + fmt(100.0 * worst, 3) + "%");

  const auto truth = oracle::shift_truth_with_crossing(0.97, -0.2);
  CalibrationParams cal{t.beta, t.gamma0, t.alpha, t.a_scale, t.background};
  const auto flux = flux_constants(cal, kGamma);
  const int trials = 200;
  int covered = 0, covered_1sigma = 0, failed = 0;
  double mean = 0.0, mean_err = 0.0;
  for (int k = 0; k < trials; ++k) {
    const auto data = oracle::shift_data(truth, {0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 1.05, 1.2},
                                         {1, 5, 10, 15, 20, 25, 30}, 1000 + k);
    ShiftOptions so;
    so.seed = static_cast<std::uint64_t>(k);
    try {
      const auto c = extract_shift(data.probe_scans, flux, fit_drift(data.drift_powers, data.drift_centers),
                                   0.3 * kGamma, so);
      covered += truth.crossing() >= c.interval_low && truth.crossing() <= c.interval_high;
      covered_1sigma += std::abs(c.n_tau_full_linewidth - truth.crossing()) <= c.n_tau_full_linewidth_err;
      mean += c.n_tau_full_linewidth / trials;
      mean_err += c.n_tau_full_linewidth_err / trials;
    } catch (const Error&) {
      ++failed;
    }
  }
  o.check(covered >= 0.9 * trials, "crossing inside the 95% Monte Carlo interval in " + fmt(covered) +
                                       "/" + fmt(trials) + " trials (" + fmt(failed) + " failed)");
  o.info("within one Monte Carlo standard deviation: " + fmt(covered_1sigma) + "/" + fmt(trials));
  o.info("injected crossing " + fmt(truth.crossing()) + ", mean recovered " + fmt(mean) + " +- " +
         fmt(mean_err) + " photons; reference value 0.97 +- 0.27: same order of magnitude " +
         (mean > 0.097 && mean < 9.7 ? "yes" : "no"));
}

// 10 -----------------------------------------------------------------------

json end_to_end_config(const fs::path& out) {
  return {{"pulse", {{"sigma_ns", 0.34}, {"mean_photons", 0.01}}},
          {"map", {{"d_t_ns", 0.02}, {"window_ns", {-2.5, 2.5}}, {"channels", {"tt"}}}},
          {"synthesis", {{"pulses", 10000000}, {"mean_photons", 0.05}, {"jitter", true},
                         {"jitter_t_fwhm_ns", 0.03}, {"jitter_r_fwhm_ns", 0.15}}},
          {"pipeline", {{"adaptive_bin", false}, {"rebin_factor", 25}, {"monte_carlo_resamples", 200}}},
          {"seed", 1},
          {"output_dir", out.string()}};
}

struct EndToEnd {
  double t_c = 0.0;
  double t_c_err = 0.0;
  double noiseless = 0.0;
  double pairs = 0.0;
};

EndToEnd run_end_to_end(const fs::path& dir, std::ostream& log) {
  fs::remove_all(dir);
  const json base = end_to_end_config(dir / "synth");
  if (app::cmd_synth_tags(app::parse_run_config(base), {}, log) != 0) fail(ErrorKind::io, "synth-tags failed");

  json j = base;
  j["output_dir"] = (dir / "ingest").string();
  app::IngestOptions in;
  in.inputs = {dir / "synth" / "tags.bin"};
  in.channels = {kTT};
  in.selections = {PairSelection::same_pulse};
  if (app::cmd_ingest(app::parse_run_config(j), in, log) != 0) fail(ErrorKind::io, "ingest failed");

  EndToEnd r;
  app::AnalyzeOptions an;
  j["output_dir"] = (dir / "analyze_counts").string();
  an.inputs = {dir / "ingest" / "counts_tt_same_pulse_tags.cmap"};
  if (app::cmd_analyze(app::parse_run_config(j), an, log) != 0) fail(ErrorKind::io, "analyze failed");
  const json counts = json::parse(read_text_file(dir / "analyze_counts" / "schmidt_results.json"));
  r.t_c = counts["results"][0]["t_c"].get<double>();
  r.t_c_err = counts["results"][0]["t_c_err"].get<double>();
  r.pairs = read_map(an.inputs[0]).total();

  j["output_dir"] = (dir / "analyze_noiseless").string();
  an.inputs = {dir / "synth" / "noiseless_tt.cmap"};
  if (app::cmd_analyze(app::parse_run_config(j), an, log) != 0) fail(ErrorKind::io, "analyze failed");
  const json ref = json::parse(read_text_file(dir / "analyze_noiseless" / "schmidt_results.json"));
  r.noiseless = ref["results"][0]["t_c"].get<double>();
  return r;
}

void end_to_end(Outcome& o, const fs::path& work) {
  std::ostringstream log;
  const EndToEnd a = run_end_to_end(work / "e2e_a", log);
  const EndToEnd b = run_end_to_end(work / "e2e_b", log);
  o.info("same-pulse tt pairs " + fmt(a.pairs, 6) + ", analysis bin 0.5 ns, seed 1");
  o.check(std::abs(a.t_c - a.noiseless) <= a.t_c_err,
          "T_c(counts) = " + fmt(a.t_c) + " +- " + fmt(a.t_c_err) + " vs noiseless " + fmt(a.noiseless) +
              " (|z| = " + fmt(std::abs(a.t_c - a.noiseless) / a.t_c_err, 3) + ")");

  bool identical = a.t_c == b.t_c && a.t_c_err == b.t_c_err;
  for (const char* f : {"synth/tags.bin", "synth/tags.bin.json", "synth/noiseless_tt.cmap",
                        "ingest/counts_tt_same_pulse_tags.cmap"})
    identical = identical && read_text_file(work / "e2e_a" / f) == read_text_file(work / "e2e_b" / f);
  o.check(identical, "rerun with the same seed is byte-identical (tags, sidecar, maps, T_c)");
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "wqed_acceptance";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only = std::stoi(argv[++i]);
    } else {
      std::cerr << "usage: wqed_acceptance [--work-dir DIR] [--only N]\n";
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<Criterion> criteria{
      {1, "transfer-function identities", 1.0, transfer_identities},
      {2, "free decay", 1.0, free_decay},
      {3, "saturation parameter and critical photon number", 10.0, saturation_consistency},
      {4, "brute-force two-photon oracle", 300.0, collision_oracle},
      {5, "reflection antibunching", 60.0, reflection_antibunching},
      {6, "bunching trend and factorizable references", 600.0, bunching_trend},
      {7, "cw limit of g2(0)", 120.0, cw_limit},
      {8, "Schmidt arithmetic", 1.0, schmidt_arithmetic},
      {9, "calibration round trip", 600.0, calibration_round_trip},
      {10, "end-to-end tag pipeline", 900.0, [&](Outcome& o) { end_to_end(o, work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.check(secs < c.limit_s, "runtime " + fmt(secs, 3) + " s < " + fmt(c.limit_s) + " s");
    failed += !o.pass;
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
