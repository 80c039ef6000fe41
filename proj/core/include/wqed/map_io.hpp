#pragma once

// File formats shared by the modules and the command-line tool.
//
// Correlation map file: one line of compact JSON header, a newline, then the
// payload. Header fields:
//   format    "wqed-correlation-map"
//   version   1
//   d_t       bin width, ns
//   t_origin  center of the first bin, ns
//   rows/cols matrix shape (rows index t1)
//   channels  e.g. "tt", "rr", "tr"
//   kind      "probability_density" | "counts"
//   payload   "f64le" (row-major little-endian float64) | "csv" (9 significant digits)
//   meta      free-form acquisition descriptor
// The header never contains a raw newline, so readers split on the first '\n'.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wqed/correlation_map.hpp"
#include "wqed/emitter.hpp"
#include "wqed/scattering.hpp"

namespace wqed {

enum class PayloadEncoding { f64le, csv };

nlohmann::json to_json(const EmitterParams& p);
nlohmann::json to_json(const PulseSpec& p);

nlohmann::json map_header(const CorrelationMap& map, PayloadEncoding encoding);

void write_map(std::ostream& os, const CorrelationMap& map,
               PayloadEncoding encoding = PayloadEncoding::f64le);
void write_map(const std::filesystem::path& path, const CorrelationMap& map,
               PayloadEncoding encoding = PayloadEncoding::f64le);
CorrelationMap read_map(std::istream& is);
CorrelationMap read_map(const std::filesystem::path& path);

/// "t_ns,g1_per_ns" rows at 9 significant digits.
void write_trace_csv(const std::filesystem::path& path, const IntensityTrace& trace);
/// "coordinate_ns,value,partial" rows.
void write_linecut_csv(const std::filesystem::path& path, const LineCut& cut,
                       std::string_view coordinate_name);

/// Formats with 9 significant digits (the CSV convention of this project).
std::string format_g9(double v);

/// Writes bytes atomically enough for our purposes: to a sibling temp file, then rename.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for manifests and reproducibility checks.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

void put_u64le(std::string& out, std::uint64_t v);
std::uint64_t get_u64le(const unsigned char* p);

}  // namespace wqed
