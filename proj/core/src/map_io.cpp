#include "wqed/map_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wqed/errors.hpp"

namespace wqed {

namespace fs = std::filesystem;

nlohmann::json to_json(const EmitterParams& p) {
  return {{"gamma_total_per_ns", p.gamma_total},
          {"beta", p.beta},
          {"gamma_deph_per_ns", p.gamma_deph},
          {"delta_e_rad_per_ns", p.delta_e}};
}

nlohmann::json to_json(const PulseSpec& p) {
  nlohmann::json j;
  j["shape"] = p.shape == PulseShape::gaussian ? "gaussian" : "cw";
  if (p.shape == PulseShape::gaussian) {
    j["sigma_ns"] = p.sigma;
    j["center_ns"] = p.center;
  }
  j["mean_photons"] = p.mean_photons;
  j["detuning_rad_per_ns"] = p.detuning;
  return j;
}

std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json map_header(const CorrelationMap& map, PayloadEncoding encoding) {
  nlohmann::json h;
  h["format"] = "wqed-correlation-map";
  h["version"] = 1;
  h["d_t"] = map.d_t;
  h["t_origin"] = map.t_origin;
  h["rows"] = map.rows();
  h["cols"] = map.cols();
  h["channels"] = map.channels.label();
  h["kind"] = std::string(to_string(map.kind));
  h["payload"] = encoding == PayloadEncoding::f64le ? "f64le" : "csv";
  h["meta"] = map.meta;
  return h;
}

void write_map(std::ostream& os, const CorrelationMap& map, PayloadEncoding encoding) {
  map.validate();
  os << map_header(map, encoding).dump() << '\n';
  if (encoding == PayloadEncoding::f64le) {
    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(map.values.size()) * 8);
    for (Eigen::Index j = 0; j < map.rows(); ++j)
      for (Eigen::Index l = 0; l < map.cols(); ++l)
        put_u64le(bytes, std::bit_cast<std::uint64_t>(map.values(j, l)));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    for (Eigen::Index j = 0; j < map.rows(); ++j) {
      for (Eigen::Index l = 0; l < map.cols(); ++l) {
        if (l) os << ',';
        os << format_g9(map.values(j, l));
      }
      os << '\n';
    }
  }
  if (!os) fail(ErrorKind::io, "failed writing correlation map");
}

void write_map(const fs::path& path, const CorrelationMap& map, PayloadEncoding encoding) {
  std::ostringstream os(std::ios::binary);
  write_map(os, map, encoding);
  write_text_file(path, os.str());
}

CorrelationMap read_map(std::istream& is) {
  std::string header_line;
  if (!std::getline(is, header_line)) fail(ErrorKind::io, "missing correlation map header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("malformed correlation map header: ") + e.what());
  }
  if (h.value("format", "") != "wqed-correlation-map")
    fail(ErrorKind::io, "not a correlation map file");

  CorrelationMap map;
  try {
    map.d_t = h.at("d_t").get<double>();
    map.t_origin = h.at("t_origin").get<double>();
    map.channels = ChannelPair::parse(h.at("channels").get<std::string>());
    map.kind = parse_map_kind(h.at("kind").get<std::string>());
    map.meta = h.value("meta", nlohmann::json::object());
    const auto rows = h.at("rows").get<Eigen::Index>();
    const auto cols = h.at("cols").get<Eigen::Index>();
    require(rows > 0 && cols > 0, ErrorKind::io, "map shape must be positive");
    map.values.resize(rows, cols);
    const std::string payload = h.at("payload").get<std::string>();
    if (payload == "f64le") {
      std::string bytes(static_cast<std::size_t>(rows * cols) * 8, '\0');
      is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (is.gcount() != static_cast<std::streamsize>(bytes.size()))
        fail(ErrorKind::io, "truncated correlation map payload");
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
      for (Eigen::Index j = 0; j < rows; ++j)
        for (Eigen::Index l = 0; l < cols; ++l, p += 8)
          map.values(j, l) = std::bit_cast<double>(get_u64le(p));
    } else if (payload == "csv") {
      std::string line;
      for (Eigen::Index j = 0; j < rows; ++j) {
        if (!std::getline(is, line)) fail(ErrorKind::io, "truncated csv payload");
        std::istringstream ls(line);
        std::string cell;
        for (Eigen::Index l = 0; l < cols; ++l) {
          if (!std::getline(ls, cell, ',')) fail(ErrorKind::io, "short csv row");
          map.values(j, l) = std::stod(cell);
        }
      }
    } else {
      fail(ErrorKind::io, "unknown payload encoding '" + payload + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("malformed correlation map header: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorKind::io, "malformed csv number in correlation map");
  }
  map.validate();
  return map;
}

CorrelationMap read_map(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::io, "cannot open " + path.string());
  return read_map(is);
}

void write_trace_csv(const fs::path& path, const IntensityTrace& trace) {
  std::string out = "t_ns,g1_";
  out += channel_letter(trace.channel);
  out += "_per_ns\n";
  for (std::size_t j = 0; j < trace.values.size(); ++j) {
    out += format_g9(trace.time(j));
    out += ',';
    out += format_g9(trace.values[j]);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_linecut_csv(const fs::path& path, const LineCut& cut, std::string_view coordinate_name) {
  std::string out(coordinate_name);
  out += "_ns,value,partial\n";
  for (std::size_t k = 0; k < cut.values.size(); ++k) {
    out += format_g9(cut.coordinate(k));
    out += ',';
    out += format_g9(cut.values[k]);
    out += cut.partial[k] ? ",1\n" : ",0\n";
  }
  write_text_file(path, out);
}

void write_text_file(const fs::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::io, "cannot write " + path.string());
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) fail(ErrorKind::io, "failed writing " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::io, "cannot move " + tmp.string() + " to " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace wqed
