#pragma once

#include "psdepth/ipiano.hpp"
#include "psdepth/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace psdepth::io {

namespace fs = std::filesystem;

namespace detail {

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  return out;
}

// Next whitespace-delimited header token, skipping '#' comments.
inline std::string header_token(std::istream& in, const fs::path& path) {
  std::string tok;
  for (;;) {
    int ch = in.get();
    if (ch == EOF) throw InputError("'" + path.string() + "': truncated header");
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
}

inline long parse_positive(const std::string& tok, const fs::path& path, const char* what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw InputError("'" + path.string() + "': invalid " + what + " '" + tok + "'");
  }
}

}  // namespace detail

/// Single-channel image, row-major with v = 0 the top row, values in [0, 1].
struct GrayImage {
  Grid grid;
  Vector values;
};

/// Binary PGM (P5). 8- and 16-bit samples are read; values are divided by
/// maxval.
inline GrayImage read_pgm(const fs::path& path) {
  auto in = detail::open_in(path);
  if (detail::header_token(in, path) != "P5") throw InputError("'" + path.string() + "': not a binary PGM (P5)");
  const long w = detail::parse_positive(detail::header_token(in, path), path, "width");
  const long h = detail::parse_positive(detail::header_token(in, path), path, "height");
  const long maxval = detail::parse_positive(detail::header_token(in, path), path, "maxval");
  if (maxval > 65535) throw InputError("'" + path.string() + "': maxval above 65535");
  const int bytes = maxval < 256 ? 1 : 2;
  const Grid grid(w, h);
  std::vector<unsigned char> raw(static_cast<std::size_t>(grid.size() * bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw InputError("'" + path.string() + "': truncated pixel data");
  }
  Vector values(grid.size());
  for (Index j = 0; j < grid.size(); ++j) {
    const std::size_t o = static_cast<std::size_t>(j * bytes);
    const unsigned sample = bytes == 1 ? raw[o] : (static_cast<unsigned>(raw[o]) << 8) | raw[o + 1];
    values(j) = static_cast<double>(sample) / static_cast<double>(maxval);
  }
  return {grid, std::move(values)};
}

/// 16-bit big-endian P5 with maxval 65535. Values are clamped to [0, 1] and
/// rounded to the nearest sample.
inline void write_pgm(const fs::path& path, const Grid& grid, const Vector& values) {
  require_size(values.size(), grid.size(), "write_pgm");
  auto out = detail::open_out(path);
  out << "P5\n" << grid.width() << ' ' << grid.height() << "\n65535\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(2 * grid.size()));
  for (Index j = 0; j < grid.size(); ++j) {
    const double v = std::clamp(values(j), 0.0, 1.0);
    const auto sample = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    raw[static_cast<std::size_t>(2 * j)] = static_cast<unsigned char>(sample >> 8);
    raw[static_cast<std::size_t>(2 * j + 1)] = static_cast<unsigned char>(sample & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

/// Float map with 1 ("Pf") or 3 ("PF") channels; `values` is n x channels
/// with pixel rows in top-to-bottom order.
struct FloatMap {
  Grid grid;
  Matrix values;
};

inline FloatMap read_pfm(const fs::path& path) {
  auto in = detail::open_in(path);
  const std::string magic = detail::header_token(in, path);
  Index channels = 0;
  if (magic == "Pf") channels = 1;
  else if (magic == "PF") channels = 3;
  else throw InputError("'" + path.string() + "': not a PFM file");
  const long w = detail::parse_positive(detail::header_token(in, path), path, "width");
  const long h = detail::parse_positive(detail::header_token(in, path), path, "height");
  const std::string scale_tok = detail::header_token(in, path);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw InputError("'" + path.string() + "': invalid scale '" + scale_tok + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw InputError("'" + path.string() + "': invalid scale");
  const bool little = scale < 0.0;
  const Grid grid(w, h);
  std::vector<unsigned char> raw(static_cast<std::size_t>(grid.size() * channels * 4));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw InputError("'" + path.string() + "': truncated pixel data");
  }
  Matrix values(grid.size(), channels);
  std::size_t o = 0;
  // Scanlines are stored bottom to top.
  for (Index row = h - 1; row >= 0; --row) {
    for (Index u = 0; u < w; ++u) {
      for (Index c = 0; c < channels; ++c, o += 4) {
        std::uint32_t bits = little ? (std::uint32_t{raw[o]} | std::uint32_t{raw[o + 1]} << 8 |
                                       std::uint32_t{raw[o + 2]} << 16 | std::uint32_t{raw[o + 3]} << 24)
                                    : (std::uint32_t{raw[o + 3]} | std::uint32_t{raw[o + 2]} << 8 |
                                       std::uint32_t{raw[o + 1]} << 16 | std::uint32_t{raw[o]} << 24);
        values(grid.index(u, row), c) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  }
  if (!values.allFinite()) throw InputError("'" + path.string() + "': non-finite value");
  return {grid, std::move(values)};
}

/// Little-endian float32 PFM, scale -1.0.
inline void write_pfm(const fs::path& path, const Grid& grid, const Matrix& values) {
  require_size(values.rows(), grid.size(), "write_pfm");
  if (values.cols() != 1 && values.cols() != 3) throw InputError("write_pfm: need 1 or 3 channels");
  auto out = detail::open_out(path);
  out << (values.cols() == 1 ? "Pf" : "PF") << '\n' << grid.width() << ' ' << grid.height() << "\n-1.0\n";
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(values.size() * 4));
  for (Index row = grid.height() - 1; row >= 0; --row) {
    for (Index u = 0; u < grid.width(); ++u) {
      for (Index c = 0; c < values.cols(); ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values(grid.index(u, row), c)));
        for (int b = 0; b < 4; ++b) raw.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xff));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

inline DepthMap read_depth(const fs::path& path) {
  FloatMap map = read_pfm(path);
  if (map.values.cols() != 1) throw InputError("'" + path.string() + "': expected a single-channel PFM");
  return {map.grid, map.values.col(0)};
}

inline AlbedoMap read_albedo(const fs::path& path) {
  FloatMap map = read_pfm(path);
  if (map.values.cols() != 1) throw InputError("'" + path.string() + "': expected a single-channel PFM");
  return {map.grid, map.values.col(0)};
}

inline NormalField read_normals(const fs::path& path) {
  FloatMap map = read_pfm(path);
  if (map.values.cols() != 3) throw InputError("'" + path.string() + "': expected a three-channel PFM");
  // Stored as float32; renormalize so every row is a unit vector again.
  NormalField::Storage n = map.values;
  for (Index j = 0; j < n.rows(); ++j) {
    const double len = n.row(j).norm();
    if (!(len > 0.0)) throw InputError("'" + path.string() + "': zero normal at pixel " + std::to_string(j));
    n.row(j) /= len;
  }
  return {map.grid, std::move(n)};
}

inline void write_depth(const fs::path& path, const DepthMap& d) { write_pfm(path, d.grid, d.z); }
inline void write_albedo(const fs::path& path, const AlbedoMap& a) { write_pfm(path, a.grid, a.rho); }
inline void write_normals(const fs::path& path, const NormalField& n) { write_pfm(path, n.grid, n.normals); }

/// One "sx,sy,sz" row per light. Blank lines and '#' comments are ignored.
inline LightMatrix read_lights_csv(const fs::path& path) {
  auto in = detail::open_in(path);
  std::vector<Eigen::Vector3d> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InputError("'" + path.string() + "' line " + std::to_string(lineno) + ": malformed number '" + cell +
                         "'");
      }
    }
    if (vals.size() != 3) {
      throw InputError("'" + path.string() + "' line " + std::to_string(lineno) + ": expected 3 values, got " +
                       std::to_string(vals.size()));
    }
    rows.emplace_back(vals[0], vals[1], vals[2]);
  }
  if (rows.empty()) throw InputError("'" + path.string() + "': no lights");
  LightMatrix::Storage s(static_cast<Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) s.row(static_cast<Index>(i)) = rows[i].transpose();
  return LightMatrix(std::move(s));
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_lights_csv(const fs::path& path, const LightMatrix& lights) {
  auto out = detail::open_out(path);
  const auto& s = lights.matrix();
  for (Index i = 0; i < s.rows(); ++i) {
    out << format_double(s(i, 0)) << ',' << format_double(s(i, 1)) << ',' << format_double(s(i, 2)) << '\n';
  }
}

/// *.pgm files of a directory in lexicographic order.
inline std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  if (files.empty()) throw InputError("no .pgm images in '" + dir.string() + "'");
  return files;
}

inline ImageStack read_image_stack(const std::vector<fs::path>& files) {
  if (files.empty()) throw InputError("empty image list");
  const GrayImage first = read_pgm(files.front());
  Matrix intensities(static_cast<Index>(files.size()), first.grid.size());
  intensities.row(0) = first.values.transpose();
  for (std::size_t i = 1; i < files.size(); ++i) {
    const GrayImage img = read_pgm(files[i]);
    if (img.grid != first.grid) {
      throw InputError("image '" + files[i].string() + "' is " + std::to_string(img.grid.width()) + "x" +
                       std::to_string(img.grid.height()) + ", expected " + std::to_string(first.grid.width()) + "x" +
                       std::to_string(first.grid.height()));
    }
    intensities.row(static_cast<Index>(i)) = img.values.transpose();
  }
  return {first.grid, std::move(intensities)};
}

/// Pixels with a zero mask sample are excluded from the data term.
inline Vector read_mask(const fs::path& path, const Grid& grid) {
  const GrayImage img = read_pgm(path);
  require_same_grid(img.grid, grid, "mask");
  return (img.values.array() != 0.0).cast<double>().matrix();
}

// ---------------------------------------------------------------------------
// Solver configuration

inline nlohmann::json config_to_json(const SolverConfig& c) {
  return {{"lambda", c.lambda},
          {"c", c.c},
          {"d", c.d},
          {"eta", c.eta},
          {"mu", c.mu},
          {"beta_mode", c.beta_mode == BetaMode::Adaptive ? "adaptive" : "constant"},
          {"beta_constant", c.beta_constant},
          {"gradient_mode", c.gradient_mode == GradientMode::Exact ? "exact" : "approx"},
          {"inner_max_iters", c.inner_max_iters},
          {"outer_max_iters", c.outer_max_iters},
          {"rel_tol", c.rel_tol},
          {"L_init", c.L_init},
          {"record_descent", c.record_descent}};
}

/// Flat JSON object; missing keys keep their defaults, unknown keys and
/// wrong types are errors.
inline SolverConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("malformed config: expected a JSON object");
  SolverConfig c;
  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw InputError("malformed config: '" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw InputError("malformed config: '" + key + "' must be an integer");
    return v.get<int>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "lambda") c.lambda = number(v, key);
    else if (key == "c") c.c = number(v, key);
    else if (key == "d") c.d = number(v, key);
    else if (key == "eta") c.eta = number(v, key);
    else if (key == "mu") c.mu = number(v, key);
    else if (key == "beta_constant") c.beta_constant = number(v, key);
    else if (key == "rel_tol") c.rel_tol = number(v, key);
    else if (key == "L_init") c.L_init = number(v, key);
    else if (key == "inner_max_iters") c.inner_max_iters = integer(v, key);
    else if (key == "outer_max_iters") c.outer_max_iters = integer(v, key);
    else if (key == "record_descent") {
      if (!v.is_boolean()) throw InputError("malformed config: 'record_descent' must be a boolean");
      c.record_descent = v.get<bool>();
    } else if (key == "beta_mode") {
      const std::string s = v.is_string() ? v.get<std::string>() : "";
      if (s == "adaptive") c.beta_mode = BetaMode::Adaptive;
      else if (s == "constant") c.beta_mode = BetaMode::Constant;
      else throw InputError("malformed config: beta_mode must be \"adaptive\" or \"constant\"");
    } else if (key == "gradient_mode") {
      const std::string s = v.is_string() ? v.get<std::string>() : "";
      if (s == "approx") c.gradient_mode = GradientMode::Approx;
      else if (s == "exact") c.gradient_mode = GradientMode::Exact;
      else throw InputError("malformed config: gradient_mode must be \"approx\" or \"exact\"");
    } else {
      throw InputError("malformed config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

inline SolverConfig read_config(const fs::path& path) {
  auto in = detail::open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("malformed config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Trace

inline constexpr const char* kTraceHeader = "k,ell,f_plus_g,L,alpha,beta,delta,Delta,H_delta,q_dot_gradf";

inline void write_trace_csv(std::ostream& out, const IterTrace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.inner) {
    out << r.k << ',' << r.ell << ',' << format_double(r.f_plus_g) << ',' << format_double(r.L) << ','
        << format_double(r.alpha) << ',' << format_double(r.beta) << ',' << format_double(r.delta) << ','
        << format_double(r.Delta) << ',' << format_double(r.H_delta) << ','
        << (r.q_dot_gradf ? format_double(*r.q_dot_gradf) : std::string()) << '\n';
  }
}

inline void write_trace_csv(const fs::path& path, const IterTrace& trace) {
  auto out = detail::open_out(path);
  write_trace_csv(out, trace);
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

/// Parsed trace.csv: one row per inner iteration, empty cells become NaN.
struct TraceTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw InputError("trace has no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

inline TraceTable read_trace_csv(const fs::path& path) {
  auto in = detail::open_in(path);
  TraceTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path.string() + "': empty trace");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      row.push_back(cell.empty() ? std::nan("") : std::stod(cell));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (row.size() != t.columns.size()) throw InputError("'" + path.string() + "': ragged trace row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace psdepth::io
