#pragma once

// Plain-text artifacts: per-cell field CSVs, the iteration log, and control
// checkpoints. Fields are written y-outer / x-inner, 17 significant digits,
// under a one-line header carrying the grid.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/optimizer.hpp"
#include "m1rt/transport.hpp"

namespace m1rt {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw SolverError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolverError("cannot open " + path.string() + " for writing");
  return out;
}

inline void finish_write(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw SolverError("write failed: " + path.string());
}

inline std::string grid_header(const Grid& g) {
  std::ostringstream os;
  os << "# nx=" << g.nx << ",ny=" << g.ny << ",xmin=" << kDomainMin << ",xmax=" << kDomainMax
     << ",ymin=" << kDomainMin << ",ymax=" << kDomainMax;
  return os.str();
}

inline void export_field(const Grid& grid, const std::vector<double>& values, const fs::path& path) {
  require(values.size() == grid.size(), "export_field: field does not match grid (" + path.string() + ")");
  std::ofstream out = open_for_write(path);
  out << grid_header(grid) << '\n';
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      if (i) out << ',';
      out << format_double(values[grid.index(i, j)]);
    }
    out << '\n';
  }
  finish_write(out, path);
}

// "dir/q1.csv" -> "dir/q1_x.csv" and "dir/q1_y.csv"
inline std::pair<fs::path, fs::path> vector_paths(const fs::path& path) {
  const fs::path dir = path.parent_path();
  const std::string stem = path.stem().string();
  const std::string ext = path.extension().string();
  return {dir / (stem + "_x" + ext), dir / (stem + "_y" + ext)};
}

inline void export_vector_field(const Grid& grid, const std::vector<double>& x, const std::vector<double>& y,
                                const fs::path& path) {
  const auto [px, py] = vector_paths(path);
  export_field(grid, x, px);
  export_field(grid, y, py);
}

inline std::vector<double> region_codes(const RegionMap& r) {
  std::vector<double> v(r.size());
  for (std::size_t c = 0; c < r.size(); ++c) v[c] = static_cast<double>(r.label[c]) + 3.0 * r.is_void[c];
  return v;
}

inline RegionMap regions_from_codes(const std::vector<double>& codes) {
  RegionMap r;
  r.label.resize(codes.size());
  r.is_void.resize(codes.size());
  for (std::size_t c = 0; c < codes.size(); ++c) {
    const int k = static_cast<int>(codes[c]);
    require(k >= 0 && k < 6 && k == codes[c], "region code out of range");
    r.label[c] = static_cast<Region>(k % 3);
    r.is_void[c] = k >= 3 ? 1 : 0;
  }
  return r;
}

struct FieldCsv {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;  // y-outer, same layout as Grid::index
};

inline FieldCsv read_field_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SolverError("cannot open " + path.string());
  auto fail = [&](const std::string& what) { throw ValidationError(path.string() + ": " + what); };
  std::string line;
  if (!std::getline(in, line)) fail("empty file");
  FieldCsv f;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  if (std::sscanf(line.c_str(), "# nx=%d,ny=%d,xmin=%lf,xmax=%lf,ymin=%lf,ymax=%lf", &f.nx, &f.ny, &x0, &x1, &y0,
                  &y1) != 6)
    fail("bad header '" + line + "'");
  if (f.nx < 1 || f.ny < 1) fail("bad grid size in header");
  f.values.reserve(static_cast<std::size_t>(f.nx) * static_cast<std::size_t>(f.ny));
  for (int j = 0; j < f.ny; ++j) {
    if (!std::getline(in, line)) fail("expected " + std::to_string(f.ny) + " data rows");
    std::istringstream row(line);
    std::string cell;
    int count = 0;
    while (std::getline(row, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) fail("row " + std::to_string(j) + ": not a number '" + cell + "'");
      f.values.push_back(v);
      ++count;
    }
    if (count != f.nx) fail("row " + std::to_string(j) + " has " + std::to_string(count) + " values");
  }
  return f;
}

// ---------------------------------------------------------------------------
// Iteration log

inline std::string iteration_log_header() {
  return "iteration,objective,step_norm,projected_grad,step_size,backtracks,wall_time";
}

inline std::string iteration_log_row(const IterationRecord& r) {
  std::ostringstream os;
  os << r.iteration << ',' << format_double(r.objective) << ',' << format_double(r.step_norm) << ','
     << format_double(r.projected_grad) << ',' << format_double(r.step_size) << ',' << r.backtracks << ','
     << format_double(r.wall_time);
  return os.str();
}

// Streams one row per record; flushed so a killed run keeps its history.
class IterationLog {
public:
  explicit IterationLog(const fs::path& path) : path_(path), out_(open_for_write(path)) {
    out_ << iteration_log_header() << '\n';
    out_.flush();
  }
  void append(const IterationRecord& r) {
    out_ << iteration_log_row(r) << '\n';
    out_.flush();
    if (!out_) throw SolverError("write failed: " + path_.string());
  }

private:
  fs::path path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Control checkpoints: a header line, then per snapshot three lines
// (q0, q1x, q1y) of comma-separated values.

inline void write_control(const ControlField& q, const fs::path& path) {
  std::ofstream out = open_for_write(path);
  out << "# m1rt-control cells=" << q.cells() << ",snapshots=" << q.snapshots()
      << ",stationary=" << (q.stationary ? 1 : 0) << '\n';
  auto row = [&](const std::vector<double>& v) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      if (c) out << ',';
      out << format_double(v[c]);
    }
    out << '\n';
  };
  for (const MomentField& s : q.steps) {
    row(s.psi0);
    row(s.psi1x);
    row(s.psi1y);
  }
  finish_write(out, path);
}

inline ControlField read_control(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SolverError("cannot open " + path.string());
  auto fail = [&](const std::string& what) { throw ValidationError(path.string() + ": " + what); };
  std::string line;
  std::size_t cells = 0, snapshots = 0;
  int stationary = 0;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "# m1rt-control cells=%zu,snapshots=%zu,stationary=%d", &cells, &snapshots,
                  &stationary) != 3)
    fail("not a control checkpoint");
  if (stationary && snapshots != 1) fail("stationary control must have one snapshot");
  ControlField q;
  q.stationary = stationary != 0;
  q.steps.assign(snapshots, MomentField(cells));
  auto read_row = [&](std::vector<double>& v) {
    if (!std::getline(in, line)) fail("truncated");
    std::istringstream row(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(row, cell, ',')) {
      if (k >= cells) fail("row too long");
      v[k++] = std::strtod(cell.c_str(), nullptr);
    }
    if (k != cells) fail("row too short");
  };
  for (MomentField& s : q.steps) {
    read_row(s.psi0);
    read_row(s.psi1x);
    read_row(s.psi1y);
  }
  return q;
}

}  // namespace m1rt
