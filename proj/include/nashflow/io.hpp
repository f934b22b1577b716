#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nashflow/error.hpp"
#include "nashflow/flow.hpp"
#include "nashflow/grid.hpp"

namespace nashflow {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidArgument("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Header `t,<block>.<coord>,...,residual` with 0-based indices.
inline std::string trajectory_header(const BlockLayout& layout) {
  std::string h = "t";
  for (std::size_t j = 0; j < layout.players(); ++j)
    for (std::size_t i = 0; i < layout.size(j); ++i) h += "," + std::to_string(j) + "." + std::to_string(i);
  return h + ",residual";
}

inline void write_trajectory_csv(std::ostream& os, const FlowTrajectory& traj) {
  os << trajectory_header(*traj.layout) << '\n';
  for (std::size_t r = 0; r < traj.records(); ++r) {
    os << format_double(traj.times[r]);
    for (Eigen::Index i = 0; i < traj.states[r].size(); ++i) os << ',' << format_double(traj.states[r][i]);
    os << ',' << format_double(traj.residuals[r]) << '\n';
  }
}

inline void write_trajectory_csv(const std::string& path, const FlowTrajectory& traj) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_trajectory_csv(os, traj);
  if (!os) throw Error("write to '" + path + "' failed");
}

/// Reads a file written by write_trajectory_csv. The block layout is
/// recovered from the header; the Cesaro field is recomputed from the records.
inline FlowTrajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("trajectory CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cols = split_csv(line);
  if (cols.size() < 3 || cols.front() != "t" || cols.back() != "residual")
    throw InvalidArgument("trajectory CSV: header must be t,...,residual");
  std::vector<std::size_t> sizes;
  for (std::size_t c = 1; c + 1 < cols.size(); ++c) {
    const auto dot = cols[c].find('.');
    if (dot == std::string_view::npos) throw InvalidArgument("trajectory CSV: bad column '" + std::string(cols[c]) + "'");
    const auto block = static_cast<std::size_t>(parse_double(cols[c].substr(0, dot)));
    const auto coord = static_cast<std::size_t>(parse_double(cols[c].substr(dot + 1)));
    if (block == sizes.size() && coord == 0) {
      sizes.push_back(1);
    } else if (!sizes.empty() && block + 1 == sizes.size() && coord == sizes.back()) {
      ++sizes.back();
    } else {
      throw InvalidArgument("trajectory CSV: columns out of block order at '" + std::string(cols[c]) + "'");
    }
  }
  FlowTrajectory traj;
  traj.layout = make_layout(sizes);
  const std::size_t width = cols.size();
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != width) throw InvalidArgument("trajectory CSV: row has " + std::to_string(f.size()) + " fields");
    traj.times.push_back(parse_double(f.front()));
    Vector x(static_cast<Eigen::Index>(width - 2));
    for (std::size_t c = 1; c + 1 < width; ++c) x[static_cast<Eigen::Index>(c - 1)] = parse_double(f[c]);
    traj.states.push_back(std::move(x));
    traj.residuals.push_back(parse_double(f.back()));
  }
  if (traj.records() == 0) throw InvalidArgument("trajectory CSV: no rows");
  traj.steps = traj.records() - 1;
  traj.cesaro = traj.records() >= 2 ? cesaro_mean(traj) : traj.final_state();
  return traj;
}

inline FlowTrajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open '" + path + "'");
  return read_trajectory_csv(is);
}

/// One row per grid node: coordinates, then each player's value.
inline void write_grid_snapshot(std::ostream& os, const Grid& g, const Vector& v) {
  const Eigen::Index m = g.size();
  if (v.size() % m != 0) throw DimensionError("write_grid_snapshot: length is not a multiple of the grid size");
  const Eigen::Index players = v.size() / m;
  os << (g.dim() == 1 ? "x" : "x,y");
  for (Eigen::Index j = 0; j < players; ++j) os << ",p" << j;
  os << '\n';
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto xy = g.coordinates(k);
    os << format_double(xy[0]);
    if (g.dim() == 2) os << ',' << format_double(xy[1]);
    for (Eigen::Index j = 0; j < players; ++j) os << ',' << format_double(v[j * m + k]);
    os << '\n';
  }
}

inline void write_grid_snapshot(const std::string& path, const Grid& g, const Vector& v) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_grid_snapshot(os, g, v);
}

}  // namespace nashflow
