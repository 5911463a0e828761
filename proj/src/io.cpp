#include "ilab/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ilab {

std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("fmt_double: conversion failed");
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::string trajectory_to_csv(const BoostingTrajectory& traj) {
  std::ostringstream os;
  os << "step,t,rho,l1_norm,excess_risk,stopped_flag\n";
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    os << traj.steps[k] << ',' << fmt_double(traj.times[k]) << ',' << fmt_double(traj.rho[k])
       << ',' << fmt_double(traj.l1_norm[k]) << ',' << fmt_double(traj.risk[k]) << ','
       << int(traj.stopped_flag[k]) << '\n';
  }
  return os.str();
}

}  // namespace ilab
