#include "hypervar/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace hypervar {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_curve_csv(std::ostream& os, const SampledCurve& c) {
  const bool vel = c.velocities().has_value();
  os << (vel ? "t,x,y,vx,vy\n" : "t,x,y\n");
  for (std::size_t k = 0; k < c.size(); ++k) {
    const DiskPoint& p = c.points()[k];
    os << format_double(c.times()[k]) << ',' << format_double(p.x()) << ',' << format_double(p.y());
    if (vel) {
      const Complex v = (*c.velocities())[k].v;
      os << ',' << format_double(v.real()) << ',' << format_double(v.imag());
    }
    os << '\n';
  }
}

void write_curve_csv(const std::string& path, const SampledCurve& c) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_curve_csv(os, c);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("curve CSV line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

SampledCurve read_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("curve CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool vel = line == "t,x,y,vx,vy";
  if (!vel && line != "t,x,y") throw Error("curve CSV header must be t,x,y or t,x,y,vx,vy");
  const std::size_t cols = vel ? 5 : 3;
  std::vector<double> times;
  std::vector<DiskPoint> points;
  std::vector<TangentVec> vels;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != cols) throw Error("curve CSV line " + std::to_string(lineno) + ": wrong column count");
    times.push_back(parse_number(cells[0], lineno));
    const DiskPoint p(parse_number(cells[1], lineno), parse_number(cells[2], lineno));
    points.push_back(p);
    if (vel) vels.emplace_back(p, Complex{parse_number(cells[3], lineno), parse_number(cells[4], lineno)});
  }
  if (vel) return SampledCurve(std::move(times), std::move(points), std::move(vels));
  return SampledCurve(std::move(times), std::move(points));
}

SampledCurve read_curve_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return read_curve_csv(is);
}

}  // namespace hypervar
