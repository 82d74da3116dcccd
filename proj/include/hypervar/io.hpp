// CSV input and output for sampled curves. Numbers are written with 17
// significant digits so files round-trip exactly.
#pragma once

#include <iosfwd>
#include <string>

#include "hypervar/core.hpp"

namespace hypervar {

/// printf("%.17g").
std::string format_double(double x);

/// Header t,x,y (plus vx,vy when the curve carries velocities).
void write_curve_csv(std::ostream& os, const SampledCurve& c);
void write_curve_csv(const std::string& path, const SampledCurve& c);

/// Reads the format written by write_curve_csv; extra columns beyond vx,vy
/// are rejected.
SampledCurve read_curve_csv(std::istream& is);
SampledCurve read_curve_csv(const std::string& path);

}  // namespace hypervar
