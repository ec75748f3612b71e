// Newline-delimited JSON stream files and atomic file output.

#pragma once

#include <string>
#include <vector>

#include "rangeloc/measurements.hpp"
#include "rangeloc/pipeline.hpp"
#include "rangeloc/sim.hpp"

namespace rangeloc {

/// Writes to a temporary file next to `path`, then renames it into place.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Rotation from 9 row-major values. Matrices within 1e-3 of a rotation are
/// projected onto SO(3); anything further off throws ParseError.
Mat3 rotation_from_row_major(const std::vector<double>& values);

// Each reader throws ParseError with "path:line" context. Range and
// orientation streams must have strictly increasing timestamps.
std::vector<RangeMeasurement> read_ranges(const std::string& path);
std::vector<OrientationMeasurement> read_orientations(const std::string& path);
AnchorSet read_anchors(const std::string& path);
std::vector<Estimate> read_estimates(const std::string& path);
/// Truth files use the estimate record layout with "R" always present.
std::vector<TruthSample> read_truth(const std::string& path);

std::string format_ranges(const std::vector<RangeMeasurement>& ranges);
std::string format_orientations(const std::vector<OrientationMeasurement>& orientations);
std::string format_anchors(const AnchorSet& anchors);
std::string format_estimates(const std::vector<Estimate>& estimates);
std::string format_truth(const std::vector<TruthSample>& truth);

}  // namespace rangeloc
