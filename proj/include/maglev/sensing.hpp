#pragma once

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace maglev {

/// Proximity sensor input-output map: affine in the gap over a bounded
/// linear window, clamped outside it.
///
/// The default curve is proximity-style: voltage rises as the plate gets
/// closer (negative slope in gap), spanning 4-10 V over the 2-5 mm window.
struct SensorCurve {
    double gain = -2.0;      // V/mm, nonzero; sign sets the direction of the map
    double offset = 14.0;    // V
    double linear_lo_mm = 2.0;
    double linear_hi_mm = 5.0;
    double noise_sigma_v = 0.0;

    void validate() const; // throws std::invalid_argument

    double voltage_at(double gap_mm) const { return gain * gap_mm + offset; }

    bool in_linear_range(double gap_mm) const {
        return gap_mm >= linear_lo_mm && gap_mm <= linear_hi_mm;
    }
};

struct SensorReading {
    double voltage_v = 0.0;
    bool in_range = true;
};

struct CalibrationSample {
    double gap_mm = 0.0;
    double voltage_v = 0.0;
};

/// Result of fitting a calibration data set. `degraded` marks the global
/// fallback fit used when no linear window could be detected.
struct CalibrationFit {
    SensorCurve curve;
    double max_residual_v = 0.0;
    bool degraded = false;
};

/// Noise-free sensor evaluation. Outside the linear window the voltage is
/// clamped to the nearer boundary value and in_range is false.
SensorReading read(double gap_mm, const SensorCurve& curve);

/// Noisy variant; adds zero-mean Gaussian noise from the caller's generator.
SensorReading read(double gap_mm, const SensorCurve& curve, std::mt19937_64& rng);

/// Least-squares affine fit over the longest contiguous gap-sorted run whose
/// fit keeps every absolute residual below residual_tol (given as a fraction
/// of the sample voltage span). The detected run becomes the curve's linear
/// window. Falls back to a global fit with degraded=true when no run of at
/// least three samples qualifies.
CalibrationFit fit_calibration(std::vector<CalibrationSample> samples,
                               double residual_tol_fraction = 0.02);

/// Reads samples from CSV with header `gap_mm,voltage_v`.
/// Throws std::runtime_error on malformed input.
std::vector<CalibrationSample> load_calibration_csv(std::istream& in);
std::vector<CalibrationSample> load_calibration_csv(const std::string& path);

} // namespace maglev
