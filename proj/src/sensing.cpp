#include "maglev/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace maglev {

void SensorCurve::validate() const {
    if (!(std::isfinite(gain)) || gain == 0.0) {
        throw std::invalid_argument("sensor.gain: must be nonzero");
    }
    if (!(linear_lo_mm < linear_hi_mm)) {
        throw std::invalid_argument("sensor.linear_lo: must be below linear_hi");
    }
    if (!(noise_sigma_v >= 0.0) || !std::isfinite(noise_sigma_v)) {
        throw std::invalid_argument("sensor.noise_sigma: must be >= 0");
    }
}

SensorReading read(double gap_mm, const SensorCurve& curve) {
    if (gap_mm < curve.linear_lo_mm) {
        return SensorReading{curve.voltage_at(curve.linear_lo_mm), false};
    }
    if (gap_mm > curve.linear_hi_mm) {
        return SensorReading{curve.voltage_at(curve.linear_hi_mm), false};
    }
    return SensorReading{curve.voltage_at(gap_mm), true};
}

SensorReading read(double gap_mm, const SensorCurve& curve, std::mt19937_64& rng) {
    SensorReading r = read(gap_mm, curve);
    if (curve.noise_sigma_v > 0.0) {
        std::normal_distribution<double> noise(0.0, curve.noise_sigma_v);
        r.voltage_v += noise(rng);
    }
    return r;
}

namespace {

struct AffineFit {
    double gain = 0.0;
    double offset = 0.0;
};

// Plain normal-equation least squares; the calibration sets are small.
AffineFit affine_lsq(const std::vector<CalibrationSample>& s, std::size_t lo,
                     std::size_t hi) {
    double n = double(hi - lo + 1);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = lo; k <= hi; ++k) {
        sx += s[k].gap_mm;
        sy += s[k].voltage_v;
        sxx += s[k].gap_mm * s[k].gap_mm;
        sxy += s[k].gap_mm * s[k].voltage_v;
    }
    double denom = n * sxx - sx * sx;
    AffineFit f;
    if (denom == 0.0) {
        f.gain = 0.0;
        f.offset = sy / n;
    } else {
        f.gain = (n * sxy - sx * sy) / denom;
        f.offset = (sy - f.gain * sx) / n;
    }
    return f;
}

double max_abs_residual(const std::vector<CalibrationSample>& s, std::size_t lo,
                        std::size_t hi, const AffineFit& f) {
    double worst = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        worst = std::max(worst,
                         std::fabs(s[k].voltage_v - (f.gain * s[k].gap_mm + f.offset)));
    }
    return worst;
}

} // namespace

CalibrationFit fit_calibration(std::vector<CalibrationSample> samples,
                               double residual_tol_fraction) {
    for (const auto& s : samples) {
        if (!(s.gap_mm > 0.0) || !std::isfinite(s.voltage_v)) {
            throw std::invalid_argument("fit_calibration: samples need gap > 0 and finite voltage");
        }
    }
    std::sort(samples.begin(), samples.end(),
              [](const CalibrationSample& a, const CalibrationSample& b) {
                  return a.gap_mm < b.gap_mm;
              });
    std::size_t n = samples.size();
    std::size_t distinct = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0 || samples[k].gap_mm != samples[k - 1].gap_mm) ++distinct;
    }
    if (distinct < 2) {
        throw std::invalid_argument("fit_calibration: need at least 2 distinct gaps");
    }

    double vmin = samples[0].voltage_v, vmax = samples[0].voltage_v;
    for (const auto& s : samples) {
        vmin = std::min(vmin, s.voltage_v);
        vmax = std::max(vmax, s.voltage_v);
    }
    double tol = residual_tol_fraction * (vmax - vmin);

    if (n == 2) {
        AffineFit f = affine_lsq(samples, 0, 1);
        CalibrationFit out;
        out.curve.gain = f.gain;
        out.curve.offset = f.offset;
        out.curve.linear_lo_mm = samples[0].gap_mm;
        out.curve.linear_hi_mm = samples[1].gap_mm;
        out.max_residual_v = max_abs_residual(samples, 0, 1, f);
        return out;
    }

    // Longest contiguous run (>= 3 samples) whose own fit keeps every
    // residual under tol. O(n^3) worst case; fine at calibration sizes.
    std::size_t best_lo = 0, best_len = 0;
    AffineFit best_fit;
    for (std::size_t lo = 0; lo + 2 < n; ++lo) {
        if (n - lo <= best_len) break;
        for (std::size_t hi = lo + 2; hi < n; ++hi) {
            AffineFit f = affine_lsq(samples, lo, hi);
            if (max_abs_residual(samples, lo, hi, f) <= tol) {
                std::size_t len = hi - lo + 1;
                if (len > best_len) {
                    best_len = len;
                    best_lo = lo;
                    best_fit = f;
                }
            }
        }
    }

    CalibrationFit out;
    if (best_len >= 3) {
        out.curve.gain = best_fit.gain;
        out.curve.offset = best_fit.offset;
        out.curve.linear_lo_mm = samples[best_lo].gap_mm;
        out.curve.linear_hi_mm = samples[best_lo + best_len - 1].gap_mm;
        out.max_residual_v = max_abs_residual(samples, best_lo, best_lo + best_len - 1,
                                              best_fit);
    } else {
        AffineFit f = affine_lsq(samples, 0, n - 1);
        out.curve.gain = f.gain;
        out.curve.offset = f.offset;
        out.curve.linear_lo_mm = samples.front().gap_mm;
        out.curve.linear_hi_mm = samples.back().gap_mm;
        out.max_residual_v = max_abs_residual(samples, 0, n - 1, f);
        out.degraded = true;
    }
    return out;
}

std::vector<CalibrationSample> load_calibration_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("calibration csv: empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "gap_mm,voltage_v") {
        throw std::runtime_error("calibration csv: expected header 'gap_mm,voltage_v'");
    }
    std::vector<CalibrationSample> samples;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        CalibrationSample s;
        char comma = 0;
        if (!(row >> s.gap_mm >> comma >> s.voltage_v) || comma != ',') {
            throw std::runtime_error("calibration csv: malformed row at line " +
                                     std::to_string(lineno));
        }
        samples.push_back(s);
    }
    return samples;
}

std::vector<CalibrationSample> load_calibration_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("calibration csv: cannot open " + path);
    }
    return load_calibration_csv(in);
}

} // namespace maglev
