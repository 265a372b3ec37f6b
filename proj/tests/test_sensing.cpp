#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "maglev/sensing.hpp"

using namespace maglev;

namespace {

// Generates what an ideal saturating sensor would report: affine inside the
// window, plateaued outside, optionally noisy.
std::vector<CalibrationSample> synthetic_samples(const SensorCurve& truth, double lo,
                                                 double hi, double step,
                                                 double noise_sigma = 0.0,
                                                 std::uint64_t seed = 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    std::vector<CalibrationSample> samples;
    for (double g = lo; g <= hi + 1e-12; g += step) {
        double v = read(g, truth).voltage_v;
        if (noise_sigma > 0.0) v += noise(rng);
        samples.push_back({g, v});
    }
    return samples;
}

} // namespace

TEST_CASE("sensor read") {
    SensorCurve curve; // default: gain -2, offset 14, window [2, 5]

    SUBCASE("boundary values are exact and in range") {
        SensorReading lo = read(curve.linear_lo_mm, curve);
        CHECK(lo.in_range);
        CHECK(lo.voltage_v == curve.gain * curve.linear_lo_mm + curve.offset);
        CHECK(lo.voltage_v == doctest::Approx(10.0));
        SensorReading hi = read(curve.linear_hi_mm, curve);
        CHECK(hi.in_range);
        CHECK(hi.voltage_v == doctest::Approx(4.0));
    }

    SUBCASE("out of range clamps to the nearer boundary") {
        SensorReading r = read(6.0, curve);
        CHECK_FALSE(r.in_range);
        CHECK(r.voltage_v == read(5.0, curve).voltage_v);
        SensorReading below = read(0.5, curve);
        CHECK_FALSE(below.in_range);
        CHECK(below.voltage_v == read(2.0, curve).voltage_v);
    }

    SUBCASE("noise-free read is deterministic and monotone with the gain's sign") {
        double prev = read(2.0, curve).voltage_v;
        for (double g = 2.1; g <= 5.0; g += 0.1) {
            double v = read(g, curve).voltage_v;
            CHECK((curve.gain < 0 ? v < prev : v > prev));
            prev = v;
        }
        CHECK(read(3.3, curve).voltage_v == read(3.3, curve).voltage_v);
    }

    SUBCASE("clamped output never exceeds the boundary envelope") {
        double bound_lo = std::min(read(2.0, curve).voltage_v, read(5.0, curve).voltage_v);
        double bound_hi = std::max(read(2.0, curve).voltage_v, read(5.0, curve).voltage_v);
        for (double g = 0.1; g < 9.0; g += 0.17) {
            double v = read(g, curve).voltage_v;
            CHECK(v >= bound_lo);
            CHECK(v <= bound_hi);
        }
    }

    SUBCASE("seeded noise reproduces exactly") {
        SensorCurve noisy = curve;
        noisy.noise_sigma_v = 0.05;
        std::mt19937_64 a(42), b(42);
        CHECK(read(3.0, noisy, a).voltage_v == read(3.0, noisy, b).voltage_v);
    }
}

TEST_CASE("calibration fitting") {
    SUBCASE("two exact points give the exact line") {
        CalibrationFit fit = fit_calibration({{2.0, 10.0}, {4.0, 6.0}});
        CHECK(fit.curve.gain == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(fit.curve.offset == doctest::Approx(14.0).epsilon(1e-12));
        CHECK(fit.max_residual_v == doctest::Approx(0.0));
        CHECK_FALSE(fit.degraded);
    }

    SUBCASE("noise-free saturating data recovers curve and window exactly") {
        SensorCurve truth; // [2, 5] window
        auto samples = synthetic_samples(truth, 1.0, 6.5, 0.1);
        CalibrationFit fit = fit_calibration(samples, 1e-9);
        CHECK(std::fabs(fit.curve.gain - truth.gain) < 1e-9);
        CHECK(std::fabs(fit.curve.offset - truth.offset) < 1e-9);
        CHECK(fit.curve.linear_lo_mm == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(fit.curve.linear_hi_mm == doctest::Approx(5.0).epsilon(1e-9));
        CHECK_FALSE(fit.degraded);
    }

    SUBCASE("round trip: fit of curve-generated data returns the curve") {
        SensorCurve truth;
        truth.gain = 3.7;
        truth.offset = -1.25;
        truth.linear_lo_mm = 1.0;
        truth.linear_hi_mm = 4.0;
        auto samples = synthetic_samples(truth, 1.0, 4.0, 0.25);
        CalibrationFit fit = fit_calibration(samples);
        CHECK(fit.curve.gain == doctest::Approx(truth.gain).epsilon(1e-9));
        CHECK(fit.curve.offset == doctest::Approx(truth.offset).epsilon(1e-9));
    }

    SUBCASE("1% noise: gain within 5% in at least 95 of 100 seeds") {
        SensorCurve truth;
        double span = std::fabs(truth.gain) * (truth.linear_hi_mm - truth.linear_lo_mm);
        int passes = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            auto samples =
                synthetic_samples(truth, 1.0, 6.5, 0.1, 0.01 * span, seed);
            // Tolerance sized to keep the detected window wide under noise.
            CalibrationFit fit = fit_calibration(samples, 0.05);
            if (std::fabs(fit.curve.gain - truth.gain) / std::fabs(truth.gain) < 0.05) {
                ++passes;
            }
        }
        CHECK(passes >= 95);
    }

    SUBCASE("fewer than two distinct gaps is an error") {
        CHECK_THROWS_AS(fit_calibration({{2.0, 1.0}}), std::invalid_argument);
        CHECK_THROWS_AS(fit_calibration({{2.0, 1.0}, {2.0, 1.1}}), std::invalid_argument);
    }

    SUBCASE("no linear window falls back to a degraded global fit") {
        // Strong curvature everywhere: no 3-sample run fits within tolerance.
        std::vector<CalibrationSample> bent;
        for (double g = 1.0; g <= 5.0; g += 0.5) {
            bent.push_back({g, g * g});
        }
        CalibrationFit fit = fit_calibration(bent, 1e-6);
        CHECK(fit.degraded);
        CHECK(fit.curve.linear_lo_mm == doctest::Approx(1.0));
        CHECK(fit.curve.linear_hi_mm == doctest::Approx(5.0));
    }
}

TEST_CASE("calibration csv") {
    SUBCASE("parses the documented schema") {
        std::istringstream in("gap_mm,voltage_v\n2.0,10.0\n3.5,7.0\n5.0,4.0\n");
        auto samples = load_calibration_csv(in);
        REQUIRE(samples.size() == 3);
        CHECK(samples[1].gap_mm == doctest::Approx(3.5));
        CHECK(samples[1].voltage_v == doctest::Approx(7.0));
    }

    SUBCASE("rejects a wrong header or malformed row") {
        std::istringstream bad_header("gap,voltage\n2.0,10.0\n");
        CHECK_THROWS_AS(load_calibration_csv(bad_header), std::runtime_error);
        std::istringstream bad_row("gap_mm,voltage_v\n2.0;10.0\n");
        CHECK_THROWS_AS(load_calibration_csv(bad_row), std::runtime_error);
    }
}
