#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "maglev/control.hpp"
#include "maglev/plant.hpp"
#include "maglev/sensing.hpp"
#include "maglev/sim.hpp"
#include "maglev/tuning.hpp"

namespace maglev {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TuningConfig {
    CostKind cost_kind = CostKind::itae;
    Interval kp_bounds{0.05, 2.0};
    Interval td_bounds{0.0, 0.05};
    Interval ki_bounds{0.5, 20.0};
    int seed_grid_points_per_axis = 4;
    int max_evals = 200;
};

/// Parsed experiment configuration. Every field has a default sized so an
/// empty config runs the stock experiment: PID stiffness measurement on the
/// plant calibrated to a 7.5 N/A current coefficient at a 3 mm gap.
struct ExperimentConfig {
    PlantParams plant;
    bool auto_magnet_c = true;      // back-solve magnet_c from the calibration target
    double calibration_target_k_i = 7.5;
    double calibration_gap_mm = 3.0;

    SensorCurve sensor;
    std::string sensor_calibration_file; // when set, gain/offset/window come from a fit

    AmplifierModel amplifier;
    DesignSpecs specs;

    bool has_explicit_gains = false; // otherwise gains are designed from specs
    PidGains gains;
    bool auto_bias = true; // bias holds the zero-load equilibrium at the setpoint

    Scenario scenario{3.0, {{0.5, 1.0}}, std::nullopt};
    SimConfig sim;

    std::vector<double> stiffness_loads{0.5, 1.0, 1.5, 2.0};
    double compliance_tol_mm_per_n = 1e-4;

    std::vector<double> sweep_zetas{0.3, 0.5, 0.7, 0.9};
    std::vector<double> sweep_omega_ns{40.0, 50.0, 60.0, 70.0, 80.0};

    TuningConfig tuning;
};

/// Parses JSON text. Empty or whitespace-only text yields the defaults.
/// Throws ConfigError with a message naming the offending field.
ExperimentConfig parse_config(const std::string& text);

/// Loads and parses a config file; empty path yields the defaults.
ExperimentConfig load_config(const std::string& path);

/// Everything resolved and validated, ready to run: calibrated plant,
/// sensor curve (inline or fitted from the referenced file), designed or
/// explicit gains with the bias filled in, and the derived linear model.
struct RunSetup {
    PlantParams params;
    SensorCurve curve;
    AmplifierModel amp;
    PidGains gains;
    LinearModel lm;
    double loop_gain = 0.0; // |sensor gain| * transconductance
    Scenario scenario;
    SimConfig sim;
    std::vector<double> stiffness_loads;
    double compliance_tol_mm_per_n = 1e-4;
    std::vector<DesignSpecs> sweep_grid;
    TuneProblem tune_problem;
};

/// Throws ConfigError (invalid values, missing files) before any run starts.
RunSetup resolve(const ExperimentConfig& config);

} // namespace maglev
