#include "maglev/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace maglev {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& section,
                const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            fail(section.empty() ? key : section + "." + key, "unknown field");
        }
    }
}

double get_number(const json& obj, const std::string& section, const std::string& key,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(section + "." + key, "expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail(section + "." + key, "must be finite");
    return x;
}

int get_int(const json& obj, const std::string& section, const std::string& key,
            int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(section + "." + key, "expected an integer");
    return v.get<int>();
}

Interval get_interval(const json& obj, const std::string& section, const std::string& key,
                      Interval fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        fail(section + "." + key, "expected [lo, hi]");
    }
    return Interval{v[0].get<double>(), v[1].get<double>()};
}

std::vector<double> get_number_list(const json& obj, const std::string& section,
                                    const std::string& key, std::vector<double> fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_array()) fail(section + "." + key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) fail(section + "." + key, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

void parse_plant(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "plant",
               {"mass", "spring_k", "damping_c", "magnet_c", "gap0", "gravity"});
    cfg.plant.mass_kg = get_number(obj, "plant", "mass", cfg.plant.mass_kg);
    cfg.plant.spring_k = get_number(obj, "plant", "spring_k", cfg.plant.spring_k);
    cfg.plant.damping_c = get_number(obj, "plant", "damping_c", cfg.plant.damping_c);
    cfg.plant.gap0_mm = get_number(obj, "plant", "gap0", cfg.plant.gap0_mm);
    cfg.plant.gravity_mm_s2 = get_number(obj, "plant", "gravity", cfg.plant.gravity_mm_s2);
    if (obj.contains("magnet_c")) {
        const json& v = obj.at("magnet_c");
        if (v.is_string() && v.get<std::string>() == "auto") {
            cfg.auto_magnet_c = true;
        } else if (v.is_number()) {
            cfg.auto_magnet_c = false;
            cfg.plant.magnet_c = v.get<double>();
        } else {
            fail("plant.magnet_c", "expected a number or \"auto\"");
        }
    }
}

void parse_calibration(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "calibration", {"target_k_i", "gap"});
    cfg.calibration_target_k_i =
        get_number(obj, "calibration", "target_k_i", cfg.calibration_target_k_i);
    cfg.calibration_gap_mm = get_number(obj, "calibration", "gap", cfg.calibration_gap_mm);
}

void parse_sensor(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "sensor",
               {"gain", "offset", "linear_lo", "linear_hi", "noise_sigma",
                "calibration_file"});
    cfg.sensor.gain = get_number(obj, "sensor", "gain", cfg.sensor.gain);
    cfg.sensor.offset = get_number(obj, "sensor", "offset", cfg.sensor.offset);
    cfg.sensor.linear_lo_mm = get_number(obj, "sensor", "linear_lo", cfg.sensor.linear_lo_mm);
    cfg.sensor.linear_hi_mm = get_number(obj, "sensor", "linear_hi", cfg.sensor.linear_hi_mm);
    cfg.sensor.noise_sigma_v =
        get_number(obj, "sensor", "noise_sigma", cfg.sensor.noise_sigma_v);
    if (obj.contains("calibration_file")) {
        const json& v = obj.at("calibration_file");
        if (!v.is_string()) fail("sensor.calibration_file", "expected a path string");
        cfg.sensor_calibration_file = v.get<std::string>();
    }
}

void parse_amplifier(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "amplifier", {"transconductance", "v_ceiling"});
    cfg.amplifier.transconductance_a_per_v = get_number(
        obj, "amplifier", "transconductance", cfg.amplifier.transconductance_a_per_v);
    cfg.amplifier.v_ceiling_v =
        get_number(obj, "amplifier", "v_ceiling", cfg.amplifier.v_ceiling_v);
}

void parse_specs(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "specs", {"zeta", "omega_n"});
    cfg.specs.zeta = get_number(obj, "specs", "zeta", cfg.specs.zeta);
    cfg.specs.omega_n_rad_s = get_number(obj, "specs", "omega_n", cfg.specs.omega_n_rad_s);
}

void parse_gains(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "gains",
               {"kp", "td", "ki", "deriv_filter_n", "out_min", "out_max", "bias"});
    if (obj.contains("kp") || obj.contains("td") || obj.contains("ki")) {
        cfg.has_explicit_gains = true;
        cfg.gains.kp = get_number(obj, "gains", "kp", 1.0);
        cfg.gains.td_s = get_number(obj, "gains", "td", 0.0);
        cfg.gains.ki_per_s = get_number(obj, "gains", "ki", 0.0);
    }
    cfg.gains.deriv_filter_n =
        get_number(obj, "gains", "deriv_filter_n", cfg.gains.deriv_filter_n);
    cfg.gains.out_min_v = get_number(obj, "gains", "out_min", cfg.gains.out_min_v);
    cfg.gains.out_max_v = get_number(obj, "gains", "out_max", cfg.gains.out_max_v);
    if (obj.contains("bias")) {
        const json& v = obj.at("bias");
        if (v.is_string() && v.get<std::string>() == "auto") {
            cfg.auto_bias = true;
        } else if (v.is_number()) {
            cfg.auto_bias = false;
            cfg.gains.bias_v = v.get<double>();
        } else {
            fail("gains.bias", "expected a number or \"auto\"");
        }
    }
}

void parse_scenario(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "scenario", {"setpoint_gap", "load_schedule", "initial_y", "initial_v"});
    cfg.scenario.setpoint_gap_mm =
        get_number(obj, "scenario", "setpoint_gap", cfg.scenario.setpoint_gap_mm);
    if (obj.contains("load_schedule")) {
        const json& v = obj.at("load_schedule");
        if (!v.is_array()) fail("scenario.load_schedule", "expected an array of events");
        cfg.scenario.load_schedule.clear();
        for (const auto& e : v) {
            if (!e.is_object()) fail("scenario.load_schedule", "expected {t, load} objects");
            check_keys(e, "scenario.load_schedule", {"t", "load"});
            if (!e.contains("t") || !e.contains("load")) {
                fail("scenario.load_schedule", "events need both t and load");
            }
            cfg.scenario.load_schedule.push_back(
                LoadEvent{get_number(e, "scenario.load_schedule", "t", 0.0),
                          get_number(e, "scenario.load_schedule", "load", 0.0)});
        }
    }
    if (obj.contains("initial_y") || obj.contains("initial_v")) {
        PlantState s{get_number(obj, "scenario", "initial_y", 0.0),
                     get_number(obj, "scenario", "initial_v", 0.0)};
        cfg.scenario.initial_state = s;
    }
}

void parse_sim(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "sim",
               {"dt", "duration", "controller_period", "record_decimation",
                "out_of_range_grace"});
    cfg.sim.dt_s = get_number(obj, "sim", "dt", cfg.sim.dt_s);
    cfg.sim.duration_s = get_number(obj, "sim", "duration", cfg.sim.duration_s);
    cfg.sim.controller_period_s =
        get_number(obj, "sim", "controller_period", cfg.sim.controller_period_s);
    cfg.sim.record_decimation =
        get_int(obj, "sim", "record_decimation", cfg.sim.record_decimation);
    cfg.sim.out_of_range_grace_s =
        get_number(obj, "sim", "out_of_range_grace", cfg.sim.out_of_range_grace_s);
}

void parse_stiffness(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "stiffness", {"loads", "compliance_tol"});
    cfg.stiffness_loads = get_number_list(obj, "stiffness", "loads", cfg.stiffness_loads);
    cfg.compliance_tol_mm_per_n =
        get_number(obj, "stiffness", "compliance_tol", cfg.compliance_tol_mm_per_n);
}

void parse_sweep(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "sweep", {"zetas", "omega_ns"});
    cfg.sweep_zetas = get_number_list(obj, "sweep", "zetas", cfg.sweep_zetas);
    cfg.sweep_omega_ns = get_number_list(obj, "sweep", "omega_ns", cfg.sweep_omega_ns);
}

void parse_tuning(const json& obj, ExperimentConfig& cfg) {
    check_keys(obj, "tuning",
               {"cost_kind", "kp_bounds", "td_bounds", "ki_bounds",
                "seed_grid_points_per_axis", "max_evals"});
    if (obj.contains("cost_kind")) {
        const json& v = obj.at("cost_kind");
        if (!v.is_string()) fail("tuning.cost_kind", "expected \"itae\" or \"ise\"");
        std::string kind = v.get<std::string>();
        if (kind == "itae") cfg.tuning.cost_kind = CostKind::itae;
        else if (kind == "ise") cfg.tuning.cost_kind = CostKind::ise;
        else fail("tuning.cost_kind", "expected \"itae\" or \"ise\"");
    }
    cfg.tuning.kp_bounds = get_interval(obj, "tuning", "kp_bounds", cfg.tuning.kp_bounds);
    cfg.tuning.td_bounds = get_interval(obj, "tuning", "td_bounds", cfg.tuning.td_bounds);
    cfg.tuning.ki_bounds = get_interval(obj, "tuning", "ki_bounds", cfg.tuning.ki_bounds);
    cfg.tuning.seed_grid_points_per_axis = get_int(
        obj, "tuning", "seed_grid_points_per_axis", cfg.tuning.seed_grid_points_per_axis);
    cfg.tuning.max_evals = get_int(obj, "tuning", "max_evals", cfg.tuning.max_evals);
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
    if (blank) return cfg;

    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config: top level must be a JSON object");
    }
    check_keys(root, "",
               {"plant", "calibration", "sensor", "amplifier", "specs", "gains", "scenario",
                "sim", "stiffness", "sweep", "tuning"});

    auto section = [&](const char* name) -> const json* {
        if (!root.contains(name)) return nullptr;
        const json& s = root.at(name);
        if (!s.is_object()) fail(name, "expected an object");
        return &s;
    };
    if (auto* s = section("plant")) parse_plant(*s, cfg);
    if (auto* s = section("calibration")) parse_calibration(*s, cfg);
    if (auto* s = section("sensor")) parse_sensor(*s, cfg);
    if (auto* s = section("amplifier")) parse_amplifier(*s, cfg);
    if (auto* s = section("specs")) parse_specs(*s, cfg);
    if (auto* s = section("gains")) parse_gains(*s, cfg);
    if (auto* s = section("scenario")) parse_scenario(*s, cfg);
    if (auto* s = section("sim")) parse_sim(*s, cfg);
    if (auto* s = section("stiffness")) parse_stiffness(*s, cfg);
    if (auto* s = section("sweep")) parse_sweep(*s, cfg);
    if (auto* s = section("tuning")) parse_tuning(*s, cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return ExperimentConfig{};
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

RunSetup resolve(const ExperimentConfig& config) {
    RunSetup setup;
    try {
        setup.amp = config.amplifier;
        setup.amp.validate();

        setup.params = config.plant;
        if (config.auto_magnet_c) {
            setup.params = calibrate_to_current_coefficient(
                config.calibration_target_k_i, config.calibration_gap_mm, setup.params,
                setup.amp.i_max_a());
        }
        setup.params.validate();

        if (!config.sensor_calibration_file.empty()) {
            auto samples = load_calibration_csv(config.sensor_calibration_file);
            CalibrationFit fit = fit_calibration(samples);
            setup.curve = fit.curve;
            setup.curve.noise_sigma_v = config.sensor.noise_sigma_v;
        } else {
            setup.curve = config.sensor;
        }
        setup.curve.validate();

        setup.scenario = config.scenario;
        setup.scenario.validate();
        if (!setup.curve.in_linear_range(setup.scenario.setpoint_gap_mm)) {
            throw ConfigError(
                "config: scenario.setpoint_gap: outside the sensor's linear range");
        }

        setup.sim = config.sim;
        setup.sim.validate();

        OperatingPoint op =
            solve_operating_point(setup.params, setup.scenario.setpoint_gap_mm, 0.0);
        setup.lm = linearize(setup.params, op);
        setup.loop_gain =
            std::fabs(setup.curve.gain) * setup.amp.transconductance_a_per_v;

        if (config.has_explicit_gains) {
            setup.gains = config.gains;
        } else {
            config.specs.validate();
            setup.gains = design_gains_from_specs(config.specs, setup.lm, setup.loop_gain);
            setup.gains.deriv_filter_n = config.gains.deriv_filter_n;
            setup.gains.out_min_v = config.gains.out_min_v;
            setup.gains.out_max_v = config.gains.out_max_v;
            setup.gains.bias_v = config.gains.bias_v;
        }
        if (config.auto_bias) {
            setup.gains.bias_v = op.current_a / setup.amp.transconductance_a_per_v;
        }
        setup.gains.validate();

        setup.stiffness_loads = config.stiffness_loads;
        if (setup.stiffness_loads.empty()) {
            throw ConfigError("config: stiffness.loads: must be nonempty");
        }
        setup.compliance_tol_mm_per_n = config.compliance_tol_mm_per_n;
        if (!(setup.compliance_tol_mm_per_n > 0.0)) {
            throw ConfigError("config: stiffness.compliance_tol: must be > 0");
        }

        for (double z : config.sweep_zetas) {
            for (double w : config.sweep_omega_ns) {
                setup.sweep_grid.push_back(DesignSpecs{z, w});
            }
        }

        setup.tune_problem.cost_kind = config.tuning.cost_kind;
        setup.tune_problem.kp_bounds = config.tuning.kp_bounds;
        setup.tune_problem.td_bounds = config.tuning.td_bounds;
        setup.tune_problem.ki_bounds = config.tuning.ki_bounds;
        setup.tune_problem.seed_grid_points_per_axis =
            config.tuning.seed_grid_points_per_axis;
        setup.tune_problem.max_evals = config.tuning.max_evals;
        setup.tune_problem.params = setup.params;
        setup.tune_problem.curve = setup.curve;
        setup.tune_problem.amp = setup.amp;
        setup.tune_problem.base_gains = setup.gains;
        setup.tune_problem.scenario = setup.scenario;
        setup.tune_problem.cfg = setup.sim;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return setup;
}

} // namespace maglev
