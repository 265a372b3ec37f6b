// Command-line front end: experiment dispatch, CSV emission, exit-code
// contract (0 success, 1 config/usage error, 2 runtime fault).

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "maglev/config.hpp"

namespace {

using namespace maglev;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeFault = 2;

// Content is assembled in memory first so a config error never leaves a
// partial file behind.
void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("config: cannot open output file " + path);
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

int cmd_simulate(const RunSetup& setup, const std::string& out_path, std::uint64_t seed) {
    Trace trace = run_closed_loop(setup.params, setup.curve, setup.gains, setup.amp,
                                  setup.scenario, setup.sim, seed);
    std::ostringstream buf;
    write_trace_csv(buf, trace);
    write_file(out_path, buf.str());
    std::cout << "status=" << to_string(trace.status)
              << " settled=" << (is_settled(trace) ? "true" : "false")
              << " samples=" << trace.size() << '\n';
    if (trace.faulted()) {
        std::cout << "fault_time_s=" << fmt(trace.fault_time_s) << '\n';
        return kRuntimeFault;
    }
    return kOk;
}

int cmd_stiffness(const RunSetup& setup, const std::string& out_path,
                  const std::vector<double>& loads_override) {
    const std::vector<double>& loads =
        loads_override.empty() ? setup.stiffness_loads : loads_override;
    StiffnessReport report =
        measure_stiffness(setup.params, setup.curve, setup.gains, setup.amp, setup.scenario,
                          loads, setup.sim, setup.compliance_tol_mm_per_n);
    std::ostringstream buf;
    write_stiffness_csv(buf, report);
    write_file(out_path, buf.str());
    std::cout << "compliance_mm_per_n=" << fmt(report.compliance_mm_per_n)
              << " stiffness_class=" << to_string(report.stiffness_class) << '\n';
    return report.stiffness_class == StiffnessClass::unsettled ? kRuntimeFault : kOk;
}

int cmd_calibrate(const std::string& samples_path, const std::string& out_path,
                  double residual_tol) {
    auto samples = load_calibration_csv(samples_path);
    CalibrationFit fit = fit_calibration(samples, residual_tol);
    std::ostringstream buf;
    buf << "gain_v_per_mm,offset_v,linear_lo_mm,linear_hi_mm,max_residual_v,degraded\n"
        << fmt(fit.curve.gain) << ',' << fmt(fit.curve.offset) << ','
        << fmt(fit.curve.linear_lo_mm) << ',' << fmt(fit.curve.linear_hi_mm) << ','
        << fmt(fit.max_residual_v) << ',' << (fit.degraded ? 1 : 0) << '\n';
    write_file(out_path, buf.str());
    std::cout << "gain=" << fmt(fit.curve.gain) << " offset=" << fmt(fit.curve.offset)
              << " window=[" << fmt(fit.curve.linear_lo_mm) << ','
              << fmt(fit.curve.linear_hi_mm) << ']'
              << " degraded=" << (fit.degraded ? "true" : "false") << '\n';
    return kOk;
}

int cmd_sweep(const RunSetup& setup, const std::string& out_path) {
    auto rows = gain_sweep(setup.lm, setup.loop_gain, setup.sweep_grid, setup.scenario,
                           setup.sim);
    std::ostringstream buf;
    write_sweep_csv(buf, rows);
    write_file(out_path, buf.str());
    std::size_t feasible = 0;
    for (const auto& r : rows) feasible += r.feasible ? 1 : 0;
    std::cout << "rows=" << rows.size() << " feasible=" << feasible << '\n';
    return kOk;
}

int cmd_tune(const RunSetup& setup, const std::string& out_path) {
    TuneResult result = tune_gains(setup.tune_problem);
    std::ostringstream buf;
    write_tune_history_csv(buf, result);
    write_file(out_path, buf.str());
    std::cout << "kp=" << fmt(result.gains.kp) << " td=" << fmt(result.gains.td_s)
              << " ki=" << fmt(result.gains.ki_per_s) << " cost=" << fmt(result.cost)
              << " evals=" << result.evals_used
              << " converged=" << (result.converged ? "true" : "false") << '\n';
    return kOk;
}

int cmd_stability(const RunSetup& setup, const std::string& out_path) {
    StabilityResult result = stability_analysis(setup.lm, setup.gains, setup.loop_gain);
    std::ostringstream buf;
    buf << "re,im\n";
    for (const auto& e : result.eigenvalues) {
        buf << fmt(e.real()) << ',' << fmt(e.imag()) << '\n';
    }
    write_file(out_path, buf.str());
    std::cout << "stable=" << (result.stable ? "true" : "false") << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magnetic-levitation vibration isolation: simulation and analysis"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string samples_path;
    std::uint64_t seed = 0;
    std::vector<double> loads_override;
    double residual_tol = 0.02;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        if (needs_config) {
            cmd->add_option("--config", config_path, "experiment config (JSON); defaults when omitted");
        }
        cmd->add_option("--out", out_path, "output CSV path")->required();
        cmd->add_option("--seed", seed, "sensor-noise seed");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run the closed loop, write the trace");
    add_common(simulate);
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "fit a sensor curve from gap/voltage samples");
    calibrate->add_option("--samples", samples_path, "calibration CSV (gap_mm,voltage_v)")
        ->required();
    calibrate->add_option("--residual-tol", residual_tol,
                          "linear-window residual tolerance, fraction of span");
    add_common(calibrate, false);
    CLI::App* stiffness =
        app.add_subcommand("stiffness", "measure load-deflection compliance");
    add_common(stiffness);
    stiffness->add_option("--loads", loads_override, "override load list (N)")
        ->delimiter(',');
    CLI::App* sweep = app.add_subcommand("sweep", "gain design study over a (zeta, omega_n) grid");
    add_common(sweep);
    CLI::App* tune = app.add_subcommand("tune", "derivative-free PID gain tuning");
    add_common(tune);
    CLI::App* stability =
        app.add_subcommand("stability", "closed-loop eigenvalues of the linearized model");
    add_common(stability);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    if (app.got_subcommand(calibrate)) {
        // A pure fit has no runtime-fault modes; every failure is an input error.
        try {
            return cmd_calibrate(samples_path, out_path, residual_tol);
        } catch (const std::exception& e) {
            std::cerr << e.what() << '\n';
            return kConfigError;
        }
    }

    try {
        RunSetup setup = resolve(load_config(config_path));
        if (app.got_subcommand(simulate)) return cmd_simulate(setup, out_path, seed);
        if (app.got_subcommand(stiffness)) return cmd_stiffness(setup, out_path, loads_override);
        if (app.got_subcommand(sweep)) return cmd_sweep(setup, out_path);
        if (app.got_subcommand(tune)) return cmd_tune(setup, out_path);
        if (app.got_subcommand(stability)) return cmd_stability(setup, out_path);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "fault: " << e.what() << '\n';
        return kRuntimeFault;
    }
    return kConfigError;
}
