#include "maglev/sim.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace maglev {

namespace {

constexpr double kSettleBandMm = 1e-5;
constexpr double kSettleSpeedMmS = 1e-4;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

void SimConfig::validate() const {
    if (!(dt_s > 0.0) || !std::isfinite(dt_s))
        throw std::invalid_argument("sim.dt: must be > 0");
    if (!(duration_s > dt_s))
        throw std::invalid_argument("sim.duration: must exceed dt");
    if (controller_period_s != 0.0) {
        double ratio = controller_period_s / dt_s;
        if (!(controller_period_s > 0.0) ||
            std::fabs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
            throw std::invalid_argument(
                "sim.controller_period: must be a positive integer multiple of dt");
        }
    }
    if (record_decimation < 1)
        throw std::invalid_argument("sim.record_decimation: must be >= 1");
    if (!(out_of_range_grace_s >= 0.0))
        throw std::invalid_argument("sim.out_of_range_grace: must be >= 0");
}

double Scenario::load_at(double t_s) const {
    double load = 0.0;
    for (const auto& ev : load_schedule) {
        if (ev.t_s <= t_s) load = ev.load_n;
        else break;
    }
    return load;
}

void Scenario::validate() const {
    if (!(setpoint_gap_mm > 0.0) || !std::isfinite(setpoint_gap_mm))
        throw std::invalid_argument("scenario.setpoint_gap: must be > 0");
    for (std::size_t k = 0; k < load_schedule.size(); ++k) {
        if (!std::isfinite(load_schedule[k].load_n))
            throw std::invalid_argument("scenario.load_schedule: loads must be finite");
        if (k > 0 && !(load_schedule[k].t_s > load_schedule[k - 1].t_s))
            throw std::invalid_argument(
                "scenario.load_schedule: event times must be strictly increasing");
    }
    if (!load_schedule.empty() && load_schedule.front().t_s < 0.0)
        throw std::invalid_argument("scenario.load_schedule: event times must be >= 0");
}

const char* to_string(RunStatus status) {
    switch (status) {
        case RunStatus::completed: return "completed";
        case RunStatus::contact_fault: return "contact_fault";
        case RunStatus::sensor_loss_fault: return "sensor_loss_fault";
        case RunStatus::nonfinite_fault: return "nonfinite_fault";
    }
    return "unknown";
}

const char* to_string(StiffnessClass c) {
    switch (c) {
        case StiffnessClass::finite: return "finite";
        case StiffnessClass::infinite_within_tolerance: return "infinite-within-tolerance";
        case StiffnessClass::unsettled: return "unsettled";
    }
    return "unknown";
}

PlantState integrate_step(const PlantState& state, double current_a, double load_n,
                          const PlantParams& params, double dt_s) {
    if (!(dt_s > 0.0)) throw std::invalid_argument("integrate_step: dt must be > 0");
    auto rhs = [&](const PlantState& s) { return dynamics(s, current_a, load_n, params); };

    StateDerivative k1 = rhs(state);
    PlantState s2{state.y_mm + 0.5 * dt_s * k1.dy_mm_s,
                  state.v_mm_s + 0.5 * dt_s * k1.dv_mm_s2};
    StateDerivative k2 = rhs(s2);
    PlantState s3{state.y_mm + 0.5 * dt_s * k2.dy_mm_s,
                  state.v_mm_s + 0.5 * dt_s * k2.dv_mm_s2};
    StateDerivative k3 = rhs(s3);
    PlantState s4{state.y_mm + dt_s * k3.dy_mm_s, state.v_mm_s + dt_s * k3.dv_mm_s2};
    StateDerivative k4 = rhs(s4);

    return PlantState{
        state.y_mm + dt_s / 6.0 *
                         (k1.dy_mm_s + 2.0 * k2.dy_mm_s + 2.0 * k3.dy_mm_s + k4.dy_mm_s),
        state.v_mm_s + dt_s / 6.0 * (k1.dv_mm_s2 + 2.0 * k2.dv_mm_s2 + 2.0 * k3.dv_mm_s2 +
                                     k4.dv_mm_s2)};
}

Trace run_closed_loop(const PlantParams& params, const SensorCurve& curve,
                      const PidGains& gains, const AmplifierModel& amp,
                      const Scenario& scenario, const SimConfig& cfg, std::uint64_t seed) {
    params.validate();
    curve.validate();
    gains.validate();
    amp.validate();
    scenario.validate();
    cfg.validate();
    if (!curve.in_linear_range(scenario.setpoint_gap_mm)) {
        throw std::invalid_argument(
            "run_closed_loop: setpoint gap outside the sensor's linear range");
    }

    const double dt = cfg.dt_s;
    const double period = cfg.effective_controller_period();
    const long steps_per_tick = std::lround(period / dt);
    const long n_steps = std::lround(cfg.duration_s / dt);
    const double setpoint_v = curve.voltage_at(scenario.setpoint_gap_mm);

    PlantState state = scenario.initial_state.value_or(
        PlantState{params.gap0_mm - scenario.setpoint_gap_mm, 0.0});

    std::mt19937_64 rng(seed);
    DiscretePidState pid;
    SensorReading reading{curve.voltage_at(params.gap0_mm - state.y_mm), true};
    double control_v = 0.0;
    double current = 0.0;
    double out_of_range_time = 0.0;

    Trace trace;
    trace.setpoint_gap_mm = scenario.setpoint_gap_mm;
    std::size_t expect = std::size_t(n_steps / cfg.record_decimation) + 1;
    trace.time_s.reserve(expect);
    trace.y_mm.reserve(expect);
    trace.gap_mm.reserve(expect);
    trace.vel_mm_s.reserve(expect);
    trace.sensor_v.reserve(expect);
    trace.in_range.reserve(expect);
    trace.control_v.reserve(expect);
    trace.current_a.reserve(expect);
    trace.load_n.reserve(expect);

    auto record = [&](double t, double load) {
        trace.time_s.push_back(t);
        trace.y_mm.push_back(state.y_mm);
        trace.gap_mm.push_back(params.gap0_mm - state.y_mm);
        trace.vel_mm_s.push_back(state.v_mm_s);
        trace.sensor_v.push_back(reading.voltage_v);
        trace.in_range.push_back(reading.in_range ? 1 : 0);
        trace.control_v.push_back(control_v);
        trace.current_a.push_back(current);
        trace.load_n.push_back(load);
    };

    for (long k = 0; k <= n_steps; ++k) {
        const double t = k * dt;
        const double load = scenario.load_at(t);
        const double gap = params.gap0_mm - state.y_mm;

        if (k % steps_per_tick == 0) {
            reading = curve.noise_sigma_v > 0.0 ? read(gap, curve, rng) : read(gap, curve);
            if (!reading.in_range) {
                out_of_range_time += period;
                if (out_of_range_time > cfg.out_of_range_grace_s) {
                    trace.status = RunStatus::sensor_loss_fault;
                    trace.fault_time_s = t;
                    break;
                }
            } else {
                out_of_range_time = 0.0;
            }
            double error = setpoint_v - reading.voltage_v;
            PidOutput out = pid_step(pid, error, period, gains);
            pid = out.state;
            control_v = out.output_v;
            current = amplifier_current(control_v, amp);
        }

        if (k % cfg.record_decimation == 0) record(t, load);
        if (k == n_steps) break;

        try {
            state = integrate_step(state, current, load, params, dt);
        } catch (const std::domain_error&) {
            trace.status = RunStatus::contact_fault;
            trace.fault_time_s = t + dt;
            break;
        }
        if (!std::isfinite(state.y_mm) || !std::isfinite(state.v_mm_s)) {
            trace.status = RunStatus::nonfinite_fault;
            trace.fault_time_s = t + dt;
            break;
        }
    }
    return trace;
}

namespace {

// First index of the detector window (final 10% of the recorded span).
std::size_t settle_window_begin(const Trace& trace) {
    double t_end = trace.time_s.back();
    double t0 = t_end - 0.1 * (t_end - trace.time_s.front());
    auto it = std::lower_bound(trace.time_s.begin(), trace.time_s.end(), t0);
    return std::size_t(it - trace.time_s.begin());
}

} // namespace

bool is_settled(const Trace& trace) {
    if (trace.faulted() || trace.size() < 4) return false;
    std::size_t begin = settle_window_begin(trace);
    std::size_t n = trace.size() - begin;
    if (n < 2) return false;

    double mean_y = 0.0, mean_v = 0.0;
    for (std::size_t k = begin; k < trace.size(); ++k) {
        mean_y += trace.y_mm[k];
        mean_v += trace.vel_mm_s[k];
    }
    mean_y /= double(n);
    mean_v /= double(n);

    double max_dev = 0.0;
    for (std::size_t k = begin; k < trace.size(); ++k) {
        max_dev = std::max(max_dev, std::fabs(trace.y_mm[k] - mean_y));
    }
    return max_dev < kSettleBandMm && std::fabs(mean_v) < kSettleSpeedMmS;
}

double settled_position(const Trace& trace) {
    if (trace.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    std::size_t begin = settle_window_begin(trace);
    double mean_y = 0.0;
    for (std::size_t k = begin; k < trace.size(); ++k) mean_y += trace.y_mm[k];
    return mean_y / double(trace.size() - begin);
}

StiffnessReport measure_stiffness(const PlantParams& params, const SensorCurve& curve,
                                  const PidGains& gains, const AmplifierModel& amp,
                                  const Scenario& scenario, const std::vector<double>& loads_n,
                                  const SimConfig& cfg, double compliance_tol_mm_per_n) {
    if (loads_n.empty()) {
        throw std::invalid_argument("measure_stiffness: loads list must be nonempty");
    }

    auto run_with_load = [&](double load) {
        Scenario s = scenario;
        s.load_schedule = load == 0.0 ? std::vector<LoadEvent>{}
                                      : std::vector<LoadEvent>{{0.0, load}};
        return run_closed_loop(params, curve, gains, amp, s, cfg);
    };

    Trace baseline = run_with_load(0.0);
    bool all_settled = is_settled(baseline);
    double y0 = settled_position(baseline);

    StiffnessReport report;
    report.compliance_tol_mm_per_n = compliance_tol_mm_per_n;
    for (double load : loads_n) {
        Trace t = run_with_load(load);
        StiffnessEntry entry;
        entry.load_n = load;
        entry.settled = is_settled(t);
        entry.y_ss_mm = y0 - settled_position(t); // deflection, positive under load
        all_settled = all_settled && entry.settled;
        report.entries.push_back(entry);
    }

    // Least-squares slope of deflection against load.
    std::size_t n = report.entries.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& e : report.entries) {
        sx += e.load_n;
        sy += e.y_ss_mm;
        sxx += e.load_n * e.load_n;
        sxy += e.load_n * e.y_ss_mm;
    }
    double denom = double(n) * sxx - sx * sx;
    if (denom != 0.0) {
        report.compliance_mm_per_n = (double(n) * sxy - sx * sy) / denom;
    } else {
        report.compliance_mm_per_n = sx != 0.0 ? sy / sx : 0.0;
    }

    if (!all_settled) {
        report.stiffness_class = StiffnessClass::unsettled;
    } else if (std::fabs(report.compliance_mm_per_n) < compliance_tol_mm_per_n) {
        report.stiffness_class = StiffnessClass::infinite_within_tolerance;
    } else {
        report.stiffness_class = StiffnessClass::finite;
    }
    return report;
}

StabilityResult stability_analysis(const LinearModel& lm, const PidGains& gains,
                                   double loop_chain) {
    if (!(lm.mass > 0.0)) {
        throw std::invalid_argument("stability_analysis: linear model needs mass > 0");
    }
    double g_kp = lm.k_i * loop_chain * gains.kp;
    double stiff = (lm.net_stiffness + g_kp) / lm.mass;
    double damp = (lm.damping + g_kp * gains.td_s) / lm.mass;

    StabilityResult result;
    if (gains.ki_per_s > 0.0 && gains.kp != 0.0) {
        Eigen::Matrix3d a;
        a << 0, 1, 0,
             0, 0, 1,
             -g_kp * gains.ki_per_s / lm.mass, -stiff, -damp;
        Eigen::EigenSolver<Eigen::Matrix3d> solver(a);
        for (int k = 0; k < 3; ++k) result.eigenvalues.push_back(solver.eigenvalues()[k]);
    } else {
        Eigen::Matrix2d a;
        a << 0, 1,
             -stiff, -damp;
        Eigen::EigenSolver<Eigen::Matrix2d> solver(a);
        for (int k = 0; k < 2; ++k) result.eigenvalues.push_back(solver.eigenvalues()[k]);
    }
    result.stable = std::all_of(result.eigenvalues.begin(), result.eigenvalues.end(),
                                [](const std::complex<double>& e) { return e.real() < 0.0; });
    return result;
}

std::vector<SweepRow> gain_sweep(const LinearModel& lm, double loop_gain,
                                 const std::vector<DesignSpecs>& specs_grid,
                                 const Scenario& scenario, const SimConfig& cfg) {
    if (specs_grid.empty()) {
        throw std::invalid_argument("gain_sweep: specs grid must be nonempty");
    }
    cfg.validate();
    if (scenario.load_schedule.empty()) {
        throw std::invalid_argument("gain_sweep: scenario needs a load step to measure");
    }
    const double load = scenario.load_schedule.front().load_n;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<SweepRow> rows;
    rows.reserve(specs_grid.size());
    for (const auto& specs : specs_grid) {
        SweepRow row;
        row.zeta = specs.zeta;
        row.omega_n_rad_s = specs.omega_n_rad_s;
        PidGains gains;
        try {
            gains = design_gains_from_specs(specs, lm, loop_gain);
        } catch (const std::exception&) {
            row.settling_time_s = nan;
            row.overshoot_pct = nan;
            rows.push_back(row);
            continue;
        }
        row.feasible = true;

        // Response of the placed PD pair to a load step at t = 0; the
        // integral term is disabled so the designed poles govern the metrics.
        double g_kp = lm.k_i * loop_gain * gains.kp;
        double stiff = lm.net_stiffness + g_kp;
        double damp = lm.damping + g_kp * gains.td_s;
        PidGains pd = gains;
        pd.ki_per_s = 0.0;
        row.stable = stability_analysis(lm, pd, loop_gain).stable;

        double final_deflection = load / stiff;
        double dy = 0.0, dv = 0.0; // deflection (load direction) and its rate
        auto accel = [&](double y, double v) {
            return (load - stiff * y - damp * v) / lm.mass;
        };
        long n_steps = std::lround(cfg.duration_s / cfg.dt_s);
        double dt = cfg.dt_s;
        double peak = 0.0;
        long last_outside = -1;
        for (long k = 0; k <= n_steps; ++k) {
            if (dy > peak) peak = dy;
            if (std::fabs(dy - final_deflection) > 0.02 * std::fabs(final_deflection)) {
                last_outside = k;
            }
            if (k == n_steps) break;
            double k1y = dv, k1v = accel(dy, dv);
            double k2y = dv + 0.5 * dt * k1v, k2v = accel(dy + 0.5 * dt * k1y, dv + 0.5 * dt * k1v);
            double k3y = dv + 0.5 * dt * k2v, k3v = accel(dy + 0.5 * dt * k2y, dv + 0.5 * dt * k2v);
            double k4y = dv + dt * k3v, k4v = accel(dy + dt * k3y, dv + dt * k3v);
            dy += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            dv += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        row.overshoot_pct = std::max(0.0, peak - final_deflection) /
                            std::fabs(final_deflection) * 100.0;
        row.settling_time_s =
            last_outside + 1 > n_steps ? nan : double(last_outside + 1) * dt;
        rows.push_back(row);
    }
    return rows;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
    out << "time_s,y_mm,gap_mm,vel_mm_s,sensor_v,in_range,control_v,current_a,load_n\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
        out << fmt(trace.time_s[k]) << ',' << fmt(trace.y_mm[k]) << ','
            << fmt(trace.gap_mm[k]) << ',' << fmt(trace.vel_mm_s[k]) << ','
            << fmt(trace.sensor_v[k]) << ',' << int(trace.in_range[k]) << ','
            << fmt(trace.control_v[k]) << ',' << fmt(trace.current_a[k]) << ','
            << fmt(trace.load_n[k]) << '\n';
    }
}

void write_stiffness_csv(std::ostream& out, const StiffnessReport& report) {
    out << "load_n,y_ss_mm,settled,compliance_mm_per_n,stiffness_class\n";
    for (const auto& e : report.entries) {
        out << fmt(e.load_n) << ',' << fmt(e.y_ss_mm) << ',' << (e.settled ? 1 : 0) << ','
            << fmt(report.compliance_mm_per_n) << ',' << to_string(report.stiffness_class)
            << '\n';
    }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "zeta,omega_n_rad_s,settling_time_s,overshoot_pct,stable,feasible\n";
    for (const auto& r : rows) {
        out << fmt(r.zeta) << ',' << fmt(r.omega_n_rad_s) << ',' << fmt(r.settling_time_s)
            << ',' << fmt(r.overshoot_pct) << ',' << (r.stable ? 1 : 0) << ','
            << (r.feasible ? 1 : 0) << '\n';
    }
}

} // namespace maglev
