#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "maglev/control.hpp"
#include "maglev/plant.hpp"
#include "maglev/sensing.hpp"

namespace maglev {

/// Fixed-step integration and recording setup.
struct SimConfig {
    double dt_s = 1e-4;
    double duration_s = 2.0;
    double controller_period_s = 0.0; // 0 means one controller tick per dt
    int record_decimation = 1;
    double out_of_range_grace_s = 0.1;

    double effective_controller_period() const {
        return controller_period_s > 0.0 ? controller_period_s : dt_s;
    }
    void validate() const; // throws std::invalid_argument
};

/// Step event: the external load is set to load_n at time t_s.
struct LoadEvent {
    double t_s = 0.0;
    double load_n = 0.0;
};

struct Scenario {
    double setpoint_gap_mm = 3.0;
    std::vector<LoadEvent> load_schedule;
    // Defaults to rest at the setpoint gap when unset.
    std::optional<PlantState> initial_state;

    double load_at(double t_s) const;
    void validate() const;
};

enum class RunStatus {
    completed,
    contact_fault,     // gap reached zero
    sensor_loss_fault, // sensor out of range beyond the grace period
    nonfinite_fault,
};

const char* to_string(RunStatus status);

/// Sampled closed-loop time series on a uniform grid. Control-side columns
/// (sensor_v, in_range, control_v, current_a) hold the values latched at the
/// most recent controller tick.
struct Trace {
    std::vector<double> time_s;
    std::vector<double> y_mm;
    std::vector<double> gap_mm;
    std::vector<double> vel_mm_s;
    std::vector<double> sensor_v;
    std::vector<std::uint8_t> in_range;
    std::vector<double> control_v;
    std::vector<double> current_a;
    std::vector<double> load_n;

    double setpoint_gap_mm = 0.0;
    RunStatus status = RunStatus::completed;
    double fault_time_s = 0.0; // meaningful only when faulted

    std::size_t size() const { return time_s.size(); }
    bool faulted() const { return status != RunStatus::completed; }
};

/// Writes the exact column schema
/// time_s,y_mm,gap_mm,vel_mm_s,sensor_v,in_range,control_v,current_a,load_n.
void write_trace_csv(std::ostream& out, const Trace& trace);

struct StiffnessEntry {
    double load_n = 0.0;
    double y_ss_mm = 0.0; // settled deflection in the load direction, relative to zero load
    bool settled = false;
};

enum class StiffnessClass { finite, infinite_within_tolerance, unsettled };

const char* to_string(StiffnessClass c);

struct StiffnessReport {
    std::vector<StiffnessEntry> entries;
    double compliance_mm_per_n = 0.0; // least-squares slope of y_ss vs load
    StiffnessClass stiffness_class = StiffnessClass::finite;
    double compliance_tol_mm_per_n = 1e-4;
};

void write_stiffness_csv(std::ostream& out, const StiffnessReport& report);

/// One classical RK4 step of the plate ODE with current and load held
/// constant over the step. Throws std::domain_error on plate-magnet contact
/// at any stage evaluation.
PlantState integrate_step(const PlantState& state, double current_a, double load_n,
                          const PlantParams& params, double dt_s);

/// Full nonlinear closed loop: sensor -> PID -> amplifier -> plant, with
/// zero-order-hold current between controller ticks. Terminates early with a
/// fault status on contact, non-finite state, or sustained sensor loss.
/// seed feeds the sensor noise generator; unused when noise_sigma is zero.
Trace run_closed_loop(const PlantParams& params, const SensorCurve& curve,
                      const PidGains& gains, const AmplifierModel& amp,
                      const Scenario& scenario, const SimConfig& cfg,
                      std::uint64_t seed = 0);

/// Steady-state detector: over the final 10% of the trace, the plate stays
/// within 1e-5 mm of its mean position and the mean speed is below
/// 1e-4 mm/s. Faulted traces are never settled.
bool is_settled(const Trace& trace);

/// Mean plate position over the detector window (the settled value).
double settled_position(const Trace& trace);

/// Applies each load as a step at t = 0, runs to steady state, and reports
/// deflection against load with a least-squares compliance estimate. The
/// scenario provides the setpoint and initial state; its own load schedule
/// is ignored.
StiffnessReport measure_stiffness(const PlantParams& params, const SensorCurve& curve,
                                  const PidGains& gains, const AmplifierModel& amp,
                                  const Scenario& scenario, const std::vector<double>& loads_n,
                                  const SimConfig& cfg,
                                  double compliance_tol_mm_per_n = 1e-4);

struct StabilityResult {
    std::vector<std::complex<double>> eigenvalues;
    bool stable = false;
};

/// Eigenvalues of the ideal (unsaturated, unfiltered) linearized closed
/// loop: 2x2 state matrix for PD, 3x3 with the integral state when ki > 0.
/// loop_chain is |sensor gain| * amplifier transconductance; the controller
/// contributes G = k_i * loop_chain per unit kp.
StabilityResult stability_analysis(const LinearModel& lm, const PidGains& gains,
                                   double loop_chain);

struct SweepRow {
    double zeta = 0.0;
    double omega_n_rad_s = 0.0;
    double settling_time_s = 0.0; // NaN when unsettled or infeasible
    double overshoot_pct = 0.0;   // NaN when infeasible
    bool stable = false;
    bool feasible = false;
};

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Designs gains for each spec and measures the 2% settling time and percent
/// overshoot of the gap response to the scenario's first load step on the
/// linearized, unsaturated loop. Metrics are taken on the designed PD pair
/// (integral disabled) so the placed second-order poles govern the response.
/// Infeasible specs are flagged, not fatal.
std::vector<SweepRow> gain_sweep(const LinearModel& lm, double loop_gain,
                                 const std::vector<DesignSpecs>& specs_grid,
                                 const Scenario& scenario, const SimConfig& cfg);

} // namespace maglev
