#pragma once

#include <vector>

#include "maglev/plant.hpp"

namespace maglev {

/// PID controller parameters in the series form kp*(1 + s*td + ki/s).
/// kp = 1 recovers the unity-proportional analog form.
struct PidGains {
    double kp = 1.0;            // dimensionless
    double td_s = 0.0;          // derivative time
    double ki_per_s = 0.0;      // integral coefficient
    double deriv_filter_n = 10; // derivative filter ratio (filter time = td/N)
    double out_min_v = 0.0;
    double out_max_v = 24.0;
    double bias_v = 0.0;        // feedforward offset added before clamping

    void validate() const; // throws std::invalid_argument
};

/// Runtime state of the discrete controller. One instance per loop; not
/// shareable across concurrent simulations.
struct DiscretePidState {
    double integrator = 0.0;   // integral of error, V*s
    double deriv_state = 0.0;  // filtered derivative contribution, V
    double last_error = 0.0;   // V
    bool saturated = false;
};

struct PidOutput {
    double output_v = 0.0;
    DiscretePidState state;
};

/// Controller voltage to coil current: one-quadrant drive clamped to
/// [0, v_ceiling] before the transconductance (the magnet cannot push).
struct AmplifierModel {
    double transconductance_a_per_v = 0.5;
    double v_ceiling_v = 24.0;

    double i_max_a() const { return transconductance_a_per_v * v_ceiling_v; }
    void validate() const;
};

/// Second-order closed-loop target: damping ratio and natural frequency.
struct DesignSpecs {
    double zeta = 0.7;
    double omega_n_rad_s = 60.0;

    void validate() const;
};

/// Rational transfer function of kp*(1 + s*td + ki/s), coefficients in
/// descending powers of s. Exact pole/zero cancellations are removed
/// (P-only collapses to num=[kp], den=[1]).
struct TransferCoeffs {
    std::vector<double> num;
    std::vector<double> den;
};

TransferCoeffs pid_transfer_coeffs(const PidGains& gains);

/// One discrete controller step: backward-Euler integral, first-order
/// filtered backward-difference derivative, output clamped to
/// [out_min, out_max] with conditional-integration anti-windup.
/// Throws std::domain_error on non-finite error input.
PidOutput pid_step(const DiscretePidState& state, double error_v, double dt_s,
                   const PidGains& gains);

double amplifier_current(double control_voltage_v, const AmplifierModel& amp);

/// Pole placement on the linearized loop. Chooses kp and td so the PD
/// closed loop matches mass*(s^2 + 2*zeta*omega_n*s + omega_n^2); the
/// integral coefficient follows the decade-slower third-pole rule
/// ki = omega_n/10. loop_gain is |sensor gain| * amplifier
/// transconductance, so G = k_i * loop_gain is the plant force per volt
/// of proportional output.
/// Throws std::domain_error when the specs are infeasible (kp < 0, or a
/// negative derivative time would be required).
PidGains design_gains_from_specs(const DesignSpecs& specs, const LinearModel& lm,
                                 double loop_gain);

} // namespace maglev
