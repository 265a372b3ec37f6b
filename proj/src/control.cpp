#include "maglev/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maglev {

void PidGains::validate() const {
    if (!std::isfinite(kp)) throw std::invalid_argument("gains.kp: must be finite");
    if (!(td_s >= 0.0) || !std::isfinite(td_s))
        throw std::invalid_argument("gains.td: must be >= 0");
    if (!(ki_per_s >= 0.0) || !std::isfinite(ki_per_s))
        throw std::invalid_argument("gains.ki: must be >= 0");
    if (!(deriv_filter_n > 0.0))
        throw std::invalid_argument("gains.deriv_filter_n: must be > 0");
    if (!(out_min_v < out_max_v))
        throw std::invalid_argument("gains.out_min: must be below out_max");
    if (!std::isfinite(bias_v)) throw std::invalid_argument("gains.bias: must be finite");
}

void AmplifierModel::validate() const {
    if (!(transconductance_a_per_v > 0.0) || !std::isfinite(transconductance_a_per_v))
        throw std::invalid_argument("amplifier.transconductance: must be > 0");
    if (!(v_ceiling_v > 0.0) || !std::isfinite(v_ceiling_v))
        throw std::invalid_argument("amplifier.v_ceiling: must be > 0");
}

void DesignSpecs::validate() const {
    if (!(zeta > 0.0 && zeta < 1.0))
        throw std::invalid_argument("specs.zeta: must be in (0, 1)");
    if (!(omega_n_rad_s > 0.0) || !std::isfinite(omega_n_rad_s))
        throw std::invalid_argument("specs.omega_n: must be > 0");
}

TransferCoeffs pid_transfer_coeffs(const PidGains& gains) {
    gains.validate();
    TransferCoeffs tf;
    if (gains.ki_per_s == 0.0) {
        // The 1/s pole cancels.
        if (gains.td_s == 0.0) {
            tf.num = {gains.kp};
        } else {
            tf.num = {gains.kp * gains.td_s, gains.kp};
        }
        tf.den = {1.0};
    } else {
        tf.num = {gains.kp * gains.td_s, gains.kp, gains.kp * gains.ki_per_s};
        tf.den = {1.0, 0.0};
        if (gains.td_s == 0.0) tf.num.erase(tf.num.begin());
    }
    return tf;
}

PidOutput pid_step(const DiscretePidState& state, double error_v, double dt_s,
                   const PidGains& gains) {
    if (!std::isfinite(error_v)) {
        throw std::domain_error("pid_step: non-finite error input");
    }
    if (!(dt_s > 0.0)) {
        throw std::invalid_argument("pid_step: dt must be > 0");
    }

    DiscretePidState next = state;

    // Filtered backward-difference derivative contribution, td folded in:
    // tf*D' + D = td*de/dt with tf = td/N, discretized by backward Euler.
    if (gains.td_s > 0.0) {
        double tf = gains.td_s / gains.deriv_filter_n;
        next.deriv_state = (tf * state.deriv_state +
                            gains.td_s * (error_v - state.last_error)) /
                           (tf + dt_s);
    } else {
        next.deriv_state = 0.0;
    }
    next.last_error = error_v;

    double tentative = state.integrator + dt_s * error_v;
    double raw = gains.bias_v +
                 gains.kp * (error_v + next.deriv_state + gains.ki_per_s * tentative);

    // Conditional integration: hold the integrator when the output is
    // clamped and the new error would push it deeper into saturation.
    double kpki = gains.kp * gains.ki_per_s;
    bool freeze = (raw > gains.out_max_v && kpki * error_v > 0.0) ||
                  (raw < gains.out_min_v && kpki * error_v < 0.0);
    next.integrator = freeze ? state.integrator : tentative;

    // Hard integrator bound: the useful integral contribution never exceeds
    // the output span, so cap |integrator| there (without ever expanding an
    // already-larger inherited value).
    if (kpki > 0.0) {
        double cap = std::max((gains.out_max_v - gains.out_min_v) / kpki,
                              std::fabs(state.integrator));
        next.integrator = std::clamp(next.integrator, -cap, cap);
    }

    raw = gains.bias_v +
          gains.kp * (error_v + next.deriv_state + gains.ki_per_s * next.integrator);
    double out = std::clamp(raw, gains.out_min_v, gains.out_max_v);
    next.saturated = (out != raw);
    return PidOutput{out, next};
}

double amplifier_current(double control_voltage_v, const AmplifierModel& amp) {
    double v = std::clamp(control_voltage_v, 0.0, amp.v_ceiling_v);
    return v * amp.transconductance_a_per_v;
}

PidGains design_gains_from_specs(const DesignSpecs& specs, const LinearModel& lm,
                                 double loop_gain) {
    specs.validate();
    if (!(lm.k_i > 0.0)) {
        throw std::invalid_argument("design_gains_from_specs: linear model needs k_i > 0");
    }
    if (!(loop_gain > 0.0)) {
        throw std::invalid_argument("design_gains_from_specs: loop gain must be > 0");
    }
    double g = lm.k_i * loop_gain; // N per volt of proportional output
    double w = specs.omega_n_rad_s;
    double kp = (lm.mass * w * w - lm.net_stiffness) / g;
    if (kp < 0.0) {
        throw std::domain_error(
            "design_gains_from_specs: infeasible specs (omega_n^2*mass < net_stiffness)");
    }

    PidGains gains;
    gains.kp = kp;
    if (kp == 0.0) {
        gains.td_s = 0.0; // plant already meets the spec, nothing to place
    } else {
        double td = (2.0 * specs.zeta * w * lm.mass - lm.damping) / (g * kp);
        if (td < 0.0) {
            throw std::domain_error(
                "design_gains_from_specs: infeasible specs (plant damping exceeds target)");
        }
        gains.td_s = td;
    }
    gains.ki_per_s = w / 10.0;
    return gains;
}

} // namespace maglev
