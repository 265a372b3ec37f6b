#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "maglev/control.hpp"

using namespace maglev;

namespace {

std::complex<double> polyval(const std::vector<double>& coeffs, std::complex<double> s) {
    std::complex<double> acc = 0.0;
    for (double c : coeffs) acc = acc * s + c;
    return acc;
}

LinearModel default_linear_model() {
    // Default plant calibrated to k_i = 7.5 N/A at a 3 mm gap.
    LinearModel lm;
    lm.mass = 5e-4;
    lm.damping = 0.01;
    lm.k_i = 7.5;
    lm.k_x = -8.0 / 3.0;
    lm.net_stiffness = 2.0 - 8.0 / 3.0;
    lm.op = OperatingPoint{3.0, 16.0 / 15.0, 0.0};
    return lm;
}

} // namespace

TEST_CASE("pid transfer coefficients") {
    SUBCASE("pure proportional cancels to a constant") {
        PidGains g;
        g.kp = 1.0;
        TransferCoeffs tf = pid_transfer_coeffs(g);
        REQUIRE(tf.num.size() == 1);
        REQUIRE(tf.den.size() == 1);
        CHECK(tf.num[0] == 1.0);
        CHECK(tf.den[0] == 1.0);
    }

    SUBCASE("full form with unity kp") {
        PidGains g;
        g.kp = 1.0;
        g.td_s = 0.02;
        g.ki_per_s = 4.0;
        TransferCoeffs tf = pid_transfer_coeffs(g);
        CHECK(tf.num == std::vector<double>{0.02, 1.0, 4.0});
        CHECK(tf.den == std::vector<double>{1.0, 0.0});
    }

    SUBCASE("matches the direct complex evaluation pointwise") {
        PidGains g;
        g.kp = 0.8;
        g.td_s = 0.015;
        g.ki_per_s = 6.0;
        TransferCoeffs tf = pid_transfer_coeffs(g);
        for (double w = 0.1; w < 1e4; w *= 3.7) {
            std::complex<double> s(0.0, w);
            std::complex<double> from_coeffs = polyval(tf.num, s) / polyval(tf.den, s);
            std::complex<double> direct =
                g.kp * (1.0 + s * g.td_s + g.ki_per_s / s);
            CHECK(std::abs(from_coeffs - direct) / std::abs(direct) < 1e-12);
        }
    }
}

TEST_CASE("discrete pid step") {
    PidGains g;
    g.kp = 2.0;
    g.td_s = 0.0;
    g.ki_per_s = 3.0;
    g.out_min_v = -100.0;
    g.out_max_v = 100.0;
    g.bias_v = 1.5;

    SUBCASE("zero error is a fixed point") {
        DiscretePidState s;
        PidOutput out = pid_step(s, 0.0, 1e-3, g);
        CHECK(out.output_v == g.bias_v);
        CHECK(out.state.integrator == 0.0);
        CHECK(out.state.deriv_state == 0.0);
        CHECK_FALSE(out.state.saturated);
    }

    SUBCASE("constant error follows the backward-Euler closed form") {
        DiscretePidState s;
        double e = 0.4, dt = 1e-3;
        double output = 0.0;
        int n = 250;
        for (int k = 0; k < n; ++k) {
            PidOutput out = pid_step(s, e, dt, g);
            s = out.state;
            output = out.output_v;
        }
        CHECK(s.integrator == doctest::Approx(n * dt * e).epsilon(1e-12));
        CHECK(output ==
              doctest::Approx(g.bias_v + g.kp * e * (1.0 + g.ki_per_s * n * dt))
                  .epsilon(1e-12));
    }

    SUBCASE("saturated output stays clamped and the integrator stays bounded") {
        PidGains tight = g;
        tight.out_min_v = 0.0;
        tight.out_max_v = 5.0;
        tight.bias_v = 0.0;
        DiscretePidState s;
        double bound = (tight.out_max_v - tight.out_min_v) /
                       (tight.kp * tight.ki_per_s);
        for (int k = 0; k < 100000; ++k) {
            PidOutput out = pid_step(s, 10.0, 1e-3, tight);
            s = out.state;
            CHECK(out.output_v <= tight.out_max_v);
            CHECK(out.output_v >= tight.out_min_v);
            REQUIRE(std::fabs(s.integrator) <= bound + 1e-12);
        }
        CHECK(s.saturated);
    }

    SUBCASE("windup bound holds under sign-flipping errors") {
        PidGains tight = g;
        tight.out_min_v = -2.0;
        tight.out_max_v = 2.0;
        tight.bias_v = 0.0;
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> err(-50.0, 50.0);
        DiscretePidState s;
        double bound = (tight.out_max_v - tight.out_min_v) /
                       (tight.kp * tight.ki_per_s);
        for (int k = 0; k < 20000; ++k) {
            PidOutput out = pid_step(s, err(rng), 1e-3, tight);
            s = out.state;
            REQUIRE(std::fabs(s.integrator) <= bound + 1e-12);
            REQUIRE(out.output_v >= tight.out_min_v);
            REQUIRE(out.output_v <= tight.out_max_v);
        }
    }

    SUBCASE("with ki = 0 a replayed input sequence reproduces outputs bit-identically") {
        PidGains pd = g;
        pd.ki_per_s = 0.0;
        pd.td_s = 0.01;
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> err(-3.0, 3.0);
        std::vector<double> inputs;
        for (int k = 0; k < 500; ++k) inputs.push_back(err(rng));

        auto run = [&]() {
            std::vector<double> outputs;
            DiscretePidState s;
            for (double e : inputs) {
                PidOutput out = pid_step(s, e, 1e-3, pd);
                s = out.state;
                outputs.push_back(out.output_v);
            }
            return outputs;
        };
        CHECK(run() == run());
    }

    SUBCASE("non-finite error is a fault") {
        DiscretePidState s;
        CHECK_THROWS_AS(pid_step(s, std::nan(""), 1e-3, g), std::domain_error);
        CHECK_THROWS_AS(pid_step(s, INFINITY, 1e-3, g), std::domain_error);
    }

    SUBCASE("step response converges first-order to the continuous controller") {
        PidGains full = g;
        full.td_s = 0.05;
        full.ki_per_s = 2.0;
        full.deriv_filter_n = 10.0;
        double tf = full.td_s / full.deriv_filter_n;
        auto continuous = [&](double t) {
            return full.bias_v +
                   full.kp * (1.0 + full.ki_per_s * t +
                              full.deriv_filter_n * std::exp(-t / tf));
        };
        auto max_err = [&](double dt) {
            DiscretePidState s;
            double worst = 0.0;
            double t_end = 0.2;
            int n = int(t_end / dt + 0.5);
            for (int k = 1; k <= n; ++k) {
                PidOutput out = pid_step(s, 1.0, dt, full);
                s = out.state;
                worst = std::max(worst, std::fabs(out.output_v - continuous(k * dt)));
            }
            return worst;
        };
        double e1 = max_err(1e-3);
        double e2 = max_err(5e-4);
        CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.25));
    }
}

TEST_CASE("amplifier") {
    AmplifierModel amp; // 0.5 A/V, 24 V ceiling

    CHECK(amplifier_current(0.0, amp) == 0.0);
    CHECK(amplifier_current(amp.v_ceiling_v, amp) == amp.i_max_a());
    CHECK(amplifier_current(amp.v_ceiling_v + 10.0, amp) == amp.i_max_a());
    CHECK(amplifier_current(-3.0, amp) == 0.0);
    CHECK(amplifier_current(2.0, amp) == doctest::Approx(1.0));
    CHECK(amp.i_max_a() == doctest::Approx(12.0));
}

TEST_CASE("gain design from second-order specs") {
    LinearModel lm = default_linear_model();
    const double loop_gain = 2.0 * 0.5; // |sensor gain| * transconductance
    const double g = lm.k_i * loop_gain;

    SUBCASE("closed-form placement") {
        DesignSpecs specs{0.7, 60.0};
        PidGains gains = design_gains_from_specs(specs, lm, loop_gain);
        double w = specs.omega_n_rad_s;
        CHECK(gains.kp ==
              doctest::Approx((lm.mass * w * w - lm.net_stiffness) / g).epsilon(1e-12));
        // Substituting back must reproduce the target polynomial coefficients.
        CHECK(lm.net_stiffness + g * gains.kp ==
              doctest::Approx(lm.mass * w * w).epsilon(1e-12));
        CHECK(lm.damping + g * gains.kp * gains.td_s ==
              doctest::Approx(2.0 * specs.zeta * w * lm.mass).epsilon(1e-12));
        CHECK(gains.ki_per_s == doctest::Approx(w / 10.0));
    }

    SUBCASE("plant already meeting the spec returns zero gains") {
        DesignSpecs specs{0.7, 60.0};
        LinearModel met = lm;
        met.net_stiffness = met.mass * specs.omega_n_rad_s * specs.omega_n_rad_s;
        met.damping = 2.0 * specs.zeta * specs.omega_n_rad_s * met.mass;
        PidGains gains = design_gains_from_specs(specs, met, loop_gain);
        CHECK(gains.kp == 0.0);
        CHECK(gains.td_s == 0.0);
    }

    SUBCASE("kp strictly increases with omega_n at fixed zeta") {
        double prev = -1e300;
        for (double w : {40.0, 50.0, 60.0, 70.0, 80.0}) {
            PidGains gains = design_gains_from_specs(DesignSpecs{0.5, w}, lm, loop_gain);
            CHECK(gains.kp > prev);
            prev = gains.kp;
        }
    }

    SUBCASE("negative kp demand is infeasible") {
        LinearModel stiff = lm;
        stiff.net_stiffness = 2.0; // magnet off
        double w_low = 0.5 * std::sqrt(stiff.net_stiffness / stiff.mass);
        CHECK_THROWS_AS(design_gains_from_specs(DesignSpecs{0.7, w_low}, stiff, loop_gain),
                        std::domain_error);
    }

    SUBCASE("negative derivative-time demand is infeasible") {
        LinearModel damped = lm;
        damped.damping = 1.0; // far beyond 2*zeta*omega_n*mass for this grid
        CHECK_THROWS_AS(
            design_gains_from_specs(DesignSpecs{0.3, 40.0}, damped, loop_gain),
            std::domain_error);
    }
}
