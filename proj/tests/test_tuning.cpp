#include <doctest.h>

#include <cmath>

#include "maglev/tuning.hpp"

using namespace maglev;

namespace {

Trace synthetic_trace(double setpoint_gap, double error, double duration, double dt,
                      bool faulted = false) {
    Trace t;
    t.setpoint_gap_mm = setpoint_gap;
    long n = std::lround(duration / dt);
    for (long k = 0; k <= n; ++k) {
        t.time_s.push_back(k * dt);
        t.gap_mm.push_back(setpoint_gap - error);
        t.y_mm.push_back(0.0);
        t.vel_mm_s.push_back(0.0);
        t.sensor_v.push_back(0.0);
        t.in_range.push_back(1);
        t.control_v.push_back(0.0);
        t.current_a.push_back(0.0);
        t.load_n.push_back(0.0);
    }
    if (faulted) {
        t.status = RunStatus::contact_fault;
        t.fault_time_s = duration;
    }
    return t;
}

TuneProblem small_problem() {
    TuneProblem problem;
    problem.params = calibrate_to_current_coefficient(7.5, 3.0, PlantParams{.magnet_c = 1.0});
    problem.base_gains.bias_v =
        equilibrium_current(problem.params, 3.0, 0.0) /
        problem.amp.transconductance_a_per_v;
    problem.scenario.setpoint_gap_mm = 3.0;
    problem.scenario.load_schedule = {{0.1, 1.0}};
    problem.cfg.dt_s = 2e-4;
    problem.cfg.duration_s = 0.8;
    problem.kp_bounds = {0.1, 1.5};
    problem.td_bounds = {0.002, 0.04};
    problem.ki_bounds = {1.0, 15.0};
    problem.seed_grid_points_per_axis = 3;
    problem.max_evals = 90;
    return problem;
}

} // namespace

TEST_CASE("trace cost") {
    SUBCASE("zero error means zero cost") {
        Trace t = synthetic_trace(3.0, 0.0, 1.0, 1e-3);
        CHECK(trace_cost(t, CostKind::itae) == 0.0);
        CHECK(trace_cost(t, CostKind::ise) == 0.0);
    }

    SUBCASE("constant error matches the closed-form integrals to O(dt)") {
        double c = 0.2, duration = 1.0, dt = 1e-3;
        Trace t = synthetic_trace(3.0, c, duration, dt);
        double itae = trace_cost(t, CostKind::itae);
        double ise = trace_cost(t, CostKind::ise);
        CHECK(std::fabs(itae - c * duration * duration / 2.0) <= c * duration * dt);
        CHECK(std::fabs(ise - c * c * duration) <= c * c * dt);
    }

    SUBCASE("faulted runs are penalized beyond 1e9") {
        Trace t = synthetic_trace(3.0, 0.5, 0.2, 1e-3, true);
        CHECK(trace_cost(t, CostKind::itae) > 1e9);
    }

    SUBCASE("empty trace is an error") {
        Trace t;
        CHECK_THROWS_AS(trace_cost(t, CostKind::itae), std::invalid_argument);
    }
}

TEST_CASE("bounded simplex minimization") {
    SUBCASE("recovers an interior quadratic minimum") {
        std::vector<double> target{0.7, 0.013, 6.0};
        auto quadratic = [&](const std::vector<double>& x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                double d = x[i] - target[i];
                acc += d * d;
            }
            return acc;
        };
        std::vector<Interval> bounds{{0.0, 2.0}, {0.0, 0.05}, {0.0, 20.0}};
        MinimizeResult r = minimize(quadratic, bounds, 4, 200);
        for (std::size_t i = 0; i < 3; ++i) {
            double range = bounds[i].hi - bounds[i].lo;
            CHECK(std::fabs(r.x[i] - target[i]) <= 0.02 * range);
        }
    }

    SUBCASE("degenerate bounds return the single point after one evaluation") {
        auto cost = [](const std::vector<double>& x) { return x[0] + x[1]; };
        std::vector<Interval> bounds{{1.0, 1.0}, {2.0, 2.0}};
        MinimizeResult r = minimize(cost, bounds, 4, 50);
        CHECK(r.evals_used == 1);
        CHECK(r.x == std::vector<double>{1.0, 2.0});
        CHECK(r.converged);
    }

    SUBCASE("every evaluation respects the bounds and the best never loses to a seed") {
        auto rosen = [](const std::vector<double>& x) {
            double a = 1.0 - x[0];
            double b = x[1] - x[0] * x[0];
            return a * a + 100.0 * b * b;
        };
        std::vector<Interval> bounds{{-2.0, 2.0}, {-1.0, 3.0}};
        MinimizeResult r = minimize(rosen, bounds, 4, 150);
        double best_seed = 1e300;
        for (int k = 0; k < 16; ++k) best_seed = std::min(best_seed, r.history[k].second);
        CHECK(r.cost <= best_seed);
        for (const auto& [x, f] : r.history) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                CHECK(x[i] >= bounds[i].lo);
                CHECK(x[i] <= bounds[i].hi);
            }
        }
    }

    SUBCASE("repeated runs are identical") {
        auto cost = [](const std::vector<double>& x) {
            return std::sin(3.0 * x[0]) + x[0] * x[0];
        };
        std::vector<Interval> bounds{{-3.0, 3.0}};
        MinimizeResult a = minimize(cost, bounds, 5, 60);
        MinimizeResult b = minimize(cost, bounds, 5, 60);
        CHECK(a.x == b.x);
        CHECK(a.cost == b.cost);
        CHECK(a.history.size() == b.history.size());
    }
}

TEST_CASE("gain tuning on the nonlinear loop") {
    SUBCASE("improves on the seed grid and lands on a stable controller") {
        TuneProblem problem = small_problem();
        TuneResult r = tune_gains(problem);

        long grid = 27;
        double best_seed = 1e300;
        for (long k = 0; k < grid; ++k) {
            best_seed = std::min(best_seed, r.history[k].second);
        }
        CHECK(r.cost <= best_seed);
        CHECK(r.cost < 1e9); // not a penalty point
        CHECK(r.evals_used <= problem.max_evals);
        for (const auto& [g, f] : r.history) {
            CHECK(g.kp >= problem.kp_bounds.lo);
            CHECK(g.kp <= problem.kp_bounds.hi);
            CHECK(g.td_s >= problem.td_bounds.lo);
            CHECK(g.td_s <= problem.td_bounds.hi);
            CHECK(g.ki_per_s >= problem.ki_bounds.lo);
            CHECK(g.ki_per_s <= problem.ki_bounds.hi);
        }

        // Tuned integral action must still null the static deflection.
        SimConfig cfg;
        StiffnessReport report =
            measure_stiffness(problem.params, problem.curve, r.gains, problem.amp,
                              problem.scenario, {0.5, 1.5}, cfg);
        CHECK(report.stiffness_class == StiffnessClass::infinite_within_tolerance);
        CHECK(std::fabs(report.compliance_mm_per_n) < 1e-4);
    }

    SUBCASE("penalty dominance: a settling run always beats a faulted one") {
        TuneProblem problem = small_problem();
        PidGains good = problem.base_gains;
        good.kp = 0.8;
        good.td_s = 0.01;
        good.ki_per_s = 6.0;
        Trace settled = run_closed_loop(problem.params, problem.curve, good, problem.amp,
                                        problem.scenario, problem.cfg);
        REQUIRE_FALSE(settled.faulted());

        Scenario doomed = problem.scenario;
        doomed.load_schedule = {{0.05, 500.0}};
        Trace faulted = run_closed_loop(problem.params, problem.curve, good, problem.amp,
                                        doomed, problem.cfg);
        REQUIRE(faulted.faulted());
        CHECK(trace_cost(settled, CostKind::itae) < trace_cost(faulted, CostKind::itae));
    }

    SUBCASE("a scenario that faults every seed is an error") {
        TuneProblem problem = small_problem();
        problem.scenario.load_schedule = {{0.05, 500.0}};
        CHECK_THROWS_AS(tune_gains(problem), std::runtime_error);
    }

    SUBCASE("bounds collapsed to a point evaluate exactly once") {
        TuneProblem problem = small_problem();
        problem.kp_bounds = {0.8, 0.8};
        problem.td_bounds = {0.01, 0.01};
        problem.ki_bounds = {6.0, 6.0};
        TuneResult r = tune_gains(problem);
        CHECK(r.evals_used == 1);
        CHECK(r.gains.kp == 0.8);
        CHECK(r.gains.td_s == 0.01);
        CHECK(r.gains.ki_per_s == 6.0);
    }
}
