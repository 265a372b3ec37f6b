#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "maglev/sim.hpp"

namespace maglev {

enum class CostKind { itae, ise };

const char* to_string(CostKind kind);

/// Time-integral tracking cost of a closed-loop trace, with the error
/// measured in gap units against the scenario setpoint. Faulted runs get a
/// large penalty so any settling run beats them.
/// Throws std::invalid_argument on an empty trace.
double trace_cost(const Trace& trace, CostKind kind);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct MinimizeResult {
    std::vector<double> x;
    double cost = 0.0;
    int evals_used = 0;
    bool converged = false;
    std::vector<std::pair<std::vector<double>, double>> history;
};

/// Deterministic bounded minimization: a uniform seed grid followed by
/// Nelder-Mead style local descent from the best seed, with every trial
/// point clipped to the bounds. Stops at max_evals or when the simplex
/// diameter falls below 1e-4 of the bound ranges.
MinimizeResult minimize(const std::function<double(const std::vector<double>&)>& cost,
                        const std::vector<Interval>& bounds, int grid_points_per_axis,
                        int max_evals);

/// Gain-tuning problem over (kp, td, ki) on the full nonlinear simulation.
/// base_gains supplies the fixed fields (filter ratio, limits, bias).
struct TuneProblem {
    CostKind cost_kind = CostKind::itae;
    Interval kp_bounds{0.05, 2.0};
    Interval td_bounds{0.0, 0.05};
    Interval ki_bounds{0.5, 20.0};
    int seed_grid_points_per_axis = 4;
    int max_evals = 200;

    PlantParams params;
    SensorCurve curve;
    AmplifierModel amp;
    PidGains base_gains;
    Scenario scenario;
    SimConfig cfg;

    void validate() const;
};

struct TuneResult {
    PidGains gains;
    double cost = 0.0;
    int evals_used = 0;
    bool converged = false;
    std::vector<std::pair<PidGains, double>> history;
};

/// Seed-grid search plus simplex refinement of the PID gains against the
/// problem's trace cost. The result is never worse than the best seed.
/// Throws std::runtime_error when every seed evaluation faults.
TuneResult tune_gains(const TuneProblem& problem);

/// CSV schema: eval,kp,td,ki,cost
void write_tune_history_csv(std::ostream& out, const TuneResult& result);

} // namespace maglev
