#include "maglev/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace maglev {

namespace {

constexpr double kFaultPenalty = 1e9;
constexpr double kDiameterTol = 1e-4; // relative to the bound ranges

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

const char* to_string(CostKind kind) {
    return kind == CostKind::itae ? "itae" : "ise";
}

double trace_cost(const Trace& trace, CostKind kind) {
    if (trace.size() == 0) {
        throw std::invalid_argument("trace_cost: empty trace");
    }
    if (trace.faulted()) {
        double divergence = 0.0;
        for (std::size_t k = 0; k < trace.size(); ++k) {
            double e = trace.setpoint_gap_mm - trace.gap_mm[k];
            if (std::isfinite(e)) divergence = std::max(divergence, std::fabs(e));
        }
        return kFaultPenalty + std::min(divergence, kFaultPenalty);
    }
    double cost = 0.0;
    for (std::size_t k = 0; k + 1 < trace.size(); ++k) {
        double dt = trace.time_s[k + 1] - trace.time_s[k];
        double e = trace.setpoint_gap_mm - trace.gap_mm[k];
        cost += kind == CostKind::itae ? trace.time_s[k] * std::fabs(e) * dt : e * e * dt;
    }
    return cost;
}

namespace {

std::vector<double> clip(std::vector<double> x, const std::vector<Interval>& bounds) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::clamp(x[i], bounds[i].lo, bounds[i].hi);
    }
    return x;
}

} // namespace

MinimizeResult minimize(const std::function<double(const std::vector<double>&)>& cost,
                        const std::vector<Interval>& bounds, int grid_points_per_axis,
                        int max_evals) {
    const std::size_t dim = bounds.size();
    for (const auto& b : bounds) {
        if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
            throw std::invalid_argument("minimize: bounds must be finite with lo <= hi");
        }
    }
    if (grid_points_per_axis < 1) {
        throw std::invalid_argument("minimize: need at least one grid point per axis");
    }

    MinimizeResult result;
    int evals = 0;
    std::vector<double> best_x;
    double best_f = std::numeric_limits<double>::infinity();

    auto evaluate = [&](const std::vector<double>& x) {
        double f = cost(x);
        ++evals;
        result.history.emplace_back(x, f);
        if (f < best_f) {
            best_f = f;
            best_x = x;
        }
        return f;
    };

    // Seed grid, lexicographic order over the axes.
    std::vector<std::vector<double>> axis_values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (bounds[i].hi == bounds[i].lo) {
            axis_values[i] = {bounds[i].lo};
        } else if (grid_points_per_axis == 1) {
            axis_values[i] = {0.5 * (bounds[i].lo + bounds[i].hi)};
        } else {
            for (int j = 0; j < grid_points_per_axis; ++j) {
                axis_values[i].push_back(bounds[i].lo + (bounds[i].hi - bounds[i].lo) *
                                                            double(j) /
                                                            double(grid_points_per_axis - 1));
            }
        }
    }
    std::vector<std::size_t> idx(dim, 0);
    bool grid_done = dim == 0;
    while (!grid_done && evals < max_evals) {
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = axis_values[i][idx[i]];
        evaluate(x);
        std::size_t axis = dim;
        while (axis > 0) {
            --axis;
            if (++idx[axis] < axis_values[axis].size()) break;
            idx[axis] = 0;
            if (axis == 0) grid_done = true;
        }
    }

    // Free axes span an actual interval; collapsed ones stay fixed.
    std::vector<std::size_t> free_axes;
    for (std::size_t i = 0; i < dim; ++i) {
        if (bounds[i].hi > bounds[i].lo) free_axes.push_back(i);
    }
    if (free_axes.empty() || evals >= max_evals) {
        result.x = best_x;
        result.cost = best_f;
        result.evals_used = evals;
        result.converged = free_axes.empty();
        return result;
    }

    // Nelder-Mead on the free axes from the best seed.
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    std::size_t m = free_axes.size();
    std::vector<std::vector<double>> verts;
    std::vector<double> fvals;
    verts.push_back(best_x);
    fvals.push_back(best_f);
    for (std::size_t j = 0; j < m && evals < max_evals; ++j) {
        std::size_t axis = free_axes[j];
        double range = bounds[axis].hi - bounds[axis].lo;
        double step = 0.1 * range;
        std::vector<double> v = best_x;
        v[axis] = v[axis] + step <= bounds[axis].hi ? v[axis] + step : v[axis] - step;
        verts.push_back(v);
        fvals.push_back(evaluate(v));
    }

    auto diameter = [&]() {
        double d = 0.0;
        for (std::size_t a = 0; a < verts.size(); ++a) {
            for (std::size_t b = a + 1; b < verts.size(); ++b) {
                for (std::size_t axis : free_axes) {
                    double range = bounds[axis].hi - bounds[axis].lo;
                    d = std::max(d, std::fabs(verts[a][axis] - verts[b][axis]) / range);
                }
            }
        }
        return d;
    };

    while (evals < max_evals && verts.size() == m + 1) {
        std::vector<std::size_t> order(verts.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fvals[a] < fvals[b]; });
        std::vector<std::vector<double>> sorted_v;
        std::vector<double> sorted_f;
        for (std::size_t k : order) {
            sorted_v.push_back(verts[k]);
            sorted_f.push_back(fvals[k]);
        }
        verts.swap(sorted_v);
        fvals.swap(sorted_f);

        if (diameter() < kDiameterTol) {
            result.converged = true;
            break;
        }

        std::vector<double> centroid = verts[0];
        for (std::size_t k = 1; k < m; ++k) {
            for (std::size_t axis : free_axes) centroid[axis] += verts[k][axis];
        }
        for (std::size_t axis : free_axes) centroid[axis] /= double(m);

        auto blend = [&](const std::vector<double>& from, double scale) {
            std::vector<double> p = centroid;
            for (std::size_t axis : free_axes) {
                p[axis] = centroid[axis] + scale * (from[axis] - centroid[axis]);
            }
            return clip(std::move(p), bounds);
        };

        std::vector<double> reflected = blend(verts[m], -alpha);
        double f_reflected = evaluate(reflected);
        if (f_reflected < fvals[0] && evals < max_evals) {
            std::vector<double> expanded = blend(verts[m], -alpha * gamma);
            double f_expanded = evaluate(expanded);
            if (f_expanded < f_reflected) {
                verts[m] = expanded;
                fvals[m] = f_expanded;
            } else {
                verts[m] = reflected;
                fvals[m] = f_reflected;
            }
        } else if (f_reflected < fvals[m - 1]) {
            verts[m] = reflected;
            fvals[m] = f_reflected;
        } else if (evals < max_evals) {
            bool outside = f_reflected < fvals[m];
            std::vector<double> contracted =
                outside ? blend(reflected, rho) : blend(verts[m], rho);
            double f_contracted = evaluate(contracted);
            if (f_contracted < (outside ? f_reflected : fvals[m])) {
                verts[m] = contracted;
                fvals[m] = f_contracted;
            } else {
                for (std::size_t k = 1; k <= m && evals < max_evals; ++k) {
                    for (std::size_t axis : free_axes) {
                        verts[k][axis] =
                            verts[0][axis] + sigma * (verts[k][axis] - verts[0][axis]);
                    }
                    verts[k] = clip(std::move(verts[k]), bounds);
                    fvals[k] = evaluate(verts[k]);
                }
            }
        }
    }

    result.x = best_x;
    result.cost = best_f;
    result.evals_used = evals;
    return result;
}

void TuneProblem::validate() const {
    params.validate();
    curve.validate();
    amp.validate();
    base_gains.validate();
    scenario.validate();
    cfg.validate();
    for (const Interval& b : {kp_bounds, td_bounds, ki_bounds}) {
        if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
            throw std::invalid_argument("tuning.bounds: must be finite with lo <= hi");
        }
    }
    if (!(td_bounds.lo >= 0.0) || !(ki_bounds.lo >= 0.0)) {
        throw std::invalid_argument("tuning.bounds: td and ki must stay >= 0");
    }
    if (seed_grid_points_per_axis < 1) {
        throw std::invalid_argument("tuning.seed_grid_points_per_axis: must be >= 1");
    }
    long grid = 1;
    for (const Interval& b : {kp_bounds, td_bounds, ki_bounds}) {
        grid *= b.hi > b.lo ? seed_grid_points_per_axis : 1;
    }
    if (max_evals < grid) {
        throw std::invalid_argument("tuning.max_evals: must cover the seed grid");
    }
}

TuneResult tune_gains(const TuneProblem& problem) {
    problem.validate();

    auto gains_at = [&](const std::vector<double>& x) {
        PidGains g = problem.base_gains;
        g.kp = x[0];
        g.td_s = x[1];
        g.ki_per_s = x[2];
        return g;
    };
    auto cost = [&](const std::vector<double>& x) {
        Trace t = run_closed_loop(problem.params, problem.curve, gains_at(x), problem.amp,
                                  problem.scenario, problem.cfg);
        return trace_cost(t, problem.cost_kind);
    };

    std::vector<Interval> bounds{problem.kp_bounds, problem.td_bounds, problem.ki_bounds};
    MinimizeResult mr =
        minimize(cost, bounds, problem.seed_grid_points_per_axis, problem.max_evals);

    long grid = 1;
    for (const Interval& b : bounds) {
        grid *= b.hi > b.lo ? problem.seed_grid_points_per_axis : 1;
    }
    double best_seed = std::numeric_limits<double>::infinity();
    for (long k = 0; k < grid && k < long(mr.history.size()); ++k) {
        best_seed = std::min(best_seed, mr.history[k].second);
    }
    if (best_seed >= kFaultPenalty) {
        throw std::runtime_error("tune_gains: every seed evaluation faulted");
    }

    TuneResult result;
    result.gains = gains_at(mr.x);
    result.cost = mr.cost;
    result.evals_used = mr.evals_used;
    result.converged = mr.converged;
    result.history.reserve(mr.history.size());
    for (const auto& [x, f] : mr.history) {
        result.history.emplace_back(gains_at(x), f);
    }
    return result;
}

void write_tune_history_csv(std::ostream& out, const TuneResult& result) {
    out << "eval,kp,td,ki,cost\n";
    for (std::size_t k = 0; k < result.history.size(); ++k) {
        const auto& [g, f] = result.history[k];
        out << (k + 1) << ',' << fmt(g.kp) << ',' << fmt(g.td_s) << ',' << fmt(g.ki_per_s)
            << ',' << fmt(f) << '\n';
    }
}

} // namespace maglev
