#include "maglev/plant.hpp"

#include <cmath>
#include <string>

namespace maglev {

namespace {

void require(bool ok, const char* field, const char* what) {
    if (!ok) {
        throw std::invalid_argument(std::string("plant.") + field + ": " + what);
    }
}

} // namespace

void PlantParams::validate() const {
    require(std::isfinite(mass_kg) && mass_kg > 0.0, "mass", "must be > 0");
    require(std::isfinite(spring_k) && spring_k >= 0.0, "spring_k", "must be >= 0");
    require(std::isfinite(damping_c) && damping_c >= 0.0, "damping_c", "must be >= 0");
    require(std::isfinite(magnet_c) && magnet_c > 0.0, "magnet_c", "must be > 0");
    require(std::isfinite(gap0_mm) && gap0_mm > 0.0, "gap0", "must be > 0");
}

double magnet_force(double current_a, double gap_mm, const PlantParams& params) {
    if (!(gap_mm > 0.0)) {
        throw std::domain_error("magnet_force: gap <= 0 (plate-magnet contact)");
    }
    if (current_a < 0.0) {
        throw std::domain_error("magnet_force: negative coil current");
    }
    double ratio = current_a / gap_mm;
    return params.magnet_c * ratio * ratio;
}

StateDerivative dynamics(const PlantState& state, double current_a, double load_n,
                         const PlantParams& params) {
    double gap = params.gap0_mm - state.y_mm;
    double force = magnet_force(current_a, gap, params); // throws on contact
    double net = -params.spring_k * state.y_mm - params.damping_c * state.v_mm_s +
                 force - load_n;
    return StateDerivative{state.v_mm_s, net / params.effective_mass()};
}

double equilibrium_current(const PlantParams& params, double gap_star_mm, double load_n) {
    if (!(gap_star_mm > 0.0)) {
        throw std::domain_error("equilibrium_current: gap_star must be > 0");
    }
    double f_required = params.spring_k * (params.gap0_mm - gap_star_mm) + load_n;
    if (f_required < 0.0) {
        throw std::domain_error(
            "equilibrium_current: required magnet force is negative (magnet cannot push)");
    }
    return gap_star_mm * std::sqrt(f_required / params.magnet_c);
}

OperatingPoint solve_operating_point(const PlantParams& params, double gap_star_mm,
                                     double load_n) {
    return OperatingPoint{gap_star_mm, equilibrium_current(params, gap_star_mm, load_n),
                          load_n};
}

LinearModel linearize(const PlantParams& params, const OperatingPoint& op) {
    if (!(op.gap_mm > 0.0) || op.current_a < 0.0) {
        throw std::invalid_argument("linearize: invalid operating point");
    }
    PlantState rest{params.gap0_mm - op.gap_mm, 0.0};
    StateDerivative d = dynamics(rest, op.current_a, op.load_n, params);
    double residual_force = d.dv_mm_s2 * params.effective_mass();
    if (std::fabs(residual_force) > 1e-6) {
        throw std::invalid_argument("linearize: operating point is not an equilibrium");
    }
    double g = op.gap_mm;
    double i = op.current_a;
    LinearModel lm;
    lm.mass = params.effective_mass();
    lm.damping = params.damping_c;
    lm.k_i = 2.0 * params.magnet_c * i / (g * g);
    lm.k_x = -2.0 * params.magnet_c * i * i / (g * g * g);
    lm.net_stiffness = params.spring_k + lm.k_x;
    lm.op = op;
    return lm;
}

PlantParams calibrate_to_current_coefficient(double target_k_i, double gap_star_mm,
                                             PlantParams params, double max_current_a) {
    if (!(target_k_i > 0.0)) {
        throw std::invalid_argument("calibrate_to_current_coefficient: target k_i must be > 0");
    }
    if (!(gap_star_mm > 0.0)) {
        throw std::invalid_argument("calibrate_to_current_coefficient: gap_star must be > 0");
    }
    double f_required = params.spring_k * (params.gap0_mm - gap_star_mm);
    if (!(f_required > 0.0)) {
        throw std::domain_error(
            "calibrate_to_current_coefficient: no magnet force demand at gap_star "
            "(needs spring_k > 0 and gap_star < gap0)");
    }
    // k_i = 2*sqrt(c*F)/g  =>  c = k_i^2 g^2 / (4 F); then i* = 2F/k_i.
    params.magnet_c = target_k_i * target_k_i * gap_star_mm * gap_star_mm /
                      (4.0 * f_required);
    double current = 2.0 * f_required / target_k_i;
    if (current > max_current_a) {
        throw std::domain_error(
            "calibrate_to_current_coefficient: operating current exceeds amplifier ceiling");
    }
    return params;
}

} // namespace maglev
