#pragma once

#include <stdexcept>

namespace maglev {

// Unit system: millimetres, newtons, seconds, amperes, volts.
// Mass is entered in kilograms; the equations of motion use the
// consistent effective mass in N*s^2/mm (1 kg = 1e-3 N*s^2/mm).
inline constexpr double kKgToNs2PerMm = 1e-3;

/// Physical constants of the spring-suspended plate and its electromagnet.
struct PlantParams {
    double mass_kg = 0.5;          // plate mass
    double spring_k = 2.0;         // combined spring stiffness, N/mm
    double damping_c = 0.01;       // viscous damping, N*s/mm
    double magnet_c = 31.640625;   // force-law constant, N*mm^2/A^2
    double gap0_mm = 5.0;          // magnet-plate gap at zero-current spring equilibrium
    double gravity_mm_s2 = 9810.0; // informational; gravity is absorbed into spring preload

    double effective_mass() const { return mass_kg * kKgToNs2PerMm; } // N*s^2/mm

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Plate state: upward displacement from the zero-current spring equilibrium.
struct PlantState {
    double y_mm = 0.0;
    double v_mm_s = 0.0;
};

struct StateDerivative {
    double dy_mm_s = 0.0;
    double dv_mm_s2 = 0.0;
};

/// Equilibrium triple the plant is linearized about.
struct OperatingPoint {
    double gap_mm = 0.0;
    double current_a = 0.0;
    double load_n = 0.0;
};

/// Linearized plant about an operating point.
///
/// All coefficients are in the mm/N/s unit set; mass here is the
/// effective mass (N*s^2/mm), so mass*s^2 + damping*s + net_stiffness
/// is dimensionally consistent as written.
struct LinearModel {
    double mass = 0.0;           // N*s^2/mm
    double damping = 0.0;        // N*s/mm
    double net_stiffness = 0.0;  // spring_k + k_x, N/mm
    double k_i = 0.0;            // current coefficient dF/di, N/A
    double k_x = 0.0;            // magnetic stiffness contribution, <= 0, N/mm
    OperatingPoint op;
    // Half-width of the displacement band around the operating point where
    // the linearization is trusted. Advisory only; nothing fails outside it.
    double trust_halfwidth_mm = 1.2;

    bool within_trust(double gap_mm) const {
        double d = gap_mm - op.gap_mm;
        return d >= -trust_halfwidth_mm && d <= trust_halfwidth_mm;
    }
};

/// Attraction force of the electromagnet: magnet_c * i^2 / gap^2.
/// Throws std::domain_error for gap <= 0 (plate-magnet contact) or i < 0.
double magnet_force(double current_a, double gap_mm, const PlantParams& params);

/// Right-hand side of the plate ODE with the coil current and external
/// load held constant. Upward positive; gravity is cancelled by the
/// spring preload. Throws std::domain_error on contact (gap <= 0).
StateDerivative dynamics(const PlantState& state, double current_a, double load_n,
                         const PlantParams& params);

/// Coil current holding the plate in equilibrium at gap_star under load.
/// Throws std::domain_error when the required force is negative (the
/// magnet can only pull).
double equilibrium_current(const PlantParams& params, double gap_star_mm, double load_n);

/// Convenience: solve the full equilibrium triple at a given gap and load.
OperatingPoint solve_operating_point(const PlantParams& params, double gap_star_mm,
                                     double load_n);

/// Linearize the plant about an equilibrium operating point.
/// k_i = 2*c*i/g^2, k_x = -2*c*i^2/g^3, net_stiffness = spring_k + k_x.
/// Throws std::invalid_argument if the point is not an equilibrium.
LinearModel linearize(const PlantParams& params, const OperatingPoint& op);

/// Back-solve magnet_c so that linearizing at the zero-load equilibrium
/// with gap_star reproduces the target current coefficient. The solved
/// operating current must not exceed max_current_a.
PlantParams calibrate_to_current_coefficient(double target_k_i, double gap_star_mm,
                                             PlantParams params,
                                             double max_current_a = 1e300);

} // namespace maglev
