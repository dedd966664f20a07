#pragma once

#include <optional>
#include <vector>

#include "whisker/geometry.hpp"

namespace whisker {

// Flexural rigidity EI (N·mm²) of a round nitinol wire: E = 60 GPa
// (superelastic plateau), I = pi d^4 / 64.
double nitinol_flexural_rigidity(double diameter_mm);

// Pre-curved whisker geometry. Lengths in mm, EI in N·mm². The rod is a
// straight proximal section along +x followed by a distal circular arc
// curling toward -y (so it trails a +y sweep).
struct WhiskerSpec {
    double total_length = 60.0;
    double diameter = 0.3;
    double distal_arc_radius = 20.0;
    double distal_arc_length = 30.0;
    int n_segments = 32;
    double flexural_rigidity = nitinol_flexural_rigidity(0.3);

    double segment_length() const { return total_length / n_segments; }

    // Torsional spring stiffness per joint, N·mm/rad.
    double joint_stiffness() const { return flexural_rigidity / segment_length(); }

    // Throws ValidationError on bad values.
    void validate() const;
};

// Deformed configuration in the whisker-base frame. joint_angles are
// deviations from the rest curvature (all-zero = rest shape). base_moment
// holds the two sensed channels in N·mm: [0] the in-plane bending moment at
// the root joint, [1] the transverse contact-force channel (see
// kTransverseGaugeLeverMm).
struct RodState {
    std::vector<double> joint_angles;
    std::vector<Vec2> node_positions;
    Vec2 base_moment{0.0, 0.0};
};

// Single frictionless point contact on the rod, in the whisker-base frame.
// normal points out of the obstacle (the direction the obstacle pushes the
// rod); force_magnitude is in N.
struct ContactPoint {
    Vec2 position{0.0, 0.0};
    double arc_length = 0.0;
    Vec2 normal{0.0, 0.0};
    double force_magnitude = 0.0;
};

// The sensor's second channel is the transverse (base-frame y) component of
// the contact force scaled by a fixed gauge lever arm. This gives a second,
// mechanically independent reading — analogous to a crossed strain-gauge
// pair — instead of a redundant copy of the bending channel.
inline constexpr double kTransverseGaugeLeverMm = 20.0;

struct SolveOptions {
    double tolerance = 1e-8;   // max-abs residual, N·mm (moment rows) / mm (gap rows)
    int max_iterations = 200;
    // If set, receives 0.5*||residual||^2 of the initial point and of every
    // accepted iterate for the solve stage that produced the answer
    // (instrumentation for convergence tests).
    std::vector<double>* merit_history = nullptr;
};

struct EquilibriumResult {
    RodState state;
    std::optional<ContactPoint> contact;  // empty = free (no contact force)
    int iterations = 0;
};

// Rest configuration: zero joint angles, zero base moment.
// Throws ValidationError on invalid spec.
RodState build_rest_shape(const WhiskerSpec& spec);

// Quasistatic equilibrium of the rod against an obstacle (or free if
// object_world is null / out of reach). base_pose maps the whisker-base
// frame to the world frame; the result is expressed in the base frame.
// A pulling contact force signals separation and yields the free state.
// Throws SolverError (with residual norm) on non-convergence.
EquilibriumResult solve_equilibrium(const WhiskerSpec& spec, const Pose2& base_pose,
                                    const PolyObject* object_world,
                                    const EquilibriumResult* warm_start = nullptr,
                                    const SolveOptions& opts = {});

// Equilibrium under a fixed point force (base frame) applied at the given
// arc length. Test/analysis helper with the same spring model.
RodState solve_point_force(const WhiskerSpec& spec, double arc_length, const Vec2& force,
                           const SolveOptions& opts = {});

struct PinnedResult {
    RodState state;
    ContactPoint contact;
    int iterations = 0;
};

// Equilibrium with the rod pinned to pass through a fixed point (base
// frame). The pin is a frictionless groove: the rod may slide along its own
// length, so the constraint force is normal to the rod and the contact arc
// length is solved for. force_magnitude keeps the sign of the normal-side
// push (bilateral constraint). Throws ValidationError if the point is
// beyond reach, SolverError on non-convergence.
PinnedResult solve_pinned(const WhiskerSpec& spec, const Vec2& pin_point,
                          const SolveOptions& opts = {});

// First rod/boundary crossing walking out from the base: the intersection
// with the smallest arc length, or nullopt if the rod does not touch the
// object. state is in the base frame; the object is in the world frame and
// is pulled into the base frame via base_pose.
std::optional<ContactPoint> find_proximal_contact(const RodState& state,
                                                  const PolyObject& object_world,
                                                  const Pose2& base_pose);

}  // namespace whisker
