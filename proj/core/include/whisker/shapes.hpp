#pragma once

#include <cstdint>
#include <string>

#include "whisker/geometry.hpp"

namespace whisker {

// Procedural scene shapes. All dimensions in mm; curved outlines are
// polygonized with n_vertices segments (default 64).

// Circle of radius r centered at the origin.
PolyObject make_circle(double r, std::size_t n_vertices = 64, const std::string& name = "circle");

// Axis-aligned rectangle centered at the origin.
PolyObject make_rectangle(double width, double height, const std::string& name = "rectangle");

// Smooth random closed curve: base radius modulated by a low-order Fourier
// series with seeded coefficients. Same seed, same polygon.
PolyObject make_blob(double base_radius, std::uint64_t seed, std::size_t n_vertices = 64,
                     const std::string& name = "blob");

// Thin disc profile: a circle flattened along y (an ellipse), e.g. a coin
// standing on edge seen from the sweep plane.
PolyObject make_coin(double r, double thickness_ratio = 0.25, std::size_t n_vertices = 64,
                     const std::string& name = "coin");

// L-shaped bracket: outer leg lengths and a common arm thickness,
// corner at the origin, legs along +x and +y.
PolyObject make_l_bracket(double leg_x, double leg_y, double thickness,
                          const std::string& name = "l_bracket");

// Dispatch by kind string ("circle", "rectangle", "blob", "coin",
// "l_bracket") with a small uniform parameter set; used by config parsing.
struct ShapeSpec {
    std::string kind;
    std::string name;          // empty → kind used as name
    double a = 0.0;            // circle/blob/coin radius, rectangle width, bracket leg_x
    double b = 0.0;            // rectangle height, bracket leg_y
    double c = 0.0;            // bracket thickness, coin thickness ratio
    std::uint64_t seed = 0;    // blob only
    std::size_t n_vertices = 64;
};

PolyObject make_shape(const ShapeSpec& spec);

}  // namespace whisker
