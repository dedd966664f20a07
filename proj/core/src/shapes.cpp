#include "whisker/shapes.hpp"

#include <cmath>

#include "whisker/errors.hpp"
#include "whisker/rng.hpp"

namespace whisker {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require_positive(double v, const char* what) {
    if (!(v > 0.0)) {
        throw ValidationError(std::string(what) + " must be positive, got " + std::to_string(v));
    }
}

}  // namespace

PolyObject make_circle(double r, std::size_t n_vertices, const std::string& name) {
    require_positive(r, "circle radius");
    if (n_vertices < 3) throw ValidationError("circle needs at least 3 vertices");
    std::vector<Vec2> v;
    v.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        const double t = kTwoPi * static_cast<double>(i) / static_cast<double>(n_vertices);
        v.emplace_back(r * std::cos(t), r * std::sin(t));
    }
    return PolyObject(std::move(v), name);
}

PolyObject make_rectangle(double width, double height, const std::string& name) {
    require_positive(width, "rectangle width");
    require_positive(height, "rectangle height");
    const double hw = width / 2.0, hh = height / 2.0;
    return PolyObject({{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}, name);
}

PolyObject make_blob(double base_radius, std::uint64_t seed, std::size_t n_vertices,
                     const std::string& name) {
    require_positive(base_radius, "blob radius");
    if (n_vertices < 8) throw ValidationError("blob needs at least 8 vertices");

    // Low-order Fourier radius perturbation: r(t) = r0 (1 + Σ_k a_k cos(kt) + b_k sin(kt)).
    // Orders 2..5 and amplitude cap 0.12/k keep the curve smooth and
    // star-convex about the origin, so the polygon is always simple.
    Rng rng(mix_seed(seed, "blob"));
    constexpr int kMinOrder = 2, kMaxOrder = 5;
    double a[kMaxOrder + 1] = {0}, b[kMaxOrder + 1] = {0};
    for (int k = kMinOrder; k <= kMaxOrder; ++k) {
        const double amp = 0.12 / static_cast<double>(k);
        a[k] = rng.uniform(-amp, amp);
        b[k] = rng.uniform(-amp, amp);
    }

    std::vector<Vec2> v;
    v.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        const double t = kTwoPi * static_cast<double>(i) / static_cast<double>(n_vertices);
        double rad = 1.0;
        for (int k = kMinOrder; k <= kMaxOrder; ++k) {
            rad += a[k] * std::cos(k * t) + b[k] * std::sin(k * t);
        }
        rad *= base_radius;
        v.emplace_back(rad * std::cos(t), rad * std::sin(t));
    }
    return PolyObject(std::move(v), name);
}

PolyObject make_coin(double r, double thickness_ratio, std::size_t n_vertices,
                     const std::string& name) {
    require_positive(r, "coin radius");
    if (!(thickness_ratio > 0.0 && thickness_ratio <= 1.0)) {
        throw ValidationError("coin thickness ratio must be in (0, 1], got " +
                              std::to_string(thickness_ratio));
    }
    if (n_vertices < 3) throw ValidationError("coin needs at least 3 vertices");
    std::vector<Vec2> v;
    v.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        const double t = kTwoPi * static_cast<double>(i) / static_cast<double>(n_vertices);
        v.emplace_back(r * std::cos(t), r * thickness_ratio * std::sin(t));
    }
    return PolyObject(std::move(v), name);
}

PolyObject make_l_bracket(double leg_x, double leg_y, double thickness, const std::string& name) {
    require_positive(leg_x, "bracket leg_x");
    require_positive(leg_y, "bracket leg_y");
    require_positive(thickness, "bracket thickness");
    if (thickness >= leg_x || thickness >= leg_y) {
        throw ValidationError("bracket thickness must be smaller than both legs");
    }
    // CCW hexagon tracing the L outline, corner at the origin.
    return PolyObject({{0.0, 0.0},
                       {leg_x, 0.0},
                       {leg_x, thickness},
                       {thickness, thickness},
                       {thickness, leg_y},
                       {0.0, leg_y}},
                      name);
}

PolyObject make_shape(const ShapeSpec& spec) {
    const std::string name = spec.name.empty() ? spec.kind : spec.name;
    if (spec.kind == "circle") return make_circle(spec.a, spec.n_vertices, name);
    if (spec.kind == "rectangle") return make_rectangle(spec.a, spec.b, name);
    if (spec.kind == "blob") return make_blob(spec.a, spec.seed, spec.n_vertices, name);
    if (spec.kind == "coin") {
        const double ratio = spec.c > 0.0 ? spec.c : 0.25;
        return make_coin(spec.a, ratio, spec.n_vertices, name);
    }
    if (spec.kind == "l_bracket") return make_l_bracket(spec.a, spec.b, spec.c, name);
    throw ValidationError("unknown shape kind '" + spec.kind + "'");
}

}  // namespace whisker
