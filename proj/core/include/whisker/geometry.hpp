#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace whisker {

using Vec2 = Eigen::Vector2d;

// z-component of the 2D cross product a x b.
inline double cross2(const Vec2& a, const Vec2& b) {
    return a.x() * b.y() - a.y() * b.x();
}

// Rotate 90 degrees counter-clockwise: the derivative of a rotation,
// d/dθ R(θ)v = rot90(R(θ)v).
inline Vec2 rot90(const Vec2& v) {
    return Vec2(-v.y(), v.x());
}

// Rigid 2D pose: rotation then translation.
struct Pose2 {
    Vec2 translation{0.0, 0.0};
    double rotation = 0.0;  // radians, counter-clockwise

    Vec2 apply(const Vec2& p) const {
        const double c = std::cos(rotation), s = std::sin(rotation);
        return Vec2(c * p.x() - s * p.y() + translation.x(),
                    s * p.x() + c * p.y() + translation.y());
    }

    Vec2 apply_inverse(const Vec2& p) const {
        const double c = std::cos(rotation), s = std::sin(rotation);
        const Vec2 d = p - translation;
        return Vec2(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
    }
};

// Result of projecting a query point onto a polygon boundary.
struct SurfacePoint {
    Vec2 point{0.0, 0.0};    // closest point on the boundary
    Vec2 normal{0.0, 0.0};   // outward unit normal at that point
    double distance = 0.0;   // unsigned distance from query to boundary
    std::size_t edge = 0;    // index of the edge holding the closest point
};

// Closed simple polygon with counter-clockwise winding. The one scene
// primitive: every object is a polygon (curved shapes are polygonized at
// construction).
class PolyObject {
public:
    PolyObject() = default;

    // Validates: >= 3 vertices, no consecutive duplicates, CCW winding,
    // no self-intersection. Throws ValidationError otherwise.
    explicit PolyObject(std::vector<Vec2> vertices, std::string name = "");

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::string& name() const { return name_; }
    std::size_t size() const { return vertices_.size(); }

    Vec2 vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }

    // True if p is strictly inside (boundary counts as inside).
    bool contains(const Vec2& p) const;

    // Closest boundary point, outward normal, and distance.
    SurfacePoint closest_surface_point(const Vec2& p) const;

    // Outward unit normal of edge e (from vertex e to vertex e+1).
    Vec2 edge_normal(std::size_t e) const;

    // Outward unit direction at vertex i: the normalized sum of the two
    // adjacent edge normals (angular bisector of the exterior wedge).
    Vec2 vertex_normal(std::size_t i) const;

    // Negative inside, positive outside, zero on the boundary.
    double signed_distance(const Vec2& p) const;

    // Axis-aligned bounds.
    Vec2 min_corner() const;
    Vec2 max_corner() const;

    // New polygon with every vertex mapped through the pose.
    PolyObject transformed(const Pose2& pose) const;

    // True if segment [a,b] crosses or touches the boundary, or lies inside.
    bool intersects_segment(const Vec2& a, const Vec2& b) const;

private:
    struct SkipValidation {};
    PolyObject(SkipValidation, std::vector<Vec2> vertices, std::string name)
        : vertices_(std::move(vertices)), name_(std::move(name)) {}

    std::vector<Vec2> vertices_;
    std::string name_;
};

// Proper or touching intersection of segments [a1,a2] and [b1,b2].
bool segments_intersect(const Vec2& a1, const Vec2& a2, const Vec2& b1, const Vec2& b2);

// Closest point on segment [a,b] to p.
Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b);

// Twice the signed area; positive for CCW winding.
double polygon_signed_area2(const std::vector<Vec2>& vertices);

}  // namespace whisker
