#include "whisker/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "whisker/errors.hpp"

namespace whisker {

double polygon_signed_area2(const std::vector<Vec2>& vertices) {
    double a2 = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = vertices[i];
        const Vec2& q = vertices[(i + 1) % n];
        a2 += cross2(p, q);
    }
    return a2;
}

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return a;
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + t * ab;
}

namespace {

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = cross2(b - a, c - a);
    if (v > 0.0) return 1;
    if (v < 0.0) return -1;
    return 0;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

}  // namespace

bool segments_intersect(const Vec2& a1, const Vec2& a2, const Vec2& b1, const Vec2& b2) {
    const int o1 = orientation(a1, a2, b1);
    const int o2 = orientation(a1, a2, b2);
    const int o3 = orientation(b1, b2, a1);
    const int o4 = orientation(b1, b2, a2);

    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a1, a2, b1)) return true;
    if (o2 == 0 && on_segment(a1, a2, b2)) return true;
    if (o3 == 0 && on_segment(b1, b2, a1)) return true;
    if (o4 == 0 && on_segment(b1, b2, a2)) return true;
    return false;
}

PolyObject::PolyObject(std::vector<Vec2> vertices, std::string name)
    : vertices_(std::move(vertices)), name_(std::move(name)) {
    const std::size_t n = vertices_.size();
    if (n < 3) {
        throw ValidationError("polygon '" + name_ + "' needs at least 3 vertices, got " +
                              std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 d = vertices_[(i + 1) % n] - vertices_[i];
        if (d.norm() < 1e-12) {
            throw ValidationError("polygon '" + name_ + "' has duplicate consecutive vertices at index " +
                                  std::to_string(i));
        }
    }
    if (polygon_signed_area2(vertices_) <= 0.0) {
        throw ValidationError("polygon '" + name_ + "' must wind counter-clockwise");
    }
    // Self-intersection: check every non-adjacent edge pair. Scenes are small
    // (tens of vertices), so O(n^2) is fine.
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a1 = vertices_[i];
        const Vec2& a2 = vertices_[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            // Skip adjacent edges (they legitimately share a vertex).
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            const Vec2& b1 = vertices_[j];
            const Vec2& b2 = vertices_[(j + 1) % n];
            if (segments_intersect(a1, a2, b1, b2)) {
                throw ValidationError("polygon '" + name_ + "' self-intersects (edges " +
                                      std::to_string(i) + " and " + std::to_string(j) + ")");
            }
        }
    }
}

bool PolyObject::contains(const Vec2& p) const {
    // Crossing-number test. Points exactly on the boundary are resolved by
    // callers via distance queries, not by this parity test.
    const std::size_t n = vertices_.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& vi = vertices_[i];
        const Vec2& vj = vertices_[j];
        if ((vi.y() > p.y()) != (vj.y() > p.y())) {
            const double x_cross = vj.x() + (p.y() - vj.y()) / (vi.y() - vj.y()) * (vi.x() - vj.x());
            if (p.x() < x_cross) inside = !inside;
        }
    }
    return inside;
}

SurfacePoint PolyObject::closest_surface_point(const Vec2& p) const {
    const std::size_t n = vertices_.size();
    SurfacePoint best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = vertices_[i];
        const Vec2& b = vertices_[(i + 1) % n];
        const Vec2 q = closest_point_on_segment(p, a, b);
        const double d2 = (q - p).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best.point = q;
            best.edge = i;
        }
    }
    best.distance = std::sqrt(best_d2);

    // Outward normal. Away from the boundary the direction query->closest
    // (or its negation, inside) is the most robust normal, including at
    // vertices. Near the boundary fall back to the edge normal.
    if (best.distance > 1e-9) {
        Vec2 dir = (p - best.point) / best.distance;
        if (contains(p) && (best.point - p).norm() > 1e-12) dir = -dir;
        best.normal = dir;
    } else {
        best.normal = edge_normal(best.edge);
    }
    return best;
}

Vec2 PolyObject::edge_normal(std::size_t e) const {
    const Vec2& a = vertices_[e % vertices_.size()];
    const Vec2& b = vertices_[(e + 1) % vertices_.size()];
    // CCW winding puts the interior on the left of a->b, so the outward
    // normal is the rightward perpendicular.
    return Vec2((b - a).y(), -(b - a).x()).normalized();
}

Vec2 PolyObject::vertex_normal(std::size_t i) const {
    const std::size_t n = vertices_.size();
    const Vec2 sum = edge_normal((i + n - 1) % n) + edge_normal(i);
    const double len = sum.norm();
    // Adjacent edges folding straight back on themselves would cancel, but
    // validation forbids that; guard anyway.
    if (len < 1e-9) return edge_normal(i);
    return sum / len;
}

double PolyObject::signed_distance(const Vec2& p) const {
    // Fused distance + parity pass; this runs in the solver's inner loop.
    const std::size_t n = vertices_.size();
    double best_d2 = std::numeric_limits<double>::infinity();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& vi = vertices_[i];
        const Vec2& vj = vertices_[j];
        const Vec2 q = closest_point_on_segment(p, vj, vi);
        best_d2 = std::min(best_d2, (q - p).squaredNorm());
        if ((vi.y() > p.y()) != (vj.y() > p.y())) {
            const double x_cross = vj.x() + (p.y() - vj.y()) / (vi.y() - vj.y()) * (vi.x() - vj.x());
            if (p.x() < x_cross) inside = !inside;
        }
    }
    const double d = std::sqrt(best_d2);
    return inside ? -d : d;
}

Vec2 PolyObject::min_corner() const {
    Vec2 m = vertices_.front();
    for (const Vec2& v : vertices_) m = m.cwiseMin(v);
    return m;
}

Vec2 PolyObject::max_corner() const {
    Vec2 m = vertices_.front();
    for (const Vec2& v : vertices_) m = m.cwiseMax(v);
    return m;
}

PolyObject PolyObject::transformed(const Pose2& pose) const {
    std::vector<Vec2> out;
    out.reserve(vertices_.size());
    for (const Vec2& v : vertices_) out.push_back(pose.apply(v));
    // Rigid transforms preserve simplicity and winding; skip revalidation
    // (this runs once per sweep step).
    return PolyObject(SkipValidation{}, std::move(out), name_);
}

bool PolyObject::intersects_segment(const Vec2& a, const Vec2& b) const {
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (segments_intersect(a, b, vertices_[i], vertices_[(i + 1) % n])) return true;
    }
    // No boundary crossing: the segment is entirely inside or entirely
    // outside, so one endpoint decides.
    return contains(a);
}

}  // namespace whisker
