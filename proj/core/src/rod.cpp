#include "whisker/rod.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "whisker/errors.hpp"

namespace whisker {

double nitinol_flexural_rigidity(double diameter_mm) {
    // Superelastic-plateau modulus 60 GPa = 60e3 N/mm²; I = pi d^4 / 64.
    const double kModulusNPerMm2 = 60.0e3;
    const double d2 = diameter_mm * diameter_mm;
    const double second_moment = M_PI * d2 * d2 / 64.0;
    return kModulusNPerMm2 * second_moment;
}

void WhiskerSpec::validate() const {
    if (!(total_length > 0.0)) throw ValidationError("whisker total_length must be positive");
    if (!(diameter > 0.0)) throw ValidationError("whisker diameter must be positive");
    if (n_segments < 8) {
        throw ValidationError("whisker n_segments must be >= 8, got " + std::to_string(n_segments));
    }
    if (!(flexural_rigidity > 0.0)) throw ValidationError("whisker flexural_rigidity must be positive");
    if (distal_arc_length < 0.0 || distal_arc_length > total_length) {
        throw ValidationError("whisker distal_arc_length must lie in [0, total_length]");
    }
    if (distal_arc_length > 0.0 && !(distal_arc_radius > 0.0)) {
        throw ValidationError("whisker distal_arc_radius must be positive when an arc is present");
    }
}

namespace {

// Rest tangent angle per segment, midpoint rule: straight proximal section,
// then constant negative curvature 1/arc_radius. Midpoint sampling makes the
// discrete curvature (psi[i+1]-psi[i])/h exactly 1/R between segments fully
// inside the arc.
std::vector<double> rest_segment_angles(const WhiskerSpec& spec) {
    const int n = spec.n_segments;
    const double h = spec.segment_length();
    const double straight_len = spec.total_length - spec.distal_arc_length;
    std::vector<double> phi(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double mid = (i + 0.5) * h;
        if (mid > straight_len) phi[i] = -(mid - straight_len) / spec.distal_arc_radius;
    }
    return phi;
}

struct Kinematics {
    std::vector<double> psi;      // absolute segment angles
    std::vector<Vec2> nodes;      // n+1 node positions, base frame
    std::vector<Vec2> tangents;   // unit segment directions
};

void forward_kinematics(const WhiskerSpec& spec, const std::vector<double>& phi,
                        const Eigen::VectorXd& q, Kinematics& kin) {
    const int n = spec.n_segments;
    const double h = spec.segment_length();
    kin.psi.resize(n);
    kin.nodes.resize(n + 1);
    kin.tangents.resize(n);
    kin.nodes[0] = Vec2(0.0, 0.0);
    double accum = 0.0;
    for (int i = 0; i < n; ++i) {
        accum += q[i];
        kin.psi[i] = phi[i] + accum;
        kin.tangents[i] = Vec2(std::cos(kin.psi[i]), std::sin(kin.psi[i]));
        kin.nodes[i + 1] = kin.nodes[i] + h * kin.tangents[i];
    }
}

// Material point at arc length s; optionally reports the containing segment.
// The position extrapolates along the end segments for s outside [0, L], so
// solvers that treat s as an unknown see a smooth function everywhere.
Vec2 material_point(const WhiskerSpec& spec, const Kinematics& kin, double s, int* segment_out) {
    const double h = spec.segment_length();
    const int n = spec.n_segments;
    int m = static_cast<int>(std::floor(s / h));
    m = std::clamp(m, 0, n - 1);
    if (segment_out) *segment_out = m;
    return kin.nodes[m] + (s - m * h) * kin.tangents[m];
}

// Damped Newton with backtracking line search on the merit 0.5*||R||².
// residual_fn(x) returns the residual and refreshes whatever auxiliary state
// the caller captured; jacobian_fn(x) may rely on that state matching the
// most recent residual evaluation, which the driver guarantees is x itself.
// Returns the number of accepted iterations.
template <typename ResidualFn, typename JacobianFn>
int damped_newton(Eigen::VectorXd& x, const ResidualFn& residual_fn,
                  const JacobianFn& jacobian_fn, const SolveOptions& opts,
                  const std::string& label) {
    if (opts.merit_history) opts.merit_history->clear();
    Eigen::VectorXd R = residual_fn(x);
    double merit = 0.5 * R.squaredNorm();
    if (opts.merit_history) opts.merit_history->push_back(merit);
    for (int it = 0;; ++it) {
        if (R.cwiseAbs().maxCoeff() < opts.tolerance) return it;
        if (it >= opts.max_iterations) {
            throw SolverError(label + ": no convergence after " +
                                  std::to_string(opts.max_iterations) + " iterations",
                              R.norm());
        }
        const Eigen::VectorXd step = jacobian_fn(x).partialPivLu().solve(-R);
        if (!step.allFinite()) {
            throw SolverError(label + ": singular Newton system", std::sqrt(2.0 * merit));
        }
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Eigen::VectorXd x_trial = x + alpha * step;
            const Eigen::VectorXd R_trial = residual_fn(x_trial);
            const double merit_trial = 0.5 * R_trial.squaredNorm();
            if (merit_trial <= merit * (1.0 - 1e-4 * alpha)) {
                x = x_trial;
                R = R_trial;
                merit = merit_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            throw SolverError(label + ": line search stalled", std::sqrt(2.0 * merit));
        }
        if (opts.merit_history) opts.merit_history->push_back(merit);
    }
}

// ---------------------------------------------------------------------------
// Obstacle contact.
//
// The closest feature pair between a segmented rod and a polygon is always
// flat-against-pointy, which leaves exactly three pairings:
//
//   node_on_edge       a rod kink presses on a polygon edge
//   flush_on_edge      a rod segment lies along a polygon edge; the
//                      constraint is tangency and the location of the force
//                      resultant along the segment is an extra unknown
//   vertex_on_segment  a polygon corner presses into a rod segment
//
// Newton needs a contact frame that is smooth in the joint angles. Within
// one pairing it is (an edge normal is constant, the rod perpendicular
// rotates smoothly), but the pairing itself switches discontinuously as the
// rod slides. The solver therefore freezes a pairing, drives that smooth
// system to full tolerance, then re-validates: if the converged state names
// a different closest pair, or shows penetration away from the frozen
// contact, it switches and re-solves. Flush contact needs its dedicated
// pairing because near tangency the distance argmin wanders along the
// segment and a point-contact model chatters between attribution choices
// instead of converging.
//
// The model carries one scalar normal force. Where the discretization makes
// two stretches of rod touch at once (a kinked rod against a faceted
// boundary), the proximal contact carries the force and the other stretch is
// allowed a seam-scale overlap.
// ---------------------------------------------------------------------------

constexpr double kAlignTol = 0.05;        // |n̂·t̂| below this counts as near-tangent
constexpr double kFlushForceMin = 1e-4;   // N; flush needs force to be well-posed
constexpr double kPenetrationTol = 1e-6;  // mm of stray penetration tolerated
constexpr double kExtentTol = 1e-9;       // slack when checking feature extents
constexpr double kVertexSnapTol = 1e-7;   // closest-point-at-vertex detection
constexpr double kVertexCaptureTol = 0.05;  // mm; corner-contact capture radius
constexpr double kFlushGapTol = 1e-5;     // mm; node-to-surface slack for flush
// Tolerated secondary-contact overlap. A straight-segment chain pressed
// along a curved boundary overlaps between nodes by the sagitta scale
// h²/8 · (κ_rod + κ_object); at h ≈ 2 mm with rest + elastic curvature and
// desk-scale feature radii that reaches ~0.12 mm. Genuine second contacts
// press several tenths of a millimetre within a step or two, so 0.25 mm
// separates the two populations with margin on both sides. Revisit if the
// default discretization coarsens.
constexpr double kSeamOverlapMax = 0.25;

struct ActiveFeature {
    enum class Kind { node_on_edge, flush_on_edge, vertex_on_segment };

    Kind kind = Kind::node_on_edge;
    int node = 0;            // node_on_edge: rod node index (n = tip)
    int segment = 0;         // flush_on_edge / vertex_on_segment: rod segment
    std::size_t edge = 0;    // polygon edge for the *_on_edge pairings
    std::size_t vertex = 0;  // polygon vertex for vertex_on_segment
    double sigma = 1.0;      // vertex case: contact normal = sigma * rot90(tangent)
};

bool same_feature(const ActiveFeature& a, const ActiveFeature& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ActiveFeature::Kind::node_on_edge:
            return a.node == b.node && a.edge == b.edge;
        case ActiveFeature::Kind::flush_on_edge:
            return a.segment == b.segment && a.edge == b.edge;
        case ActiveFeature::Kind::vertex_on_segment:
            return a.segment == b.segment && a.vertex == b.vertex;
    }
    return false;
}

double gap_at(const WhiskerSpec& spec, const Kinematics& kin, const PolyObject& obj, double s) {
    return obj.signed_distance(material_point(spec, kin, s, nullptr));
}

struct GapSearch {
    double s = 0.0;           // arc length of the preferred nearest approach
    double gap = 0.0;         // signed distance there
    double gap_global = 0.0;  // deepest signed distance seen anywhere
};

// Nearest approach of the rod to the polygon: half-segment sampling with
// ternary refinement. Among penetrating regions the most proximal run wins —
// a rod that crosses the boundary in two places is stopped by the crossing
// nearest its base, whatever happens further out.
GapSearch search_min_gap(const WhiskerSpec& spec, const Kinematics& kin, const PolyObject& obj) {
    const int n = spec.n_segments;
    const double half = spec.segment_length() / 2.0;
    const double L = spec.total_length;
    const int M = 2 * n;

    std::vector<double> d(M + 1);
    for (int j = 0; j <= M; ++j) d[j] = gap_at(spec, kin, obj, std::min(j * half, L));

    auto refine = [&](int idx) {
        double lo = std::max(0.0, (idx - 1) * half);
        double hi = std::min(L, (idx + 1) * half);
        for (int it = 0; it < 48; ++it) {
            const double s1 = lo + (hi - lo) / 3.0;
            const double s2 = hi - (hi - lo) / 3.0;
            if (gap_at(spec, kin, obj, s1) <= gap_at(spec, kin, obj, s2)) hi = s2;
            else lo = s1;
        }
        return std::clamp((lo + hi) / 2.0, 0.0, L);
    };

    int gmin = 0;
    for (int j = 1; j <= M; ++j) {
        if (d[j] < d[gmin]) gmin = j;
    }

    GapSearch out;
    out.s = refine(gmin);
    out.gap = gap_at(spec, kin, obj, out.s);
    out.gap_global = std::min(out.gap, d[gmin]);

    int first_neg = -1;
    for (int j = 0; j <= M; ++j) {
        if (d[j] < -kPenetrationTol) {
            first_neg = j;
            break;
        }
    }
    if (first_neg >= 0 && std::abs(first_neg - gmin) > 1) {
        int run_min = first_neg;
        for (int j = first_neg; j <= M && d[j] < -kPenetrationTol; ++j) {
            if (d[j] < d[run_min]) run_min = j;
        }
        const double s_run = refine(run_min);
        const double gap_run = gap_at(spec, kin, obj, s_run);
        out.gap_global = std::min(out.gap_global, gap_run);
        if (gap_run < 0.0 && (out.gap >= 0.0 || s_run < out.s)) {
            out.s = s_run;
            out.gap = gap_run;
        }
    }
    return out;
}

// A corner can statically support a nearly tangent rod segment only if the
// segment's line through the corner leaves both adjacent polygon vertices on
// the material side (the rod direction falls inside the corner's wedge).
bool corner_supports(const PolyObject& obj, std::size_t vidx, const Vec2& tangent) {
    const std::size_t nv = obj.size();
    const Vec2 v = obj.vertex(vidx);
    const Vec2 prev = obj.vertex((vidx + nv - 1) % nv);
    const Vec2 next = obj.vertex(vidx + 1);
    const double sigma = (rot90(tangent).dot(obj.vertex_normal(vidx)) >= 0.0) ? 1.0 : -1.0;
    const Vec2 nu = sigma * rot90(tangent);
    return nu.dot(prev - v) <= kExtentTol && nu.dot(next - v) <= kExtentTol;
}

// Name the feature pairing for a contact near arc length s_star. The force
// magnitude decides how a near-tangent edge resolves: the flush pairing is
// only well-posed under real force (the resultant-location column of its
// Jacobian scales with f), so a graze resolves to the corner whose wedge
// brackets the rod direction instead.
ActiveFeature classify(const WhiskerSpec& spec, const Kinematics& kin, const PolyObject& obj,
                       double s_star, double f_now) {
    const int n = spec.n_segments;
    const double h = spec.segment_length();
    int m0 = 0;
    const Vec2 X = material_point(spec, kin, s_star, &m0);
    const SurfacePoint sp = obj.closest_surface_point(X);
    const std::size_t nv = obj.size();

    auto vertex_feature = [&](std::size_t vidx) {
        const Vec2 v = obj.vertex(vidx);
        int m = m0;
        const double w = (v - kin.nodes[m]).dot(kin.tangents[m]);
        if (w < 0.0 && m > 0) --m;
        else if (w > h && m < n - 1) ++m;
        ActiveFeature feat;
        feat.kind = ActiveFeature::Kind::vertex_on_segment;
        feat.segment = m;
        feat.vertex = vidx;
        feat.sigma = (rot90(kin.tangents[m]).dot(obj.vertex_normal(vidx)) >= 0.0) ? 1.0 : -1.0;
        return feat;
    };

    if ((sp.point - obj.vertex(sp.edge)).norm() < kVertexSnapTol) {
        return vertex_feature(sp.edge);
    }
    if ((sp.point - obj.vertex(sp.edge + 1)).norm() < kVertexSnapTol) {
        return vertex_feature((sp.edge + 1) % nv);
    }

    const Vec2 nrm = obj.edge_normal(sp.edge);
    const int c = static_cast<int>(std::clamp<long long>(std::llround(s_star / h), 0, n));
    double best_align = std::numeric_limits<double>::infinity();
    for (int m : {c - 1, c, m0}) {
        if (m < 0 || m >= n) continue;
        best_align = std::min(best_align, std::abs(nrm.dot(kin.tangents[m])));
    }
    // Corner capture: a foot that lands near an end of the edge, with the rod
    // direction inside that corner's wedge, is corner contact regardless of
    // force or alignment — a rod hugging a convex boundary from its concave
    // side rests on the corners, never flush on the facets.
    {
        double best_d = kVertexCaptureTol;
        std::size_t best_v = nv;
        for (const std::size_t end : {sp.edge, (sp.edge + 1) % nv}) {
            const double d = (sp.point - obj.vertex(end)).norm();
            if (d < best_d && corner_supports(obj, end, kin.tangents[m0])) {
                best_d = d;
                best_v = end;
            }
        }
        if (best_v != nv) return vertex_feature(best_v);
    }
    ActiveFeature feat;
    if (best_align < kAlignTol) {
        if (f_now > kFlushForceMin) {
            int mseg = m0;
            for (int m : {c - 1, c}) {
                if (m < 0 || m >= n) continue;
                if (std::abs(nrm.dot(kin.tangents[m])) <= best_align) mseg = m;
            }
            // Flush also needs the segment to actually lie on the surface:
            // both end nodes touching or pressed in. One node in clear air
            // means point contact at the other, however parallel the segment
            // sits — and the flush system then has no equilibrium to find.
            const double g0 = obj.signed_distance(kin.nodes[mseg]);
            const double g1 = obj.signed_distance(kin.nodes[mseg + 1]);
            if (std::max(g0, g1) < kFlushGapTol) {
                feat.kind = ActiveFeature::Kind::flush_on_edge;
                feat.edge = sp.edge;
                feat.segment = mseg;
                return feat;
            }
        } else {
            // Near-tangent graze: rest the rod on whichever end corner of
            // this edge can hold it, or the nearer one when that is moot and
            // one is close by. Far from both corners, treat as node contact.
            const std::size_t cands[2] = {sp.edge, (sp.edge + 1) % nv};
            const bool ok0 = corner_supports(obj, cands[0], kin.tangents[m0]);
            const bool ok1 = corner_supports(obj, cands[1], kin.tangents[m0]);
            if (ok0 != ok1) return vertex_feature(ok0 ? cands[0] : cands[1]);
            const double d0 = (sp.point - obj.vertex(cands[0])).norm();
            const double d1 = (sp.point - obj.vertex(cands[1])).norm();
            if (std::min(d0, d1) < kVertexCaptureTol) {
                return vertex_feature(d0 <= d1 ? cands[0] : cands[1]);
            }
        }
    }
    feat.kind = ActiveFeature::Kind::node_on_edge;
    feat.node = c;
    feat.edge = sp.edge;
    return feat;
}

RodState make_state(const WhiskerSpec& spec, const Kinematics& kin, const Eigen::VectorXd& q,
                    const Vec2& contact_force) {
    RodState st;
    st.joint_angles.assign(q.data(), q.data() + q.size());
    st.node_positions = kin.nodes;
    st.base_moment = Vec2(spec.joint_stiffness() * q[0],
                          kTransverseGaugeLeverMm * contact_force.y());
    return st;
}

Pose2 inverse_pose(const Pose2& pose) {
    Pose2 inv;
    inv.rotation = -pose.rotation;
    inv.translation = pose.apply_inverse(Vec2(0.0, 0.0));
    return inv;
}

}  // namespace

RodState build_rest_shape(const WhiskerSpec& spec) {
    spec.validate();
    const std::vector<double> phi = rest_segment_angles(spec);
    Kinematics kin;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(spec.n_segments);
    forward_kinematics(spec, phi, q, kin);
    RodState st;
    st.joint_angles.assign(spec.n_segments, 0.0);
    st.node_positions = kin.nodes;
    st.base_moment = Vec2(0.0, 0.0);
    return st;
}

EquilibriumResult solve_equilibrium(const WhiskerSpec& spec, const Pose2& base_pose,
                                    const PolyObject* object_world,
                                    const EquilibriumResult* warm_start,
                                    const SolveOptions& opts) {
    spec.validate();
    const int n = spec.n_segments;
    const double h = spec.segment_length();
    const double L = spec.total_length;
    const double k = spec.joint_stiffness();
    const std::vector<double> phi = rest_segment_angles(spec);

    EquilibriumResult free_result;
    free_result.state = build_rest_shape(spec);
    if (object_world == nullptr) return free_result;
    const PolyObject obj = object_world->transformed(inverse_pose(base_pose));

    // Starting point: warm contact if the caller has one, else the rest
    // shape. With no prior contact, engagement happens only if the rest rod
    // reaches the object.
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    double f = 0.0;
    bool engaged = false;
    if (warm_start != nullptr && warm_start->contact.has_value() &&
        static_cast<int>(warm_start->state.joint_angles.size()) == n) {
        for (int i = 0; i < n; ++i) q[i] = warm_start->state.joint_angles[i];
        f = warm_start->contact->force_magnitude;
        engaged = true;
    }

    const bool warm_engaged = engaged;
    int total_iterations = 0;

    const auto attempt_equilibrium = [&]() -> EquilibriumResult {
        Kinematics kin;
        forward_kinematics(spec, phi, q, kin);
        const GapSearch sr = search_min_gap(spec, kin, obj);
        if (!engaged && sr.gap_global > 0.0) return free_result;

        ActiveFeature active = classify(spec, kin, obj, sr.s, f);
        double s_est = sr.s;

        std::vector<ActiveFeature> visited;
        const auto visited_before = [&](const ActiveFeature& feat) {
            for (const ActiveFeature& seen : visited) {
                if (same_feature(feat, seen)) return true;
            }
            return false;
        };
        bool seam_locked = false;
        const int kMaxRounds = 40;
        for (int round = 0; round < kMaxRounds; ++round) {
            if (!visited_before(active)) visited.push_back(active);
            const bool flush = (active.kind == ActiveFeature::Kind::flush_on_edge);
            const int dim = flush ? n + 2 : n + 1;
            Eigen::VectorXd x(dim);
            x.head(n) = q;
            if (flush) {
                x[n] = std::clamp(s_est, active.segment * h, (active.segment + 1) * h);
                x[n + 1] = f;
            } else {
                x[n] = f;
            }

            // Frozen-pairing residual. Moment rows: spring moment against the
            // torque of the contact force about each loaded joint; final rows:
            // the pairing's geometric constraints.
            auto residual = [&](const Eigen::VectorXd& xv) -> Eigen::VectorXd {
                forward_kinematics(spec, phi, Eigen::VectorXd(xv.head(n)), kin);
                Eigen::VectorXd R(xv.size());
                switch (active.kind) {
                    case ActiveFeature::Kind::node_on_edge: {
                        const int c = active.node;
                        const Vec2 nrm = obj.edge_normal(active.edge);
                        const Vec2 Pc = kin.nodes[c];
                        const double fv = xv[n];
                        for (int j = 0; j < n; ++j) {
                            const double tau = (j < c) ? cross2(Pc - kin.nodes[j], nrm) : 0.0;
                            R[j] = k * xv[j] - fv * tau;
                        }
                        R[n] = nrm.dot(Pc - obj.vertex(active.edge));
                        break;
                    }
                    case ActiveFeature::Kind::flush_on_edge: {
                        const int m = active.segment;
                        const Vec2 nrm = obj.edge_normal(active.edge);
                        const Vec2 t = kin.tangents[m];
                        const Vec2 X = kin.nodes[m] + (xv[n] - m * h) * t;
                        const double fv = xv[n + 1];
                        for (int j = 0; j < n; ++j) {
                            const double tau = (j <= m) ? cross2(X - kin.nodes[j], nrm) : 0.0;
                            R[j] = k * xv[j] - fv * tau;
                        }
                        R[n] = nrm.dot(X - obj.vertex(active.edge));
                        R[n + 1] = nrm.dot(t);
                        break;
                    }
                    case ActiveFeature::Kind::vertex_on_segment: {
                        const int m = active.segment;
                        const Vec2 v = obj.vertex(active.vertex);
                        const Vec2 nrm = active.sigma * rot90(kin.tangents[m]);
                        const double fv = xv[n];
                        // Anchoring the torque at the polygon vertex is exact:
                        // the true contact point (the foot of the vertex on the
                        // segment) differs from it along the normal only.
                        for (int j = 0; j < n; ++j) {
                            const double tau = (j <= m) ? cross2(v - kin.nodes[j], nrm) : 0.0;
                            R[j] = k * xv[j] - fv * tau;
                        }
                        R[n] = nrm.dot(kin.nodes[m] - v);
                        break;
                    }
                }
                return R;
            };

            // Exact Jacobian of that residual. Building blocks, all for i within
            // the loaded range: d node_j / d q_i = rot90(node_j − node_i),
            // d tangent_m / d q_i = rot90(tangent_m), and
            // cross(rot90(a), b) = −a·b.
            auto jacobian = [&](const Eigen::VectorXd& xv) -> Eigen::MatrixXd {
                Eigen::MatrixXd J = Eigen::MatrixXd::Zero(xv.size(), xv.size());
                switch (active.kind) {
                    case ActiveFeature::Kind::node_on_edge: {
                        const int c = active.node;
                        const Vec2 nrm = obj.edge_normal(active.edge);
                        const Vec2 Pc = kin.nodes[c];
                        const double fv = xv[n];
                        for (int j = 0; j < n; ++j) {
                            J(j, j) = k;
                            if (j >= c) continue;
                            J(j, n) = -cross2(Pc - kin.nodes[j], nrm);
                            for (int i = 0; i < n; ++i) {
                                double dtau = 0.0;
                                if (i < c) dtau -= (Pc - kin.nodes[i]).dot(nrm);
                                if (i < j) dtau += Vec2(kin.nodes[j] - kin.nodes[i]).dot(nrm);
                                J(j, i) -= fv * dtau;
                            }
                        }
                        for (int i = 0; i < c && i < n; ++i) {
                            J(n, i) = cross2(Pc - kin.nodes[i], nrm);
                        }
                        break;
                    }
                    case ActiveFeature::Kind::flush_on_edge: {
                        const int m = active.segment;
                        const Vec2 nrm = obj.edge_normal(active.edge);
                        const Vec2 t = kin.tangents[m];
                        const Vec2 X = kin.nodes[m] + (xv[n] - m * h) * t;
                        const double fv = xv[n + 1];
                        const double ct = cross2(t, nrm);
                        for (int j = 0; j < n; ++j) {
                            J(j, j) = k;
                            if (j > m) continue;
                            J(j, n) = -fv * ct;
                            J(j, n + 1) = -cross2(X - kin.nodes[j], nrm);
                            for (int i = 0; i < n; ++i) {
                                double dtau = 0.0;
                                if (i <= m) dtau -= (X - kin.nodes[i]).dot(nrm);
                                if (i < j) dtau += Vec2(kin.nodes[j] - kin.nodes[i]).dot(nrm);
                                J(j, i) -= fv * dtau;
                            }
                        }
                        for (int i = 0; i <= m && i < n; ++i) {
                            J(n, i) = cross2(X - kin.nodes[i], nrm);
                            J(n + 1, i) = ct;
                        }
                        J(n, n) = nrm.dot(t);
                        break;
                    }
                    case ActiveFeature::Kind::vertex_on_segment: {
                        const int m = active.segment;
                        const Vec2 v = obj.vertex(active.vertex);
                        const Vec2 t = kin.tangents[m];
                        const Vec2 nrm = active.sigma * rot90(t);
                        const double fv = xv[n];
                        for (int j = 0; j < n; ++j) {
                            J(j, j) = k;
                            if (j > m) continue;
                            J(j, n) = -cross2(v - kin.nodes[j], nrm);
                            // d n̂ / d q_i = −sigma·t̂ for every i ≤ m.
                            const double dn = -active.sigma * cross2(v - kin.nodes[j], t);
                            for (int i = 0; i < n; ++i) {
                                double dtau = 0.0;
                                if (i <= m) dtau += dn;
                                if (i < j) dtau += Vec2(kin.nodes[j] - kin.nodes[i]).dot(nrm);
                                J(j, i) -= fv * dtau;
                            }
                        }
                        const Vec2 Pm = kin.nodes[m];
                        for (int i = 0; i <= m && i < n; ++i) {
                            double dgap = -active.sigma * t.dot(Pm - v);
                            if (i < m) dgap += cross2(Pm - kin.nodes[i], nrm);
                            J(n, i) = dgap;
                        }
                        break;
                    }
                }
                return J;
            };

            total_iterations += damped_newton(x, residual, jacobian, opts, "contact equilibrium");
            q = x.head(n);
            f = x[dim - 1];
            if (flush) s_est = x[n];
            forward_kinematics(spec, phi, q, kin);

            // The multiplier came out negative: the constraint would have to
            // pull on the rod, so the true state is separated and stress-free.
            if (f < 0.0) return free_result;

            auto switch_to = [&](double s_at) -> bool {
                const ActiveFeature prop = classify(spec, kin, obj, s_at, f);
                if (same_feature(prop, active)) return false;
                active = prop;
                s_est = s_at;
                return true;
            };

            // Re-validation 1: did the converged contact stay within the extent
            // of its frozen features?
            bool switched = false;
            if (active.kind == ActiveFeature::Kind::node_on_edge) {
                const Vec2 e1 = obj.vertex(active.edge);
                const Vec2 e2 = obj.vertex(active.edge + 1);
                const Vec2 Pc = kin.nodes[active.node];
                const double u = (Pc - e1).dot(e2 - e1) / (e2 - e1).squaredNorm();
                if (u < -kExtentTol || u > 1.0 + kExtentTol) {
                    if (!switch_to(active.node * h)) {
                        throw SolverError("contact equilibrium: contact feature failed to settle",
                                          0.0);
                    }
                    switched = true;
                }
            } else if (active.kind == ActiveFeature::Kind::flush_on_edge) {
                const int m = active.segment;
                if (s_est < m * h - kExtentTol || s_est > (m + 1) * h + kExtentTol) {
                    // The resultant left the segment: the pressure distribution
                    // concentrates at the nearer kink.
                    ActiveFeature prop;
                    prop.kind = ActiveFeature::Kind::node_on_edge;
                    prop.node = (s_est < m * h) ? m : m + 1;
                    prop.edge = active.edge;
                    active = prop;
                    switched = true;
                } else {
                    const Vec2 e1 = obj.vertex(active.edge);
                    const Vec2 e2 = obj.vertex(active.edge + 1);
                    const Vec2 X = kin.nodes[m] + (s_est - m * h) * kin.tangents[m];
                    const double u = (X - e1).dot(e2 - e1) / (e2 - e1).squaredNorm();
                    if (u < -kExtentTol || u > 1.0 + kExtentTol) {
                        if (!switch_to(s_est)) {
                            throw SolverError(
                                "contact equilibrium: contact feature failed to settle", 0.0);
                        }
                        switched = true;
                    }
                }
            } else {
                const int m = active.segment;
                const Vec2 v = obj.vertex(active.vertex);
                const Vec2 t = kin.tangents[m];
                const double sigma_now =
                    (rot90(t).dot(obj.vertex_normal(active.vertex)) >= 0.0) ? 1.0 : -1.0;
                const double w = (v - kin.nodes[m]).dot(t);
                if (sigma_now != active.sigma) {
                    // The segment rotated through the corner: the force sign the
                    // frozen frame assumed is stale.
                    active.sigma = sigma_now;
                    switched = true;
                } else if (w < -kExtentTol || w > h + kExtentTol) {
                    int m_new = m;
                    if (w < 0.0 && m > 0) m_new = m - 1;
                    else if (w > h && m < n - 1) m_new = m + 1;
                    if (m_new != m) {
                        active.segment = m_new;
                        active.sigma =
                            (rot90(kin.tangents[m_new]).dot(obj.vertex_normal(active.vertex)) >= 0.0)
                                ? 1.0
                                : -1.0;
                        s_est = m_new * h +
                                std::clamp((v - kin.nodes[m_new]).dot(kin.tangents[m_new]), 0.0, h);
                        switched = true;
                    } else {
                        // Slid past the base or the tip of the rod.
                        if (!switch_to(std::clamp(m * h + w, 0.0, L))) {
                            throw SolverError(
                                "contact equilibrium: contact feature failed to settle", 0.0);
                        }
                        switched = true;
                    }
                }
            }
            if (switched) continue;

            // Re-validation 2: no part of the rod may end up inside the object.
            // The frozen system only constrains its own pairing, so a different
            // stretch of the rod can dive through the boundary; if it did, that
            // stretch names the pairing to solve instead. Two stretches can press
            // at once — a kinked rod laid against a faceted boundary pins one
            // pairing while the neighbouring pairing still overlaps by a hair,
            // and each pairing's solve re-opens the other. A single contact force
            // cannot close both, so once every candidate has had its turn the
            // proximal contact wins and the seam-scale overlap at the other
            // stretch stands.
            const double s_now = [&]() {
                switch (active.kind) {
                    case ActiveFeature::Kind::node_on_edge:
                        return active.node * h;
                    case ActiveFeature::Kind::flush_on_edge:
                        return s_est;
                    default: {
                        const Vec2 v = obj.vertex(active.vertex);
                        const double w =
                            (v - kin.nodes[active.segment]).dot(kin.tangents[active.segment]);
                        return active.segment * h + std::clamp(w, 0.0, h);
                    }
                }
            }();
            const GapSearch sv = search_min_gap(spec, kin, obj);
            if (sv.gap_global < -kPenetrationTol) {
                const bool seam_scale = std::abs(sv.gap_global) <= kSeamOverlapMax;
                if (seam_locked) {
                    if (!(seam_scale && sv.s > s_now)) {
                        throw SolverError(
                            "contact equilibrium: penetration outside the active contact",
                            std::abs(sv.gap_global));
                    }
                    // Accepted: the locked proximal contact carries the force.
                } else {
                    const ActiveFeature prop = classify(spec, kin, obj, sv.s, f);
                    if (!same_feature(prop, active) && !visited_before(prop)) {
                        active = prop;
                        s_est = sv.s;
                        continue;
                    }
                    if (!seam_scale) {
                        throw SolverError(
                            "contact equilibrium: penetration outside the active contact",
                            std::abs(sv.gap_global));
                    }
                    seam_locked = true;
                    if (sv.s < s_now && !same_feature(prop, active)) {
                        active = prop;
                        s_est = sv.s;
                        continue;
                    }
                }
            }

            ContactPoint cp;
            switch (active.kind) {
                case ActiveFeature::Kind::node_on_edge:
                    cp.position = kin.nodes[active.node];
                    cp.arc_length = active.node * h;
                    cp.normal = obj.edge_normal(active.edge);
                    break;
                case ActiveFeature::Kind::flush_on_edge: {
                    const int m = active.segment;
                    cp.position = kin.nodes[m] + (s_est - m * h) * kin.tangents[m];
                    cp.arc_length = s_est;
                    cp.normal = obj.edge_normal(active.edge);
                    break;
                }
                case ActiveFeature::Kind::vertex_on_segment: {
                    const int m = active.segment;
                    const Vec2 v = obj.vertex(active.vertex);
                    const double w = std::clamp((v - kin.nodes[m]).dot(kin.tangents[m]), 0.0, h);
                    cp.position = kin.nodes[m] + w * kin.tangents[m];
                    cp.arc_length = m * h + w;
                    cp.normal = active.sigma * rot90(kin.tangents[m]);
                    break;
                }
            }
            cp.force_magnitude = f;

            EquilibriumResult out;
            out.state = make_state(spec, kin, q, f * cp.normal);
            out.contact = cp;
            out.iterations = total_iterations;
            return out;
        }
        throw SolverError("contact equilibrium: contact feature failed to settle", 0.0);
    };

    if (warm_engaged) {
        try {
            return attempt_equilibrium();
        } catch (const SolverError&) {
            // A warm continuation wedges when the sweep drags the rod past
            // the far side of the object and the wrap snaps open — the old
            // state has no nearby equilibrium. Restart from the rest shape
            // and let the geometry decide afresh between touch and release.
            q.setZero();
            f = 0.0;
            engaged = false;
        }
    }
    return attempt_equilibrium();
}

RodState solve_point_force(const WhiskerSpec& spec, double arc_length, const Vec2& force,
                           const SolveOptions& opts) {
    spec.validate();
    if (arc_length < 0.0 || arc_length > spec.total_length) {
        throw ValidationError("point-force arc_length outside [0, total_length]");
    }
    const int n = spec.n_segments;
    const double k = spec.joint_stiffness();
    const std::vector<double> phi = rest_segment_angles(spec);

    Kinematics kin;
    int m = 0;
    Vec2 Xf{0.0, 0.0};

    auto residual = [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
        forward_kinematics(spec, phi, qv, kin);
        Xf = material_point(spec, kin, arc_length, &m);
        Eigen::VectorXd R(n);
        for (int j = 0; j < n; ++j) {
            const double tau = (j <= m) ? cross2(Xf - kin.nodes[j], force) : 0.0;
            R[j] = k * qv[j] - tau;
        }
        return R;
    };
    auto jacobian = [&](const Eigen::VectorXd&) -> Eigen::MatrixXd {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (int j = 0; j < n; ++j) {
            J(j, j) = k;
            if (j > m) continue;
            for (int i = 0; i < n; ++i) {
                double dtau = 0.0;
                if (i <= m) dtau -= (Xf - kin.nodes[i]).dot(force);
                if (i < j) dtau += Vec2(kin.nodes[j] - kin.nodes[i]).dot(force);
                J(j, i) -= dtau;
            }
        }
        return J;
    };

    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    damped_newton(q, residual, jacobian, opts, "point-force equilibrium");
    return make_state(spec, kin, q, force);
}

PinnedResult solve_pinned(const WhiskerSpec& spec, const Vec2& pin_point,
                          const SolveOptions& opts) {
    spec.validate();
    const double L = spec.total_length;
    if (pin_point.norm() > L) {
        throw ValidationError("pin point lies beyond the whisker's reach");
    }
    if (pin_point.norm() < 1e-9) {
        throw ValidationError("pin point coincides with the whisker base");
    }
    const int n = spec.n_segments;
    const double k = spec.joint_stiffness();
    const std::vector<double> phi = rest_segment_angles(spec);

    // Unknowns: joint angles, groove arc length, normal force. The groove is
    // frictionless, so the constraint force has no tangential component and
    // the rod is free to slide (s is part of the solution).
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n + 2);  // [q; s; f]

    {
        Kinematics kin0;
        forward_kinematics(spec, phi, Eigen::VectorXd::Zero(n), kin0);
        double best_s = 0.0, best_d = std::numeric_limits<double>::infinity();
        const int M = 4 * n;
        for (int j = 0; j <= M; ++j) {
            const double s = L * static_cast<double>(j) / M;
            const double d = (material_point(spec, kin0, s, nullptr) - pin_point).norm();
            if (d < best_d) {
                best_d = d;
                best_s = s;
            }
        }
        x[n] = best_s;
    }

    Kinematics kin;
    int m = 0;
    Vec2 Xc{0.0, 0.0};
    Vec2 tangent{0.0, 0.0};
    Vec2 normal{0.0, 0.0};

    // Trial arc lengths may roam outside [0, L] during the solve (the
    // material point extrapolates smoothly); only the converged value has to
    // land on the rod.
    auto residual = [&](const Eigen::VectorXd& xv) -> Eigen::VectorXd {
        forward_kinematics(spec, phi, Eigen::VectorXd(xv.head(n)), kin);
        Xc = material_point(spec, kin, xv[n], &m);
        tangent = kin.tangents[m];
        normal = rot90(tangent);
        const double f = xv[n + 1];
        Eigen::VectorXd R(n + 2);
        for (int j = 0; j < n; ++j) {
            const double tau = (j <= m) ? cross2(Xc - kin.nodes[j], normal) : 0.0;
            R[j] = k * xv[j] - f * tau;
        }
        const Vec2 pin_err = Xc - pin_point;
        R[n] = pin_err.x();
        R[n + 1] = pin_err.y();
        return R;
    };

    auto jacobian = [&](const Eigen::VectorXd& xv) -> Eigen::MatrixXd {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n + 2, n + 2);
        const double f = xv[n + 1];
        for (int j = 0; j < n; ++j) {
            J(j, j) += k;
            const double tau_j = (j <= m) ? cross2(Xc - kin.nodes[j], normal) : 0.0;
            J(j, n + 1) = -tau_j;
            if (j > m) continue;
            // d tau_j/d q_i includes the rotating normal: d n̂/d q_i = −t̂ for
            // i ≤ m, and cross(v, −t̂) = −cross(v, t̂).
            for (int i = 0; i < n; ++i) {
                double dtau = 0.0;
                if (i <= m) {
                    dtau -= (Xc - kin.nodes[i]).dot(normal);
                    dtau -= cross2(Xc - kin.nodes[j], tangent);
                }
                if (i < j) dtau += Vec2(kin.nodes[j] - kin.nodes[i]).dot(normal);
                J(j, i) += -f * dtau;
            }
            // d tau_j/d s = cross(t̂, n̂) = 1 within the segment.
            J(j, n) = -f;
        }
        for (int i = 0; i <= m && i < n; ++i) {
            const Vec2 dX = rot90(Xc - kin.nodes[i]);
            J(n, i) = dX.x();
            J(n + 1, i) = dX.y();
        }
        J(n, n) = tangent.x();
        J(n + 1, n) = tangent.y();
        return J;
    };

    const int iterations = damped_newton(x, residual, jacobian, opts, "pinned equilibrium");
    if (x[n] < 0.0 || x[n] > L) {
        throw SolverError("pinned equilibrium: contact slid off the whisker (arc length " +
                              std::to_string(x[n]) + ")",
                          residual(x).norm());
    }

    const double f = x[n + 1];
    const Vec2 force_vec = f * normal;
    PinnedResult out;
    out.state = make_state(spec, kin, x.head(n), force_vec);
    out.contact.position = Xc;
    out.contact.arc_length = x[n];
    out.contact.normal = (f >= 0.0) ? normal : Vec2(-normal);
    out.contact.force_magnitude = std::abs(f);
    out.iterations = iterations;
    return out;
}

std::optional<ContactPoint> find_proximal_contact(const RodState& state,
                                                  const PolyObject& object_world,
                                                  const Pose2& base_pose) {
    const PolyObject obj = object_world.transformed(inverse_pose(base_pose));
    const auto& P = state.node_positions;
    if (P.size() < 2) return std::nullopt;
    const std::size_t n_seg = P.size() - 1;

    double best_arc = std::numeric_limits<double>::infinity();
    Vec2 best_point{0.0, 0.0};

    double arc_base = 0.0;
    for (std::size_t i = 0; i < n_seg; ++i) {
        const Vec2& a = P[i];
        const Vec2& b = P[i + 1];
        const Vec2 r = b - a;
        const double seg_len = r.norm();
        double t_min = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < obj.size(); ++e) {
            const Vec2 e1 = obj.vertex(e);
            const Vec2 e2 = obj.vertex(e + 1);
            if (!segments_intersect(a, b, e1, e2)) continue;
            const Vec2 s = e2 - e1;
            const double den = cross2(r, s);
            if (std::abs(den) > 1e-14) {
                const double t = cross2(e1 - a, s) / den;
                t_min = std::min(t_min, std::clamp(t, 0.0, 1.0));
            } else {
                // Collinear overlap: project the edge endpoints onto [a,b].
                for (const Vec2& ep : {e1, e2}) {
                    const double t = (ep - a).dot(r) / r.squaredNorm();
                    if (t >= -1e-12 && t <= 1.0 + 1e-12) {
                        t_min = std::min(t_min, std::clamp(t, 0.0, 1.0));
                    }
                }
            }
        }
        if (std::isfinite(t_min)) {
            const double arc = arc_base + t_min * seg_len;
            if (arc < best_arc) {
                best_arc = arc;
                best_point = a + t_min * r;
            }
            break;  // earlier segments have smaller arc; first hit wins
        }
        arc_base += seg_len;
    }

    if (!std::isfinite(best_arc)) return std::nullopt;
    ContactPoint cp;
    cp.position = best_point;
    cp.arc_length = best_arc;
    cp.normal = obj.closest_surface_point(best_point).normal;
    cp.force_magnitude = 0.0;
    return cp;
}

}  // namespace whisker
