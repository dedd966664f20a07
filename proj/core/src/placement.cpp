#include "whisker/placement.hpp"

#include <cmath>
#include <string>

#include "whisker/errors.hpp"
#include "whisker/rng.hpp"

namespace whisker {

void PlacementConfig::validate() const {
    if (!(standoff_min > 0.0) || standoff_max < standoff_min) {
        throw ValidationError("placement standoff range invalid");
    }
    if (entry_max < entry_min) throw ValidationError("placement entry range invalid");
    if (max_retries < 1) throw ValidationError("placement max_retries must be >= 1");
}

namespace {

bool touches_rest_shape(const PolyObject& placed, const RodState& rest) {
    const auto& P = rest.node_positions;
    for (std::size_t i = 0; i + 1 < P.size(); ++i) {
        if (placed.intersects_segment(P[i], P[i + 1])) return true;
    }
    return false;
}

}  // namespace

ScenePlacement random_placement(const PolyObject& object, const RodState& rest_shape,
                                std::uint64_t seed, const PlacementConfig& cfg) {
    cfg.validate();
    Rng rng(mix_seed(seed, "placement"));

    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        ScenePlacement pl;
        pl.rotation = rng.uniform(0.0, 2.0 * M_PI);
        pl.standoff = rng.uniform(cfg.standoff_min, cfg.standoff_max);
        const double entry = rng.uniform(cfg.entry_min, cfg.entry_max);

        // Rotate first, then choose the translation that realizes the drawn
        // standoff exactly: the base path is the line x = 0, so the nearest
        // object point must land at x = standoff.
        Pose2 rot_only;
        rot_only.rotation = pl.rotation;
        const PolyObject rotated = object.transformed(rot_only);
        const Vec2 lo = rotated.min_corner();
        pl.translation = Vec2(pl.standoff - lo.x(), entry - lo.y());

        const PolyObject placed = object.transformed(pl.pose());
        if (!touches_rest_shape(placed, rest_shape)) return pl;
    }
    throw ValidationError("no collision-free placement for '" + object.name() + "' after " +
                          std::to_string(cfg.max_retries) + " retries");
}

}  // namespace whisker
