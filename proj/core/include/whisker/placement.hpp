#pragma once

#include <cstdint>

#include "whisker/geometry.hpp"
#include "whisker/rod.hpp"

namespace whisker {

// Sweep-frame convention: the whisker base starts at the world origin and
// translates along +y; the whisker extends along +x. Objects are placed to
// the +x side of the base path so the whisker brushes past them.
struct PlacementConfig {
    double standoff_min = 5.0;   // mm, nearest object distance from the base path
    double standoff_max = 35.0;
    double entry_min = 6.0;      // mm ahead of the starting base position
    double entry_max = 16.0;
    int max_retries = 64;

    void validate() const;
};

struct ScenePlacement {
    double rotation = 0.0;        // radians
    Vec2 translation{0.0, 0.0};   // mm
    double standoff = 0.0;        // mm, distance from base path to nearest object point

    Pose2 pose() const { return Pose2{translation, rotation}; }
};

// Randomized object placement: rotation uniform in [0, 2pi), standoff
// uniform in [standoff_min, standoff_max] (realized exactly), leading edge
// placed entry mm ahead of the sweep start. Rejects placements that touch
// the whisker's rest shape at the start pose and retries; throws
// ValidationError once retries are exhausted. Deterministic per seed.
ScenePlacement random_placement(const PolyObject& object, const RodState& rest_shape,
                                std::uint64_t seed, const PlacementConfig& cfg = {});

}  // namespace whisker
