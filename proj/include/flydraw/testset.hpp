#pragma once

#include <string>
#include <vector>

#include "flydraw/trajectory.hpp"

namespace flydraw {

struct NamedPath {
  std::string name;
  DrawnPath path;
};

// Synthetic hand-drawn strokes (letters, loops, zigzags) inside a 4 m x 3 m
// box in the x-z plane. None of them is used for training.
const std::vector<NamedPath>& bundled_test_paths();

// Looks up a bundled path by name; throws NotFound.
const NamedPath& bundled_path(const std::string& name);

// Trajectories used by the single-trajectory experiments.
inline constexpr const char* kSpeedSweepPath = "circle";
inline constexpr const char* kDisturbancePath = "circle";

}  // namespace flydraw
