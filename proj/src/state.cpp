#include "flydraw/state.hpp"

#include <cmath>

namespace flydraw {

std::array<double, VehicleState::kSize> VehicleState::to_array() const {
  return {p.x(),     p.y(),     p.z(),     v.x(),     v.y(),
          v.z(),     euler.x(), euler.y(), euler.z(), omega.x(),
          omega.y(), omega.z(), zacc};
}

VehicleState VehicleState::from_array(const std::array<double, kSize>& a) {
  VehicleState s;
  s.p = Vec3(a[0], a[1], a[2]);
  s.v = Vec3(a[3], a[4], a[5]);
  s.euler = Vec3(a[6], a[7], a[8]);
  s.omega = Vec3(a[9], a[10], a[11]);
  s.zacc = a[12];
  return s;
}

bool VehicleState::finite() const {
  for (double x : to_array()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool VehicleState::operator==(const VehicleState& o) const {
  return to_array() == o.to_array();
}

}  // namespace flydraw
