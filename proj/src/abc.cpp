#include "alive/abc.hpp"

#include <algorithm>
#include <cmath>

#include "alive/error.hpp"

namespace alive {

BallMode parse_ball_mode(const std::string& name) {
  if (name == "relative") return BallMode::relative;
  if (name == "absolute") return BallMode::absolute;
  throw InvalidArgument("unknown ball_mode '" + name + "'");
}

std::string to_string(BallMode mode) {
  return mode == BallMode::relative ? "relative" : "absolute";
}

void AbcKernel::validate() const {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(relative_floor >= 0.0)) throw InvalidArgument("relative_floor must be non-negative");
}

int AbcKernel::weight(double u, double y) const {
  const double distance = std::abs(u - y);
  if (mode == BallMode::absolute) return distance <= epsilon ? 1 : 0;
  const double scale = std::max(std::abs(y), relative_floor);
  if (scale == 0.0) return distance == 0.0 ? 1 : 0;
  return distance <= epsilon * scale ? 1 : 0;
}

}  // namespace alive
