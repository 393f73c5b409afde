#ifndef ALIVE_ABC_HPP
#define ALIVE_ABC_HPP

#include <string>

namespace alive {

enum class BallMode { relative, absolute };

BallMode parse_ball_mode(const std::string& name);
std::string to_string(BallMode mode);

/// Indicator kernel for ABC: a simulated observation u is accepted when it lies
/// in the ball of radius epsilon around the real observation y.
///
/// In relative mode the distance is |u - y| / max(|y|, relative_floor), so the
/// ball stays well defined when y is zero.
struct AbcKernel {
  double epsilon = 1.0;
  BallMode mode = BallMode::relative;
  double relative_floor = 1e-8;

  void validate() const;
  int weight(double u, double y) const;
};

}  // namespace alive

#endif  // ALIVE_ABC_HPP
