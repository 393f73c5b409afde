#ifndef ALIVE_ERROR_HPP
#define ALIVE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace alive {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A bootstrap-type filter produced a generation whose weights are all zero.
class ParticleDeath : public Error {
 public:
  explicit ParticleDeath(std::size_t step)
      : Error("particle death at step " + std::to_string(step + 1)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// An alive loop needed more draws than the configured cap.
class CapExceeded : public Error {
 public:
  CapExceeded(std::size_t step, std::size_t draws, std::size_t accepted)
      : Error("stopping-time cap exceeded at step " + std::to_string(step + 1) + " (" +
              std::to_string(accepted) + " accepted in " + std::to_string(draws) + " draws)"),
        step_(step),
        draws_(draws),
        accepted_(accepted) {}

  std::size_t step() const { return step_; }
  std::size_t draws() const { return draws_; }
  std::size_t accepted() const { return accepted_; }

 private:
  std::size_t step_;
  std::size_t draws_;
  std::size_t accepted_;
};

/// The twist function evaluated to zero or a non-finite value.
class DegenerateTwist : public Error {
 public:
  explicit DegenerateTwist(const std::string& what) : Error("degenerate twist: " + what) {}
};

}  // namespace alive

#endif  // ALIVE_ERROR_HPP
