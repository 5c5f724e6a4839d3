#pragma once

#include <stdexcept>
#include <string>

namespace evgnep {

// Camera resolution. Pixel coordinates are 1-based: x in 1..nx, y in 1..ny.
struct Grid {
  int nx = 0;
  int ny = 0;

  bool contains(int x, int y) const { return x >= 1 && x <= nx && y >= 1 && y <= ny; }
};

// Selects the exact Heaviside/Kronecker path (used by the global search)
// or the smooth tanh/Gaussian relaxations (used by gradient refinement).
enum class Gate { exact, relaxed };

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

// Gate mass is zero: no event is selected, means are undefined.
struct DegenerateSelectionError : Error {
  using Error::Error;
};

// Selected events do not span two distinct timestamps: velocity is undefined.
struct DegenerateMotionError : Error {
  using Error::Error;
};

struct LevelInfeasibleError : Error {
  using Error::Error;
};

}  // namespace evgnep
