// Angular-momentum labels and the ground/excited level layout.
#pragma once

#include <string>

namespace mlcav {

// Stores 2m so half-integers stay exact.
struct HalfInt {
  int twice = 0;

  static HalfInt from_double(double v);
  double value() const { return 0.5 * twice; }
  bool operator==(const HalfInt&) const = default;
  auto operator<=>(const HalfInt&) const = default;
  std::string str() const;
};

inline HalfInt half(int twice) { return HalfInt{twice}; }

enum class Axis { V, H, Par };

Axis axis_from_string(const std::string& s);
std::string to_string(Axis a);

// Levels are indexed ground first, then excited, each with m ascending.
struct LevelStructure {
  HalfInt Fg;
  HalfInt Fe;

  LevelStructure(HalfInt fg, HalfInt fe);
  static LevelStructure from_doubles(double fg, double fe);

  int n_ground() const { return Fg.twice + 1; }
  int n_excited() const { return Fe.twice + 1; }
  int ell() const { return n_ground() + n_excited(); }

  bool is_excited(int idx) const { return idx >= n_ground(); }
  int ground_index(HalfInt m) const;
  int excited_index(HalfInt m) const;
  HalfInt m_of(int idx) const;
  std::string label(int idx) const;  // e.g. "g-1/2", "e3/2"

  // Parity class used by the N_A/N_B bookkeeping in the parallel basis.
  bool in_set_A(int idx) const;

  bool operator==(const LevelStructure&) const = default;
};

}  // namespace mlcav
