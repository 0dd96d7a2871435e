#pragma once

#include <filesystem>
#include <iosfwd>

#include "rebama/neural.hpp"

namespace rebama {

// Everything needed to run the trained policies on a grid of the same shape.
//
// Binary layout, little-endian:
//   char[8]  magic "REBAMACK"
//   u32      format version (1)
//   i32      grid width, i32 grid height, i32 horizon
//   f64      observation scale
//   i32      episodes completed
//   u32      network count (3: region_policy, adversary_policy, critic)
//   per network:
//     u32 name length, name bytes
//     i32 input, i32 hidden, i32 output
//     u32 head kind (0 softmax, 1 bounded, 2 linear), i32 softmax blocks
//     u32 bound count, f64 lower[count], f64 upper[count]
//     u64 parameter count, f64 parameters[count]
struct Checkpoint {
  int grid_width = 0;
  int grid_height = 0;
  int horizon = 0;
  double observation_scale = 1.0;
  int episodes = 0;
  Mlp region_policy;
  Mlp adversary_policy;
  Mlp critic;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
// Throws ValidationError on a malformed stream.
Checkpoint read_checkpoint(std::istream& in);

// Throw IoError when the file cannot be opened.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rebama
