#pragma once

#include <string>
#include <vector>

#include "seqnav/scene.hpp"

// Builds a scene from ascii art. '#' is blocked (structure class), '.' is free
// corridor, letters 'a'..'k' are free room cells with classes 2..12. The first
// string is the visually top row; grid y grows upward.
inline seqnav::Scene scene_from_ascii(const std::vector<std::string>& rows,
                                      double resolution = 0.25) {
  seqnav::Scene sc;
  sc.id = "ascii";
  sc.height = static_cast<int>(rows.size());
  sc.width = static_cast<int>(rows.front().size());
  sc.resolution = resolution;
  sc.occupancy.assign(static_cast<std::size_t>(sc.width) * sc.height, 0);
  sc.semantics.assign(static_cast<std::size_t>(sc.width) * sc.height, 0);
  for (int r = 0; r < sc.height; ++r) {
    const std::string& row = rows[r];
    int y = sc.height - 1 - r;
    for (int x = 0; x < sc.width; ++x) {
      char ch = row[x];
      std::size_t i = static_cast<std::size_t>(y) * sc.width + x;
      if (ch == '#') continue;
      sc.occupancy[i] = 1;
      if (ch == '.')
        sc.semantics[i] = seqnav::kClassCorridor;
      else if (ch >= 'a' && ch <= 'k')
        sc.semantics[i] = static_cast<std::uint8_t>(2 + (ch - 'a'));
    }
  }
  return sc;
}

inline void add_landmark_at_cell(seqnav::Scene& sc, const std::string& label, int cx,
                                 int cy) {
  sc.landmarks.push_back({label, sc.cell_center(cx, cy)});
}
