#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>

namespace taillight {

// Three-letter class code: brake (B/O), left turn (L/O), right turn (R/O).
// Class index = brake + 2*left + 4*right, which orders the codes as
// OOO BOO OLO BLO OOR BOR OLR BLR.
struct TaillightState {
  bool brake = false;
  bool left = false;
  bool right = false;

  std::size_t index() const { return (brake ? 1u : 0u) + (left ? 2u : 0u) + (right ? 4u : 0u); }
  std::string code() const;
  // Mirror image: left and right signals trade places.
  TaillightState flipped() const { return {brake, right, left}; }

  static TaillightState from_index(std::size_t index);
  // Throws DataError on anything outside the eight codes.
  static TaillightState parse(std::string_view code);

  auto operator<=>(const TaillightState&) const = default;
};

inline constexpr std::array<std::string_view, 8> kClassCodes{"OOO", "BOO", "OLO", "BLO",
                                                             "OOR", "BOR", "OLR", "BLR"};

}  // namespace taillight
