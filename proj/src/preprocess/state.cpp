#include "taillight/preprocess/state.hpp"

#include "taillight/error.hpp"

namespace taillight {

std::string TaillightState::code() const { return std::string(kClassCodes[index()]); }

TaillightState TaillightState::from_index(std::size_t index) {
  if (index >= kClassCodes.size()) throw DataError("class index out of range: " + std::to_string(index));
  return {(index & 1u) != 0, (index & 2u) != 0, (index & 4u) != 0};
}

TaillightState TaillightState::parse(std::string_view code) {
  for (std::size_t i = 0; i < kClassCodes.size(); ++i)
    if (kClassCodes[i] == code) return from_index(i);
  throw DataError("unknown taillight code '" + std::string(code) + "'");
}

}  // namespace taillight
