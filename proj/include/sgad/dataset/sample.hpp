#pragma once

#include <string>

#include "sgad/image.hpp"

namespace sgad {

// label: 0 = normal, 1 = diseased.
struct Sample {
  Image image;
  int label = 0;
  std::string id;

  bool operator==(const Sample&) const = default;
};

}  // namespace sgad
