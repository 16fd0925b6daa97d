#pragma once

#include <string>

#include "ctct/image.hpp"

namespace ctct {

// Binary PGM (P5), 8-bit, maxval 255. The sole image interchange format.
Image load_pgm(const std::string& path);
void save_pgm(const Image& img, const std::string& path);

}  // namespace ctct
