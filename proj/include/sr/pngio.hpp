#ifndef SR_PNGIO_HPP
#define SR_PNGIO_HPP

#include <string>

#include "sr/image.hpp"

namespace sr {

/// 8-bit grayscale PNG preview; pixels are min-max scaled to [0, 255].
/// Deterministic output (fixed zlib level, no timestamps).
void save_png(const Image& x, const std::string& path);

} // namespace sr

#endif
