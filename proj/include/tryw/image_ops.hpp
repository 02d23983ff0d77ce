#pragma once

#include <array>

#include "tryw/ingest.hpp"

namespace tryw {

using Rgb = std::array<double, 3>;

// Pointwise mask algebra. Operands must share dimensions.
MaskPlane mask_and(const MaskPlane& a, const MaskPlane& b);
MaskPlane mask_or(const MaskPlane& a, const MaskPlane& b);
MaskPlane mask_not(const MaskPlane& a);

// Square-window binary dilation of the given radius in pixels.
MaskPlane dilate(const MaskPlane& m, int radius);

// Bilinear resize with half-pixel centers and edge clamping.
ImagePlane resize_bilinear(const ImagePlane& img, int width, int height);

// Rounds every sample to the nearest 8-bit level, as a PNG round trip would.
ImagePlane quantize8(const ImagePlane& img);

// Converts a 1-channel plane to 3 channels; 3-channel input is returned unchanged.
ImagePlane to_rgb(const ImagePlane& img);

}  // namespace tryw
