#pragma once

#include <complex>
#include <vector>

#include "eeo/image.hpp"
#include "eeo/tensor.hpp"

namespace eeo {

/// In-place 1-d DFT of each row of an h x w complex grid, then each column.
/// Power-of-two extents use iterative radix-2; anything else falls back to
/// the direct O(n^2) transform (desk-scale images keep that cheap).
void dft_2d(std::vector<std::complex<double>>& grid, int h, int w);

/// Log-magnitude Fourier feature: grayscale (channel mean), 2-d DFT,
/// log(1+|F|), center shift, bilinear resize to size x size, then
/// per-image standardization. Returns a [size,size] tensor.
Tensor extract_spectrum(const ImageU8& img, int size = 64);

} // namespace eeo
