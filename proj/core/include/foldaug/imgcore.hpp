#pragma once

#include "foldaug/image.hpp"

namespace foldaug::imgcore {

/// Smoothing scale used in front of the Sobel operator.
inline constexpr double kDefaultGradientSigma = 1.0;
/// Butterworth cutoff, in cycles per pixel.
inline constexpr double kDefaultHighpassCutoff = 0.05;
inline constexpr int kDefaultHighpassOrder = 2;

/// Cumulative-histogram equalization:
///   m(v) = round(255 * (cdf(v) - cdf_min) / (N - cdf_min)).
/// A single-level image maps entirely to 255.
GrayImage histogram_equalize(const GrayImage& img);

/// Horizontal and vertical Sobel responses of the Gaussian-smoothed image.
struct Gradients {
  RealField gx;
  RealField gy;
};

/// Gaussian smoothing (radius ceil(3 sigma)) followed by 3x3 Sobel. Borders replicate edge pixels.
/// Requires width and height >= 3.
Gradients sobel_gradients(const GrayImage& img, double sigma = kDefaultGradientSigma);

/// sqrt(gx^2 + gy^2) of `sobel_gradients`.
RealField gradient_magnitude(const GrayImage& img, double sigma = kDefaultGradientSigma);

/// Frequency-domain Butterworth high-pass, H = 1 / (1 + (D0 / D)^(2n)) with H(0) = 0.
///
/// The image is padded to the next power of two in each dimension before the transform and
/// cropped back afterwards. Padding uses the image mean, so a constant image yields zero
/// everywhere. Returns |Re(ifft)|.
RealField butterworth_highpass(const GrayImage& img, double cutoff = kDefaultHighpassCutoff,
                               int order = kDefaultHighpassOrder);

/// Linear rescale to [0, 1]. A constant field maps to all zeros.
RealField normalize01(const RealField& field);

/// Erosion then dilation by a disc of the given radius. Positions outside the image never
/// constrain erosion and never receive dilation.
BinaryMask morphological_open(const BinaryMask& mask, int radius);

BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);

}  // namespace foldaug::imgcore
