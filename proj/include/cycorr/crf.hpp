#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cycorr/descriptor_io.hpp"
#include "cycorr/image_io.hpp"

namespace cycorr {

/// Two-label fully connected CRF with a Gaussian smoothness kernel and a
/// bilateral appearance kernel (Potts compatibility, symmetric kernel
/// normalisation). Spatial scales are in image pixels, colour scale in 8-bit
/// intensity units.
struct CrfConfig {
  int iterations = 10;
  double gaussian_sxy = 3.0;
  double gaussian_w = 3.0;
  double bilateral_sxy = 80.0;
  double bilateral_srgb = 13.0;
  double bilateral_w = 10.0;
  double background_energy = 0.5;
  // Multiplies the unary energies before they enter the softmax.
  double unary_scale = 1.0;
  // Images up to this many pixels are filtered exactly in O(N^2).
  std::size_t exact_pixel_limit = 1024;

  void validate() const;
};

enum class CrfBackend : std::uint8_t { Auto, Exact, Lattice };

// Per-pixel energies; lower wins. Foreground = -score, background = -constant.
struct UnaryEnergies {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> foreground;
  std::vector<double> background;
};

UnaryEnergies unaries_from_scores(std::span<const double> score_map, std::uint32_t height,
                                  std::uint32_t width, double background_energy);

struct MeanFieldResult {
  BinaryMask mask;
  std::vector<double> foreground;  // final marginals
  std::vector<double> background;
  // Foreground marginals after initialisation and after every update, when requested.
  std::vector<std::vector<double>> history;
};

MeanFieldResult mean_field(std::span<const double> score_map, const RgbImage& rgb, const CrfConfig& config,
                           bool keep_history = false, CrfBackend backend = CrfBackend::Auto);

/// Smooth binary mask from an image-resolution score map. A pixel ends in
/// the foreground when its final foreground logit is strictly larger.
BinaryMask refine(std::span<const double> score_map, const RgbImage& rgb, const CrfConfig& config);

}  // namespace cycorr
