#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lipspline/tensor.hpp"

namespace lipspline {

/// Grayscale PGM (P2 or P5, 8 or 16 bit) mapped linearly to [0, 1] as an [H, W] tensor.
Tensor read_pgm(const std::filesystem::path& path);
Tensor parse_pgm(const std::string& bytes);
/// Values are clamped to [0, 1] and quantized to `max_value` (255 or 65535).
std::string encode_pgm(const Tensor& image, unsigned max_value = 255, bool binary = true);
void write_pgm(const std::filesystem::path& path, const Tensor& image, unsigned max_value = 255);

/// Every *.pgm file in a directory, sorted by name.
std::vector<Tensor> read_pgm_directory(const std::filesystem::path& dir);

constexpr double kPsnrCap = 200.0;

/// -10 log10(MSE) for unit peak, capped at kPsnrCap.
double psnr(const Tensor& x, const Tensor& ref);

struct SsimTerms {
  double luminance = 0.0;
  double contrast = 0.0;
  double structure = 0.0;
  double ssim = 0.0;
};

/// Means over all valid 11x11 Gaussian windows (sigma 1.5, K1 = 0.01, K2 = 0.03, unit range).
SsimTerms ssim_terms(const Tensor& x, const Tensor& ref);
double ssim(const Tensor& x, const Tensor& ref);

/// Random overlay of ellipses on a smooth background, values in [0, 1].
Tensor phantom(std::size_t size, std::uint64_t seed);

/// Gaussian noise of standard deviation sigma (not clipped).
Tensor add_noise(const Tensor& image, double sigma, std::uint64_t seed);

}  // namespace lipspline
