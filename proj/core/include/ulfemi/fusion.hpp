#pragma once

#include <string>
#include <vector>

#include "ulfemi/common.hpp"
#include "ulfemi/kspace.hpp"

namespace ulfemi {

struct ReconImage {
  CMatrix data;
  std::string channel;
  std::vector<std::string> provenance;  // pipeline stages applied, in order

  RMatrix magnitude() const { return data.cwiseAbs(); }
};

/// Inverse of the acquisition forward transform.
ReconImage reconstruct(KSpaceMatrix const &k, std::vector<std::string> provenance = {});
KSpaceMatrix forward(ReconImage const &img, double dwell);

struct Rect {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
};

/// Union of rectangles.
struct Roi {
  std::vector<Rect> rects;

  bool contains(int r, int c) const;
  /// Distinct pixels, row-major order.
  std::vector<std::pair<int, int>> pixels() const;
  void validate(Eigen::Index rows, Eigen::Index cols) const;
};

inline constexpr int kMinRoiPixels = 16;

struct SNRReport {
  Roi signal;
  Roi noise;
  double mu_signal = 0.0;
  double sigma_noise = 0.0;
  double snr_db = 0.0;
};

/// 20 log10(mu / sigma).
double snr_db(double mu, double sigma);

/// Mean magnitude over the signal ROI against the standard deviation of the
/// magnitude over the noise ROI.
SNRReport snr_db(ReconImage const &img, Roi const &signal, Roi const &noise);

/// Complex noise level sqrt(mean |z - mean z|^2) over the ROI.
double estimate_noise_sigma(ReconImage const &img, Roi const &noise);

struct FusionWeights {
  std::vector<double> weights;    // sum to one
  std::vector<double> variances;  // sigma_i^2 after alignment
  std::vector<cx> alignment;      // complex scale mapping channel i onto channel 0
};

struct FusionResult {
  ReconImage image;
  FusionWeights weights;
};

/// Inverse-variance combination of complex images after least-squares
/// scalar alignment to the first image.
FusionResult fuse(std::vector<ReconImage> const &images, std::vector<double> const &sigmas);

/// Per-row RMS of a k-space (or any complex row stack).
std::vector<double> noise_profile_1d(CMatrix const &rows);

} // namespace ulfemi
