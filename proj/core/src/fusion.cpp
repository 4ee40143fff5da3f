#include "ulfemi/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace ulfemi {

ReconImage reconstruct(KSpaceMatrix const &k, std::vector<std::string> provenance) {
  k.validate();
  return {ifft2c(k.data), k.channel, std::move(provenance)};
}

KSpaceMatrix forward(ReconImage const &img, double dwell) {
  return {fft2c(img.data), dwell, img.channel};
}

bool Roi::contains(int r, int c) const {
  return std::any_of(rects.begin(), rects.end(), [&](Rect const &q) {
    return r >= q.row && r < q.row + q.rows && c >= q.col && c < q.col + q.cols;
  });
}

std::vector<std::pair<int, int>> Roi::pixels() const {
  int r1 = 0;
  int c1 = 0;
  for (Rect const &q : rects) {
    r1 = std::max(r1, q.row + q.rows);
    c1 = std::max(c1, q.col + q.cols);
  }
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < r1; ++r) {
    for (int c = 0; c < c1; ++c) {
      if (contains(r, c)) out.emplace_back(r, c);
    }
  }
  return out;
}

void Roi::validate(Eigen::Index rows, Eigen::Index cols) const {
  if (rects.empty()) {
    throw InvalidInputError("ROI has no rectangles");
  }
  for (Rect const &q : rects) {
    if (q.rows <= 0 || q.cols <= 0 || q.row < 0 || q.col < 0 || q.row + q.rows > rows || q.col + q.cols > cols) {
      throw InvalidInputError(fmt::format("ROI rectangle ({}, {}, {}x{}) lies outside the {}x{} image", q.row, q.col,
                                          q.rows, q.cols, rows, cols));
    }
  }
  if (pixels().size() < static_cast<std::size_t>(kMinRoiPixels)) {
    throw InvalidInputError(fmt::format("ROI must cover at least {} pixels", kMinRoiPixels));
  }
}

double snr_db(double mu, double sigma) {
  if (!(sigma > 0.0)) {
    throw DegenerateError("noise level is zero; SNR undefined");
  }
  return 20.0 * std::log10(mu / sigma);
}

SNRReport snr_db(ReconImage const &img, Roi const &signal, Roi const &noise) {
  signal.validate(img.data.rows(), img.data.cols());
  noise.validate(img.data.rows(), img.data.cols());
  auto const noise_px = noise.pixels();
  for (auto const &[r, c] : signal.pixels()) {
    if (noise.contains(r, c)) {
      throw InvalidInputError("signal and noise ROIs overlap");
    }
  }
  SNRReport rep{signal, noise};
  double acc = 0.0;
  auto const sig_px = signal.pixels();
  for (auto const &[r, c] : sig_px) acc += std::abs(img.data(r, c));
  rep.mu_signal = acc / static_cast<double>(sig_px.size());

  double mean = 0.0;
  for (auto const &[r, c] : noise_px) mean += std::abs(img.data(r, c));
  mean /= static_cast<double>(noise_px.size());
  double var = 0.0;
  for (auto const &[r, c] : noise_px) {
    double const d = std::abs(img.data(r, c)) - mean;
    var += d * d;
  }
  rep.sigma_noise = std::sqrt(var / static_cast<double>(noise_px.size()));
  if (!(rep.sigma_noise > 0.0)) {
    throw DegenerateError("noise ROI has zero spread; SNR undefined");
  }
  rep.snr_db = snr_db(rep.mu_signal, rep.sigma_noise);
  return rep;
}

double estimate_noise_sigma(ReconImage const &img, Roi const &noise) {
  noise.validate(img.data.rows(), img.data.cols());
  auto const px = noise.pixels();
  cx mean{};
  for (auto const &[r, c] : px) mean += img.data(r, c);
  mean /= static_cast<double>(px.size());
  double var = 0.0;
  for (auto const &[r, c] : px) var += std::norm(img.data(r, c) - mean);
  return std::sqrt(var / static_cast<double>(px.size()));
}

FusionResult fuse(std::vector<ReconImage> const &images, std::vector<double> const &sigmas) {
  if (images.empty()) {
    throw InvalidInputError("fusion needs at least one image");
  }
  if (sigmas.size() != images.size()) {
    throw InvalidInputError(fmt::format("{} noise levels supplied for {} images", sigmas.size(), images.size()));
  }
  for (ReconImage const &img : images) {
    if (img.data.rows() != images[0].data.rows() || img.data.cols() != images[0].data.cols()) {
      throw InvalidInputError("fusion inputs must share dimensions");
    }
  }
  FusionWeights w;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(sigmas[i] > 0.0)) {
      throw DegenerateError(fmt::format("channel '{}' has zero noise level; weights undefined", images[i].channel));
    }
    cx a{1.0, 0.0};
    if (i > 0) {
      double const e = images[i].data.squaredNorm();
      if (!(e > 0.0)) {
        throw DegenerateError(fmt::format("channel '{}' is identically zero; cannot align", images[i].channel));
      }
      a = images[i].data.cwiseProduct(images[0].data.conjugate()).sum();
      a = std::conj(a) / e;
    }
    w.alignment.push_back(a);
    double const s = std::abs(a) * sigmas[i];
    w.variances.push_back(s * s);
  }
  double total = 0.0;
  for (double const v : w.variances) total += std::isinf(v) ? 0.0 : 1.0 / v;
  for (double const v : w.variances) w.weights.push_back(std::isinf(v) ? 0.0 : (1.0 / v) / total);

  FusionResult out;
  out.image.channel = "fused";
  out.image.provenance = images[0].provenance;
  out.image.provenance.push_back("fusion");
  if (images.size() == 1) {
    out.image.data = images[0].data;
  } else {
    out.image.data = CMatrix::Zero(images[0].data.rows(), images[0].data.cols());
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (w.weights[i] != 0.0) out.image.data += (w.weights[i] * w.alignment[i]) * images[i].data;
    }
  }
  out.weights = std::move(w);
  return out;
}

std::vector<double> noise_profile_1d(CMatrix const &rows) {
  return row_rms(rows);
}

} // namespace ulfemi
