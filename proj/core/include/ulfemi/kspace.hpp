#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ulfemi/common.hpp"

namespace ulfemi {

using CMatrix = Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One k-space acquisition. Row p holds the readout of phase encode p
/// (Nread time samples, `dwell` apart); the centre of k-space sits at
/// (Nphase/2, Nread/2).
struct KSpaceMatrix {
  CMatrix data;
  double dwell = 0.0;
  std::string channel;

  Eigen::Index n_read() const { return data.cols(); }
  Eigen::Index n_phase() const { return data.rows(); }
  void validate() const;
};

/// Plain (unshifted) DFT of one readout row: X[k] = sum_n x[n] e^{-2 pi j k n / N}.
std::vector<cx> fft(std::span<cx const> x);
/// Inverse of fft(), including the 1/N factor.
std::vector<cx> ifft(std::span<cx const> x);

/// Centred 2D forward transform (image -> k-space), unnormalized.
CMatrix fft2c(CMatrix const &image);
/// Centred 2D inverse transform (k-space -> image), scaled by 1/N.
CMatrix ifft2c(CMatrix const &kspace);

/// Per-row RMS of a complex matrix.
std::vector<double> row_rms(CMatrix const &m);
/// RMS over all entries.
double rms(CMatrix const &m);

bool is_power_of_two(long n);

} // namespace ulfemi
