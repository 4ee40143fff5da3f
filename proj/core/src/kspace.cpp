#include "ulfemi/kspace.hpp"

#include <cmath>

#include <unsupported/Eigen/FFT>

namespace ulfemi {

void KSpaceMatrix::validate() const {
  if (data.rows() <= 0 || data.cols() <= 0) {
    throw InvalidInputError("k-space matrix must have positive dimensions");
  }
  if (!data.allFinite()) {
    throw InvalidInputError("k-space matrix contains non-finite entries");
  }
}

bool is_power_of_two(long n) {
  return n > 0 && (n & (n - 1)) == 0;
}

namespace {

Eigen::FFT<double> &engine() {
  thread_local Eigen::FFT<double> f;
  return f;
}

} // namespace

std::vector<cx> fft(std::span<cx const> x) {
  std::vector<cx> in(x.begin(), x.end());
  std::vector<cx> out;
  engine().fwd(out, in);
  return out;
}

std::vector<cx> ifft(std::span<cx const> x) {
  std::vector<cx> in(x.begin(), x.end());
  std::vector<cx> out;
  engine().inv(out, in);
  return out;
}

namespace {

// Cyclic shift of rows and columns by (dr, dc).
CMatrix shift2(CMatrix const &m, Eigen::Index dr, Eigen::Index dc) {
  Eigen::Index const r = m.rows();
  Eigen::Index const c = m.cols();
  CMatrix out(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      out((i + dr) % r, (j + dc) % c) = m(i, j);
    }
  }
  return out;
}

CMatrix transform2(CMatrix const &m, bool forward) {
  Eigen::Index const r = m.rows();
  Eigen::Index const c = m.cols();
  CMatrix out(r, c);
  std::vector<cx> in;
  std::vector<cx> tmp;
  for (Eigen::Index i = 0; i < r; ++i) {
    in.assign(m.row(i).data(), m.row(i).data() + c);
    forward ? engine().fwd(tmp, in) : engine().inv(tmp, in);
    for (Eigen::Index j = 0; j < c; ++j) {
      out(i, j) = tmp[j];
    }
  }
  for (Eigen::Index j = 0; j < c; ++j) {
    in.resize(r);
    for (Eigen::Index i = 0; i < r; ++i) {
      in[i] = out(i, j);
    }
    forward ? engine().fwd(tmp, in) : engine().inv(tmp, in);
    for (Eigen::Index i = 0; i < r; ++i) {
      out(i, j) = tmp[i];
    }
  }
  return out;
}

} // namespace

CMatrix fft2c(CMatrix const &image) {
  Eigen::Index const r = image.rows();
  Eigen::Index const c = image.cols();
  // ifftshift, transform, fftshift
  CMatrix const a = shift2(image, r - r / 2, c - c / 2);
  return shift2(transform2(a, true), r / 2, c / 2);
}

CMatrix ifft2c(CMatrix const &kspace) {
  Eigen::Index const r = kspace.rows();
  Eigen::Index const c = kspace.cols();
  CMatrix const a = shift2(kspace, r - r / 2, c - c / 2);
  return shift2(transform2(a, false), r / 2, c / 2);
}

std::vector<double> row_rms(CMatrix const &m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = std::sqrt(m.row(i).squaredNorm() / static_cast<double>(m.cols()));
  }
  return out;
}

double rms(CMatrix const &m) {
  return m.size() == 0 ? 0.0 : std::sqrt(m.squaredNorm() / static_cast<double>(m.size()));
}

} // namespace ulfemi
