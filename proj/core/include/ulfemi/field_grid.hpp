#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ulfemi/common.hpp"

namespace ulfemi {

struct AxisSamples {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z;

  std::size_t size() const { return x.size() * y.size() * z.size(); }

  /// n evenly spaced samples on [lo, hi]; symmetric intervals give exactly
  /// mirrored samples.
  static std::vector<double> linspace(double lo, double hi, std::size_t n);
};

/// Complex phasor H field sampled on a rectilinear lattice. Storage is
/// x-fastest: index = i + nx * (j + ny * k).
class VectorFieldGrid {
public:
  VectorFieldGrid() = default;
  VectorFieldGrid(AxisSamples axes, std::string source);

  AxisSamples const &axes() const { return axes_; }
  std::string const &source() const { return source_; }
  /// Checksum identifying the field model that produced the samples.
  std::uint64_t provenance() const { return provenance_; }
  void set_provenance(std::uint64_t p) { provenance_ = p; }

  std::size_t nx() const { return axes_.x.size(); }
  std::size_t ny() const { return axes_.y.size(); }
  std::size_t nz() const { return axes_.z.size(); }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + nx() * (j + ny() * k); }

  CVec3 at(std::size_t i, std::size_t j, std::size_t k) const;
  void set(std::size_t i, std::size_t j, std::size_t k, CVec3 const &h);
  Vec3 position(std::size_t i, std::size_t j, std::size_t k) const { return {axes_.x[i], axes_.y[j], axes_.z[k]}; }

  bool contains(Vec3 const &p) const;
  /// Trilinear interpolation; OutOfDomainError outside the lattice box.
  CVec3 interpolate(Vec3 const &p) const;

  /// Checks lattice shapes and finiteness of all samples.
  void validate() const;

  std::vector<cx> hx;
  std::vector<cx> hy;
  std::vector<cx> hz;

private:
  AxisSamples axes_;
  std::string source_;
  std::uint64_t provenance_ = 0;
};

/// CSV: x,y,z,hx_re,hx_im,hy_re,hy_im,hz_re,hz_im
void write_field_csv(std::ostream &os, VectorFieldGrid const &grid);

} // namespace ulfemi
