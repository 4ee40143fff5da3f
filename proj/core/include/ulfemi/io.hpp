#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ulfemi/acquisition.hpp"
#include "ulfemi/kspace.hpp"

namespace ulfemi {

inline constexpr int kKSpaceFormatVersion = 1;

/// K-space on disk: one line of JSON header, a newline, then little-endian
/// float64 (Re, Im) pairs, row-major with the readout fastest.
struct KSpaceHeader {
  int n_read = 0;
  int n_phase = 0;
  double dwell = 0.0;
  std::string channel;
  std::uint64_t seed = 0;
  std::string config_hash;
  int format_version = kKSpaceFormatVersion;
};

void write_kspace(std::ostream &os, KSpaceMatrix const &k, KSpaceHeader header);
void write_kspace(std::filesystem::path const &path, KSpaceMatrix const &k, KSpaceHeader header);
KSpaceMatrix read_kspace(std::istream &is, KSpaceHeader *header = nullptr);
KSpaceMatrix read_kspace(std::filesystem::path const &path, KSpaceHeader *header = nullptr);

/// Binary (P5) PGM of a magnitude image scaled to [0, maxval]; 8-bit output.
void write_pgm(std::ostream &os, RMatrix const &magnitude, double scale_max = 0.0);
void write_pgm(std::filesystem::path const &path, RMatrix const &magnitude, double scale_max = 0.0);
/// Reads P2 or P5, 8- or 16-bit. Values are returned as raw grey levels.
RMatrix read_pgm(std::istream &is);

/// CSV of a complex image: row,col,re,im.
void write_complex_csv(std::ostream &os, CMatrix const &m);
/// Plain numeric CSV grid (one image row per line).
RMatrix read_csv_grid(std::istream &is);

/// PGM or CSV phantom, chosen by file extension.
Phantom load_phantom(std::filesystem::path const &path, double pixel_spacing = 2e-3);

/// Writes through a temporary file and renames, so a failed run leaves no
/// partial output behind.
void write_text_file(std::filesystem::path const &path, std::string const &content);

std::string read_text_file(std::filesystem::path const &path);

} // namespace ulfemi
