#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace ulfemi {

using cx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kMu0 = 4.0e-7 * kPi;          // H/m (pre-2019 exact value)
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Error hierarchy. Every failure the library reports derives from Error so
// the CLI can map categories to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidSpecError : public Error { using Error::Error; };
class InvalidInputError : public Error { using Error::Error; };
class SingularityError : public Error { using Error::Error; };
class OutOfDomainError : public Error { using Error::Error; };
class ModelInvalidError : public Error { using Error::Error; };
class DegenerateError : public Error { using Error::Error; };
class UncancelableError : public Error { using Error::Error; };
class CoverageError : public Error { using Error::Error; };
class ProvenanceError : public Error { using Error::Error; };
class PolicyError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class MissingInputsError : public Error { using Error::Error; };

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// 64-bit FNV-1a, used for provenance checksums and config hashes.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stable sub-seed for a named stream (splitmix64 finalizer over the tag hash).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  std::uint64_t z = master ^ fnv1a(tag);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace ulfemi
