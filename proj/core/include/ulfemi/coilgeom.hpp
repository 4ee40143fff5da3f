#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ulfemi/common.hpp"

namespace ulfemi {

class VectorFieldGrid;

/// Rigid transform from a coil's local frame to the lab frame.
///
/// Every coil is built in a local frame with its axis (or sensing normal)
/// along local z. The named constructors use exact permutation matrices so
/// that mirror symmetries survive the transform bit-for-bit.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(Vec3 const &local) const { return rotation * local + translation; }
  Vec3 rotate(Vec3 const &local) const { return rotation * local; }

  static Pose identity() { return {}; }
  /// local z -> lab x, local x -> lab y, local y -> lab z.
  static Pose axis_x(Vec3 const &translation = Vec3::Zero());
  /// local z -> lab y, local x -> lab x, local y -> lab -z.
  static Pose axis_y(Vec3 const &translation = Vec3::Zero());
  /// local z -> lab z (identity rotation).
  static Pose axis_z(Vec3 const &translation = Vec3::Zero());
};

struct SolenoidParams {
  double radius = 0.1;
  double length = 0.2;
  int turns = 10;
};

/// Two-window saddle on a cylinder about local z; windows centred on local
/// +x and -x, so the coil senses local x.
struct SaddleParams {
  double radius = 0.1;
  double length = 0.2;
  double arc_deg = 120.0;
  int turns = 1;
};

/// Small circular pickup loop; all turns coincide in the local z = 0 plane.
struct DetectionLoopParams {
  double radius = 0.05;
  int turns = 1;
};

/// Pair of planar rectangular windings at local z = +/- separation/2, both
/// with normal +z. Turn k of each winding is a rectangle whose size
/// interpolates from the inner to the outer dimensions; turn positions follow
/// a linear turn-density profile with density_ratio = outer:inner density.
struct CancellationPairParams {
  double outer_width = 0.5;   // along local x
  double outer_height = 0.4;  // along local y
  double inner_width = 0.1;
  double inner_height = 0.08;
  double separation = 0.5;
  int turns = 12;
  double density_ratio = 3.0;
};

enum class CoilKind { Solenoid, Saddle, DetectionLoop, CancellationPair };

std::string to_string(CoilKind kind);

struct CoilSpec {
  std::string name;
  std::variant<SolenoidParams, SaddleParams, DetectionLoopParams, CancellationPairParams> params;
  Pose pose;

  CoilKind kind() const { return static_cast<CoilKind>(params.index()); }
  int turns() const;
  void validate() const;
};

struct Segment {
  Vec3 a;
  Vec3 b;
  double length() const { return (b - a).norm(); }
};

/// Piecewise-linear current path. Turns are stored back to back in
/// `segments`; `turn_offsets[k]` is the index of the first segment of turn k.
struct WindingPath {
  std::vector<Segment> segments;
  std::vector<std::size_t> turn_offsets;
  cx current{1.0, 0.0};
  bool closed = true;

  std::size_t turn_count() const { return turn_offsets.size(); }
  /// Segment index range [begin, end) of one turn.
  std::pair<std::size_t, std::size_t> turn_range(std::size_t turn) const;
  void validate() const;
};

/// A quadrature node on a coil's sensing surface: position and area-weighted
/// oriented normal (m^2).
struct SurfaceNode {
  Vec3 point;
  Vec3 area_normal;
};

using TurnSurface = std::vector<SurfaceNode>;

struct FluxResult {
  cx flux{0.0, 0.0};       // Wb
  std::vector<cx> per_turn;
};

using FieldFunction = std::function<CVec3(Vec3 const &)>;

inline constexpr double kMinSegmentLength = 1e-9;
inline constexpr double kSingularDistance = 1e-6;
inline constexpr int kDefaultSegmentsPerTurn = 64;
inline constexpr int kDefaultQuadratureOrder = 12;

WindingPath realize_coil(CoilSpec const &spec, int segments_per_turn = kDefaultSegmentsPerTurn);

/// Biot-Savart H field (A/m) of the path at `point`, exact per straight segment.
/// Throws SingularityError within kSingularDistance of any segment.
CVec3 field_at(WindingPath const &path, Vec3 const &point);

/// Sum of the fields of several paths, each with its own current.
CVec3 field_at(std::vector<WindingPath> const &paths, Vec3 const &point);

/// Sensing surface of every turn. `inset` shrinks each spanning surface by a
/// wire radius (used for self terms).
std::vector<TurnSurface> sensing_surface(CoilSpec const &spec, int quadrature_order, double inset = 0.0);

FluxResult flux_through(FieldFunction const &field, CoilSpec const &coil,
                        int quadrature_order = kDefaultQuadratureOrder);

/// Grid-sampled variant; trilinear interpolation, OutOfDomainError if any
/// quadrature node falls outside the grid box.
FluxResult flux_through(VectorFieldGrid const &grid, CoilSpec const &coil,
                        int quadrature_order = kDefaultQuadratureOrder);

struct CouplingOptions {
  int quadrature_order = kDefaultQuadratureOrder;
  int segments_per_turn = kDefaultSegmentsPerTurn;
  double wire_radius = 5e-4;  // m, inset for diagonal (self) terms
};

/// Entry (i, j): flux through coil i per ampere in coil j (Wb/A).
Eigen::MatrixXcd mutual_coupling_matrix(std::vector<CoilSpec> const &coils,
                                        CouplingOptions const &options = {});

/// CSV of segment endpoints: turn,x0,y0,z0,x1,y1,z1
void write_winding_csv(std::ostream &os, WindingPath const &path);

/// Axial positions fraction u_k in [0, 1] (inner -> outer) of the
/// cancellation winding turns under the linear density profile.
std::vector<double> cancellation_turn_positions(int turns, double density_ratio);

} // namespace ulfemi
