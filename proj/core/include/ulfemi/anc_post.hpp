#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ulfemi/common.hpp"
#include "ulfemi/kspace.hpp"

namespace ulfemi {

/// Contiguous, disjoint readout-bin intervals [first, last) covering [0, n_bins).
/// Bins are in plain (unshifted) DFT order.
class BandPartition {
public:
  BandPartition() = default;
  /// Interval boundaries: 0 = b_0 < b_1 < ... < b_B = n_bins.
  explicit BandPartition(std::vector<int> boundaries);
  static BandPartition equal(int n_bins, int bands);

  int bands() const { return static_cast<int>(boundaries_.size()) - 1; }
  int n_bins() const { return boundaries_.empty() ? 0 : boundaries_.back(); }
  std::pair<int, int> range(int band) const { return {boundaries_.at(band), boundaries_.at(band + 1)}; }
  int band_of(int bin) const;
  std::vector<int> const &boundaries() const { return boundaries_; }

private:
  std::vector<int> boundaries_;
};

struct PeripheryPolicy {
  enum class Kind { FirstRows, OuterPhaseEncodes };
  Kind kind = Kind::FirstRows;
  int n = 1;

  static PeripheryPolicy first_rows(int n) { return {Kind::FirstRows, n}; }
  static PeripheryPolicy outer_phase_encodes(int n) { return {Kind::OuterPhaseEncodes, n}; }
  std::string describe() const;
};

/// Row indices (ascending) of the k-space edge used for estimation.
std::vector<int> select_periphery(KSpaceMatrix const &k, PeripheryPolicy const &policy);

/// Stacks the given rows into a matrix.
CMatrix extract_rows(KSpaceMatrix const &k, std::vector<int> const &rows);

struct TransferModel {
  BandPartition partition;
  Eigen::MatrixXcd factors;          // bands x references
  std::vector<int> periphery_rows;
  double ridge = 0.0;
  std::vector<int> degenerate_bands; // bands whose references carried no energy

  int references() const { return static_cast<int>(factors.cols()); }
  std::string to_json() const;
};

/// Ridge default: `relative` times the mean per-band reference power.
double default_ridge(std::vector<CMatrix> const &ref_rows, BandPartition const &partition, double relative = 1e-9);

/// Per band: argmin_c sum_bins |RF - sum_i c_i Ref_i|^2 through (Gram + ridge I) c = Ref^H RF.
TransferModel estimate_transfer(CMatrix const &rf_rows, std::vector<CMatrix> const &ref_rows,
                                BandPartition const &partition, double ridge);

/// Subtracts the transferred references from every row.
KSpaceMatrix apply_cancellation(KSpaceMatrix const &rf, std::vector<KSpaceMatrix> const &refs,
                                TransferModel const &model);

struct PostConfig {
  int bands = 8;
  PeripheryPolicy periphery = PeripheryPolicy::first_rows(1);
  double ridge_relative = 1e-9;
  std::optional<double> ridge_absolute;
};

struct PostResult {
  KSpaceMatrix cleaned;
  TransferModel model;
};

/// select_periphery + estimate_transfer + apply_cancellation.
PostResult post_process(KSpaceMatrix const &rf, std::vector<KSpaceMatrix> const &refs, PostConfig const &config);

inline constexpr double kResidualFloorDb = -300.0;

struct SuppressionMetric {
  std::vector<double> row_rms_before;  // RMS of (before - clean) per row
  std::vector<double> row_rms_after;
  double power_before = 0.0;           // mean |before - clean|^2
  double power_after = 0.0;
  double residual_db = 0.0;            // 10 log10(power_after / power_before)
  double suppression = 0.0;            // 1 - sqrt(power_after / power_before)
};

SuppressionMetric emi_suppression_metric(KSpaceMatrix const &before, KSpaceMatrix const &after,
                                         KSpaceMatrix const &clean);

} // namespace ulfemi
