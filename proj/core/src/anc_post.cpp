#include "ulfemi/anc_post.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

namespace ulfemi {

BandPartition::BandPartition(std::vector<int> boundaries) : boundaries_(std::move(boundaries)) {
  if (boundaries_.size() < 2 || boundaries_.front() != 0) {
    throw InvalidSpecError("band partition must start at bin 0 and hold at least one band");
  }
  for (std::size_t i = 1; i < boundaries_.size(); ++i) {
    if (boundaries_[i] <= boundaries_[i - 1]) {
      throw InvalidSpecError(fmt::format("band {} is empty or reversed", i - 1));
    }
  }
}

BandPartition BandPartition::equal(int n_bins, int bands) {
  if (bands < 1 || bands > n_bins) {
    throw InvalidSpecError(fmt::format("cannot split {} bins into {} non-empty bands", n_bins, bands));
  }
  std::vector<int> b;
  for (int i = 0; i <= bands; ++i) {
    b.push_back(static_cast<int>(static_cast<long>(i) * n_bins / bands));
  }
  return BandPartition(std::move(b));
}

int BandPartition::band_of(int bin) const {
  if (bin < 0 || bin >= n_bins()) {
    throw InvalidInputError(fmt::format("bin {} outside [0, {})", bin, n_bins()));
  }
  auto const it = std::upper_bound(boundaries_.begin(), boundaries_.end(), bin);
  return static_cast<int>(it - boundaries_.begin()) - 1;
}

std::string PeripheryPolicy::describe() const {
  return fmt::format("{}({})", kind == Kind::FirstRows ? "first-rows" : "outer-phase-encodes", n);
}

std::vector<int> select_periphery(KSpaceMatrix const &k, PeripheryPolicy const &policy) {
  int const rows = static_cast<int>(k.n_phase());
  if (policy.n < 1 || policy.n >= rows) {
    throw PolicyError(fmt::format("periphery row count must lie in [1, {}) (got {})", rows, policy.n));
  }
  std::vector<int> out;
  if (policy.kind == PeripheryPolicy::Kind::FirstRows) {
    for (int i = 0; i < policy.n; ++i) out.push_back(i);
    return out;
  }
  int const top = (policy.n + 1) / 2;
  for (int i = 0; i < top; ++i) out.push_back(i);
  for (int i = rows - (policy.n - top); i < rows; ++i) out.push_back(i);
  return out;
}

CMatrix extract_rows(KSpaceMatrix const &k, std::vector<int> const &rows) {
  CMatrix out(static_cast<Eigen::Index>(rows.size()), k.n_read());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= k.n_phase()) {
      throw InvalidInputError(fmt::format("row {} outside the k-space", rows[i]));
    }
    out.row(static_cast<Eigen::Index>(i)) = k.data.row(rows[i]);
  }
  return out;
}

std::string TransferModel::to_json() const {
  nlohmann::ordered_json j;
  j["bands"] = partition.bands();
  j["band_boundaries"] = partition.boundaries();
  j["references"] = references();
  j["periphery_rows"] = periphery_rows;
  j["ridge"] = ridge;
  j["degenerate_bands"] = degenerate_bands;
  nlohmann::ordered_json f = nlohmann::ordered_json::array();
  for (Eigen::Index b = 0; b < factors.rows(); ++b) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < factors.cols(); ++i) {
      row.push_back({factors(b, i).real(), factors(b, i).imag()});
    }
    f.push_back(row);
  }
  j["factors"] = f;
  return j.dump(2);
}

namespace {

CMatrix row_spectra(CMatrix const &rows) {
  CMatrix out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    std::vector<cx> const s = fft({rows.row(r).data(), static_cast<std::size_t>(rows.cols())});
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out(r, c) = s[static_cast<std::size_t>(c)];
  }
  return out;
}

void check_shapes(CMatrix const &rf, std::vector<CMatrix> const &refs, BandPartition const &partition) {
  for (CMatrix const &r : refs) {
    if (r.rows() != rf.rows() || r.cols() != rf.cols()) {
      throw InvalidInputError("reference rows do not match the receive rows");
    }
  }
  if (partition.n_bins() != rf.cols()) {
    throw InvalidInputError(
      fmt::format("band partition covers {} bins but rows hold {} samples", partition.n_bins(), rf.cols()));
  }
}

} // namespace

double default_ridge(std::vector<CMatrix> const &ref_rows, BandPartition const &partition, double relative) {
  if (ref_rows.empty()) return 0.0;
  double total = 0.0;
  for (CMatrix const &r : ref_rows) {
    CMatrix const s = row_spectra(r);
    for (int b = 0; b < partition.bands(); ++b) {
      auto const [lo, hi] = partition.range(b);
      total += s.middleCols(lo, hi - lo).squaredNorm();
    }
  }
  return relative * total / static_cast<double>(ref_rows.size() * static_cast<std::size_t>(partition.bands()));
}

TransferModel estimate_transfer(CMatrix const &rf_rows, std::vector<CMatrix> const &ref_rows,
                                BandPartition const &partition, double ridge) {
  check_shapes(rf_rows, ref_rows, partition);
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw InvalidSpecError("ridge parameter must be finite and >= 0");
  }
  Eigen::Index const nref = static_cast<Eigen::Index>(ref_rows.size());
  TransferModel model;
  model.partition = partition;
  model.ridge = ridge;
  model.factors = Eigen::MatrixXcd::Zero(partition.bands(), nref);
  if (nref == 0) return model;

  CMatrix const rf = row_spectra(rf_rows);
  std::vector<CMatrix> refs;
  for (CMatrix const &r : ref_rows) refs.push_back(row_spectra(r));

  for (int b = 0; b < partition.bands(); ++b) {
    auto const [lo, hi] = partition.range(b);
    Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(nref, nref);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nref);
    for (Eigen::Index i = 0; i < nref; ++i) {
      auto const ri = refs[static_cast<std::size_t>(i)].middleCols(lo, hi - lo);
      rhs(i) = (ri.conjugate().cwiseProduct(rf.middleCols(lo, hi - lo))).sum();
      for (Eigen::Index j = 0; j < nref; ++j) {
        auto const rj = refs[static_cast<std::size_t>(j)].middleCols(lo, hi - lo);
        gram(i, j) = (ri.conjugate().cwiseProduct(rj)).sum();
      }
    }
    if (gram.diagonal().real().sum() == 0.0) {
      model.degenerate_bands.push_back(b);
      continue;
    }
    gram.diagonal().array() += ridge;
    model.factors.row(b) = gram.completeOrthogonalDecomposition().solve(rhs).transpose();
  }
  if (!model.factors.allFinite()) {
    throw DegenerateError("transfer estimation produced non-finite factors");
  }
  return model;
}

KSpaceMatrix apply_cancellation(KSpaceMatrix const &rf, std::vector<KSpaceMatrix> const &refs,
                                TransferModel const &model) {
  if (model.partition.n_bins() != rf.n_read()) {
    throw InvalidInputError(fmt::format("model partition covers {} bins but k-space rows hold {}",
                                        model.partition.n_bins(), rf.n_read()));
  }
  if (static_cast<int>(refs.size()) != model.references()) {
    throw InvalidInputError(
      fmt::format("model expects {} references, {} supplied", model.references(), refs.size()));
  }
  for (KSpaceMatrix const &r : refs) {
    if (r.n_phase() != rf.n_phase() || r.n_read() != rf.n_read()) {
      throw InvalidInputError(fmt::format("reference '{}' does not match the receive k-space dimensions", r.channel));
    }
  }
  KSpaceMatrix out = rf;
  if (refs.empty() || (model.factors.array() == cx{}).all()) return out;

  std::size_t const n = static_cast<std::size_t>(rf.n_read());
  for (Eigen::Index p = 0; p < rf.n_phase(); ++p) {
    std::vector<cx> spec = fft({rf.data.row(p).data(), n});
    for (std::size_t i = 0; i < refs.size(); ++i) {
      std::vector<cx> const rs = fft({refs[i].data.row(p).data(), n});
      for (int b = 0; b < model.partition.bands(); ++b) {
        cx const c = model.factors(b, static_cast<Eigen::Index>(i));
        auto const [lo, hi] = model.partition.range(b);
        for (int k = lo; k < hi; ++k) {
          spec[static_cast<std::size_t>(k)] -= c * rs[static_cast<std::size_t>(k)];
        }
      }
    }
    std::vector<cx> const row = ifft(spec);
    for (std::size_t k = 0; k < n; ++k) out.data(p, static_cast<Eigen::Index>(k)) = row[k];
  }
  return out;
}

PostResult post_process(KSpaceMatrix const &rf, std::vector<KSpaceMatrix> const &refs, PostConfig const &config) {
  BandPartition const partition = BandPartition::equal(static_cast<int>(rf.n_read()), config.bands);
  std::vector<int> const rows = select_periphery(rf, config.periphery);
  CMatrix const rf_rows = extract_rows(rf, rows);
  std::vector<CMatrix> ref_rows;
  for (KSpaceMatrix const &r : refs) ref_rows.push_back(extract_rows(r, rows));
  double const ridge = config.ridge_absolute ? *config.ridge_absolute
                                             : default_ridge(ref_rows, partition, config.ridge_relative);
  TransferModel model = estimate_transfer(rf_rows, ref_rows, partition, ridge);
  model.periphery_rows = rows;
  KSpaceMatrix cleaned = apply_cancellation(rf, refs, model);
  return {std::move(cleaned), std::move(model)};
}

SuppressionMetric emi_suppression_metric(KSpaceMatrix const &before, KSpaceMatrix const &after,
                                         KSpaceMatrix const &clean) {
  if (before.data.rows() != clean.data.rows() || before.data.cols() != clean.data.cols() ||
      after.data.rows() != clean.data.rows() || after.data.cols() != clean.data.cols()) {
    throw InvalidInputError("suppression metric needs matching dimensions");
  }
  SuppressionMetric m;
  CMatrix const eb = before.data - clean.data;
  CMatrix const ea = after.data - clean.data;
  m.row_rms_before = row_rms(eb);
  m.row_rms_after = row_rms(ea);
  double const denom = static_cast<double>(std::max<Eigen::Index>(1, eb.size()));
  m.power_before = eb.squaredNorm() / denom;
  m.power_after = ea.squaredNorm() / denom;
  if (m.power_after == 0.0) {
    m.residual_db = m.power_before == 0.0 ? 0.0 : kResidualFloorDb;
    m.suppression = m.power_before == 0.0 ? 0.0 : 1.0;
  } else if (m.power_before == 0.0) {
    m.residual_db = -kResidualFloorDb;
    m.suppression = 0.0;
  } else {
    double const ratio = m.power_after / m.power_before;
    m.residual_db = std::max(kResidualFloorDb, 10.0 * std::log10(ratio));
    m.suppression = 1.0 - std::sqrt(ratio);
  }
  return m;
}

} // namespace ulfemi
