#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace scdonor {

// Observed panel: one target series, N donor series, a strictly increasing
// integer time grid, and the index of the first post-intervention time point.
// Donor values live in a T x N matrix (rows are time points). Instances are
// treated as immutable after construction; all operations return new panels.
struct Panel {
  std::vector<std::int64_t> times;
  Eigen::VectorXd target;
  Eigen::MatrixXd donors;  // T x N, column i is donor i
  std::vector<std::string> donor_ids;
  Eigen::Index intervention_time = 0;  // 0-based index of first post point

  Eigen::Index n_times() const { return static_cast<Eigen::Index>(times.size()); }
  Eigen::Index n_donors() const { return donors.cols(); }
  Eigen::Index n_pre() const { return intervention_time; }
  Eigen::Index n_post() const { return n_times() - intervention_time; }

  // Index of a donor id; validation error if absent.
  Eigen::Index donor_index(const std::string& id) const;

  // Throws a validation error if any structural invariant is broken:
  // increasing times, matching lengths, at least one pre and one post point,
  // finite values.
  void validate() const;
};

// Per-donor affine normalization parameters, computed on pre-intervention
// data only (sample standard deviation, divisor n-1).
struct NormalizationParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

// Donor series are z-scored with pre-intervention statistics; the target is
// left untouched so effect estimates stay in outcome units.
std::pair<Panel, NormalizationParams> normalize(const Panel& panel);

// Inverse of normalize() on the donor block.
Panel denormalize(const Panel& panel, const NormalizationParams& params);

// Replaces target and donor series by per-bucket means. Buckets are anchored
// at the intervention: pre buckets extend backward from the last pre point,
// post buckets forward from the first post point, so no bucket mixes pre and
// post data. Partial buckets at the earliest and latest times are dropped.
// Times of the result are bucket ordinals starting at 0; bucket == 1 returns
// the panel unchanged.
Panel time_average(const Panel& panel, int bucket);

// Reads a panel from CSV. The file must have an integer `time` column, the
// named target column, and at least one further numeric column; every other
// column becomes a donor (in file order). Rows are sorted by time.
// `intervention_time` is a time value and must equal one of the observed
// times, with at least one observation before it.
Panel ingest_csv(const std::string& path, const std::string& target_column,
                 std::int64_t intervention_time);

// Writes `time,target,<donor ids...>` with 17 significant digits so that
// ingest_csv(emit_csv(p)) reproduces the panel exactly.
void emit_csv(const Panel& panel, const std::string& path);

}  // namespace scdonor
