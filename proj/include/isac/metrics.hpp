#pragma once

#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac {

// Symmetric Chamfer pseudo-distance between normalized 5D clouds:
// mean of squared nearest-neighbor distances in both directions.
// Exact: the spatial index returns the same minima as the O(N^2) scan.
double chamfer(const PointCloud5D& a, const PointCloud5D& b);

// Brute-force reference scan (kept as the oracle for the indexed version).
double chamfer_bruteforce(const PointCloud5D& a, const PointCloud5D& b);

// 10*log10 of the mean Chamfer distance over (truth, estimate) pairs, with
// the mean clamped below at 1e-12 before the log.
double mcd_db(const std::vector<std::pair<PointCloud5D, PointCloud5D>>& pairs);
double mcd_db_from_values(const std::vector<double>& chamfer_values);

// ||truth - estimate||_F^2 / ||truth||_F^2; throws on zero-norm reference.
double nmse(const ChannelMatrix& truth, const ChannelMatrix& estimate);

struct EvalReport {
  std::vector<double> per_sample_chamfer;
  double mcd_db = 0.0;
  double channel_nmse = -1.0;  // optional, < 0 when absent
};

void write_eval_csv(const std::string& path, const EvalReport& report);

}  // namespace isac
