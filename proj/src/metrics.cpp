#include "isac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace isac {

namespace {

inline double dist_sq(const Point5D& a, const Point5D& b) {
  double acc = 0.0;
  for (int d = 0; d < 5; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

// Exact 5D kd-tree for nearest-neighbor queries. Distances are evaluated with
// the same dist_sq as the brute-force scan, so minima agree bit for bit.
class KdTree5 {
 public:
  explicit KdTree5(const std::vector<Point5D>& pts) : pts_(pts) {
    order_.resize(pts.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * pts.size());
    root_ = build(0, pts.size());
  }

  double nearest_sq(const Point5D& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, best);
    return best;
  }

 private:
  struct Node {
    int axis = -1;          // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t begin = 0, end = 0;
  };

  int build(std::size_t begin, std::size_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    const std::size_t count = end - begin;
    if (count <= 8) {
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size() - 1);
    }
    // widest dimension split at the median
    Point5D lo = pts_[order_[begin]], hi = pts_[order_[begin]];
    for (std::size_t i = begin + 1; i < end; ++i) {
      for (int d = 0; d < 5; ++d) {
        lo[d] = std::min(lo[d], pts_[order_[i]][d]);
        hi[d] = std::max(hi[d], pts_[order_[i]][d]);
      }
    }
    int axis = 0;
    double width = hi[0] - lo[0];
    for (int d = 1; d < 5; ++d) {
      if (hi[d] - lo[d] > width) {
        width = hi[d] - lo[d];
        axis = d;
      }
    }
    const std::size_t mid = begin + count / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t i, std::size_t j) { return pts_[i][axis] < pts_[j][axis]; });
    node.axis = axis;
    node.split = pts_[order_[mid]][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(int idx, const Point5D& q, double& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(idx)];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const double d = dist_sq(q, pts_[order_[i]]);
        if (d < best) best = d;
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search(near, q, best);
    if (delta * delta < best) search(far, q, best);
  }

  const std::vector<Point5D>& pts_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

double directed_mean_indexed(const std::vector<Point5D>& from, const KdTree5& tree) {
  double acc = 0.0;
  for (const auto& p : from) acc += tree.nearest_sq(p);
  return acc / static_cast<double>(from.size());
}

double directed_mean_brute(const std::vector<Point5D>& from,
                           const std::vector<Point5D>& to) {
  double acc = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, dist_sq(p, q));
    acc += best;
  }
  return acc / static_cast<double>(from.size());
}

void require_nonempty(const PointCloud5D& a, const PointCloud5D& b) {
  if (a.points.empty() || b.points.empty()) {
    throw std::invalid_argument("chamfer: empty cloud");
  }
}

}  // namespace

double chamfer(const PointCloud5D& a, const PointCloud5D& b) {
  require_nonempty(a, b);
  const KdTree5 tree_b(b.points);
  const KdTree5 tree_a(a.points);
  return directed_mean_indexed(a.points, tree_b) +
         directed_mean_indexed(b.points, tree_a);
}

double chamfer_bruteforce(const PointCloud5D& a, const PointCloud5D& b) {
  require_nonempty(a, b);
  return directed_mean_brute(a.points, b.points) +
         directed_mean_brute(b.points, a.points);
}

double mcd_db_from_values(const std::vector<double>& chamfer_values) {
  if (chamfer_values.empty()) throw std::invalid_argument("mcd: empty pair list");
  double mean = 0.0;
  for (double v : chamfer_values) mean += v;
  mean /= static_cast<double>(chamfer_values.size());
  return 10.0 * std::log10(std::max(mean, 1e-12));
}

double mcd_db(const std::vector<std::pair<PointCloud5D, PointCloud5D>>& pairs) {
  std::vector<double> values;
  values.reserve(pairs.size());
  for (const auto& [truth, estimate] : pairs) values.push_back(chamfer(truth, estimate));
  return mcd_db_from_values(values);
}

double nmse(const ChannelMatrix& truth, const ChannelMatrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw std::invalid_argument("nmse: dimension mismatch");
  }
  const double ref = truth.squaredNorm();
  if (ref <= 0.0) throw std::invalid_argument("nmse: zero-norm reference");
  return (truth - estimate).squaredNorm() / ref;
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "sample_id,chamfer,mcd_contribution\n" << std::setprecision(17);
  const double n = static_cast<double>(report.per_sample_chamfer.size());
  for (std::size_t i = 0; i < report.per_sample_chamfer.size(); ++i) {
    out << i << ',' << report.per_sample_chamfer[i] << ','
        << report.per_sample_chamfer[i] / n << '\n';
  }
  out << "# mcd_db = " << report.mcd_db << "\n";
  if (report.channel_nmse >= 0.0) out << "# channel_nmse = " << report.channel_nmse << "\n";
}

}  // namespace isac
