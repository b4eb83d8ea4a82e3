#include "isac/cloud.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "isac/constants.hpp"

namespace isac {

Cplx contrast_of(double eps_r, double sigma_s_per_m, double omega) {
  if (eps_r < 1.0) throw std::domain_error("contrast_of: eps_r < 1 is unphysical here");
  if (sigma_s_per_m < 0.0) throw std::domain_error("contrast_of: negative conductivity");
  if (omega <= 0.0) throw std::domain_error("contrast_of: omega must be positive");
  return Cplx(eps_r - 1.0, -sigma_s_per_m / (kVacuumPermittivity * omega));
}

PointCloud5D normalize_cloud(const std::vector<PhysicalPoint>& pts, double omega,
                             const NormalizeOptions& opt) {
  if (pts.size() < 2) {
    throw std::invalid_argument("normalize_cloud: need at least 2 points");
  }
  if (omega <= 0.0) throw std::domain_error("normalize_cloud: omega must be positive");
  const double n = static_cast<double>(pts.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += Vec3(p.x, p.y, p.z);
  mean /= n;

  Vec3 scale;
  if (opt.use_std) {
    Vec3 var = Vec3::Zero();
    for (const auto& p : pts) {
      const Vec3 d = Vec3(p.x, p.y, p.z) - mean;
      var += d.cwiseProduct(d);
    }
    var /= n;
    for (int a = 0; a < 3; ++a) {
      const double s = std::sqrt(var[a]);
      if (s < 1e-12) {
        if (opt.fixed_scale_m > 0.0) {
          scale[a] = opt.fixed_scale_m;
        } else {
          throw std::domain_error("normalize_cloud: degenerate axis and no fallback scale");
        }
      } else {
        scale[a] = s;
      }
    }
  } else {
    if (opt.fixed_scale_m <= 0.0) {
      throw std::invalid_argument("normalize_cloud: fixed scale must be positive");
    }
    scale = Vec3::Constant(opt.fixed_scale_m);
  }

  PointCloud5D cloud;
  cloud.center_m = mean;
  cloud.scale_m = scale;
  cloud.points.reserve(pts.size());
  const double sigma_norm = 1.0 / (kVacuumPermittivity * omega);
  for (const auto& p : pts) {
    Point5D q;
    q[0] = (p.x - mean.x()) / scale.x();
    q[1] = (p.y - mean.y()) / scale.y();
    q[2] = (p.z - mean.z()) / scale.z();
    q[3] = p.eps_r;
    q[4] = p.sigma * sigma_norm;
    cloud.points.push_back(q);
  }
  return cloud;
}

std::vector<PhysicalPoint> denormalize_cloud(const PointCloud5D& cloud, double omega) {
  if (omega <= 0.0) throw std::domain_error("denormalize_cloud: omega must be positive");
  std::vector<PhysicalPoint> pts;
  pts.reserve(cloud.points.size());
  const double sigma_phys = kVacuumPermittivity * omega;
  for (const auto& q : cloud.points) {
    PhysicalPoint p;
    p.x = cloud.center_m.x() + q[0] * cloud.scale_m.x();
    p.y = cloud.center_m.y() + q[1] * cloud.scale_m.y();
    p.z = cloud.center_m.z() + q[2] * cloud.scale_m.z();
    p.eps_r = q[3];
    p.sigma = q[4] * sigma_phys;
    pts.push_back(p);
  }
  return pts;
}

void write_cloud_csv(const std::string& path, const std::vector<PhysicalPoint>& pts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "x,y,z,eps_r,sigma_S_per_m\n" << std::setprecision(17);
  for (const auto& p : pts) {
    out << p.x << ',' << p.y << ',' << p.z << ',' << p.eps_r << ',' << p.sigma << '\n';
  }
}

std::vector<PhysicalPoint> read_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "x,y,z,eps_r,sigma_S_per_m") {
    throw std::runtime_error(path + ": bad cloud CSV header");
  }
  std::vector<PhysicalPoint> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    PhysicalPoint p;
    char c;
    if (!(row >> p.x >> c >> p.y >> c >> p.z >> c >> p.eps_r >> c >> p.sigma)) {
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    }
    pts.push_back(p);
  }
  return pts;
}

void write_cloud_ply(const std::string& path, const std::vector<PhysicalPoint>& pts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << pts.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property float eps_r\nproperty float sigma\n";
  out << "end_header\n";
  out << std::setprecision(9);
  for (const auto& p : pts) {
    out << p.x << ' ' << p.y << ' ' << p.z << ' ' << p.eps_r << ' ' << p.sigma << '\n';
  }
}

}  // namespace isac
