#include <doctest.h>

#include <cmath>
#include <fstream>

#include "isac/cloud.hpp"
#include "isac/config.hpp"
#include "isac/constants.hpp"
#include "isac/io.hpp"
#include "isac/rng.hpp"
#include "support/util.hpp"

using namespace isac;

TEST_CASE("contrast of air is exactly zero") {
  for (double omega : {1.0, 1e6, 2.0 * kPi * 2.99e9}) {
    const Cplx chi = contrast_of(1.0, 0.0, omega);
    CHECK(chi.real() == 0.0);
    CHECK(chi.imag() == 0.0);
  }
}

TEST_CASE("contrast of a lossless dielectric is purely real") {
  const Cplx chi = contrast_of(2.0, 0.0, 123.0);
  CHECK(chi == Cplx(1.0, 0.0));
}

TEST_CASE("lossy contrast value against an independent evaluation") {
  // independent arithmetic with its own constants
  const double omega = 2.0 * 3.14159265358979323846 * 2.99e9;
  const double eps0 = 8.8541878128e-12;
  const double expected_im = -0.01 / (eps0 * omega);
  const Cplx chi = contrast_of(2.0, 0.01, omega);
  CHECK(chi.real() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(chi.imag() == doctest::Approx(expected_im).epsilon(1e-12));
}

TEST_CASE("contrast sign conventions hold over random physical inputs") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const double eps_r = 1.0 + 9.0 * rng.uniform();
    const double sigma = 2.0 * rng.uniform();
    const double omega = std::pow(10.0, 6.0 + 4.0 * rng.uniform());
    const Cplx chi = contrast_of(eps_r, sigma, omega);
    CHECK(chi.real() >= 0.0);
    CHECK(chi.imag() <= 0.0);
  }
}

TEST_CASE("contrast rejects unphysical inputs") {
  CHECK_THROWS_AS(contrast_of(0.5, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(contrast_of(2.0, -0.1, 1.0), std::domain_error);
  CHECK_THROWS_AS(contrast_of(2.0, 0.1, 0.0), std::domain_error);
}

TEST_CASE("two-point cloud normalizes to unit coordinates on the live axis") {
  std::vector<PhysicalPoint> pts(2);
  pts[0] = {-1.0, 0.0, 0.0, 2.0, 0.0};
  pts[1] = {1.0, 0.0, 0.0, 2.0, 0.0};
  NormalizeOptions opt;
  opt.fixed_scale_m = 0.5;  // fallback for the two flat axes
  const PointCloud5D cloud = normalize_cloud(pts, 1e9, opt);
  CHECK(cloud.points[0][0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(cloud.points[1][0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cloud.scale_m.x() == doctest::Approx(1.0));
  CHECK(cloud.scale_m.y() == 0.5);
}

TEST_CASE("degenerate axis without fallback is an error") {
  std::vector<PhysicalPoint> pts(3);
  pts[0] = {-1.0, 0.0, 0.0, 2.0, 0.0};
  pts[1] = {0.0, 0.0, 0.0, 2.0, 0.0};
  pts[2] = {1.0, 0.0, 0.0, 2.0, 0.0};
  CHECK_THROWS_AS(normalize_cloud(pts, 1e9, {}), std::domain_error);
}

TEST_CASE("normalize/denormalize round trip and moment invariants") {
  Rng rng(42);
  const double omega = 2.0 * kPi * 2.99e9;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<PhysicalPoint> pts;
    const int n = 16 + static_cast<int>(rng.index(64));
    for (int i = 0; i < n; ++i) {
      PhysicalPoint p;
      p.x = 10.0 + rng.gauss();
      p.y = rng.gauss() * 0.2;
      p.z = rng.gauss() * 3.0;
      p.eps_r = 1.0 + 4.0 * rng.uniform();
      p.sigma = 0.05 * rng.uniform();
      pts.push_back(p);
    }
    const PointCloud5D cloud = normalize_cloud(pts, omega);

    Vec3 mean = Vec3::Zero(), var = Vec3::Zero();
    for (const auto& q : cloud.points) {
      mean += Vec3(q[0], q[1], q[2]);
    }
    mean /= n;
    for (const auto& q : cloud.points) {
      const Vec3 d = Vec3(q[0], q[1], q[2]) - mean;
      var += d.cwiseProduct(d);
    }
    var /= n;
    for (int a = 0; a < 3; ++a) {
      CHECK(std::abs(mean[a]) < 1e-9);
      CHECK(std::abs(std::sqrt(var[a]) - 1.0) < 1e-9);
    }

    const auto back = denormalize_cloud(cloud, omega);
    for (int i = 0; i < n; ++i) {
      CHECK(back[i].x == doctest::Approx(pts[i].x).epsilon(1e-9));
      CHECK(back[i].y == doctest::Approx(pts[i].y).epsilon(1e-9));
      CHECK(back[i].z == doctest::Approx(pts[i].z).epsilon(1e-9));
      CHECK(back[i].eps_r == doctest::Approx(pts[i].eps_r).epsilon(1e-12));
      CHECK(back[i].sigma == doctest::Approx(pts[i].sigma).epsilon(1e-9));
    }
  }
}

TEST_CASE("denormalize maps zero coordinates to the stored center") {
  PointCloud5D cloud;
  cloud.center_m = Vec3(4, 5, 6);
  cloud.scale_m = Vec3(1, 2, 3);
  Point5D q = Point5D::Zero();
  q[3] = 2.0;
  cloud.points.push_back(q);
  Point5D unit;
  unit << 1, 1, 1, 2, 0;
  cloud.points.push_back(unit);
  const auto pts = denormalize_cloud(cloud, 1e9);
  CHECK(pts[0].x == 4.0);
  CHECK(pts[0].y == 5.0);
  CHECK(pts[0].z == 6.0);
  CHECK(pts[1].x == 5.0);  // componentwise scaling: offset (1,2,3)
  CHECK(pts[1].y == 7.0);
  CHECK(pts[1].z == 9.0);
}

TEST_CASE("cloud CSV round trip is bit exact") {
  Rng rng(3);
  std::vector<PhysicalPoint> pts;
  for (int i = 0; i < 37; ++i) {
    pts.push_back({rng.gauss() * 13.3, rng.gauss(), rng.gauss(), 1.0 + rng.uniform(),
                   rng.uniform() * 0.01});
  }
  const std::string dir = isac::testing::scratch_dir("cloudcsv");
  write_cloud_csv(dir + "/c.csv", pts);
  const auto back = read_cloud_csv(dir + "/c.csv");
  REQUIRE(back.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(back[i].x == pts[i].x);
    CHECK(back[i].y == pts[i].y);
    CHECK(back[i].z == pts[i].z);
    CHECK(back[i].eps_r == pts[i].eps_r);
    CHECK(back[i].sigma == pts[i].sigma);
  }
  write_cloud_csv(dir + "/c2.csv", back);
  CHECK(files_identical(dir + "/c.csv", dir + "/c2.csv"));
}

TEST_CASE("channel and voxel binary formats round trip") {
  const std::string dir = isac::testing::scratch_dir("binio");
  Rng rng(9);
  ChannelMatrix h(3, 5);
  for (int i = 0; i < h.size(); ++i) h(i / 5, i % 5) = rng.cgauss();
  save_channel(dir + "/h.chan", h);
  const ChannelMatrix h2 = load_channel(dir + "/h.chan");
  CHECK((h - h2).cwiseAbs().maxCoeff() == 0.0);

  VoxelContrast g;
  g.dims[0] = 2;
  g.dims[1] = 3;
  g.dims[2] = 4;
  g.voxel_edge_m = 0.125;
  g.origin_m = Vec3(2.5, -0.5, -0.5);
  g.chi.resize(g.cell_count());
  for (auto& v : g.chi) v = rng.cgauss();
  save_voxels(dir + "/g.vox", g);
  const VoxelContrast g2 = load_voxels(dir + "/g.vox");
  CHECK(g2.dims[2] == 4);
  CHECK(g2.voxel_edge_m == g.voxel_edge_m);
  CHECK(g2.origin_m == g.origin_m);
  for (std::size_t i = 0; i < g.chi.size(); ++i) CHECK(g.chi[i] == g2.chi[i]);

  CHECK_THROWS(load_channel(dir + "/g.vox"));  // magic mismatch
}

TEST_CASE("system config load, save, and validation") {
  const std::string dir = isac::testing::scratch_dir("config");
  {
    std::ofstream out(dir + "/sys.cfg");
    out << "# demo configuration\n";
    out << "carrier_frequency_hz = 2.99e9\n";
    out << "n_tx = 4\nn_rx = 4\nsymbol_count = 16\n";
    out << "max_power_w = 0.01\n";
  }
  const SystemConfig cfg = SystemConfig::load(dir + "/sys.cfg");
  CHECK(cfg.wavelength_m == doctest::Approx(299792458.0 / 2.99e9).epsilon(1e-12));
  CHECK(cfg.tx_antenna_positions.size() == 4);
  // tx ULA along y, half-wavelength spacing, centered at the origin
  CHECK(cfg.tx_antenna_positions[0].y() ==
        doctest::Approx(-1.5 * cfg.wavelength_m / 2).epsilon(1e-12));
  CHECK(cfg.tx_antenna_positions[0].x() == 0.0);
  CHECK(cfg.rx_antenna_positions[3].z() ==
        doctest::Approx(1.5 * cfg.wavelength_m / 2).epsilon(1e-12));

  cfg.save(dir + "/sys2.cfg");
  const SystemConfig cfg2 = SystemConfig::load(dir + "/sys2.cfg");
  CHECK(cfg2.n_tx == cfg.n_tx);
  CHECK(cfg2.max_power_w == cfg.max_power_w);

  {
    std::ofstream out(dir + "/bad.cfg");
    out << "carrier_frequency_hz = 2.99e9\nunknown_knob = 1\n";
  }
  CHECK_THROWS_AS(SystemConfig::load(dir + "/bad.cfg"), std::invalid_argument);

  {
    std::ofstream out(dir + "/badlambda.cfg");
    out << "carrier_frequency_hz = 2.99e9\nwavelength_m = 0.11\n";
  }
  CHECK_THROWS_AS(SystemConfig::load(dir + "/badlambda.cfg"), std::invalid_argument);

  CHECK(file_fingerprint(dir + "/sys.cfg") != file_fingerprint(dir + "/sys2.cfg"));
}

TEST_CASE("dbm conversion") {
  CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0));
  CHECK(dbm_to_watts(15.0) == doctest::Approx(0.0316227766016838).epsilon(1e-12));
  CHECK(watts_to_dbm(dbm_to_watts(-104.0)) == doctest::Approx(-104.0).epsilon(1e-12));
}

TEST_CASE("rng determinism and derivation") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
  // derived substreams do not consume parent state and differ by tag
  Rng parent(5);
  Rng d1 = parent.derive(1);
  Rng d2 = parent.derive(2);
  Rng d1_again = parent.derive(1);
  CHECK(d1.bits() == d1_again.bits());
  CHECK(d1.derive(3).bits() != d2.derive(3).bits());
  // gaussian moments sanity
  Rng g(77);
  double mean = 0.0, var = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = g.gauss();
    mean += v;
    var += v * v;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}
