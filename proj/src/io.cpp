#include "isac/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts unsupported");

namespace isac {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

double get_f64(std::ifstream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void check_magic(std::ifstream& in, const char* magic, const std::string& path) {
  char buf[8] = {};
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0) {
    throw std::runtime_error(path + ": bad magic");
  }
}

}  // namespace

void save_channel(const std::string& path, const ChannelMatrix& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("ISACCH1\0", 8);
  put_u32(out, static_cast<std::uint32_t>(h.rows()));
  put_u32(out, static_cast<std::uint32_t>(h.cols()));
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      put_f64(out, h(r, c).real());
      put_f64(out, h(r, c).imag());
    }
  }
}

ChannelMatrix load_channel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  check_magic(in, "ISACCH1\0", path);
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t cols = get_u32(in);
  ChannelMatrix h(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const double re = get_f64(in);
      const double im = get_f64(in);
      h(r, c) = Cplx(re, im);
    }
  }
  if (!in) throw std::runtime_error(path + ": truncated channel file");
  return h;
}

void save_voxels(const std::string& path, const VoxelContrast& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("ISACVX1\0", 8);
  for (int a = 0; a < 3; ++a) put_u32(out, static_cast<std::uint32_t>(grid.dims[a]));
  put_f64(out, grid.voxel_edge_m);
  for (int a = 0; a < 3; ++a) put_f64(out, grid.origin_m[a]);
  for (const Cplx& v : grid.chi) {
    put_f64(out, v.real());
    put_f64(out, v.imag());
  }
}

VoxelContrast load_voxels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  check_magic(in, "ISACVX1\0", path);
  VoxelContrast grid;
  for (int a = 0; a < 3; ++a) grid.dims[a] = static_cast<int>(get_u32(in));
  grid.voxel_edge_m = get_f64(in);
  for (int a = 0; a < 3; ++a) grid.origin_m[a] = get_f64(in);
  grid.chi.resize(grid.cell_count());
  for (Cplx& v : grid.chi) {
    const double re = get_f64(in);
    const double im = get_f64(in);
    v = Cplx(re, im);
  }
  if (!in) throw std::runtime_error(path + ": truncated voxel file");
  return grid;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  char ca, cb;
  while (true) {
    const bool ga = static_cast<bool>(fa.get(ca));
    const bool gb = static_cast<bool>(fb.get(cb));
    if (ga != gb) return false;
    if (!ga) return true;
    if (ca != cb) return false;
  }
}

}  // namespace isac
