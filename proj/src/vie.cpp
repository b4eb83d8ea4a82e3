#include "isac/vie.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "isac/green.hpp"

namespace isac {

namespace {

// FFTW's planner mutates global state; serialize plan create/destroy.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline Cplx* as_cplx(fftw_complex* p) { return reinterpret_cast<Cplx*>(p); }

}  // namespace

FieldOnGrid FieldOnGrid::zeros_like(const VoxelContrast& grid) {
  FieldOnGrid f;
  f.dims[0] = grid.dims[0];
  f.dims[1] = grid.dims[1];
  f.dims[2] = grid.dims[2];
  f.voxel_edge_m = grid.voxel_edge_m;
  f.origin_m = grid.origin_m;
  for (auto& c : f.comp) c.assign(grid.cell_count(), Cplx(0, 0));
  return f;
}

struct LsOperator::Impl {
  int n[3] = {0, 0, 0};       // grid dims
  int m[3] = {0, 0, 0};       // padded circulant dims
  std::size_t cells = 0;      // n0*n1*n2
  std::size_t padded = 0;     // m0*m1*m2
  double dv = 0.0;
  Cplx self_term{0, 0};
  // Spectra of the 6 unique dyadic kernel components: xx, yy, zz, xy, xz, yz.
  std::array<std::vector<Cplx>, 6> kernel_hat;
  // Scratch: three forward spectra and one padded work array.
  fftw_complex* work = nullptr;
  std::array<std::vector<Cplx>, 3> u_hat;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (work) fftw_free(work);
  }

  std::size_t pad_index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(m[0]) *
               (static_cast<std::size_t>(iy) +
                static_cast<std::size_t>(m[1]) * static_cast<std::size_t>(iz));
  }
};

LsOperator::LsOperator(const VoxelContrast& grid, double k_b)
    : impl_(new Impl), k_b_(k_b) {
  auto& im = *impl_;
  for (int a = 0; a < 3; ++a) {
    im.n[a] = grid.dims[a];
    im.m[a] = grid.dims[a] > 1 ? 2 * grid.dims[a] : 1;
  }
  im.cells = grid.cell_count();
  im.padded = static_cast<std::size_t>(im.m[0]) * im.m[1] * im.m[2];
  im.dv = grid.voxel_volume();
  im.self_term = vie_self_term(k_b, im.dv);

  im.work = fftw_alloc_complex(im.padded);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    // x-fastest storage maps to FFTW's row-major (z, y, x) index order
    im.fwd = fftw_plan_dft_3d(im.m[2], im.m[1], im.m[0], im.work, im.work,
                              FFTW_FORWARD, FFTW_ESTIMATE);
    im.bwd = fftw_plan_dft_3d(im.m[2], im.m[1], im.m[0], im.work, im.work,
                              FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (auto& v : im.u_hat) v.resize(im.padded);

  // Kernel: dv * dyadic_green at every nonzero voxel-center offset, embedded
  // into the circulant grid; zero offset handled by the analytic self term.
  const double edge = grid.voxel_edge_m;
  for (int c = 0; c < 6; ++c) im.kernel_hat[c].assign(im.padded, Cplx(0, 0));
  static const int comp_i[6] = {0, 1, 2, 0, 0, 1};
  static const int comp_j[6] = {0, 1, 2, 1, 2, 2};
  for (int dz = -(im.n[2] - 1); dz <= im.n[2] - 1; ++dz) {
    for (int dy = -(im.n[1] - 1); dy <= im.n[1] - 1; ++dy) {
      for (int dx = -(im.n[0] - 1); dx <= im.n[0] - 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const Vec3 offset(edge * dx, edge * dy, edge * dz);
        const Mat3c g = dyadic_green(offset, Vec3::Zero(), k_b);
        const int ix = dx >= 0 ? dx : dx + im.m[0];
        const int iy = dy >= 0 ? dy : dy + im.m[1];
        const int iz = dz >= 0 ? dz : dz + im.m[2];
        const std::size_t at = im.pad_index(ix, iy, iz);
        for (int c = 0; c < 6; ++c) {
          im.kernel_hat[c][at] = im.dv * g(comp_i[c], comp_j[c]);
        }
      }
    }
  }
  for (int c = 0; c < 6; ++c) {
    std::memcpy(im.work, im.kernel_hat[c].data(), sizeof(Cplx) * im.padded);
    fftw_execute(im.fwd);
    std::memcpy(im.kernel_hat[c].data(), im.work, sizeof(Cplx) * im.padded);
  }
}

LsOperator::~LsOperator() = default;

void LsOperator::convolve(const FieldOnGrid& u, FieldOnGrid& out) const {
  auto& im = *impl_;
  if (u.dims[0] != im.n[0] || u.dims[1] != im.n[1] || u.dims[2] != im.n[2]) {
    throw std::invalid_argument("LsOperator: field dims do not match kernel grid");
  }
  Cplx* work = as_cplx(im.work);

  // forward transforms of the three zero-padded components
  for (int c = 0; c < 3; ++c) {
    std::memset(im.work, 0, sizeof(Cplx) * im.padded);
    for (int iz = 0; iz < im.n[2]; ++iz) {
      for (int iy = 0; iy < im.n[1]; ++iy) {
        const std::size_t src = u.index(0, iy, iz);
        const std::size_t dst = im.pad_index(0, iy, iz);
        std::memcpy(work + dst, u.comp[c].data() + src, sizeof(Cplx) * im.n[0]);
      }
    }
    fftw_execute(im.fwd);
    std::memcpy(im.u_hat[c].data(), im.work, sizeof(Cplx) * im.padded);
  }

  // spectral multiply-accumulate per output component, then inverse transform
  static const int kmap[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
  const double scale = 1.0 / static_cast<double>(im.padded);
  for (int a = 0; a < 3; ++a) {
    for (std::size_t p = 0; p < im.padded; ++p) {
      work[p] = im.kernel_hat[kmap[a][0]][p] * im.u_hat[0][p] +
                im.kernel_hat[kmap[a][1]][p] * im.u_hat[1][p] +
                im.kernel_hat[kmap[a][2]][p] * im.u_hat[2][p];
    }
    fftw_execute(im.bwd);
    for (int iz = 0; iz < im.n[2]; ++iz) {
      for (int iy = 0; iy < im.n[1]; ++iy) {
        const std::size_t src = im.pad_index(0, iy, iz);
        const std::size_t dst = u.index(0, iy, iz);
        for (int ix = 0; ix < im.n[0]; ++ix) {
          out.comp[a][dst + ix] =
              work[src + ix] * scale + im.self_term * u.comp[a][dst + ix];
        }
      }
    }
  }
}

void LsOperator::apply(const VoxelContrast& grid, const FieldOnGrid& in,
                       FieldOnGrid& out) const {
  auto& im = *impl_;
  if (grid.dims[0] != im.n[0] || grid.dims[1] != im.n[1] || grid.dims[2] != im.n[2]) {
    throw std::invalid_argument("LsOperator: contrast dims do not match kernel grid");
  }
  FieldOnGrid scaled = in;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t v = 0; v < im.cells; ++v) scaled.comp[c][v] = grid.chi[v] * in.comp[c][v];
  }
  convolve(scaled, out);
  const Cplx k2(k_b_ * k_b_, 0.0);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t v = 0; v < im.cells; ++v) {
      out.comp[c][v] = in.comp[c][v] - k2 * out.comp[c][v];
    }
  }
}

FieldOnGrid apply_ls_operator(const VoxelContrast& grid, const FieldOnGrid& field,
                              double k_b) {
  LsOperator op(grid, k_b);
  FieldOnGrid out = FieldOnGrid::zeros_like(grid);
  op.apply(grid, field, out);
  return out;
}

namespace {

using CVec = std::vector<Cplx>;

Cplx cdot(const CVec& a, const CVec& b) {
  Cplx s(0, 0);
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double cnorm(const CVec& a) { return std::sqrt(std::abs(cdot(a, a))); }

}  // namespace

std::pair<std::vector<Cplx>, SolveReport> bicgstab(
    const std::function<void(const std::vector<Cplx>&, std::vector<Cplx>&)>& apply,
    const std::vector<Cplx>& rhs, double tol, int max_iter) {
  if (tol <= 0.0 || tol >= 1.0) throw std::invalid_argument("bicgstab: tol must be in (0,1)");
  if (max_iter < 1) throw std::invalid_argument("bicgstab: max_iter must be >= 1");

  const std::size_t n = rhs.size();
  CVec x(n, Cplx(0, 0));
  SolveReport report;
  const double bnorm = cnorm(rhs);
  if (bnorm == 0.0) {
    report.converged = true;
    return {x, report};
  }

  CVec r = rhs;  // r = b - A*0
  CVec r_shadow = r;
  CVec p(n, Cplx(0, 0)), v(n, Cplx(0, 0)), s(n), t(n), ax(n);
  Cplx rho_old(1, 0), alpha(1, 0), omega(1, 0);

  auto true_residual = [&](const CVec& xx) {
    apply(xx, ax);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::norm(ax[i] - rhs[i]);
    return std::sqrt(acc) / bnorm;
  };

  int iters_done = 0;
  double best_res = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int it = 1; it <= max_iter; ++it) {
    iters_done = it;
    // stagnation guard: restart the shadow residual when progress stalls
    const double cur_res = cnorm(r) / bnorm;
    if (cur_res < 0.99 * best_res) {
      best_res = cur_res;
      since_best = 0;
    } else if (++since_best >= 40) {
      apply(x, ax);
      for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ax[i];
      r_shadow = r;
      std::fill(p.begin(), p.end(), Cplx(0, 0));
      std::fill(v.begin(), v.end(), Cplx(0, 0));
      rho_old = alpha = omega = Cplx(1, 0);
      best_res = cnorm(r) / bnorm;
      since_best = 0;
    }
    const Cplx rho = cdot(r_shadow, r);
    if (std::abs(rho) < 1e-300) break;  // breakdown
    const Cplx beta = (rho / rho_old) * (alpha / omega);
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    apply(p, v);
    alpha = rho / cdot(r_shadow, v);
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    if (cnorm(s) / bnorm <= tol) {
      CVec candidate = x;
      for (std::size_t i = 0; i < n; ++i) candidate[i] += alpha * p[i];
      const double res = true_residual(candidate);
      if (res <= tol) {
        report.iterations = it;
        report.final_relative_residual = res;
        report.converged = true;
        return {candidate, report};
      }
      // recursive residual drifted; continue with the full step
    }
    apply(s, t);
    const double tt = std::abs(cdot(t, t));
    if (tt < 1e-300) {  // t vanished: take the half step and re-check
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
      r = s;
      rho_old = rho;
      if (cnorm(r) / bnorm <= tol) break;
      continue;
    }
    omega = cdot(t, s) / Cplx(tt, 0);
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i] + omega * s[i];
    for (std::size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
    rho_old = rho;
    if (cnorm(r) / bnorm <= tol) {
      const double res = true_residual(x);
      if (res <= tol) {
        report.iterations = it;
        report.final_relative_residual = res;
        report.converged = true;
        return {x, report};
      }
    }
  }
  report.iterations = iters_done;
  report.final_relative_residual = true_residual(x);
  report.converged = report.final_relative_residual <= tol;
  return {x, report};
}

namespace {

std::vector<Cplx> flatten(const FieldOnGrid& f) {
  const std::size_t cells = f.cell_count();
  std::vector<Cplx> out(3 * cells);
  for (int c = 0; c < 3; ++c) {
    std::memcpy(out.data() + c * cells, f.comp[c].data(), sizeof(Cplx) * cells);
  }
  return out;
}

FieldOnGrid unflatten(const std::vector<Cplx>& v, const FieldOnGrid& like) {
  FieldOnGrid f = like;
  const std::size_t cells = like.cell_count();
  for (int c = 0; c < 3; ++c) {
    std::memcpy(f.comp[c].data(), v.data() + c * cells, sizeof(Cplx) * cells);
  }
  return f;
}

}  // namespace

std::pair<FieldOnGrid, SolveReport> solve_total_field(const LsOperator& op,
                                                      const VoxelContrast& grid,
                                                      const FieldOnGrid& incident,
                                                      double tol, int max_iter) {
  const std::size_t cells = grid.cell_count();
  FieldOnGrid in_buf = FieldOnGrid::zeros_like(grid);
  FieldOnGrid out_buf = FieldOnGrid::zeros_like(grid);
  auto apply = [&](const std::vector<Cplx>& xv, std::vector<Cplx>& yv) {
    for (int c = 0; c < 3; ++c) {
      std::memcpy(in_buf.comp[c].data(), xv.data() + c * cells, sizeof(Cplx) * cells);
    }
    op.apply(grid, in_buf, out_buf);
    yv.resize(3 * cells);
    for (int c = 0; c < 3; ++c) {
      std::memcpy(yv.data() + c * cells, out_buf.comp[c].data(), sizeof(Cplx) * cells);
    }
  };
  auto [xv, report] = bicgstab(apply, flatten(incident), tol, max_iter);
  if (!report.converged) {
    throw std::runtime_error(
        "solve_total_field: BiCGStab did not converge (residual " +
        std::to_string(report.final_relative_residual) + " after " +
        std::to_string(report.iterations) + " iterations)");
  }
  return {unflatten(xv, incident), report};
}

std::pair<FieldOnGrid, SolveReport> solve_total_field(const VoxelContrast& grid,
                                                      const FieldOnGrid& incident,
                                                      double k_b, double tol,
                                                      int max_iter) {
  LsOperator op(grid, k_b);
  return solve_total_field(op, grid, incident, tol, max_iter);
}

}  // namespace isac
