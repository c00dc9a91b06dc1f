#include <chiral/solver3d.hpp>

#include <chiral/errors.hpp>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/UmfPackSupport>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

namespace chiral {

namespace {

int positive_mod(int v, int n) {
  const int r = v % n;
  return r < 0 ? r + n : r;
}

std::int64_t linear3(const std::array<int, 3>& s, const std::array<int, 3>& d) {
  return s[0] + static_cast<std::int64_t>(d[0]) * (s[1] + static_cast<std::int64_t>(d[1]) * s[2]);
}

// iterate over every index triple of a box, x fastest
template <typename F>
void for_each_index(const std::array<int, 3>& dims, F&& f) {
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) f(std::array<int, 3>{i, j, k});
}

using Triplet = Eigen::Triplet<cplx>;

}  // namespace

// ---------------------------------------------------------------- YeeLayout

YeeLayout::YeeLayout(std::array<int, 3> cells, std::array<bool, 3> periodic) : cells_(cells), periodic_(periodic) {
  for (int c = 0; c < 3; ++c) {
    edge_offsets_[c + 1] = edge_offsets_[c] + edge_count(c);
    face_offsets_[c + 1] = face_offsets_[c] + face_count(c);
  }
}

std::array<int, 3> YeeLayout::edge_dims(int c) const {
  std::array<int, 3> d{};
  for (int a = 0; a < 3; ++a) d[a] = a == c ? cells_[a] : edge_nodes(a);
  return d;
}

std::array<int, 3> YeeLayout::face_dims(int c) const {
  std::array<int, 3> d{};
  for (int a = 0; a < 3; ++a) d[a] = a == c ? face_nodes(a) : cells_[a];
  return d;
}

std::int64_t YeeLayout::edge_count(int c) const {
  const auto d = edge_dims(c);
  return std::max(0, d[0]) * static_cast<std::int64_t>(std::max(0, d[1])) * std::max(0, d[2]);
}

std::int64_t YeeLayout::face_count(int c) const {
  const auto d = face_dims(c);
  return static_cast<std::int64_t>(d[0]) * d[1] * d[2];
}

bool YeeLayout::wrap_cell(int axis, int& i) const {
  if (periodic_[axis]) {
    i = positive_mod(i, cells_[axis]);
    return true;
  }
  return i >= 0 && i < cells_[axis];
}

bool YeeLayout::wrap_node(int axis, int& v, bool edge) const {
  if (periodic_[axis]) {
    v = positive_mod(v, cells_[axis]);
    return true;
  }
  return edge ? (v >= 1 && v <= cells_[axis] - 1) : (v >= 0 && v <= cells_[axis]);
}

std::int64_t YeeLayout::edge_index(int c, std::array<int, 3> g) const {
  std::array<int, 3> s{};
  for (int a = 0; a < 3; ++a) {
    if (a == c) {
      if (!wrap_cell(a, g[a])) return -1;
      s[a] = g[a];
    } else {
      if (!wrap_node(a, g[a], true)) return -1;
      s[a] = g[a] - node_offset(a);
    }
  }
  return edge_offsets_[c] + linear3(s, edge_dims(c));
}

std::int64_t YeeLayout::face_index(int c, std::array<int, 3> g) const {
  for (int a = 0; a < 3; ++a) {
    if (a == c ? !wrap_node(a, g[a], false) : !wrap_cell(a, g[a])) return -1;
  }
  return face_offsets_[c] + linear3(g, face_dims(c));
}

Eigen::Vector3d YeeLayout::edge_position(int c, std::array<int, 3> g) const {
  Eigen::Vector3d p;
  for (int a = 0; a < 3; ++a) p[a] = a == c ? g[a] + 0.5 : g[a];
  return p;
}

// ---------------------------------------------------------------- assembly

cplx stretch_factor(const GridSpec& gs, int axis, double u, double k_reference, const AssemblyOptions& opts) {
  if (gs.boundary[axis] != Boundary::absorbing) return 1.0;
  const double npml = gs.absorber_thickness;
  const double n = gs.total_cells(axis);
  const double depth = std::max({npml - u, u - (n - npml), 0.0}) / npml;
  if (depth == 0.0) return 1.0;
  const double thickness = npml * gs.cell_size;
  const double peak =
      -(opts.absorber_order + 1) * std::log(opts.absorber_reflection) / (2.0 * k_reference * thickness);
  return {1.0, -peak * std::pow(depth, opts.absorber_order)};
}

namespace {

struct MaterialCoefficients {
  cplx eps;
  double inv_mu;
  cplx zeta;
  cplx xi;
};

bool in_absorber(const GridSpec& gs, int axis, int cell, int margin = 0) {
  const int pad = gs.padding(axis);
  return pad > 0 && (cell < pad + margin || cell >= gs.total_cells(axis) - pad - margin);
}

SparseMatrixC diagonal(const Eigen::VectorXcd& v) {
  SparseMatrixC d(v.size(), v.size());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != cplx{0.0, 0.0}) t.emplace_back(i, i, v[i]);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

}  // namespace

LinearOperator assemble(const MaterialGrid& grid, double frequency, const GridSpec& gs, const AssemblyOptions& opts) {
  validate(gs);
  if (grid.counts != gs.total_cells()) throw AssemblyError("material grid does not match the grid spec");
  const double omega = angular_frequency(frequency);
  const double h = gs.cell_size;

  std::vector<MaterialCoefficients> coeff;
  bool magnetoelectric = false;
  for (const auto& m : grid.table) {
    try {
      wave_constants(m, frequency);
    } catch (const DegenerateMaterialError& e) {
      throw AssemblyError(std::string("degenerate material: ") + e.what());
    }
    const Coupling c = derive_coupling(m, frequency);
    coeff.push_back({complex_permittivity(m, frequency), 1.0 / permeability(m), c.zeta, c.xi});
    magnetoelectric = magnetoelectric || m.is_magnetoelectric();
  }

  // absorber reference wavenumber and coupling-free check
  double k_reference = 0.0;
  for (int k = 0; k < grid.counts[2]; ++k)
    for (int j = 0; j < grid.counts[1]; ++j)
      for (int i = 0; i < grid.counts[0]; ++i) {
        const auto& m = grid.at(i, j, k);
        // the edge-to-face average reaches one cell further, so keep a one-cell margin
        if (m.is_magnetoelectric() &&
            (in_absorber(gs, 0, i, 1) || in_absorber(gs, 1, j, 1) || in_absorber(gs, 2, k, 1))) {
          throw AssemblyError("magnetoelectric material inside or touching the absorbing layers");
        }
        if (!in_absorber(gs, 0, i) && !in_absorber(gs, 1, j) && !in_absorber(gs, 2, k)) continue;
        k_reference = std::max(k_reference, max_wavenumber(m, frequency));
      }
  if (k_reference == 0.0) k_reference = free_space_wavenumber(frequency);

  std::array<bool, 3> periodic{};
  for (int a = 0; a < 3; ++a) periodic[a] = gs.boundary[a] == Boundary::periodic;
  LinearOperator op;
  op.layout = YeeLayout(gs.total_cells(), periodic);
  op.grid = gs;
  op.frequency = frequency;
  op.magnetoelectric = magnetoelectric;
  const YeeLayout& L = op.layout;
  const std::int64_t ne = L.edge_total();
  const std::int64_t nf = L.face_total();
  if (ne == 0) throw AssemblyError("grid holds no edge unknowns");

  const bool coupled = magnetoelectric || opts.force_coupling_terms;
  const std::size_t per_row = coupled ? 80 : 13;
  const std::size_t estimate = static_cast<std::size_t>(ne) * per_row * (sizeof(cplx) + sizeof(int)) * 2;
  if (estimate > opts.memory_cap_bytes) {
    throw CapacityError("operator needs about " + std::to_string(estimate >> 20) + " MiB, cap is " +
                        std::to_string(opts.memory_cap_bytes >> 20) + " MiB");
  }

  // stretch factors at cell centres and nodes
  std::array<std::vector<cplx>, 3> s_cell, s_node;
  for (int a = 0; a < 3; ++a) {
    const int n = gs.total_cells(a);
    for (int i = 0; i < n; ++i) s_cell[a].push_back(stretch_factor(gs, a, i + 0.5, k_reference, opts));
    for (int i = 0; i <= n; ++i) s_node[a].push_back(stretch_factor(gs, a, i, k_reference, opts));
  }
  auto node_stretch = [&](int a, int v) { return s_node[a][static_cast<std::size_t>(positive_mod(v, gs.total_cells(a) + 1))]; };

  auto cell_material = [&](std::array<int, 3> c) -> const MaterialCoefficients* {
    for (int a = 0; a < 3; ++a) {
      if (periodic[a]) {
        c[a] = positive_mod(c[a], grid.counts[a]);
      } else if (c[a] < 0 || c[a] >= grid.counts[a]) {
        return nullptr;
      }
    }
    return &coeff[grid.material_index(c[0], c[1], c[2])];
  };

  // edge permittivity: mean of the four cells sharing the edge
  op.eps.resize(ne);
  for (int c = 0; c < 3; ++c) {
    const int b = (c + 1) % 3, d = (c + 2) % 3;
    for_each_index(L.edge_dims(c), [&](std::array<int, 3> s) {
      std::array<int, 3> g = s;
      g[b] += L.node_offset(b);
      g[d] += L.node_offset(d);
      cplx sum = 0.0;
      int count = 0;
      for (int db = -1; db <= 0; ++db)
        for (int dd = -1; dd <= 0; ++dd) {
          std::array<int, 3> cell = g;
          cell[b] += db;
          cell[d] += dd;
          if (const auto* m = cell_material(cell)) {
            sum += m->eps;
            ++count;
          }
        }
      op.eps[L.edge_index(c, g)] = sum / static_cast<double>(count);
    });
  }

  // face coefficients: mean of the two cells sharing the face
  op.inv_mu.resize(nf);
  op.zeta.resize(nf);
  Eigen::VectorXcd xi(nf);
  for (int c = 0; c < 3; ++c) {
    for_each_index(L.face_dims(c), [&](std::array<int, 3> g) {
      MaterialCoefficients sum{0.0, 0.0, 0.0, 0.0};
      int count = 0;
      for (int dc = -1; dc <= 0; ++dc) {
        std::array<int, 3> cell = g;
        cell[c] += dc;
        if (const auto* m = cell_material(cell)) {
          sum.inv_mu += m->inv_mu;
          sum.zeta += m->zeta;
          sum.xi += m->xi;
          ++count;
        }
      }
      const std::int64_t f = L.face_index(c, g);
      op.inv_mu[f] = sum.inv_mu / count;
      op.zeta[f] = sum.zeta / static_cast<double>(count);
      xi[f] = sum.xi / static_cast<double>(count);
    });
  }

  // C_e: faces <- edges, (curl E)_a = d_b E_c - d_c E_b
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nf) * 4);
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    for_each_index(L.face_dims(a), [&](std::array<int, 3> g) {
      const std::int64_t row = L.face_index(a, g);
      const cplx inv_b = 1.0 / (h * s_cell[b][static_cast<std::size_t>(g[b])]);
      const cplx inv_c = 1.0 / (h * s_cell[c][static_cast<std::size_t>(g[c])]);
      for (int step = 0; step <= 1; ++step) {
        const double sign = step == 0 ? -1.0 : 1.0;
        std::array<int, 3> gc = g;
        gc[b] += step;
        if (const std::int64_t col = L.edge_index(c, gc); col >= 0) t.emplace_back(row, col, sign * inv_b);
        std::array<int, 3> gb = g;
        gb[c] += step;
        if (const std::int64_t col = L.edge_index(b, gb); col >= 0) t.emplace_back(row, col, -sign * inv_c);
      }
    });
  }
  op.curl_e.resize(nf, ne);
  op.curl_e.setFromTriplets(t.begin(), t.end());

  // C_h: edges <- faces, (curl H)_a = d_b H_c - d_c H_b
  t.clear();
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    for_each_index(L.edge_dims(a), [&](std::array<int, 3> s) {
      std::array<int, 3> g = s;
      g[b] += L.node_offset(b);
      g[c] += L.node_offset(c);
      const std::int64_t row = L.edge_index(a, g);
      const cplx inv_b = 1.0 / (h * node_stretch(b, g[b]));
      const cplx inv_c = 1.0 / (h * node_stretch(c, g[c]));
      for (int step = -1; step <= 0; ++step) {
        const double sign = step == -1 ? -1.0 : 1.0;
        std::array<int, 3> gc = g;
        gc[b] += step;
        if (const std::int64_t col = L.face_index(c, gc); col >= 0) t.emplace_back(row, col, sign * inv_b);
        std::array<int, 3> gb = g;
        gb[c] += step;
        if (const std::int64_t col = L.face_index(b, gb); col >= 0) t.emplace_back(row, col, -sign * inv_c);
      }
    });
  }
  SparseMatrixC curl_h(ne, nf);
  curl_h.setFromTriplets(t.begin(), t.end());

  // Q: component-matched average of the 8 edges surrounding each face
  t.clear();
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    for_each_index(L.face_dims(a), [&](std::array<int, 3> g) {
      const std::int64_t row = L.face_index(a, g);
      for (int da = -1; da <= 0; ++da)
        for (int db = 0; db <= 1; ++db)
          for (int dc = 0; dc <= 1; ++dc) {
            std::array<int, 3> ge = g;
            ge[a] += da;
            ge[b] += db;
            ge[c] += dc;
            if (const std::int64_t col = L.edge_index(a, ge); col >= 0) t.emplace_back(row, col, 0.125);
          }
    });
  }
  op.average.resize(nf, ne);
  op.average.setFromTriplets(t.begin(), t.end());
  t.clear();
  t.shrink_to_fit();

  const SparseMatrixC mass = diagonal((omega * omega) * op.eps);
  if (coupled) {
    const cplx jw = kJ * omega;
    const SparseMatrixC left = curl_h - SparseMatrixC(op.average.transpose()) * diagonal(jw * xi);
    const SparseMatrixC right = op.curl_e + diagonal(jw * op.zeta) * op.average;
    op.matrix = left * diagonal(op.inv_mu) * right - mass;
  } else {
    op.matrix = curl_h * diagonal(op.inv_mu) * op.curl_e - mass;
  }
  op.matrix.makeCompressed();

  // T = diag(s_x s_y s_z) at each edge makes T A complex-symmetric when chi = 0
  op.symmetrizer.resize(ne);
  for (int c = 0; c < 3; ++c) {
    const int b = (c + 1) % 3, d = (c + 2) % 3;
    for_each_index(L.edge_dims(c), [&](std::array<int, 3> s) {
      std::array<int, 3> g = s;
      g[b] += L.node_offset(b);
      g[d] += L.node_offset(d);
      op.symmetrizer[L.edge_index(c, g)] =
          s_cell[c][static_cast<std::size_t>(g[c])] * node_stretch(b, g[b]) * node_stretch(d, g[d]);
    });
  }
  op.reciprocal = std::none_of(grid.table.begin(), grid.table.end(), [](const auto& m) { return m.chi != 0.0; });
  return op;
}

// ---------------------------------------------------------------- sources

SourceSpec SourceSpec::plane_wave(int normal_axis, double plane, const Eigen::Vector3d& polarization, cplx amplitude) {
  SourceSpec s;
  s.kind = Kind::plane_wave;
  s.amplitude = amplitude;
  s.aperture.normal_axis = normal_axis;
  s.aperture.center = Eigen::Vector3d::Zero();
  s.aperture.center[normal_axis] = plane;
  s.aperture.polarization = polarization;
  s.aperture.full_plane = true;
  return s;
}

ApertureProfile aperture_profile(const YeeLayout& layout, const GridSpec& gs, const ApertureSpec& ap) {
  const int n = ap.normal_axis;
  if (n < 0 || n > 2) throw GeometryError("aperture normal axis must be 0, 1 or 2");
  if (layout.cells() != gs.total_cells()) throw GeometryError("aperture layout does not match the grid");
  const double pnorm = ap.polarization.norm();
  if (!(pnorm > 0.0)) throw GeometryError("aperture polarization must be non-zero");
  const Eigen::Vector3d pol = ap.polarization / pnorm;
  if (std::abs(pol[n]) > 1e-9) throw GeometryError("aperture polarization must be tangential to its plane");
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  normal[n] = 1.0;
  const Eigen::Vector3d across = normal.cross(pol);

  const double h = gs.cell_size;
  const Eigen::Vector3d origin = gs.origin();
  const auto cells = gs.total_cells();
  const Eigen::Vector3d local = (ap.center - origin) / h;  // in cells
  const int plane = static_cast<int>(std::lround(local[n]));
  const bool interior = layout.periodic(n) ? (plane >= 0 && plane <= cells[n])
                                           : (plane >= 1 && plane <= cells[n] - 1);
  if (!interior) throw GeometryError("aperture plane lies outside the grid interior");

  if (!ap.full_plane) {
    if (!(ap.size_across > 0.0) || !(ap.size_along > 0.0)) throw GeometryError("aperture size must be positive");
    for (int sa = -1; sa <= 1; sa += 2)
      for (int sb = -1; sb <= 1; sb += 2) {
        const Eigen::Vector3d corner = local + (0.5 * sa * ap.size_along * pol + 0.5 * sb * ap.size_across * across) / h;
        for (int a = 0; a < 3; ++a) {
          if (a == n) continue;
          if (corner[a] < -1e-9 || corner[a] > cells[a] + 1e-9) throw GeometryError("aperture extends outside the grid");
        }
      }
  }

  ApertureProfile profile;
  const double slack = 1e-9;
  for (int c = 0; c < 3; ++c) {
    if (c == n || std::abs(pol[c]) < 1e-15) continue;
    const int other = 3 - n - c;
    for (int i = 0; i < cells[c]; ++i) {
      for (int v = 0; v <= cells[other]; ++v) {
        std::array<int, 3> g{};
        g[c] = i;
        g[other] = v;
        g[n] = plane;
        if (layout.periodic(other) && v == cells[other]) continue;
        const std::int64_t idx = layout.edge_index(c, g);
        if (idx < 0) continue;
        if (!ap.full_plane) {
          const Eigen::Vector3d r = layout.edge_position(c, g) - local;
          if (std::abs(r.dot(pol)) * h > 0.5 * ap.size_along + slack * h) continue;
          if (std::abs(r.dot(across)) * h > 0.5 * ap.size_across + slack * h) continue;
        }
        profile.edges.push_back(idx);
        profile.weights.push_back(pol[c]);
        profile.norm2 += pol[c] * pol[c];
      }
    }
  }
  if (profile.edges.empty()) throw GeometryError("aperture covers no grid edges");
  return profile;
}

Eigen::VectorXcd source_vector(const LinearOperator& op, const MaterialGrid& grid, const SourceSpec& src) {
  const ApertureProfile profile = aperture_profile(op.layout, op.grid, src.aperture);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(op.layout.edge_total());
  if (src.amplitude == cplx{0.0, 0.0}) return b;

  std::array<int, 3> cell{};
  for (int a = 0; a < 3; ++a) {
    const int i = static_cast<int>(std::floor((src.aperture.center[a] - grid.origin[a]) / grid.cell_size));
    cell[a] = std::clamp(i, 0, grid.counts[a] - 1);
  }
  const cplx eta = wave_constants(grid.at(cell[0], cell[1], cell[2]), op.frequency).eta;
  // a current sheet K radiates -eta K / 2 on both sides
  const double omega = angular_frequency(op.frequency);
  const cplx scale = 2.0 * kJ * omega * src.amplitude / (eta * op.grid.cell_size);
  for (std::size_t i = 0; i < profile.edges.size(); ++i) b[profile.edges[i]] += scale * profile.weights[i];
  return b;
}

// ---------------------------------------------------------------- solve

struct FieldSolver::Impl {
  // 64-bit indices: the 32-bit interface caps the numeric workspace near 2 GiB
  using LongMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor, SuiteSparse_long>;
  LongMatrix matrix;  // the factorization keeps a view of it and solves read it again
  Eigen::UmfPackLU<LongMatrix> lu;
  FieldSolver::Method method = FieldSolver::Method::direct;
  SparseMatrixC symmetric;          // T A
  Eigen::VectorXcd jacobi;          // inverse diagonal of the iterated matrix
};

std::size_t estimate_factorization_bytes(const LinearOperator& op) {
  // fitted to multifrontal LU peaks on padded 3D grids (~3 GB at 60k unknowns)
  const double n = static_cast<double>(op.layout.edge_total());
  return static_cast<std::size_t>(1300.0 * std::pow(n, 4.0 / 3.0));
}

FieldSolver::FieldSolver(const LinearOperator& op, SolverOptions opts)
    : op_(&op), opts_(opts), impl_(std::make_unique<Impl>()) {
  if (!(opts_.tolerance >= 1e-10 && opts_.tolerance <= 1e-3)) {
    throw std::invalid_argument("solver tolerance must lie in [1e-10, 1e-3]");
  }
  if (op.layout.edge_total() <= opts_.direct_threshold && estimate_factorization_bytes(op) <= opts_.memory_cap_bytes) {
    impl_->method = Method::direct;
    impl_->matrix = Impl::LongMatrix(op.matrix);
    impl_->lu.compute(impl_->matrix);
    if (impl_->lu.info() != Eigen::Success) throw ConvergenceError("direct factorization failed", {});
  } else if (op.reciprocal) {
    impl_->method = Method::cocg;
    impl_->symmetric = op.symmetrizer.asDiagonal() * op.matrix;
    impl_->jacobi = impl_->symmetric.diagonal().cwiseInverse();
  } else {
    impl_->method = Method::bicgstab;
    impl_->jacobi = op.matrix.diagonal().cwiseInverse();
  }
}

FieldSolver::~FieldSolver() = default;
FieldSolver::FieldSolver(FieldSolver&&) noexcept = default;
FieldSolver& FieldSolver::operator=(FieldSolver&&) noexcept = default;

bool FieldSolver::direct() const { return impl_->method == Method::direct; }
FieldSolver::Method FieldSolver::method() const { return impl_->method; }

namespace {

// Jacobi-preconditioned conjugate orthogonal CG for complex-symmetric systems.
// Returns the true residual of the original system at every checkpoint.
Eigen::VectorXcd cocg(const SparseMatrixC& s, const Eigen::VectorXcd& jacobi, const Eigen::VectorXcd& b,
                      const std::function<double(const Eigen::VectorXcd&)>& residual, const SolverOptions& opts,
                      int& iterations, std::vector<double>& history) {
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(b.size());
  Eigen::VectorXcd r = b;
  Eigen::VectorXcd z = jacobi.cwiseProduct(r);
  Eigen::VectorXcd p = z;
  Eigen::VectorXcd q(b.size());
  cplx rho = r.transpose() * z;
  for (iterations = 1; iterations <= opts.max_iterations; ++iterations) {
    q.noalias() = s * p;
    const cplx pq = p.transpose() * q;
    if (pq == cplx{0.0, 0.0}) break;
    const cplx alpha = rho / pq;
    x += alpha * p;
    r -= alpha * q;
    if (iterations % opts.checkpoint == 0) {
      history.push_back(residual(x));
      if (history.back() <= opts.tolerance) return x;
    }
    z = jacobi.cwiseProduct(r);
    const cplx rho_next = r.transpose() * z;
    if (rho == cplx{0.0, 0.0}) break;
    p = z + (rho_next / rho) * p;
    rho = rho_next;
  }
  history.push_back(residual(x));
  iterations = std::min(iterations, opts.max_iterations);
  return x;
}

}  // namespace

FieldSolution FieldSolver::solve(const Eigen::VectorXcd& rhs) const {
  const LinearOperator& op = *op_;
  FieldSolution sol;
  sol.layout = op.layout;
  sol.grid = op.grid;
  sol.frequency = op.frequency;
  sol.direct = direct();
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    sol.e = Eigen::VectorXcd::Zero(rhs.size());
    return sol;
  }
  auto residual = [&](const Eigen::VectorXcd& x) { return (op.matrix * x - rhs).norm() / bnorm; };

  if (impl_->method == Method::direct) {
    sol.e = impl_->lu.solve(rhs);
    sol.residual = residual(sol.e);
    for (int pass = 0; pass < 3 && sol.residual > 1e-3 * opts_.tolerance; ++pass) {
      sol.e += impl_->lu.solve(Eigen::VectorXcd(rhs - op.matrix * sol.e));
      sol.residual = residual(sol.e);
      ++sol.iterations;
    }
    if (sol.residual > opts_.tolerance) {
      throw ConvergenceError("direct solve residual " + std::to_string(sol.residual) + " above tolerance",
                             {sol.residual});
    }
    return sol;
  }

  std::vector<double> history;
  if (impl_->method == Method::cocg) {
    sol.e = cocg(impl_->symmetric, impl_->jacobi, op.symmetrizer.cwiseProduct(rhs), residual, opts_, sol.iterations,
                 history);
  } else {
    Eigen::BiCGSTAB<SparseMatrixC, Eigen::DiagonalPreconditioner<cplx>> krylov;
    krylov.setTolerance(opts_.tolerance);
    krylov.compute(op.matrix);
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(rhs.size());
    while (sol.iterations < opts_.max_iterations) {
      krylov.setMaxIterations(std::min(opts_.checkpoint, opts_.max_iterations - sol.iterations));
      x = krylov.solveWithGuess(rhs, x);
      sol.iterations += static_cast<int>(std::max<Eigen::Index>(krylov.iterations(), 1));
      history.push_back(residual(x));
      if (history.back() <= opts_.tolerance) break;
    }
    sol.e = std::move(x);
  }
  if (history.empty() || history.back() > opts_.tolerance) {
    throw ConvergenceError("iterative solve stalled after " + std::to_string(sol.iterations) + " iterations",
                           std::move(history));
  }
  sol.residual = history.back();
  return sol;
}

FieldSolution solve(const LinearOperator& op, const Eigen::VectorXcd& rhs, const SolverOptions& opts) {
  return FieldSolver(op, opts).solve(rhs);
}

FieldSolution solve(const LinearOperator& op, const MaterialGrid& grid, const SourceSpec& src,
                    const SolverOptions& opts) {
  const Eigen::VectorXcd rhs = source_vector(op, grid, src);
  if (rhs.norm() == 0.0) {
    FieldSolution sol;
    sol.e = Eigen::VectorXcd::Zero(rhs.size());
    sol.layout = op.layout;
    sol.grid = op.grid;
    sol.frequency = op.frequency;
    return sol;
  }
  return solve(op, rhs, opts);
}

cplx port_overlap(const FieldSolution& sol, const ApertureSpec& ap) {
  const ApertureProfile profile = aperture_profile(sol.layout, sol.grid, ap);
  cplx sum = 0.0;
  for (std::size_t i = 0; i < profile.edges.size(); ++i) sum += profile.weights[i] * sol.e[profile.edges[i]];
  return sum / profile.norm2;
}

Eigen::VectorXcd magnetic_field(const LinearOperator& op, const FieldSolution& sol) {
  const cplx jw = kJ * angular_frequency(op.frequency);
  const Eigen::VectorXcd curl = op.curl_e * sol.e;
  const Eigen::VectorXcd coupled = op.zeta.cwiseProduct(op.average * sol.e);
  return -(op.inv_mu.cwiseProduct(curl + jw * coupled)) / jw;
}

// ---------------------------------------------------------------- snapshots

namespace {

constexpr const char* kComponentNames[3] = {"Ex", "Ey", "Ez"};

void write_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double read_le(std::istream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_field_snapshot(const std::filesystem::path& path, const FieldSolution& sol) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const YeeLayout& L = sol.layout;
  const Eigen::Vector3d o = sol.grid.origin();
  std::ostringstream header;
  header.precision(17);
  header << "CHIRAL-FIELD 1\n";
  header << "cells " << L.cells()[0] << ' ' << L.cells()[1] << ' ' << L.cells()[2] << '\n';
  header << "cell_size " << sol.grid.cell_size << '\n';
  header << "origin " << o[0] << ' ' << o[1] << ' ' << o[2] << '\n';
  header << "frequency " << sol.frequency << '\n';
  header << "encoding complex128 little-endian re,im x-fastest\n";
  for (int c = 0; c < 3; ++c) {
    const auto d = L.edge_dims(c);
    std::array<int, 3> g{};
    for (int a = 0; a < 3; ++a) g[a] = a == c ? 0 : L.node_offset(a);
    const Eigen::Vector3d p = L.edge_position(c, g);
    header << "component " << kComponentNames[c] << ' ' << d[0] << ' ' << d[1] << ' ' << d[2] << " first " << p[0]
           << ' ' << p[1] << ' ' << p[2] << '\n';
  }
  header << "end\n";
  out << header.str();
  for (Eigen::Index i = 0; i < sol.e.size(); ++i) {
    write_le(out, sol.e[i].real());
    write_le(out, sol.e[i].imag());
  }
}

FieldSnapshot read_field_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  FieldSnapshot snap;
  std::string line;
  std::getline(in, line);
  if (line != "CHIRAL-FIELD 1") throw std::runtime_error("not a field snapshot: " + path.string());
  int component = 0;
  while (std::getline(in, line) && line != "end") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "cells") {
      ls >> snap.cells[0] >> snap.cells[1] >> snap.cells[2];
    } else if (key == "cell_size") {
      ls >> snap.cell_size;
    } else if (key == "origin") {
      ls >> snap.origin[0] >> snap.origin[1] >> snap.origin[2];
    } else if (key == "component" && component < 3) {
      std::string name, first;
      auto& d = snap.dims[component];
      auto& p = snap.first_position[component];
      ls >> name >> d[0] >> d[1] >> d[2] >> first >> p[0] >> p[1] >> p[2];
      ++component;
    }
  }
  for (int c = 0; c < 3; ++c) {
    const auto& d = snap.dims[c];
    snap.components[c].resize(static_cast<std::size_t>(d[0]) * d[1] * d[2]);
    for (auto& v : snap.components[c]) {
      const double re = read_le(in);
      v = {re, read_le(in)};
    }
  }
  if (!in) throw std::runtime_error("truncated field snapshot: " + path.string());
  return snap;
}

}  // namespace chiral
