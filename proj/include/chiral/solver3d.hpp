#pragma once

#include <chiral/grid.hpp>
#include <chiral/media.hpp>

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace chiral {

using SparseMatrixC = Eigen::SparseMatrix<cplx>;

/// Index map of the staggered unknowns.
///
/// Edge component c lives at cell centres along axis c and at grid nodes along
/// the two other axes; face component c lives at nodes along c and cell centres
/// elsewhere. On non-periodic axes the outer nodes sit on a perfect conductor,
/// so tangential edges there carry no unknown.
class YeeLayout {
 public:
  YeeLayout() = default;
  YeeLayout(std::array<int, 3> cells, std::array<bool, 3> periodic);

  const std::array<int, 3>& cells() const { return cells_; }
  bool periodic(int axis) const { return periodic_[axis]; }

  /// First node index carrying edge unknowns and their count along `axis`.
  int node_offset(int axis) const { return periodic_[axis] ? 0 : 1; }
  int edge_nodes(int axis) const { return periodic_[axis] ? cells_[axis] : cells_[axis] - 1; }
  int face_nodes(int axis) const { return periodic_[axis] ? cells_[axis] : cells_[axis] + 1; }

  /// Storage dimensions of edge/face component c.
  std::array<int, 3> edge_dims(int c) const;
  std::array<int, 3> face_dims(int c) const;

  std::int64_t edge_count(int c) const;
  std::int64_t edge_offset(int c) const { return edge_offsets_[c]; }
  std::int64_t edge_total() const { return edge_offsets_[3]; }
  std::int64_t face_count(int c) const;
  std::int64_t face_offset(int c) const { return face_offsets_[c]; }
  std::int64_t face_total() const { return face_offsets_[3]; }

  /// Global edge index for component c at grid coordinates g (cell index along
  /// c, node index along the others); -1 when the position holds no unknown.
  std::int64_t edge_index(int c, std::array<int, 3> g) const;
  /// Global face index for component c (node along c, cells elsewhere); -1 if outside.
  std::int64_t face_index(int c, std::array<int, 3> g) const;

  /// Position of edge/face c at g in units of cells from the grid origin.
  Eigen::Vector3d edge_position(int c, std::array<int, 3> g) const;

 private:
  bool wrap_cell(int axis, int& i) const;
  bool wrap_node(int axis, int& v, bool edge) const;

  std::array<int, 3> cells_{0, 0, 0};
  std::array<bool, 3> periodic_{false, false, false};
  std::array<std::int64_t, 4> edge_offsets_{0, 0, 0, 0};
  std::array<std::int64_t, 4> face_offsets_{0, 0, 0, 0};
};

struct AssemblyOptions {
  double absorber_reflection = 1e-4;  // normal-incidence target
  int absorber_order = 3;             // polynomial grading
  std::size_t memory_cap_bytes = std::size_t{4} << 30;
  /// Assemble the magnetoelectric coupling products even when every coupling is zero.
  bool force_coupling_terms = false;
};

/// Discretized modified Helmholtz operator acting on edge unknowns:
///
///   A = (C_h - jw Q^T Xi) M^-1 (C_e + jw Z Q) - w^2 Eps,   A e = -jw J
///
/// C_e/C_h are the stretched-coordinate curls (edges -> faces, faces -> edges),
/// Q averages each edge component onto the matching face component, and
/// Xi/Z/M^-1/Eps are the sampled xi, zeta, 1/mu and eps. With kappa = chi = 0
/// the coupling products vanish and A is the standard curl-curl operator.
struct LinearOperator {
  SparseMatrixC matrix;
  YeeLayout layout;
  GridSpec grid;
  double frequency = 0.0;
  bool magnetoelectric = false;

  // kept for H recovery
  SparseMatrixC curl_e;
  SparseMatrixC average;
  Eigen::VectorXcd inv_mu;  // faces
  Eigen::VectorXcd zeta;    // faces
  Eigen::VectorXcd eps;     // edges, absolute permittivity (F/m)

  /// Diagonal T with T A complex-symmetric whenever `reciprocal` (no Tellegen material).
  Eigen::VectorXcd symmetrizer;
  bool reciprocal = true;
};

/// Stretched-coordinate factor s(u) along `axis`, u in cells from the grid origin.
cplx stretch_factor(const GridSpec& gs, int axis, double u, double k_reference, const AssemblyOptions& opts = {});

LinearOperator assemble(const MaterialGrid& grid, double frequency, const GridSpec& gs,
                        const AssemblyOptions& opts = {});

struct ApertureSpec {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // m
  int normal_axis = 1;
  Eigen::Vector3d polarization = Eigen::Vector3d::UnitZ();
  double size_across = 14.752e-3;  // extent perpendicular to the polarization (m)
  double size_along = 9.752e-3;    // extent along the polarization (m)
  bool full_plane = false;         // uniform sheet over the whole transverse plane
};

/// Uniform-profile aperture (or whole-plane sheet) on the nearest node plane.
struct SourceSpec {
  enum class Kind { plane_wave, aperture };
  Kind kind = Kind::aperture;
  ApertureSpec aperture;
  cplx amplitude = 1.0;  // V/m

  static SourceSpec plane_wave(int normal_axis, double plane, const Eigen::Vector3d& polarization,
                               cplx amplitude = 1.0);
};

/// Real profile weights of the aperture over edge unknowns (sparse: index, weight).
struct ApertureProfile {
  std::vector<std::int64_t> edges;
  std::vector<double> weights;
  double norm2 = 0.0;  // sum of squared weights
};

/// Throws GeometryError if the aperture leaves the grid or covers no edges.
ApertureProfile aperture_profile(const YeeLayout& layout, const GridSpec& gs, const ApertureSpec& ap);

/// Right-hand side -jw J of a source; J is the current sheet that radiates
/// `amplitude` along the polarization in the medium at the aperture.
Eigen::VectorXcd source_vector(const LinearOperator& op, const MaterialGrid& grid, const SourceSpec& src);

struct FieldSolution {
  Eigen::VectorXcd e;  // V/m on edge unknowns
  double residual = 0.0;
  int iterations = 0;
  bool direct = false;
  YeeLayout layout;
  GridSpec grid;
  double frequency = 0.0;
};

struct SolverOptions {
  double tolerance = 1e-6;
  std::int64_t direct_threshold = 300000;  // unknowns
  int max_iterations = 20000;
  int checkpoint = 50;  // iterations between recorded residuals
  std::size_t memory_cap_bytes = std::size_t{2} << 30;
};

/// Factorizes (or preconditions) once and solves for any number of right-hand
/// sides. solve() is const and may be called concurrently.
class FieldSolver {
 public:
  /// Direct LU when the factorization fits the memory cap, else conjugate
  /// orthogonal CG on the symmetrized system, or BiCGSTAB for Tellegen media.
  enum class Method { direct, cocg, bicgstab };

  FieldSolver(const LinearOperator& op, SolverOptions opts = {});
  ~FieldSolver();
  FieldSolver(FieldSolver&&) noexcept;
  FieldSolver& operator=(FieldSolver&&) noexcept;

  FieldSolution solve(const Eigen::VectorXcd& rhs) const;
  bool direct() const;
  Method method() const;
  const LinearOperator& op() const { return *op_; }

 private:
  struct Impl;
  const LinearOperator* op_;
  SolverOptions opts_;
  std::unique_ptr<Impl> impl_;
};

/// Rough peak memory (bytes) of a direct factorization of `op`.
std::size_t estimate_factorization_bytes(const LinearOperator& op);

FieldSolution solve(const LinearOperator& op, const Eigen::VectorXcd& rhs, const SolverOptions& opts = {});
FieldSolution solve(const LinearOperator& op, const MaterialGrid& grid, const SourceSpec& src,
                    const SolverOptions& opts = {});

/// Profile-weighted mean of the tangential field over the aperture:
/// sum(w_i e_i) / sum(w_i^2). A field equal to the profile gives 1.
cplx port_overlap(const FieldSolution& sol, const ApertureSpec& ap);

/// H on faces from curl E = -jw(zeta E + mu H).
Eigen::VectorXcd magnetic_field(const LinearOperator& op, const FieldSolution& sol);

/// Little-endian complex128 dump of Ex, Ey, Ez with a self-describing text header.
void write_field_snapshot(const std::filesystem::path& path, const FieldSolution& sol);

struct FieldSnapshot {
  std::array<int, 3> cells{0, 0, 0};
  double cell_size = 0.0;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::array<std::array<int, 3>, 3> dims{};
  std::array<Eigen::Vector3d, 3> first_position{};  // in cells from origin
  std::array<std::vector<cplx>, 3> components;
};

FieldSnapshot read_field_snapshot(const std::filesystem::path& path);

}  // namespace chiral
