#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "avl/averaging.hpp"
#include "avl/diagnostics.hpp"
#include "avl/geometry.hpp"
#include "avl/solver.hpp"

namespace avl {

/// Profiles are cut off beyond this many standard deviations.
inline constexpr double kProfileCutoff = 6.0;

/// Gaussian bunch on the chart's x^0 = 0 slice: positions around the
/// spatial origin with width `width`, spatial velocities around 0 with
/// width `spread`. Peak value 1.
class BunchProfile {
 public:
  BunchProfile(int dim, double width, double spread);

  int dim() const { return dim_; }
  double width() const { return width_; }
  double spread() const { return spread_; }
  /// f0(x, y); x^0 and y^0 are ignored.
  double operator()(const Vector& x, const Vector& y) const;

 private:
  int dim_;
  double width_;
  double spread_;
};

/// f transported by the flow of a connection, evaluated by integrating the
/// characteristic through (x, y) back to the initial slice.
class DistributionFunction {
 public:
  /// The backward flow must stay within |x^i| <= box_half_width.
  DistributionFunction(BunchProfile initial, std::shared_ptr<const ConnectionField> conn,
                       double h, double box_half_width);

  const BunchProfile& initial() const { return initial_; }
  const ConnectionField& connection() const { return *conn_; }

  /// f(x, y) at the chart time x^0. Throws OutOfDomainError if the
  /// backward characteristic leaves the box.
  double evaluate(const Vector& x, const Vector& y) const;
  /// Same, with x^0 replaced by t.
  double evaluate(const Vector& x, const Vector& y, double t) const;

 private:
  BunchProfile initial_;
  std::shared_ptr<const ConnectionField> conn_;
  double h_;
  double box_;
};

struct TransportStats {
  std::size_t reprojected = 0;  // Lorentz particles whose shell drift exceeded 1e-9
};

/// Advances every particle by parameter time T along `conn`. Weights are
/// unchanged. For non-affine connections a particle whose shell drift
/// exceeds kShellTolerance is re-projected and counted. Errors carry the
/// particle index.
Ensemble transport_ensemble(const ConnectionField& conn, const Ensemble& ensemble, double T,
                            double h, int workers = 1, TransportStats* stats = nullptr);

/// Averaged-Vlasov transport: all particles advance together under the
/// averaged connection built from the moments of the ensemble itself,
/// recomputed at every Runge-Kutta stage. The global moments at the start
/// of every step are recorded against the mean chart time.
struct SelfConsistentRun {
  Ensemble final;
  std::shared_ptr<MomentHistory> history;
};

SelfConsistentRun transport_self_consistent(std::shared_ptr<const Chart> chart,
                                            const FieldConfiguration& field,
                                            const Ensemble& ensemble, double T, double h,
                                            int workers = 1);

/// Ensemble states at each chart time in `times` (increasing), every
/// particle advanced with advance_to_time from its previous state.
std::vector<Ensemble> snapshots(const ConnectionField& conn, const Ensemble& ensemble,
                                const std::vector<double>& times, double h, int workers = 1);

struct GridSpec {
  int cells = 6;             // per spatial axis
  double half_width = 2.5;   // spatial bounds [-half_width, half_width] per axis
  std::vector<double> times;  // time slices (increasing)
};

struct GridCell {
  Vector V;             // unit mean velocity (zero if empty)
  double weight = 0.0;  // cloud-in-cell weight
  double alpha = 0.0;   // diameter of the particles whose nearest cell this is
  bool empty = true;
};

/// Normalized mean velocity on a spacetime grid of cell centers, built by
/// cloud-in-cell deposition of one snapshot per time slice.
class VelocityFieldGrid {
 public:
  VelocityFieldGrid(int dim, const GridSpec& spec);

  int dim() const { return dim_; }
  int cells() const { return spec_.cells; }
  int slices() const { return static_cast<int>(spec_.times.size()); }
  double spacing() const { return spacing_; }
  const GridSpec& spec() const { return spec_; }

  std::size_t cells_per_slice() const { return per_slice_; }
  std::size_t index(int slice, const std::vector<int>& multi) const;
  std::vector<int> multi_index(std::size_t flat_in_slice) const;
  Vector center(int slice, const std::vector<int>& multi) const;

  GridCell& cell(int slice, std::size_t flat) { return cells_[slice * per_slice_ + flat]; }
  const GridCell& cell(int slice, std::size_t flat) const {
    return cells_[slice * per_slice_ + flat];
  }

  /// Multilinear in space, cubic Lagrange in time (linear with fewer than
  /// four slices), renormalized to η(u,u) = 1. Returns false if x is outside the hull of cell centers or
  /// a corner cell is empty.
  bool interpolate(const Vector& x, Vector& u) const;

 private:
  int dim_;
  GridSpec spec_;
  double spacing_;
  std::size_t per_slice_;
  std::vector<GridCell> cells_;
};

/// Deposits snapshots[k] into slice k. Cells holding less than 1e-6 of the
/// slice's total weight are empty. Partial grids are merged in block order.
VelocityFieldGrid build_velocity_grid(const std::vector<Ensemble>& snapshots,
                                      const GridSpec& spec, int workers = 1);

struct CellResidual {
  std::size_t flat = 0;
  Vector center;
  Vector r;
  double norm = 0.0;  // ‖r‖_η̄ with η̄ built from the cell's V
};

struct ResidualResult {
  std::vector<CellResidual> cells;
  double R = 0.0;  // max over evaluated cells
};

/// r^i = V^k ∂_k V^i + Γ̄^i_jk V^j V^k on the interior cells of `slice`, with
/// central differences in time and space. Cells with an empty stencil
/// neighbour are skipped. Throws DomainError with fewer than 3 cells per
/// axis, no neighbouring slices, or no evaluable interior cell.
ResidualResult fluid_residual(const ConnectionField& averaged, const VelocityFieldGrid& grid,
                              int slice);

void write_grid_csv(std::ostream& out, const VelocityFieldGrid& grid, int slice,
                    const ResidualResult* residual = nullptr);

struct GapSample {
  double t = 0.0;
  double f = 0.0;
  double f_tilde = 0.0;
  double gap = 0.0;       // |f - f̃|
  double traj_gap = 0.0;  // spatial |x - x̃| at equal chart time
};

struct DistributionGap {
  std::vector<GapSample> samples;
  bool refused = false;
  double slope = 0.0;     // C_M, least squares through the origin
  double fit_residual = 0.0;  // sqrt(Σ(gap - C tg)² / Σ gap²)
};

/// Samples f and f̃ along the Lorentz trajectory at the chart times
/// `times`, together with the trajectory gap to the averaged trajectory
/// with the same initial data.
DistributionGap distribution_gap(const DistributionFunction& f, const DistributionFunction& f_tilde,
                                 const Trajectory& lorentz, const Trajectory& averaged,
                                 const std::vector<double>& times, double floor = 1e-14);

struct FluidSample {
  double t = 0.0;
  double gap = 0.0;  // spatial |x_fluid - x| at equal chart time
};

struct FluidComparison {
  std::vector<FluidSample> samples;
  bool truncated = false;  // the integral curve left the grid before the end
  double window_end = 0.0;
};

/// Integral curve of the grid's unit mean velocity from `start` against the
/// Lorentz trajectory with initial data (start, u(start)), compared at the
/// chart times `times`.
FluidComparison fluid_vs_particle(const VelocityFieldGrid& grid, const ConnectionField& lorentz,
                                  const Vector& start, const std::vector<double>& times, double h);

}  // namespace avl
