#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmtl/composition.hpp"
#include "mmtl/linalg.hpp"
#include "mmtl/models.hpp"
#include "mmtl/rng.hpp"
#include "mmtl/solver.hpp"

// Independent reference computations and the property suites built on them.
// Nothing here calls the routine it checks.
namespace mmtl::verify {

// ---- oracles ------------------------------------------------------------------

/// min over b on the lattice {0, step, 2 step, ..., >= max r} of
/// b + (1/alpha) sum (r_t - b)+. Exact when every r_t is a multiple of step.
AlphaMinimaxSolution grid_inner_minimize(double alpha, std::span<const double> r, double step = 1e-4);

/// Eigen-decomposition of a symmetric matrix by cyclic two-sided Jacobi.
/// Eigenvalues descending; eigenvectors are the columns of `vectors`.
Vector symmetric_eigen(const Matrix& a, Matrix* vectors = nullptr);

/// Largest singular value, from the eigenvalues of A^T A.
double spectral_norm(const Matrix& a);

/// Projection onto {s >= 0, sum s <= radius} by bisection on the threshold.
Vector simplex_projection_bisect(std::span<const double> s, double radius);

/// Trace-ball projection via symmetric_eigen of W^T W and simplex_projection_bisect.
Matrix trace_ball_projection_eigen(const Matrix& w, double radius);

// Certificates: for a feasible p and any convex set K,
// |p - proj_K(s)|^2 <= support_K(s - p) - <s - p, p>.
double ball_certificate(std::span<const double> s, std::span<const double> p, double radius);
double simplex_certificate(std::span<const double> s, std::span<const double> p, double radius);
double trace_ball_certificate(const Matrix& w, const Matrix& p, double radius);

/// Largest violation of the optimality conditions of X = svt(W, lambda):
/// |W - X|_op <= lambda and <W - X, X> = lambda |X|_tr.
double svt_optimality_violation(const Matrix& w, const Matrix& x, double lambda);

/// Minimum over v with |v| <= radius of v^T A v - 2 b^T v for symmetric PSD A.
Vector trust_region_quadratic(const Matrix& a, std::span<const double> b, double radius);

/// Global minimum of the constrained-EP squared-loss objective phi(risks):
/// nested golden-section search over v0 in its disk, exact trust-region solve
/// for each vt.
/// Intended for d <= 2.
double ep_constrained_grid_minimum(const MultiTaskDataset& data, double tau0, double tau1, const Composer& composer);

// ---- suites -----------------------------------------------------------------

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool passed() const;
};

struct SuiteOptions {
  std::uint64_t seed = 20240611;
  std::size_t instances = 1000;       // random cases per property
  std::size_t solver_instances = 20;  // solver_oracle only
  std::size_t theory_meta_reps = 500;
};

SuiteResult composition_suite(const SuiteOptions& opt = {});
SuiteResult projection_suite(const SuiteOptions& opt = {});
SuiteResult solver_oracle_suite(const SuiteOptions& opt = {});
SuiteResult subgradient_suite(const SuiteOptions& opt = {});
SuiteResult theory_suite(const SuiteOptions& opt = {});

/// Names accepted: composition, projections, solver_oracle, subgradients, theory.
SuiteResult run_suite(const std::string& name, const SuiteOptions& opt = {});
std::vector<std::string> suite_names();

/// Solver settings used for oracle comparisons on tiny instances.
SolveConfig oracle_solve_config();

/// Random constrained-EP toy instance: T tasks, d inputs, m points per task.
MultiTaskDataset random_toy_instance(KeyedRng& rng, std::size_t num_tasks, std::size_t dim, std::size_t m);

}  // namespace mmtl::verify
