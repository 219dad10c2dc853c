#pragma once

// Dense semidefinite programming: standard form, lowering from an LmiProblem,
// a primal-dual interior-point solver with Nesterov-Todd scaling, and an
// independent verifier.
//
// Standard form: minimize c'x subject to F0_j + sum_i x_i F_ij <= 0 for every
// block j, and x_i > l_i for each scalar bound.

#include "rdv/lmi_model.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rdv::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SdpBlock {
  std::string label;
  int dim = 0;
  MatrixXd constant;
  /// Nonzero coefficient matrices as (unknown index, F_i).
  std::vector<std::pair<int, MatrixXd>> coefficients;

  [[nodiscard]] MatrixXd evaluate(const VectorXd& x) const;
};

struct ScalarBound {
  int index = 0;
  double lower = 0.0;
};

struct StandardSdp {
  int num_unknowns = 0;
  VectorXd objective;
  std::vector<SdpBlock> blocks;
  std::vector<ScalarBound> scalar_bounds;

  /// Throws std::invalid_argument on inconsistent dimensions or asymmetric data.
  void validate() const;
};

/// Where each decision variable lives in the unknown vector.
class IndexMap {
 public:
  struct Entry {
    lmi::VarId var;
    std::string name;
    int offset = 0;
  };

  void add(lmi::VarId var, const std::string& name, int offset) { entries_.push_back({var, name, offset}); }
  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

  /// Symmetric variables use the orthonormal basis E_ii and (E_ij + E_ji)/sqrt(2).
  [[nodiscard]] lmi::Assignment reconstruct(const VectorXd& x) const;
  [[nodiscard]] VectorXd pack(const lmi::Assignment& values) const;
  [[nodiscard]] int size() const;

 private:
  std::vector<Entry> entries_;
};

struct Lowered {
  StandardSdp sdp;
  IndexMap map;
};

[[nodiscard]] Lowered lower(const lmi::LmiProblem& problem);

enum class SolveStatus { Optimal, Infeasible, MaxIterations, NumericalFailure };

[[nodiscard]] const char* to_string(SolveStatus s);

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
  bool verbose = false;
  /// Strictness margin: each normalized block must satisfy F <= -margin * I.
  double margin = 1e-9;
  /// Box on the internally scaled unknowns; keeps every program bounded.
  double radius = 1e7;

  void validate() const;
};

struct SdpSolution {
  VectorXd x;
  SolveStatus status = SolveStatus::NumericalFailure;
  double objective = 0.0;
  /// lambda_max per block of the internally scaled problem (margin excluded).
  std::vector<double> max_eigenvalues;
  int iterations = 0;
  /// Best phase-one value: negative means a strictly feasible point was found.
  double phase1_value = 0.0;
  double duality_gap = 0.0;
  std::vector<std::string> warnings;
};

/// Minimizes the objective. Phase one finds a strictly feasible point or
/// reports infeasibility; phase two is the primal-dual path-following method.
[[nodiscard]] SdpSolution solve(const StandardSdp& sdp, const SolverOptions& opts = {});

/// Phase one only: stops at the first strictly feasible point.
[[nodiscard]] SdpSolution find_feasible(const StandardSdp& sdp, const SolverOptions& opts = {});

/// The point maximizing the smallest constraint margin (phase one run to optimality).
[[nodiscard]] SdpSolution center(const StandardSdp& sdp, const SolverOptions& opts = {});

struct Verification {
  std::vector<double> max_eigenvalues;
  double objective = 0.0;
  /// Largest violation of the scalar bounds (l - x, positive when violated).
  double bound_violation = 0.0;
  [[nodiscard]] double worst() const;
};

/// Dense recomputation of every block's largest eigenvalue on the original data.
[[nodiscard]] Verification verify(const StandardSdp& sdp, const VectorXd& x);

/// Writes "block row col unknown value" lines (unknown 0 is the constant, i+1 is x_i);
/// upper triangle only.
void write_triplets(std::ostream& os, const StandardSdp& sdp);

}  // namespace rdv::sdp
