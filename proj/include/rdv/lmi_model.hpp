#pragma once

// A small modeling layer for linear matrix inequalities: matrix decision
// variables, affine matrix expressions, symmetric block LMIs (each required to be
// negative definite) and a linear objective. Also assembles the guaranteed-cost
// and H-infinity synthesis programs.

#include "rdv/dynamics.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdv::lmi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class AssemblyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MissingAssignment : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class VarKind { Symmetric, Rectangular, Scalar };

/// Handle to a decision variable. Carries the shape so expressions can check
/// dimensions without the owning problem.
struct VarId {
  int index = -1;
  VarKind kind = VarKind::Scalar;
  int rows = 1;
  int cols = 1;

  [[nodiscard]] bool valid() const { return index >= 0; }
  /// Number of free scalars: n(n+1)/2 for symmetric, rows*cols otherwise.
  [[nodiscard]] int unknowns() const;
};

struct DecisionVar {
  VarId id;
  std::string name;
  std::optional<double> lower_bound;  // strict: var > lower_bound (scalars only)
};

/// Values for decision variables, keyed by variable index.
class Assignment {
 public:
  void set(VarId v, const MatrixXd& value);
  void set(VarId v, double value) { set(v, MatrixXd::Constant(1, 1, value)); }
  [[nodiscard]] const MatrixXd& get(VarId v) const;
  [[nodiscard]] double scalar(VarId v) const { return get(v)(0, 0); }
  [[nodiscard]] bool has(VarId v) const { return values_.count(v.index) != 0; }

 private:
  std::map<int, MatrixXd> values_;
};

/// One linear term. For matrix variables it contributes left * V * right (or
/// left * V^T * right); for scalar variables it contributes s * left.
struct LinearTerm {
  VarId var;
  MatrixXd left;
  MatrixXd right;
  bool transposed = false;
};

/// constant + sum of linear terms, all of shape rows x cols.
class AffineExpr {
 public:
  AffineExpr(int rows, int cols);
  static AffineExpr zero(int rows, int cols) { return {rows, cols}; }
  static AffineExpr constant(const MatrixXd& value);
  /// left * V * right.
  static AffineExpr product(const MatrixXd& left, VarId var, const MatrixXd& right);
  /// left * V^T * right.
  static AffineExpr product_transposed(const MatrixXd& left, VarId var, const MatrixXd& right);
  /// The variable itself.
  static AffineExpr variable(VarId var);
  /// s * coefficient for a scalar variable s.
  static AffineExpr scaled(VarId scalar, const MatrixXd& coefficient);

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] const MatrixXd& constant_part() const { return constant_; }
  [[nodiscard]] const std::vector<LinearTerm>& terms() const { return terms_; }

  [[nodiscard]] AffineExpr transpose() const;
  /// E + E^T.
  [[nodiscard]] AffineExpr sym() const;

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(double s);

  [[nodiscard]] MatrixXd evaluate(const Assignment& values) const;
  /// Contribution of the terms on one variable only, with that variable set to value.
  [[nodiscard]] MatrixXd evaluate_var(VarId var, const MatrixXd& value) const;

 private:
  int rows_;
  int cols_;
  MatrixXd constant_;
  std::vector<LinearTerm> terms_;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double s, AffineExpr a);
AffineExpr operator-(AffineExpr a);

/// Symmetric block matrix expression, required to be negative definite.
/// Only the upper-triangular blocks are stored; the rest follow by symmetry.
class BlockLmi {
 public:
  BlockLmi(std::string label, std::vector<int> block_sizes);

  /// Sets block (i, j) with i <= j. Throws AssemblyError on shape mismatch.
  void set(int i, int j, const AffineExpr& expr);

  [[nodiscard]] const std::string& label() const { return label_; }
  [[nodiscard]] const std::vector<int>& block_sizes() const { return sizes_; }
  [[nodiscard]] int dim() const;
  [[nodiscard]] int offset(int block) const;
  [[nodiscard]] const std::map<std::pair<int, int>, AffineExpr>& blocks() const { return blocks_; }

  /// Assembled dense symmetric matrix.
  [[nodiscard]] MatrixXd evaluate(const Assignment& values) const;
  /// Assembled matrix of the terms on one variable only (no constant).
  [[nodiscard]] MatrixXd evaluate_var(VarId var, const MatrixXd& value) const;
  /// Largest deviation from symmetry of the assembled diagonal blocks.
  [[nodiscard]] double symmetry_residual(const Assignment& values) const;

 private:
  std::string label_;
  std::vector<int> sizes_;
  std::map<std::pair<int, int>, AffineExpr> blocks_;
};

[[nodiscard]] inline MatrixXd evaluate(const BlockLmi& lmi, const Assignment& values) {
  return lmi.evaluate(values);
}

struct ObjectiveTerm {
  VarId var;
  double weight = 1.0;  // weight * s for scalars, weight * trace(V) for square matrices
};

class LmiProblem {
 public:
  VarId add_symmetric(const std::string& name, int dim);
  VarId add_rectangular(const std::string& name, int rows, int cols);
  VarId add_scalar(const std::string& name, std::optional<double> lower_bound = std::nullopt);

  /// Adds "lmi < 0". Checks that every term references a declared variable.
  void add_constraint(BlockLmi lmi);
  void add_objective(VarId var, double weight = 1.0);

  [[nodiscard]] const std::vector<DecisionVar>& vars() const { return vars_; }
  [[nodiscard]] const std::vector<BlockLmi>& constraints() const { return constraints_; }
  [[nodiscard]] const std::vector<ObjectiveTerm>& objective() const { return objective_; }
  [[nodiscard]] const DecisionVar& var(VarId id) const { return vars_.at(static_cast<size_t>(id.index)); }
  [[nodiscard]] std::optional<VarId> find(const std::string& name) const;

  [[nodiscard]] int num_unknowns() const;
  [[nodiscard]] double objective_value(const Assignment& values) const;

 private:
  VarId add(const std::string& name, VarKind kind, int rows, int cols, std::optional<double> lb);
  void check_declared(VarId v) const;

  std::vector<DecisionVar> vars_;
  std::vector<BlockLmi> constraints_;
  std::vector<ObjectiveTerm> objective_;
};

// ---------------------------------------------------------------------------
// Synthesis programs
// ---------------------------------------------------------------------------

/// Data of the thrust-limited robust guaranteed-cost program at any state size:
/// x' = (A + E1 Lambda E2) x + B u, cost weights Q, R, initial state x0 and
/// per-input thrust bounds u_max.
struct GuaranteedCostData {
  MatrixXd A, B, E1, E2, Q, R;
  VectorXd x0;
  VectorXd u_max;
};

/// Decision variables: X (sym), Y, eps > 0, theta = 1/rho > 0, sigma.
/// Constraints: cost LMI, initial-state LMI, one saturation LMI per input,
/// sigma > rho, X > 0. Objective: minimize sigma.
struct GuaranteedCostProblem {
  LmiProblem problem;
  VarId X, Y, eps, theta, sigma;
};

[[nodiscard]] GuaranteedCostProblem build_guaranteed_cost(const GuaranteedCostData& data);

[[nodiscard]] GuaranteedCostProblem build_in_plane(const InPlaneModel& inplane, const Mat4& Q_p,
                                                   const Mat2& R_p, const Vec4& p0, const Vec2& u_max);

[[nodiscard]] GuaranteedCostProblem build_coupled(const PlantModel& plant, const FullFactorization& fact,
                                                  const Mat6& Q, const Mat3& R, const Vec6& x0,
                                                  const Vec3& u_max);

/// Data of the robust H-infinity program: x' = (A + E1 Lambda E2) x + B u + Bw w,
/// controlled output [Q^(1/2) x; R^(1/2) u].
struct HinfData {
  MatrixXd A, B, Bw, E1, E2, Q, R;
};

/// Decision variables: X (sym), Y, eps > 0, g = gamma^2 > 0. One 10x10 LMI
/// (for the 2-state case) plus X > 0. Objective: minimize g.
struct HinfProblem {
  LmiProblem problem;
  VarId X, Y, eps, g;
};

[[nodiscard]] HinfProblem build_hinf(const HinfData& data);

[[nodiscard]] HinfProblem build_out_of_plane(const OutOfPlaneModel& outplane, const Mat2& Q_q, double R_q);

}  // namespace rdv::lmi
