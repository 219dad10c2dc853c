#include "rdv/lmi_model.hpp"

#include <algorithm>
#include <set>

namespace rdv::lmi {

namespace {

std::string shape(int r, int c) { return std::to_string(r) + "x" + std::to_string(c); }

MatrixXd identity(int n) { return MatrixXd::Identity(n, n); }

}  // namespace

int VarId::unknowns() const {
  switch (kind) {
    case VarKind::Symmetric:
      return rows * (rows + 1) / 2;
    case VarKind::Rectangular:
      return rows * cols;
    case VarKind::Scalar:
      return 1;
  }
  return 0;
}

void Assignment::set(VarId v, const MatrixXd& value) {
  if (value.rows() != v.rows || value.cols() != v.cols)
    throw AssemblyError("assignment shape " + shape(static_cast<int>(value.rows()), static_cast<int>(value.cols())) +
                        " does not match variable shape " + shape(v.rows, v.cols));
  values_[v.index] = value;
}

const MatrixXd& Assignment::get(VarId v) const {
  auto it = values_.find(v.index);
  if (it == values_.end()) throw MissingAssignment("no value assigned to variable #" + std::to_string(v.index));
  return it->second;
}

// ---------------------------------------------------------------------------

AffineExpr::AffineExpr(int rows, int cols) : rows_(rows), cols_(cols), constant_(MatrixXd::Zero(rows, cols)) {
  if (rows < 1 || cols < 1) throw AssemblyError("expression dimensions must be positive");
}

AffineExpr AffineExpr::constant(const MatrixXd& value) {
  AffineExpr e(static_cast<int>(value.rows()), static_cast<int>(value.cols()));
  e.constant_ = value;
  return e;
}

AffineExpr AffineExpr::product(const MatrixXd& left, VarId var, const MatrixXd& right) {
  if (var.kind == VarKind::Scalar) throw AssemblyError("product() needs a matrix variable; use scaled()");
  if (left.cols() != var.rows || right.rows() != var.cols)
    throw AssemblyError("product: " + shape(static_cast<int>(left.rows()), static_cast<int>(left.cols())) + " * " +
                        shape(var.rows, var.cols) + " * " +
                        shape(static_cast<int>(right.rows()), static_cast<int>(right.cols())));
  AffineExpr e(static_cast<int>(left.rows()), static_cast<int>(right.cols()));
  e.terms_.push_back({var, left, right, false});
  return e;
}

AffineExpr AffineExpr::product_transposed(const MatrixXd& left, VarId var, const MatrixXd& right) {
  if (var.kind == VarKind::Scalar) throw AssemblyError("product_transposed() needs a matrix variable");
  if (left.cols() != var.cols || right.rows() != var.rows)
    throw AssemblyError("product_transposed: " + shape(static_cast<int>(left.rows()), static_cast<int>(left.cols())) +
                        " * " + shape(var.cols, var.rows) + " * " +
                        shape(static_cast<int>(right.rows()), static_cast<int>(right.cols())));
  AffineExpr e(static_cast<int>(left.rows()), static_cast<int>(right.cols()));
  e.terms_.push_back({var, left, right, true});
  return e;
}

AffineExpr AffineExpr::variable(VarId var) {
  if (var.kind == VarKind::Scalar) return scaled(var, MatrixXd::Ones(1, 1));
  return product(identity(var.rows), var, identity(var.cols));
}

AffineExpr AffineExpr::scaled(VarId scalar, const MatrixXd& coefficient) {
  if (scalar.kind != VarKind::Scalar) throw AssemblyError("scaled() needs a scalar variable");
  AffineExpr e(static_cast<int>(coefficient.rows()), static_cast<int>(coefficient.cols()));
  e.terms_.push_back({scalar, coefficient, MatrixXd(), false});
  return e;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr t(cols_, rows_);
  t.constant_ = constant_.transpose();
  for (const auto& term : terms_) {
    if (term.var.kind == VarKind::Scalar)
      t.terms_.push_back({term.var, term.left.transpose(), MatrixXd(), false});
    else
      t.terms_.push_back({term.var, term.right.transpose(), term.left.transpose(), !term.transposed});
  }
  return t;
}

AffineExpr AffineExpr::sym() const {
  if (rows_ != cols_) throw AssemblyError("sym() of a non-square expression");
  return *this + transpose();
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_)
    throw AssemblyError("adding " + shape(other.rows_, other.cols_) + " to " + shape(rows_, cols_));
  constant_ += other.constant_;
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) { return *this += (-1.0) * other; }

AffineExpr& AffineExpr::operator*=(double s) {
  constant_ *= s;
  for (auto& term : terms_) term.left *= s;
  return *this;
}

MatrixXd AffineExpr::evaluate(const Assignment& values) const {
  MatrixXd out = constant_;
  for (const auto& term : terms_) {
    const MatrixXd& v = values.get(term.var);
    if (term.var.kind == VarKind::Scalar)
      out.noalias() += v(0, 0) * term.left;
    else if (term.transposed)
      out.noalias() += term.left * v.transpose() * term.right;
    else
      out.noalias() += term.left * v * term.right;
  }
  return out;
}

MatrixXd AffineExpr::evaluate_var(VarId var, const MatrixXd& v) const {
  MatrixXd out = MatrixXd::Zero(rows_, cols_);
  for (const auto& term : terms_) {
    if (term.var.index != var.index) continue;
    if (term.var.kind == VarKind::Scalar)
      out.noalias() += v(0, 0) * term.left;
    else if (term.transposed)
      out.noalias() += term.left * v.transpose() * term.right;
    else
      out.noalias() += term.left * v * term.right;
  }
  return out;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
AffineExpr operator-(AffineExpr a) { return a *= -1.0; }

// ---------------------------------------------------------------------------

BlockLmi::BlockLmi(std::string label, std::vector<int> block_sizes)
    : label_(std::move(label)), sizes_(std::move(block_sizes)) {
  if (sizes_.empty()) throw AssemblyError(label_ + ": no blocks");
  for (int s : sizes_)
    if (s < 1) throw AssemblyError(label_ + ": block sizes must be positive");
}

void BlockLmi::set(int i, int j, const AffineExpr& expr) {
  const int nb = static_cast<int>(sizes_.size());
  if (i < 0 || j < 0 || i >= nb || j >= nb || i > j)
    throw AssemblyError(label_ + ": block (" + std::to_string(i) + "," + std::to_string(j) +
                        ") is not an upper-triangular block");
  if (expr.rows() != sizes_[static_cast<size_t>(i)] || expr.cols() != sizes_[static_cast<size_t>(j)])
    throw AssemblyError(label_ + ": block (" + std::to_string(i) + "," + std::to_string(j) + ") expects " +
                        shape(sizes_[static_cast<size_t>(i)], sizes_[static_cast<size_t>(j)]) + ", got " +
                        shape(expr.rows(), expr.cols()));
  blocks_.insert_or_assign({i, j}, expr);
}

int BlockLmi::dim() const {
  int d = 0;
  for (int s : sizes_) d += s;
  return d;
}

int BlockLmi::offset(int block) const {
  int o = 0;
  for (int k = 0; k < block; ++k) o += sizes_[static_cast<size_t>(k)];
  return o;
}

namespace {

template <class Eval>
MatrixXd assemble(const BlockLmi& lmi, Eval&& eval) {
  const int d = lmi.dim();
  MatrixXd out = MatrixXd::Zero(d, d);
  for (const auto& [ij, expr] : lmi.blocks()) {
    const auto [i, j] = ij;
    const MatrixXd v = eval(expr);
    const int oi = lmi.offset(i);
    const int oj = lmi.offset(j);
    if (i == j) {
      // Diagonal blocks are symmetric by construction; average away round-off.
      out.block(oi, oj, v.rows(), v.cols()) = 0.5 * (v + v.transpose());
    } else {
      out.block(oi, oj, v.rows(), v.cols()) = v;
      out.block(oj, oi, v.cols(), v.rows()) = v.transpose();
    }
  }
  return out;
}

}  // namespace

MatrixXd BlockLmi::evaluate(const Assignment& values) const {
  return assemble(*this, [&](const AffineExpr& e) { return e.evaluate(values); });
}

MatrixXd BlockLmi::evaluate_var(VarId var, const MatrixXd& value) const {
  return assemble(*this, [&](const AffineExpr& e) { return e.evaluate_var(var, value); });
}

double BlockLmi::symmetry_residual(const Assignment& values) const {
  double worst = 0.0;
  for (const auto& [ij, expr] : blocks_) {
    if (ij.first != ij.second) continue;
    const MatrixXd v = expr.evaluate(values);
    worst = std::max(worst, (v - v.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------

VarId LmiProblem::add(const std::string& name, VarKind kind, int rows, int cols, std::optional<double> lb) {
  if (rows < 1 || cols < 1) throw AssemblyError("variable " + name + ": dimensions must be >= 1");
  if (find(name)) throw AssemblyError("variable name '" + name + "' already declared");
  VarId id{static_cast<int>(vars_.size()), kind, rows, cols};
  vars_.push_back({id, name, lb});
  return id;
}

VarId LmiProblem::add_symmetric(const std::string& name, int dim) {
  return add(name, VarKind::Symmetric, dim, dim, std::nullopt);
}

VarId LmiProblem::add_rectangular(const std::string& name, int rows, int cols) {
  return add(name, VarKind::Rectangular, rows, cols, std::nullopt);
}

VarId LmiProblem::add_scalar(const std::string& name, std::optional<double> lower_bound) {
  return add(name, VarKind::Scalar, 1, 1, lower_bound);
}

std::optional<VarId> LmiProblem::find(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return v.id;
  return std::nullopt;
}

void LmiProblem::check_declared(VarId v) const {
  if (v.index < 0 || v.index >= static_cast<int>(vars_.size()))
    throw AssemblyError("reference to undeclared variable #" + std::to_string(v.index));
  const VarId& d = vars_[static_cast<size_t>(v.index)].id;
  if (d.kind != v.kind || d.rows != v.rows || d.cols != v.cols)
    throw AssemblyError("variable handle does not match declaration of '" + vars_[static_cast<size_t>(v.index)].name +
                        "'");
}

void LmiProblem::add_constraint(BlockLmi lmi) {
  for (const auto& [ij, expr] : lmi.blocks())
    for (const auto& term : expr.terms()) check_declared(term.var);
  constraints_.push_back(std::move(lmi));
}

void LmiProblem::add_objective(VarId var, double weight) {
  check_declared(var);
  if (var.rows != var.cols) throw AssemblyError("objective terms need scalar or square variables");
  objective_.push_back({var, weight});
}

int LmiProblem::num_unknowns() const {
  int total = 0;
  for (const auto& v : vars_) total += v.id.unknowns();
  return total;
}

double LmiProblem::objective_value(const Assignment& values) const {
  double f = 0.0;
  for (const auto& t : objective_) f += t.weight * values.get(t.var).trace();
  return f;
}

// ---------------------------------------------------------------------------

GuaranteedCostProblem build_guaranteed_cost(const GuaranteedCostData& d) {
  const int n = static_cast<int>(d.A.rows());
  const int m = static_cast<int>(d.B.cols());
  const int k1 = static_cast<int>(d.E1.cols());
  const int k2 = static_cast<int>(d.E2.rows());
  if (d.A.cols() != n || d.B.rows() != n || d.E1.rows() != n || d.E2.cols() != n || d.Q.rows() != n ||
      d.Q.cols() != n || d.R.rows() != m || d.R.cols() != m || d.x0.size() != n || d.u_max.size() != m)
    throw AssemblyError("guaranteed-cost data: inconsistent dimensions");
  if (k1 != k2) throw AssemblyError("guaranteed-cost data: E1 columns must match E2 rows");
  if ((d.u_max.array() <= 0.0).any()) throw AssemblyError("guaranteed-cost data: thrust bounds must be positive");

  GuaranteedCostProblem gp;
  auto& p = gp.problem;
  gp.X = p.add_symmetric("X", n);
  gp.Y = p.add_rectangular("Y", m, n);
  gp.eps = p.add_scalar("eps", 0.0);
  gp.theta = p.add_scalar("theta", 0.0);
  gp.sigma = p.add_scalar("sigma");

  const MatrixXd In = identity(n);
  const MatrixXd Im = identity(m);

  // Cost / robust stability.
  {
    BlockLmi L("cost", {n, k2, m, n});
    AffineExpr a11 = (AffineExpr::product(d.A, gp.X, In) - AffineExpr::product(d.B, gp.Y, In)).sym() +
                     AffineExpr::scaled(gp.eps, d.E1 * d.E1.transpose());
    L.set(0, 0, a11);
    L.set(0, 1, AffineExpr::product(In, gp.X, d.E2.transpose()));
    L.set(0, 2, AffineExpr::product_transposed(In, gp.Y, Im));
    L.set(0, 3, AffineExpr::variable(gp.X));
    L.set(1, 1, AffineExpr::scaled(gp.eps, -identity(k2)));
    L.set(2, 2, AffineExpr::constant(-d.R.inverse()));
    L.set(3, 3, AffineExpr::constant(-d.Q.inverse()));
    p.add_constraint(std::move(L));
  }
  // Initial state inside the cost ellipsoid: x0' X^-1 x0 <= rho.
  {
    BlockLmi L("initial-state", {1, n});
    L.set(0, 0, AffineExpr::scaled(gp.theta, -MatrixXd::Ones(1, 1)));
    L.set(0, 1, AffineExpr::scaled(gp.theta, d.x0.transpose()));
    L.set(1, 1, -AffineExpr::variable(gp.X));
    p.add_constraint(std::move(L));
  }
  // Saturation, one per input axis with the selector U_i = e_i e_i'.
  for (int i = 0; i < m; ++i) {
    MatrixXd U = MatrixXd::Zero(m, m);
    U(i, i) = 1.0;
    BlockLmi L("saturation-" + std::to_string(i), {m, n});
    L.set(0, 0, AffineExpr::scaled(gp.theta, -Im));
    L.set(0, 1, AffineExpr::product(U, gp.Y, In));
    L.set(1, 1, AffineExpr::product(-d.u_max(i) * d.u_max(i) * In, gp.X, In));
    p.add_constraint(std::move(L));
  }
  // sigma > rho.
  {
    BlockLmi L("sigma-bound", {1, 1});
    L.set(0, 0, AffineExpr::scaled(gp.sigma, -MatrixXd::Ones(1, 1)));
    L.set(0, 1, AffineExpr::constant(MatrixXd::Ones(1, 1)));
    L.set(1, 1, AffineExpr::scaled(gp.theta, -MatrixXd::Ones(1, 1)));
    p.add_constraint(std::move(L));
  }
  {
    BlockLmi L("X-positive", {n});
    L.set(0, 0, -AffineExpr::variable(gp.X));
    p.add_constraint(std::move(L));
  }
  p.add_objective(gp.sigma);
  return gp;
}

GuaranteedCostProblem build_in_plane(const InPlaneModel& in, const Mat4& Q_p, const Mat2& R_p, const Vec4& p0,
                                     const Vec2& u_max) {
  return build_guaranteed_cost({in.A_p, in.B_p, in.E_p1, in.E_p2, Q_p, R_p, p0, u_max});
}

GuaranteedCostProblem build_coupled(const PlantModel& plant, const FullFactorization& fact, const Mat6& Q,
                                    const Mat3& R, const Vec6& x0, const Vec3& u_max) {
  return build_guaranteed_cost({plant.A, plant.B, fact.E1, fact.E2, Q, R, x0, u_max});
}

HinfProblem build_hinf(const HinfData& d) {
  const int n = static_cast<int>(d.A.rows());
  const int m = static_cast<int>(d.B.cols());
  const int nw = static_cast<int>(d.Bw.cols());
  const int k1 = static_cast<int>(d.E1.cols());
  const int k2 = static_cast<int>(d.E2.rows());
  if (d.A.cols() != n || d.B.rows() != n || d.Bw.rows() != n || d.E1.rows() != n || d.E2.cols() != n ||
      d.Q.rows() != n || d.Q.cols() != n || d.R.rows() != m || d.R.cols() != m)
    throw AssemblyError("H-infinity data: inconsistent dimensions");

  HinfProblem hp;
  auto& p = hp.problem;
  hp.X = p.add_symmetric("X", n);
  hp.Y = p.add_rectangular("Y", m, n);
  hp.eps = p.add_scalar("eps", 0.0);
  hp.g = p.add_scalar("g", 0.0);

  const MatrixXd In = identity(n);
  BlockLmi L("hinf", {n, nw, k2, k1, m, n});
  L.set(0, 0,
        (AffineExpr::product(d.A, hp.X, In) - AffineExpr::product(d.B, hp.Y, In)).sym() +
            AffineExpr::scaled(hp.eps, d.E1 * d.E1.transpose()));
  L.set(0, 1, AffineExpr::constant(d.Bw));
  L.set(0, 2, AffineExpr::product(In, hp.X, d.E2.transpose()));
  L.set(0, 3, AffineExpr::zero(n, k1));
  L.set(0, 4, AffineExpr::product_transposed(In, hp.Y, identity(m)));
  L.set(0, 5, AffineExpr::variable(hp.X));
  L.set(1, 1, AffineExpr::scaled(hp.g, -identity(nw)));
  L.set(2, 2, AffineExpr::scaled(hp.eps, -identity(k2)));
  L.set(3, 3, AffineExpr::scaled(hp.eps, -identity(k1)));
  L.set(4, 4, AffineExpr::constant(-d.R.inverse()));
  L.set(5, 5, AffineExpr::constant(-d.Q.inverse()));
  p.add_constraint(std::move(L));

  BlockLmi pos("X-positive", {n});
  pos.set(0, 0, -AffineExpr::variable(hp.X));
  p.add_constraint(std::move(pos));

  p.add_objective(hp.g);
  return hp;
}

HinfProblem build_out_of_plane(const OutOfPlaneModel& out, const Mat2& Q_q, double R_q) {
  if (!(R_q > 0.0)) throw AssemblyError("R_q must be positive");
  return build_hinf({out.A_q, out.B_q, out.B_q, out.E_q1, out.E_q2, Q_q, MatrixXd::Constant(1, 1, R_q)});
}

}  // namespace rdv::lmi
