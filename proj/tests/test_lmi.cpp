#include "rdv/dynamics.hpp"
#include "rdv/lmi_model.hpp"
#include "rdv/sdp.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace rdv;
using namespace rdv::lmi;
using rdv::test::leo_chaser;
using rdv::test::leo_orbit;

namespace {

double lambda_max(const MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

MatrixXd spd(test::Rng& rng, int n) {
  const MatrixXd G = rng.matrix(n, n);
  return G * G.transpose() + MatrixXd::Identity(n, n);
}

struct Models {
  PlantModel plant;
  InPlaneModel in;
  OutOfPlaneModel out;
};

Models leo_models(double e = 0.05) {
  OrbitConfig cfg = leo_orbit();
  cfg.e = e;
  Models m;
  m.plant = build_plant(cfg, leo_chaser());
  m.in = split_in_plane(m.plant, cfg, leo_chaser());
  m.out = split_out_of_plane(m.plant, cfg, leo_chaser());
  return m;
}

const BlockLmi& constraint(const LmiProblem& p, const std::string& label) {
  for (const auto& c : p.constraints())
    if (c.label() == label) return c;
  throw std::out_of_range(label);
}

Assignment random_assignment(const LmiProblem& p, test::Rng& rng) {
  Assignment a;
  for (const auto& v : p.vars()) {
    MatrixXd m = rng.matrix(v.id.rows, v.id.cols);
    if (v.id.kind == VarKind::Symmetric) m = (0.5 * (m + m.transpose())).eval();
    a.set(v.id, m);
  }
  return a;
}

Assignment combine(const LmiProblem& p, const Assignment& a, double s, const Assignment& b, double t) {
  Assignment r;
  for (const auto& v : p.vars()) r.set(v.id, s * a.get(v.id) + t * b.get(v.id));
  return r;
}

// Small well-scaled guaranteed-cost instance.
GuaranteedCostData random_gc_data(test::Rng& rng) {
  GuaranteedCostData d;
  d.A = rng.matrix(3, 3);
  d.B = rng.matrix(3, 2);
  d.E1 = rng.matrix(3, 3, 0.3);
  d.E2 = rng.matrix(3, 3, 0.3);
  d.Q = spd(rng, 3);
  d.R = spd(rng, 2);
  d.x0 = rng.matrix(3, 1);
  d.u_max = Eigen::Vector2d(5.0, 5.0);
  return d;
}

HinfData random_hinf_data(test::Rng& rng) {
  HinfData d;
  d.A = rng.matrix(2, 2);
  d.B = rng.matrix(2, 1);
  d.Bw = rng.matrix(2, 1);
  d.E1 = rng.matrix(2, 2, 0.3);
  d.E2 = rng.matrix(2, 2, 0.3);
  d.Q = spd(rng, 2);
  d.R = spd(rng, 1);
  return d;
}

// Random strictly feasible points near the analytic center.
std::vector<Assignment> feasible_samples(const LmiProblem& p, test::Rng& rng, int count) {
  const auto low = sdp::lower(p);
  const auto c = sdp::center(low.sdp);
  std::vector<Assignment> out;
  if (!(c.phase1_value < 0)) return out;
  for (int k = 0; k < 50 * count && static_cast<int>(out.size()) < count; ++k) {
    Eigen::VectorXd x = c.x;
    const double shrink = 0.3 * std::pow(0.5, k % 12);
    for (int i = 0; i < x.size(); ++i) x(i) += shrink * (std::abs(x(i)) + 1e-3) * rng.uniform(-1.0, 1.0);
    if (sdp::verify(low.sdp, x).worst() < 0) out.push_back(low.map.reconstruct(x));
  }
  if (out.empty()) out.push_back(low.map.reconstruct(c.x));
  return out;
}

}  // namespace

TEST(LmiStructure, UnknownCounts) {
  const Models m = leo_models();
  const Vec4 p0(-5000, 5000, 5, -5);
  EXPECT_EQ(build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), p0, Vec2(15, 15)).problem.num_unknowns(), 21);
  EXPECT_EQ(build_out_of_plane(m.out, Mat2::Identity(), 1.0).problem.num_unknowns(), 7);
  const auto fact = full_factorization(m.in, m.out);
  EXPECT_EQ(build_coupled(m.plant, fact, Mat6::Identity(), Mat3::Identity(), test::leo_x0().vector(), Vec3(15, 15, 5))
                .problem.num_unknowns(),
            42);
}

TEST(LmiStructure, InPlaneConstraintSet) {
  const Models m = leo_models();
  const auto gp = build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), Vec4(-5000, 5000, 5, -5), Vec2(15, 15));
  std::vector<std::pair<std::string, int>> got;
  for (const auto& c : gp.problem.constraints()) got.emplace_back(c.label(), c.dim());
  const std::vector<std::pair<std::string, int>> want = {{"cost", 14},         {"initial-state", 5},
                                                         {"saturation-0", 6},  {"saturation-1", 6},
                                                         {"sigma-bound", 2},   {"X-positive", 4}};
  EXPECT_EQ(got, want);
  ASSERT_EQ(gp.problem.objective().size(), 1u);
  EXPECT_EQ(gp.problem.objective()[0].var.index, gp.sigma.index);
}

TEST(LmiStructure, CostBlockHoldsGainTranspose) {
  const Models m = leo_models();
  const auto gp = build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), Vec4(-5000, 5000, 5, -5), Vec2(15, 15));
  test::Rng rng(21);
  const Assignment a = random_assignment(gp.problem, rng);
  const MatrixXd L = constraint(gp.problem, "cost").evaluate(a);
  EXPECT_LE((L.block(0, 8, 4, 2) - a.get(gp.Y).transpose()).norm(), 1e-15);
  EXPECT_LE((L.block(8, 0, 2, 4) - a.get(gp.Y)).norm(), 1e-15);
}

TEST(LmiStructure, CircularOrbitDropsUncertainty) {
  const Models m = leo_models(0.0);
  const auto gp = build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), Vec4(-5000, 5000, 5, -5), Vec2(15, 15));
  test::Rng rng(22);
  const Assignment a = random_assignment(gp.problem, rng);
  const MatrixXd L = constraint(gp.problem, "cost").evaluate(a);
  const MatrixXd AX = m.in.A_p * a.get(gp.X) - m.in.B_p * a.get(gp.Y);
  EXPECT_LE((L.topLeftCorner(4, 4) - (AX + AX.transpose())).norm(), 1e-15 * (1 + AX.norm()));
}

TEST(LmiStructure, HandAssembledCostMatrix) {
  const Models m = leo_models();
  const auto gp = build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), Vec4(-5000, 5000, 5, -5), Vec2(15, 15));
  Assignment a;
  a.set(gp.X, MatrixXd::Identity(4, 4));
  a.set(gp.Y, MatrixXd::Zero(2, 4));
  a.set(gp.eps, 1.0);
  a.set(gp.theta, 0.5);
  a.set(gp.sigma, 3.0);
  MatrixXd H = MatrixXd::Zero(14, 14);
  H.block(0, 0, 4, 4) = m.in.A_p + m.in.A_p.transpose() + m.in.E_p1 * m.in.E_p1.transpose();
  H.block(0, 4, 4, 4) = m.in.E_p2.transpose();
  H.block(4, 0, 4, 4) = m.in.E_p2;
  H.block(4, 4, 4, 4) = -MatrixXd::Identity(4, 4);
  H.block(8, 8, 2, 2) = -MatrixXd::Identity(2, 2);
  H.block(0, 10, 4, 4) = MatrixXd::Identity(4, 4);
  H.block(10, 0, 4, 4) = MatrixXd::Identity(4, 4);
  H.block(10, 10, 4, 4) = -MatrixXd::Identity(4, 4);
  EXPECT_LE((constraint(gp.problem, "cost").evaluate(a) - H).norm(), 1e-15);

  MatrixXd I0 = MatrixXd::Zero(5, 5);
  I0(0, 0) = -0.5;
  I0.block(0, 1, 1, 4) = 0.5 * Vec4(-5000, 5000, 5, -5).transpose();
  I0.block(1, 0, 4, 1) = 0.5 * Vec4(-5000, 5000, 5, -5);
  I0.block(1, 1, 4, 4) = -MatrixXd::Identity(4, 4);
  EXPECT_LE((constraint(gp.problem, "initial-state").evaluate(a) - I0).norm(), 1e-12);

  MatrixXd S0 = MatrixXd::Zero(6, 6);
  S0.block(0, 0, 2, 2) = -0.5 * MatrixXd::Identity(2, 2);
  S0.block(2, 2, 4, 4) = -225.0 * MatrixXd::Identity(4, 4);
  EXPECT_LE((constraint(gp.problem, "saturation-0").evaluate(a) - S0).norm(), 1e-12);
}

TEST(LmiStructure, SaturationSelectors) {
  const Models m = leo_models();
  const auto gp = build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), Vec4(-5000, 5000, 5, -5), Vec2(15, 9));
  test::Rng rng(23);
  const Assignment a = random_assignment(gp.problem, rng);
  const MatrixXd& Y = a.get(gp.Y);
  const MatrixXd S0 = constraint(gp.problem, "saturation-0").evaluate(a);
  const MatrixXd S1 = constraint(gp.problem, "saturation-1").evaluate(a);
  EXPECT_LE((S0.block(0, 2, 1, 4) - Y.row(0)).norm(), 1e-15);
  EXPECT_LE(S0.block(1, 2, 1, 4).norm(), 0.0);
  EXPECT_LE((S1.block(1, 2, 1, 4) - Y.row(1)).norm(), 1e-15);
  EXPECT_LE(S1.block(0, 2, 1, 4).norm(), 0.0);
  EXPECT_LE((S1.block(2, 2, 4, 4) + 81.0 * a.get(gp.X)).norm(), 1e-12);
}

TEST(LmiStructure, OutOfPlaneBlocks) {
  const Models m = leo_models();
  const auto hp = build_out_of_plane(m.out, Mat2::Identity(), 1.0);
  ASSERT_EQ(hp.problem.constraints().size(), 2u);
  EXPECT_EQ(constraint(hp.problem, "hinf").dim(), 10);
  test::Rng rng(24);
  const Assignment a = random_assignment(hp.problem, rng);
  const MatrixXd L = constraint(hp.problem, "hinf").evaluate(a);
  EXPECT_LE((L.block(0, 2, 2, 1) - m.out.B_q).norm(), 0.0);
  EXPECT_EQ(L(7, 7), -1.0);
  EXPECT_DOUBLE_EQ(L(2, 2), -a.scalar(hp.g));
  EXPECT_LE(L.block(0, 5, 2, 2).norm(), 0.0);
}

// With the uncertainty channels removed the H-infinity LMI is congruent to the
// textbook bounded-real form [sym(AX-BY) Bw (CX+DY)'; Bw' -g 0; CX+DY 0 -I].
TEST(LmiStructure, NominalBoundedRealForm) {
  test::Rng rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    HinfData d = random_hinf_data(rng);
    d.E1.setZero();
    d.E2.setZero();
    const auto hp = build_hinf(d);
    const Assignment a = random_assignment(hp.problem, rng);
    const MatrixXd L = constraint(hp.problem, "hinf").evaluate(a);
    const std::vector<int> keep = {0, 1, 2, 7, 8, 9};
    MatrixXd R(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) R(i, j) = L(keep[i], keep[j]);

    const MatrixXd Rh = Eigen::LLT<MatrixXd>(d.R).matrixL();
    const MatrixXd Qh = Eigen::LLT<MatrixXd>(d.Q).matrixL();
    MatrixXd T = MatrixXd::Identity(6, 6);
    T.block(3, 3, 1, 1) = Rh;
    T.block(4, 4, 2, 2) = Qh;
    const MatrixXd ours = T.transpose() * R * T;

    const MatrixXd& X = a.get(hp.X);
    const MatrixXd& Y = a.get(hp.Y);
    MatrixXd CXDY(3, 2);
    CXDY << Rh.transpose() * Y, Qh.transpose() * X;
    MatrixXd brl = MatrixXd::Zero(6, 6);
    const MatrixXd AX = d.A * X - d.B * Y;
    brl.block(0, 0, 2, 2) = AX + AX.transpose();
    brl.block(0, 2, 2, 1) = d.Bw;
    brl.block(2, 0, 1, 2) = d.Bw.transpose();
    brl(2, 2) = -a.scalar(hp.g);
    brl.block(0, 3, 2, 3) = CXDY.transpose();
    brl.block(3, 0, 3, 2) = CXDY;
    brl.block(3, 3, 3, 3) = -MatrixXd::Identity(3, 3);
    EXPECT_LE((ours - brl).norm(), 1e-12 * brl.norm());
  }
}

TEST(LmiStructure, CoupledContainsInPlaneBlock) {
  const Models m = leo_models();
  const auto fact = full_factorization(m.in, m.out);
  const auto cp =
      build_coupled(m.plant, fact, Mat6::Identity(), Mat3::Identity(), test::leo_x0().vector(), Vec3(15, 15, 5));
  const auto ip = build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), Vec4(-5000, 5000, 5, -5), Vec2(15, 15));
  test::Rng rng(26);
  const MatrixXd Xp = spd(rng, 4), Xq = spd(rng, 2);
  const MatrixXd Yp = rng.matrix(2, 4), Yq = rng.matrix(1, 2);
  MatrixXd X = MatrixXd::Zero(6, 6), Y = MatrixXd::Zero(3, 6);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) X(kInPlaneIdx[i], kInPlaneIdx[j]) = Xp(i, j);
    for (int r = 0; r < 2; ++r) Y(r, kInPlaneIdx[i]) = Yp(r, i);
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) X(kOutOfPlaneIdx[i], kOutOfPlaneIdx[j]) = Xq(i, j);
    Y(2, kOutOfPlaneIdx[i]) = Yq(0, i);
  }
  Assignment ac, ai;
  ac.set(cp.X, X);
  ac.set(cp.Y, Y);
  ac.set(cp.eps, 0.7);
  ac.set(cp.theta, 0.1);
  ac.set(cp.sigma, 1.0);
  ai.set(ip.X, Xp);
  ai.set(ip.Y, Yp);
  ai.set(ip.eps, 0.7);
  ai.set(ip.theta, 0.1);
  ai.set(ip.sigma, 1.0);
  const MatrixXd Lc = constraint(cp.problem, "cost").evaluate(ac).topLeftCorner(6, 6);
  const MatrixXd Li = constraint(ip.problem, "cost").evaluate(ai).topLeftCorner(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      EXPECT_NEAR(Lc(kInPlaneIdx[i], kInPlaneIdx[j]), Li(i, j), 1e-12 * (1 + std::abs(Li(i, j))));
}

TEST(LmiEvaluate, ZeroAssignmentGivesConstant) {
  const Models m = leo_models();
  const auto hp = build_out_of_plane(m.out, Mat2::Identity(), 1.0);
  Assignment z;
  for (const auto& v : hp.problem.vars()) z.set(v.id, MatrixXd::Zero(v.id.rows, v.id.cols));
  MatrixXd C = MatrixXd::Zero(10, 10);
  C.block(0, 2, 2, 1) = m.out.B_q;
  C.block(2, 0, 1, 2) = m.out.B_q.transpose();
  C(7, 7) = -1.0;
  C.block(8, 8, 2, 2) = -MatrixXd::Identity(2, 2);
  EXPECT_LE((constraint(hp.problem, "hinf").evaluate(z) - C).norm(), 0.0);
}

TEST(LmiEvaluate, AffinenessProperty) {
  const Models m = leo_models();
  const auto fact = full_factorization(m.in, m.out);
  std::vector<LmiProblem> problems = {
      build_in_plane(m.in, Mat4::Identity(), Mat2::Identity(), Vec4(-5000, 5000, 5, -5), Vec2(15, 15)).problem,
      build_out_of_plane(m.out, Mat2::Identity(), 1.0).problem,
      build_coupled(m.plant, fact, Mat6::Identity(), Mat3::Identity(), test::leo_x0().vector(), Vec3(15, 15, 5))
          .problem};
  test::Rng rng(27);
  for (const auto& p : problems) {
    Assignment zero;
    for (const auto& v : p.vars()) zero.set(v.id, MatrixXd::Zero(v.id.rows, v.id.cols));
    for (int trial = 0; trial < 25; ++trial) {
      const Assignment a = random_assignment(p, rng);
      const Assignment b = random_assignment(p, rng);
      const Assignment ab = combine(p, a, 1.0, b, 1.0);
      const double t = rng.uniform(-3.0, 3.0);
      const Assignment ta = combine(p, a, t, zero, 0.0);
      for (const auto& c : p.constraints()) {
        const MatrixXd lhs = c.evaluate(ab) + c.evaluate(zero);
        const MatrixXd rhs = c.evaluate(a) + c.evaluate(b);
        EXPECT_LE((lhs - rhs).norm(), 1e-12 * (1.0 + rhs.norm())) << c.label();
        const MatrixXd lin = c.evaluate(ta) - c.evaluate(zero);
        EXPECT_LE((lin - t * (c.evaluate(a) - c.evaluate(zero))).norm(), 1e-12 * (1.0 + lin.norm())) << c.label();
        const MatrixXd full = c.evaluate(a);
        EXPECT_LE((full - full.transpose()).norm(), 1e-12 * full.norm()) << c.label();
        EXPECT_LE(c.symmetry_residual(a), 1e-12 * full.norm()) << c.label();
      }
    }
  }
}

TEST(LmiEvaluate, MissingAssignmentThrows) {
  const Models m = leo_models();
  const auto hp = build_out_of_plane(m.out, Mat2::Identity(), 1.0);
  Assignment a;
  a.set(hp.X, MatrixXd::Identity(2, 2));
  EXPECT_THROW((void)constraint(hp.problem, "hinf").evaluate(a), MissingAssignment);
}

TEST(LmiEvaluate, ShapeErrors) {
  LmiProblem p;
  const VarId X = p.add_symmetric("X", 3);
  BlockLmi L("bad", {2, 3});
  EXPECT_THROW(L.set(0, 0, AffineExpr::variable(X)), AssemblyError);
  EXPECT_THROW(L.set(1, 0, AffineExpr::zero(3, 2)), AssemblyError);
  EXPECT_THROW((void)AffineExpr::product(MatrixXd::Identity(2, 2), X, MatrixXd::Identity(3, 3)), AssemblyError);
  EXPECT_THROW((void)p.add_symmetric("X", 2), AssemblyError);
  EXPECT_THROW((void)p.add_symmetric("Z", 0), AssemblyError);

  GuaranteedCostData d;
  test::Rng rng(28);
  d = random_gc_data(rng);
  d.B = rng.matrix(2, 2);
  EXPECT_THROW((void)build_guaranteed_cost(d), AssemblyError);
  const Models m = leo_models();
  EXPECT_THROW((void)build_out_of_plane(m.out, Mat2::Identity(), 0.0), AssemblyError);
}

TEST(LmiEvaluate, UndeclaredVariableRejected) {
  LmiProblem p, other;
  (void)p.add_symmetric("X", 2);
  const VarId a = other.add_symmetric("A", 2);
  const VarId b = other.add_symmetric("B", 2);
  BlockLmi L("stray", {2});
  L.set(0, 0, AffineExpr::variable(b));
  EXPECT_THROW(p.add_constraint(L), AssemblyError);
  (void)a;
}

// For random instances and random strictly feasible points, the recovered
// P = X^-1, K = Y X^-1 satisfy the pre-Schur inequality and, with any
// contraction Lambda inserted, the uncertain closed-loop inequality.
TEST(LmiSoundness, GuaranteedCostSchurProperty) {
  test::Rng rng(31);
  int checked = 0;
  for (int inst = 0; inst < 12; ++inst) {
    const GuaranteedCostData d = random_gc_data(rng);
    const auto gp = build_guaranteed_cost(d);
    for (const Assignment& a : feasible_samples(gp.problem, rng, 5)) {
      const MatrixXd& X = a.get(gp.X);
      const MatrixXd& Y = a.get(gp.Y);
      const double eps = a.scalar(gp.eps);
      const MatrixXd P = X.inverse();
      const MatrixXd K = Y * P;
      const MatrixXd Acl = d.A - d.B * K;
      const MatrixXd Psi = P * Acl + Acl.transpose() * P + d.Q + K.transpose() * d.R * K +
                           eps * P * d.E1 * d.E1.transpose() * P + d.E2.transpose() * d.E2 / eps;
      EXPECT_LT(lambda_max(Psi), 0.0);
      for (int s = 0; s < 200; ++s) {
        const Eigen::VectorXd lam = rng.matrix(3, 1);
        const MatrixXd Au = d.A + d.E1 * lam.asDiagonal() * d.E2;
        const MatrixXd Au_cl = Au - d.B * K;
        const MatrixXd W = P * Au_cl + Au_cl.transpose() * P + d.Q + K.transpose() * d.R * K;
        EXPECT_LT(lambda_max(W), 0.0);
      }
      const double theta = a.scalar(gp.theta);
      EXPECT_LE(d.x0.dot(P * d.x0), (1.0 / theta) * (1 + 1e-9));
      ++checked;
    }
  }
  EXPECT_GE(checked, 20);
}

TEST(LmiSoundness, HinfSchurProperty) {
  test::Rng rng(32);
  int checked = 0;
  for (int inst = 0; inst < 12; ++inst) {
    const HinfData d = random_hinf_data(rng);
    const auto hp = build_hinf(d);
    for (const Assignment& a : feasible_samples(hp.problem, rng, 5)) {
      const MatrixXd P = a.get(hp.X).inverse();
      const MatrixXd K = a.get(hp.Y) * P;
      const double eps = a.scalar(hp.eps);
      const double g = a.scalar(hp.g);
      const MatrixXd Acl = d.A - d.B * K;
      const MatrixXd Psi = P * Acl + Acl.transpose() * P + d.Q + K.transpose() * d.R * K +
                           eps * P * d.E1 * d.E1.transpose() * P + d.E2.transpose() * d.E2 / eps +
                           P * d.Bw * d.Bw.transpose() * P / g;
      EXPECT_LT(lambda_max(Psi), 0.0);
      for (int s = 0; s < 200; ++s) {
        const Eigen::VectorXd lam = rng.matrix(2, 1);
        const MatrixXd Au_cl = d.A + d.E1 * lam.asDiagonal() * d.E2 - d.B * K;
        const MatrixXd W = P * Au_cl + Au_cl.transpose() * P + d.Q + K.transpose() * d.R * K +
                           P * d.Bw * d.Bw.transpose() * P / g;
        EXPECT_LT(lambda_max(W), 0.0);
      }
      ++checked;
    }
  }
  EXPECT_GE(checked, 20);
}
