#include "rdv/sdp.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace rdv::sdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Fallback acceptance when the iteration stalls at the double-precision floor.
constexpr double kAcceptGap = 1e-6;
constexpr double kAcceptDual = 1e-5;

double lambda_max(const MatrixXd& A) {
  if (A.rows() == 1) return A(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// ---------------------------------------------------------------------------
// Internal representation used by the interior-point method.

struct Block {
  std::string label;
  int dim = 0;
  MatrixXd F0;
  std::vector<int> idx;
  std::vector<MatrixXd> F;
  int box_of = -1;  // radius block of this unknown
  double box_sign = 0.0;

  [[nodiscard]] MatrixXd eval(const VectorXd& x) const {
    MatrixXd out = F0;
    for (size_t k = 0; k < idx.size(); ++k) out.noalias() += x(idx[k]) * F[k];
    return out;
  }
};

struct Problem {
  int m = 0;
  VectorXd c;
  std::vector<Block> blocks;
  int total_dim = 0;

  void finish() {
    total_dim = 0;
    for (const auto& b : blocks) total_dim += b.dim;
  }
};

struct Scaling {
  VectorXd var;  // x = var .* x_scaled
  double objective = 1.0;
};

Block block_from(const SdpBlock& b) {
  Block out;
  out.label = b.label;
  out.dim = b.dim;
  out.F0 = b.constant;
  for (const auto& [i, Fi] : b.coefficients) {
    out.idx.push_back(i);
    out.F.push_back(Fi);
  }
  return out;
}

double block_max_abs(const Block& b) {
  double r = b.F0.cwiseAbs().maxCoeff();
  for (const auto& Fi : b.F) r = std::max(r, Fi.cwiseAbs().maxCoeff());
  return r;
}

/// Scaled copy of the problem: congruence by diagonal row scalings per block,
/// column scaling of the unknowns, unit-size blocks and objective, then the
/// strictness margin and the box on the scaled unknowns.
Problem equilibrate(const StandardSdp& sdp, const SolverOptions& opts, Scaling& sc, int& num_original) {
  Problem p;
  p.m = sdp.num_unknowns;
  for (const auto& b : sdp.blocks) p.blocks.push_back(block_from(b));
  num_original = static_cast<int>(p.blocks.size());
  for (const auto& sb : sdp.scalar_bounds) {
    Block b;
    b.label = "bound";
    b.dim = 1;
    b.F0 = MatrixXd::Constant(1, 1, sb.lower);
    b.idx = {sb.index};
    b.F = {MatrixXd::Constant(1, 1, -1.0)};
    p.blocks.push_back(std::move(b));
  }

  sc.var = VectorXd::Ones(p.m);
  for (int pass = 0; pass < 12; ++pass) {
    for (auto& b : p.blocks) {
      VectorXd r = b.F0.cwiseAbs().rowwise().maxCoeff();
      for (const auto& Fi : b.F) r = r.cwiseMax(Fi.cwiseAbs().rowwise().maxCoeff());
      VectorXd d(b.dim);
      for (int k = 0; k < b.dim; ++k) d(k) = r(k) > 0.0 ? 1.0 / std::sqrt(r(k)) : 1.0;
      b.F0 = d.asDiagonal() * b.F0 * d.asDiagonal();
      for (auto& Fi : b.F) Fi = d.asDiagonal() * Fi * d.asDiagonal();
    }
    VectorXd colmax = VectorXd::Zero(p.m);
    for (const auto& b : p.blocks)
      for (size_t k = 0; k < b.idx.size(); ++k)
        colmax(b.idx[k]) = std::max(colmax(b.idx[k]), b.F[k].cwiseAbs().maxCoeff());
    VectorXd s(p.m);
    for (int i = 0; i < p.m; ++i) s(i) = colmax(i) > 0.0 ? 1.0 / std::sqrt(colmax(i)) : 1.0;
    for (auto& b : p.blocks)
      for (size_t k = 0; k < b.idx.size(); ++k) b.F[k] *= s(b.idx[k]);
    sc.var = sc.var.cwiseProduct(s);
  }
  for (auto& b : p.blocks) {
    const double a = block_max_abs(b);
    if (a > 0.0) {
      b.F0 /= a;
      for (auto& Fi : b.F) Fi /= a;
    }
    b.F0 += opts.margin * MatrixXd::Identity(b.dim, b.dim);
  }

  p.c = sdp.objective.cwiseProduct(sc.var);
  const double cmax = p.c.size() > 0 ? p.c.cwiseAbs().maxCoeff() : 0.0;
  sc.objective = cmax > 0.0 ? cmax : 1.0;
  p.c /= sc.objective;

  for (int i = 0; i < p.m; ++i) {
    for (double sign : {1.0, -1.0}) {
      Block b;
      b.label = "radius";
      b.dim = 1;
      b.F0 = MatrixXd::Constant(1, 1, -opts.radius);
      b.idx = {i};
      b.F = {MatrixXd::Constant(1, 1, sign)};
      b.box_of = i;
      b.box_sign = sign;
      p.blocks.push_back(std::move(b));
    }
  }
  p.finish();
  return p;
}

/// Adds the epigraph unknown t (index m) with coefficient -I in every block.
Problem phase_one(const Problem& p) {
  Problem q = p;
  q.m = p.m + 1;
  q.c = VectorXd::Zero(q.m);
  q.c(p.m) = 1.0;
  for (auto& b : q.blocks) {
    b.idx.push_back(p.m);
    b.F.push_back(-MatrixXd::Identity(b.dim, b.dim));
  }
  q.finish();
  return q;
}

// ---------------------------------------------------------------------------
// Primal-dual path following with NT scaling, from a strictly feasible x.

struct IpmResult {
  VectorXd x;
  enum class Outcome { Converged, Stopped, MaxIterations, Failed } outcome = Outcome::Failed;
  int iterations = 0;
  double gap = kInf;
  double rel_gap = kInf;
  double rel_dual = kInf;
  std::vector<std::string> warnings;
};

/// Largest alpha in [0, inf) with L L' + alpha dX >= 0, given L the Cholesky factor.
double max_step(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& dX) {
  const MatrixXd Linv_dX = llt.matrixL().solve(dX);
  const MatrixXd T = llt.matrixL().solve(Linv_dX.transpose());
  const double lmin = (T.rows() == 1) ? T(0, 0)
                                      : Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (T + T.transpose()),
                                                                                Eigen::EigenvaluesOnly)
                                            .eigenvalues()
                                            .minCoeff();
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

/// Makes the starting Z satisfy A(Z) = -c exactly, using the free dual
/// multipliers of the box blocks. An unknown without box blocks (the phase-one
/// epigraph variable) is matched by a common rescaling, which needs c = 0 on
/// the boxed unknowns.
void init_dual(const Problem& p, const std::vector<MatrixXd>& S, std::vector<MatrixXd>& Z) {
  const int m = p.m;
  std::vector<int> plus(static_cast<size_t>(m), -1), minus(static_cast<size_t>(m), -1);
  for (size_t j = 0; j < p.blocks.size(); ++j) {
    const Block& b = p.blocks[j];
    if (b.box_of < 0) continue;
    (b.box_sign > 0 ? plus : minus)[static_cast<size_t>(b.box_of)] = static_cast<int>(j);
  }
  int unboxed = -1;
  for (int i = 0; i < m; ++i) {
    if (plus[static_cast<size_t>(i)] >= 0 && minus[static_cast<size_t>(i)] >= 0) continue;
    if (unboxed >= 0) return;
    unboxed = i;
  }
  if (unboxed >= 0) {
    for (int i = 0; i < m; ++i)
      if (i != unboxed && p.c(i) != 0.0) return;
  }

  VectorXd v = -p.c;
  for (size_t j = 0; j < p.blocks.size(); ++j) {
    const Block& b = p.blocks[j];
    if (b.box_of >= 0) continue;
    for (size_t k = 0; k < b.idx.size(); ++k) v(b.idx[k]) -= b.F[k].cwiseProduct(Z[j]).sum();
  }
  // Only the non-box contributions are in v; box coefficients are +-1 (and -1 on t).
  for (int i = 0; i < m; ++i) {
    if (i == unboxed) continue;
    const auto jp = static_cast<size_t>(plus[static_cast<size_t>(i)]);
    const auto jm = static_cast<size_t>(minus[static_cast<size_t>(i)]);
    const double kp = 1.0 / S[jp](0, 0);
    const double km = 1.0 / S[jm](0, 0);
    const double kappa = std::max(kp, km);
    Z[jp](0, 0) = std::max(v(i), 0.0) + kappa;
    Z[jm](0, 0) = std::max(-v(i), 0.0) + kappa;
  }
  if (unboxed >= 0) {
    double a = 0.0;
    for (size_t j = 0; j < p.blocks.size(); ++j) {
      const Block& b = p.blocks[j];
      for (size_t k = 0; k < b.idx.size(); ++k)
        if (b.idx[k] == unboxed) a += b.F[k].cwiseProduct(Z[j]).sum();
    }
    if (a == 0.0 || (-p.c(unboxed) / a) <= 0.0) return;
    const double alpha = -p.c(unboxed) / a;
    for (auto& Zj : Z) Zj *= alpha;
  }
}

template <class Stop>
IpmResult path_follow(const Problem& p, VectorXd x, const SolverOptions& opts, Stop&& stop) {
  IpmResult res;
  const size_t nb = p.blocks.size();
  const int m = p.m;
  const double N = static_cast<double>(p.total_dim);
  std::vector<MatrixXd> S(nb), Z(nb);
  for (size_t j = 0; j < nb; ++j) {
    S[j] = -p.blocks[j].eval(x);
    Eigen::LLT<MatrixXd> llt(S[j]);
    if (llt.info() != Eigen::Success) {
      res.x = x;
      res.warnings.push_back("starting point is not strictly feasible");
      return res;
    }
    Z[j] = llt.solve(MatrixXd::Identity(p.blocks[j].dim, p.blocks[j].dim));
  }
  init_dual(p, S, Z);

  bool warned_condition = false;
  // Per block: W^-1 = G G', G' S G = G^-1 Z G^-T = diag(d).
  std::vector<MatrixXd> G(nb), Ginv(nb);
  std::vector<VectorXd> d(nb);
  std::vector<Eigen::LLT<MatrixXd>> cholS(nb), cholZ(nb);

  auto dS_of = [&](const VectorXd& dx, size_t j) {
    const Block& b = p.blocks[j];
    MatrixXd out = MatrixXd::Zero(b.dim, b.dim);
    for (size_t k = 0; k < b.idx.size(); ++k) out.noalias() -= dx(b.idx[k]) * b.F[k];
    return out;
  };
  auto apply_A = [&](const std::vector<MatrixXd>& Y) {
    VectorXd out = VectorXd::Zero(m);
    for (size_t j = 0; j < nb; ++j) {
      const Block& b = p.blocks[j];
      for (size_t k = 0; k < b.idx.size(); ++k) out(b.idx[k]) += b.F[k].cwiseProduct(Y[j]).sum();
    }
    return out;
  };

  // Best iterate seen, returned when progress stalls or breaks down.
  IpmResult best;
  double best_merit = kInf;
  int since_best = 0;
  auto give_up = [&](const std::string& why) {
    best.warnings = res.warnings;
    best.warnings.push_back(why);
    best.outcome = IpmResult::Outcome::Failed;
    best.iterations = res.iterations;
    if (best.rel_gap <= kAcceptGap && best.rel_dual <= kAcceptDual) {
      best.outcome = IpmResult::Outcome::Converged;
      best.warnings.push_back("terminated at reduced accuracy");
    }
    if (best_merit == kInf) best.x = x;
    return best;
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    res.x = x;
    if (stop(x)) {
      res.outcome = IpmResult::Outcome::Stopped;
      return res;
    }

    double gap = 0.0;
    for (size_t j = 0; j < nb; ++j) gap += S[j].cwiseProduct(Z[j]).sum();
    const VectorXd rd = -p.c - apply_A(Z);
    const double mu = gap / N;
    const double pobj = p.c.dot(x);
    const double rel_gap = gap / (1.0 + std::abs(pobj));
    const double rel_dual = rd.norm() / (1.0 + p.c.norm());
    res.gap = gap;
    res.rel_gap = rel_gap;
    res.rel_dual = rel_dual;
    if (opts.verbose) spdlog::info("ipm it={} pobj={:.10e} gap={:.3e} dres={:.3e}", it, pobj, gap, rel_dual);
    if (rel_gap < opts.tolerance && rel_dual < opts.tolerance) {
      res.outcome = IpmResult::Outcome::Converged;
      return res;
    }
    const double merit = std::max(rel_gap, rel_dual);
    if (merit < 0.5 * best_merit) {
      best_merit = merit;
      best = res;
      since_best = 0;
    } else if (merit < best_merit) {
      best_merit = merit;
      best = res;
      ++since_best;
    } else if (++since_best > 20) {
      return give_up("no progress");
    }

    // NT scaling per block. The Schur complement M = H'H is never formed:
    // H stacks svec(G' F_i G) and is factored by QR.
    int hrows = 0;
    for (const auto& b : p.blocks) hrows += b.dim * (b.dim + 1) / 2;
    MatrixXd H = MatrixXd::Zero(hrows, m);
    int row0 = 0;
    for (size_t j = 0; j < nb; ++j) {
      const Block& b = p.blocks[j];
      cholS[j].compute(S[j]);
      cholZ[j].compute(Z[j]);
      if (cholS[j].info() != Eigen::Success || cholZ[j].info() != Eigen::Success) {
        return give_up("lost positive definiteness in block " + b.label);
      }
      const MatrixXd L = cholS[j].matrixL();
      const MatrixXd Linv = cholS[j].matrixL().solve(MatrixXd::Identity(b.dim, b.dim));
      const MatrixXd C = L.transpose() * Z[j] * L;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (C + C.transpose()));
      const VectorXd lam = es.eigenvalues();
      if (lam.minCoeff() <= 0.0) {
        return give_up("degenerate scaling in block " + b.label);
      }
      const VectorXd q = lam.array().sqrt().sqrt();
      d[j] = lam.array().sqrt();
      G[j] = Linv.transpose() * es.eigenvectors() * q.asDiagonal();
      Ginv[j] = q.cwiseInverse().asDiagonal() * es.eigenvectors().transpose() * L.transpose();

      for (size_t k = 0; k < b.idx.size(); ++k) {
        const MatrixXd Fh = G[j].transpose() * b.F[k] * G[j];
        int r = row0;
        for (int c = 0; c < b.dim; ++c)
          for (int s = 0; s <= c; ++s, ++r) H(r, b.idx[k]) += (s == c) ? Fh(s, c) : std::sqrt(2.0) * Fh(s, c);
      }
      row0 += b.dim * (b.dim + 1) / 2;
    }

    const Eigen::ColPivHouseholderQR<MatrixXd> qr(H);
    const auto Rh = qr.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
    {
      const VectorXd diag = qr.matrixR().topLeftCorner(m, m).diagonal().cwiseAbs();
      if (diag.minCoeff() == 0.0) {
        return give_up("singular Schur complement");
      }
      if (!warned_condition && diag.minCoeff() * diag.minCoeff() < 1e-12 * diag.maxCoeff() * diag.maxCoeff()) {
        warned_condition = true;
        res.warnings.push_back("ill-conditioned Schur complement at iteration " + std::to_string(it));
        if (opts.verbose) spdlog::warn("ill-conditioned Schur complement at iteration {}", it);
      }
    }
    auto schur_solve = [&](const VectorXd& rhs) -> VectorXd {
      const VectorXd y = qr.colsPermutation().transpose() * rhs;
      const VectorXd z = Rh.transpose().solve(y);
      return qr.colsPermutation() * Rh.solve(z);
    };

    // Given T (scaled target for dS^ + dZ^), solves for the direction. dx is
    // refined against the dual equation A(dZ) = rd itself.
    auto direction = [&](const std::vector<MatrixXd>& T, VectorXd& dx, std::vector<MatrixXd>& dS,
                         std::vector<MatrixXd>& dZ) {
      std::vector<MatrixXd> GTG(nb);
      for (size_t j = 0; j < nb; ++j) GTG[j] = G[j] * T[j] * G[j].transpose();
      dx = schur_solve(rd - apply_A(GTG));
      for (int refine = 0; refine < 3; ++refine) {
        for (size_t j = 0; j < nb; ++j) {
          dS[j] = dS_of(dx, j);
          const MatrixXd Winv = G[j] * G[j].transpose();
          const MatrixXd t = GTG[j] - Winv * dS[j] * Winv;
          dZ[j] = 0.5 * (t + t.transpose());
        }
        if (refine == 2) break;
        dx += schur_solve(apply_A(dZ) - rd);
      }
    };
    auto step_lengths = [&](const std::vector<MatrixXd>& dS, const std::vector<MatrixXd>& dZ) {
      double ap = kInf, ad = kInf;
      for (size_t j = 0; j < nb; ++j) {
        ap = std::min(ap, max_step(cholS[j], dS[j]));
        ad = std::min(ad, max_step(cholZ[j], dZ[j]));
      }
      return std::pair{ap, ad};
    };

    // Predictor.
    std::vector<MatrixXd> T(nb);
    for (size_t j = 0; j < nb; ++j) T[j] = MatrixXd((-d[j]).asDiagonal());
    VectorXd dx;
    std::vector<MatrixXd> dS(nb), dZ(nb);
    direction(T, dx, dS, dZ);
    auto [ap_aff, ad_aff] = step_lengths(dS, dZ);
    ap_aff = std::min(1.0, ap_aff);
    ad_aff = std::min(1.0, ad_aff);
    double gap_aff = 0.0;
    for (size_t j = 0; j < nb; ++j) gap_aff += ((S[j] + ap_aff * dS[j]).cwiseProduct(Z[j] + ad_aff * dZ[j])).sum();
    const double sigma = std::clamp(std::pow(std::max(gap_aff, 0.0) / gap, 3.0), 0.0, 1.0);

    // Corrector with the second-order term.
    for (size_t j = 0; j < nb; ++j) {
      const int n = p.blocks[j].dim;
      const MatrixXd dSh = G[j].transpose() * dS[j] * G[j];
      const MatrixXd dZh = Ginv[j] * dZ[j] * Ginv[j].transpose();
      const MatrixXd prod = dSh * dZh;
      MatrixXd rhs = -0.5 * (prod + prod.transpose());
      for (int i = 0; i < n; ++i) rhs(i, i) += sigma * mu - d[j](i) * d[j](i);
      for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) rhs(r, c) *= 2.0 / (d[j](r) + d[j](c));
      T[j] = rhs;
    }
    direction(T, dx, dS, dZ);
    auto [ap, ad] = step_lengths(dS, dZ);
    const double tau = std::max(0.9, 1.0 - mu / (1.0 + std::abs(pobj)));
    ap = std::min(1.0, std::min(tau, 0.99) * ap);
    ad = std::min(1.0, std::min(tau, 0.99) * ad);

    // Primal update recomputed from x so S stays exactly consistent.
    VectorXd xn;
    bool ok = false;
    for (int tries = 0; tries < 30 && !ok; ++tries) {
      xn = x + ap * dx;
      ok = true;
      for (size_t j = 0; j < nb && ok; ++j) {
        Eigen::LLT<MatrixXd> llt(-p.blocks[j].eval(xn));
        if (llt.info() != Eigen::Success) ok = false;
      }
      if (!ok) ap *= 0.5;
    }
    if (!ok || (ap < 1e-14 && ad < 1e-14)) {
      return give_up("step length collapsed");
    }
    if (opts.verbose) spdlog::info("    sigma={:.2e} ap={:.3e} ad={:.3e}", sigma, ap, ad);
    x = xn;
    for (size_t j = 0; j < nb; ++j) {
      S[j] = -p.blocks[j].eval(x);
      Z[j] += ad * dZ[j];
      Z[j] = 0.5 * (Z[j] + Z[j].transpose());
    }
  }
  res.x = x;
  res.iterations = opts.max_iterations;
  if (best_merit < kInf && best.rel_gap <= kAcceptGap && best.rel_dual <= kAcceptDual) {
    IpmResult out = give_up("iteration limit");
    return out;
  }
  res.outcome = IpmResult::Outcome::MaxIterations;
  return res;
}

struct PhaseOne {
  VectorXd x;  // scaled unknowns
  double t = kInf;
  IpmResult::Outcome outcome = IpmResult::Outcome::Failed;
  int iterations = 0;
  std::vector<std::string> warnings;
};

PhaseOne run_phase_one(const Problem& p, const SolverOptions& opts, double stop_below) {
  const Problem q = phase_one(p);
  VectorXd x0 = VectorXd::Zero(q.m);
  double t0 = -kInf;
  for (const auto& b : p.blocks) t0 = std::max(t0, lambda_max(b.F0));
  x0(p.m) = t0 + 1.0;
  // Unit-scale starting slack: shift so the tightest block has slack 1.
  auto r = path_follow(q, x0, opts, [&](const VectorXd& x) { return x(p.m) < stop_below; });
  PhaseOne out;
  out.x = r.x.head(p.m);
  out.t = r.x(p.m);
  out.outcome = r.outcome;
  out.iterations = r.iterations;
  out.warnings = std::move(r.warnings);
  return out;
}

SdpSolution finish(const StandardSdp& sdp, const Problem& p, const Scaling& sc, int num_original,
                   const VectorXd& xs, SolveStatus status, int iterations, const SolverOptions& opts) {
  SdpSolution sol;
  sol.status = status;
  sol.iterations = iterations;
  sol.x = xs.cwiseProduct(sc.var);
  sol.objective = sdp.objective.size() > 0 ? sdp.objective.dot(sol.x) : 0.0;
  for (int j = 0; j < num_original; ++j) {
    const Block& b = p.blocks[static_cast<size_t>(j)];
    sol.max_eigenvalues.push_back(lambda_max(b.eval(xs)) - opts.margin);
  }
  return sol;
}

enum class Mode { Optimize, Feasible, Center };

SdpSolution run(const StandardSdp& sdp, const SolverOptions& opts, Mode mode) {
  sdp.validate();
  opts.validate();
  Scaling sc;
  int num_original = 0;
  const Problem p = equilibrate(sdp, opts, sc, num_original);

  const double stop_below = mode == Mode::Center ? -kInf : (mode == Mode::Feasible ? 0.0 : -0.1);
  PhaseOne ph = run_phase_one(p, opts, stop_below);
  SdpSolution sol;
  auto warn = [&](std::vector<std::string>& w) { sol.warnings.insert(sol.warnings.end(), w.begin(), w.end()); };

  const bool feasible = ph.t < 0.0;
  if (!feasible) {
    SolveStatus st = SolveStatus::Infeasible;
    if (ph.outcome == IpmResult::Outcome::Failed) st = SolveStatus::NumericalFailure;
    if (ph.outcome == IpmResult::Outcome::MaxIterations) st = SolveStatus::MaxIterations;
    sol = finish(sdp, p, sc, num_original, ph.x, st, ph.iterations, opts);
    sol.phase1_value = ph.t;
    warn(ph.warnings);
    if (opts.verbose) spdlog::info("phase one ended at t = {:.3e}: {}", ph.t, to_string(st));
    return sol;
  }
  if (mode != Mode::Optimize) {
    SolveStatus st = SolveStatus::Optimal;
    if (mode == Mode::Center && ph.outcome != IpmResult::Outcome::Converged)
      st = ph.outcome == IpmResult::Outcome::MaxIterations ? SolveStatus::MaxIterations : SolveStatus::NumericalFailure;
    sol = finish(sdp, p, sc, num_original, ph.x, st, ph.iterations, opts);
    sol.phase1_value = ph.t;
    warn(ph.warnings);
    return sol;
  }

  IpmResult r = path_follow(p, ph.x, opts, [](const VectorXd&) { return false; });
  SolveStatus st = SolveStatus::NumericalFailure;
  if (r.outcome == IpmResult::Outcome::Converged) st = SolveStatus::Optimal;
  if (r.outcome == IpmResult::Outcome::MaxIterations) st = SolveStatus::MaxIterations;
  sol = finish(sdp, p, sc, num_original, r.x, st, ph.iterations + r.iterations, opts);
  sol.phase1_value = ph.t;
  sol.duality_gap = r.gap * sc.objective;
  warn(ph.warnings);
  warn(r.warnings);
  if (opts.verbose)
    spdlog::info("solve: {} after {} iterations, objective {:.12e}", to_string(st), sol.iterations, sol.objective);
  return sol;
}

}  // namespace

// ---------------------------------------------------------------------------

MatrixXd SdpBlock::evaluate(const VectorXd& x) const {
  MatrixXd out = constant;
  for (const auto& [i, Fi] : coefficients) out += x(i) * Fi;
  return out;
}

void StandardSdp::validate() const {
  if (num_unknowns < 0) throw std::invalid_argument("negative unknown count");
  if (objective.size() != num_unknowns) throw std::invalid_argument("objective length does not match unknowns");
  for (const auto& b : blocks) {
    if (b.constant.rows() != b.dim || b.constant.cols() != b.dim)
      throw std::invalid_argument("block " + b.label + ": constant has wrong shape");
    if ((b.constant - b.constant.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + b.constant.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("block " + b.label + ": constant is not symmetric");
    for (const auto& [i, Fi] : b.coefficients) {
      if (i < 0 || i >= num_unknowns) throw std::invalid_argument("block " + b.label + ": bad unknown index");
      if (Fi.rows() != b.dim || Fi.cols() != b.dim)
        throw std::invalid_argument("block " + b.label + ": coefficient has wrong shape");
      if ((Fi - Fi.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Fi.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("block " + b.label + ": coefficient is not symmetric");
    }
  }
  for (const auto& sb : scalar_bounds)
    if (sb.index < 0 || sb.index >= num_unknowns) throw std::invalid_argument("scalar bound on unknown index");
}

void SolverOptions::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(margin >= 0.0)) throw std::invalid_argument("margin must be nonnegative");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::MaxIterations:
      return "max-iterations";
    case SolveStatus::NumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

namespace {

/// k-th basis matrix of the symmetric packing, column-major over the upper triangle.
MatrixXd sym_basis(int n, int k) {
  MatrixXd B = MatrixXd::Zero(n, n);
  int idx = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i, ++idx)
      if (idx == k) {
        if (i == j) {
          B(i, i) = 1.0;
        } else {
          B(i, j) = B(j, i) = 1.0 / std::sqrt(2.0);
        }
        return B;
      }
  return B;
}

}  // namespace

int IndexMap::size() const {
  int s = 0;
  for (const auto& e : entries_) s = std::max(s, e.offset + e.var.unknowns());
  return s;
}

lmi::Assignment IndexMap::reconstruct(const VectorXd& x) const {
  lmi::Assignment a;
  const double r2 = std::sqrt(2.0);
  for (const auto& e : entries_) {
    const lmi::VarId& v = e.var;
    MatrixXd V(v.rows, v.cols);
    int k = e.offset;
    switch (v.kind) {
      case lmi::VarKind::Symmetric:
        for (int j = 0; j < v.cols; ++j)
          for (int i = 0; i <= j; ++i, ++k) {
            if (i == j)
              V(i, i) = x(k);
            else
              V(i, j) = V(j, i) = x(k) / r2;
          }
        break;
      case lmi::VarKind::Rectangular:
        for (int j = 0; j < v.cols; ++j)
          for (int i = 0; i < v.rows; ++i, ++k) V(i, j) = x(k);
        break;
      case lmi::VarKind::Scalar:
        V(0, 0) = x(k);
        break;
    }
    a.set(v, V);
  }
  return a;
}

VectorXd IndexMap::pack(const lmi::Assignment& values) const {
  VectorXd x = VectorXd::Zero(size());
  const double r2 = std::sqrt(2.0);
  for (const auto& e : entries_) {
    const lmi::VarId& v = e.var;
    const MatrixXd& V = values.get(v);
    int k = e.offset;
    switch (v.kind) {
      case lmi::VarKind::Symmetric:
        for (int j = 0; j < v.cols; ++j)
          for (int i = 0; i <= j; ++i, ++k) x(k) = (i == j) ? V(i, i) : r2 * 0.5 * (V(i, j) + V(j, i));
        break;
      case lmi::VarKind::Rectangular:
        for (int j = 0; j < v.cols; ++j)
          for (int i = 0; i < v.rows; ++i, ++k) x(k) = V(i, j);
        break;
      case lmi::VarKind::Scalar:
        x(k) = V(0, 0);
        break;
    }
  }
  return x;
}

Lowered lower(const lmi::LmiProblem& problem) {
  Lowered out;
  int offset = 0;
  for (const auto& v : problem.vars()) {
    out.map.add(v.id, v.name, offset);
    offset += v.id.unknowns();
  }
  auto& sdp = out.sdp;
  sdp.num_unknowns = offset;
  sdp.objective = VectorXd::Zero(offset);

  // Basis value of unknown k within variable v.
  auto basis = [](const lmi::VarId& v, int k) -> MatrixXd {
    if (v.kind == lmi::VarKind::Symmetric) return sym_basis(v.rows, k);
    MatrixXd B = MatrixXd::Zero(v.rows, v.cols);
    B(k % v.rows, k / v.rows) = 1.0;
    return B;
  };

  const lmi::Assignment zero = [&] {
    lmi::Assignment a;
    for (const auto& v : problem.vars()) a.set(v.id, MatrixXd::Zero(v.id.rows, v.id.cols));
    return a;
  }();

  for (const auto& c : problem.constraints()) {
    SdpBlock b;
    b.label = c.label();
    b.dim = c.dim();
    b.constant = c.evaluate(zero);
    for (const auto& e : out.map.entries()) {
      for (int k = 0; k < e.var.unknowns(); ++k) {
        MatrixXd Fi = c.evaluate_var(e.var, basis(e.var, k));
        if (Fi.cwiseAbs().maxCoeff() > 0.0) b.coefficients.emplace_back(e.offset + k, std::move(Fi));
      }
    }
    sdp.blocks.push_back(std::move(b));
  }

  for (const auto& t : problem.objective()) {
    const auto& e = out.map.entries()[static_cast<size_t>(t.var.index)];
    for (int k = 0; k < e.var.unknowns(); ++k) sdp.objective(e.offset + k) += t.weight * basis(e.var, k).trace();
  }

  for (const auto& v : problem.vars())
    if (v.lower_bound && v.id.kind == lmi::VarKind::Scalar)
      sdp.scalar_bounds.push_back({out.map.entries()[static_cast<size_t>(v.id.index)].offset, *v.lower_bound});
  return out;
}

// ---------------------------------------------------------------------------

SdpSolution solve(const StandardSdp& sdp, const SolverOptions& opts) { return run(sdp, opts, Mode::Optimize); }

SdpSolution find_feasible(const StandardSdp& sdp, const SolverOptions& opts) {
  return run(sdp, opts, Mode::Feasible);
}

SdpSolution center(const StandardSdp& sdp, const SolverOptions& opts) { return run(sdp, opts, Mode::Center); }

double Verification::worst() const {
  double w = -kInf;
  for (double v : max_eigenvalues) w = std::max(w, v);
  return w;
}

Verification verify(const StandardSdp& sdp, const VectorXd& x) {
  if (x.size() != sdp.num_unknowns) throw std::invalid_argument("verify: vector length does not match unknowns");
  Verification v;
  for (const auto& b : sdp.blocks) {
    MatrixXd F = b.evaluate(x);
    F = 0.5 * (F + F.transpose());
    v.max_eigenvalues.push_back(lambda_max(F));
  }
  v.objective = sdp.objective.dot(x);
  v.bound_violation = -kInf;
  for (const auto& sb : sdp.scalar_bounds) v.bound_violation = std::max(v.bound_violation, sb.lower - x(sb.index));
  if (sdp.scalar_bounds.empty()) v.bound_violation = 0.0;
  return v;
}

void write_triplets(std::ostream& os, const StandardSdp& sdp) {
  os.precision(17);
  for (size_t j = 0; j < sdp.blocks.size(); ++j) {
    const auto& b = sdp.blocks[j];
    auto emit = [&](int unknown, const MatrixXd& F) {
      for (int c = 0; c < b.dim; ++c)
        for (int r = 0; r <= c; ++r)
          if (F(r, c) != 0.0) os << j + 1 << ' ' << r + 1 << ' ' << c + 1 << ' ' << unknown << ' ' << F(r, c) << '\n';
    };
    emit(0, b.constant);
    for (const auto& [i, Fi] : b.coefficients) emit(i + 1, Fi);
  }
}

}  // namespace rdv::sdp
