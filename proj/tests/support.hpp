#pragma once

#include "rdv/dynamics.hpp"
#include "rdv/scenario.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <string>

namespace rdv::test {

inline std::string data_path(const std::string& name) { return std::string(RDV_DATA_DIR) + "/" + name; }

inline OrbitConfig leo_orbit() { return {kEarthMu, 7082.253e3, 0.05, 0.0}; }
inline ChaserConfig leo_chaser() { return {500.0, 15.0, 15.0, 5.0}; }
inline RelativeState leo_x0() { return {-5000.0, 5000.0, 0.0, 5.0, -5.0, 0.0}; }

// Reference gains.
inline Mat24 reference_K_p() {
  Mat24 K;
  K << 0.0024, -0.0013, 0.7535, 0.0593,
       0.0015, 0.0010, 0.2952, 1.3332;
  return K;
}

inline Mat12 reference_K_q() {
  Mat12 K;
  K << 196.8030, 5.8353e4;
  return K;
}

inline Mat36 reference_K_cc() {
  Mat36 K;
  K << 0.0024, -0.0014, 2.1542e-4, 0.8445, 0.0467, 0.1198,
       0.0017, 7.487e-4, -4.3822e-4, 0.5689, 1.3525, 0.1901,
       3.5306e-4, -2.0446e-4, 5.2548e-4, 0.1792, 0.0234, 0.7065;
  return K;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

// Seeded generator for property tests.
class Rng {
 public:
  explicit Rng(unsigned seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  Eigen::MatrixXd matrix(int r, int c, double scale = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) m(i, j) = uniform(-scale, scale);
    return m;
  }
  Eigen::MatrixXd symmetric(int n, double scale = 1.0) {
    Eigen::MatrixXd m = matrix(n, n, scale);
    return 0.5 * (m + m.transpose());
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rdv::test
