#pragma once

// Text serialization of synthesis reports, gain files, bisection results and
// cost comparisons.

#include "rdv/simulator.hpp"
#include "rdv/synthesis.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <string>

namespace rdv {

[[nodiscard]] std::string dump_report(const SynthesisReport& r);

/// Gain file: a mapping from names (K, K_p, K_q, K_cc, ...) to matrices.
using GainSet = std::map<std::string, Eigen::MatrixXd>;

[[nodiscard]] std::string dump_gains(const GainSet& gains);
/// Throws ConfigError on malformed content.
[[nodiscard]] GainSet parse_gains(const std::string& text);
[[nodiscard]] GainSet load_gains(const std::filesystem::path& path);
/// The named entry as a 3x6 feedback gain; throws ConfigError on a missing key or wrong shape.
[[nodiscard]] Mat36 gain_3x6(const GainSet& gains, const std::string& key);

[[nodiscard]] std::string dump_min_thrust(const MinThrustResult& r);
[[nodiscard]] std::string dump_comparison(const CostComparison& c, const std::string& label_a,
                                          const std::string& label_b);

/// Writes through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
[[nodiscard]] std::string read_file(const std::filesystem::path& path);

}  // namespace rdv
