#ifndef RUBRICRL_TESTS_TEST_SUPPORT_HPP_
#define RUBRICRL_TESTS_TEST_SUPPORT_HPP_

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <filesystem>
#include <string>
#include <vector>

#include "rubricrl/env.hpp"

namespace rubricrl::test_support {

// Builds an instance from compact strings: truth "1010", marks "TF-T".
inline PreferenceInstance make_instance(const std::string& truth, const std::string& mask, const std::string& a,
                                        const std::string& b, std::vector<double> noise = {}) {
  auto marks = [](const std::string& s) {
    ResponseClaims r;
    for (char c : s) r.claims.push_back(c == 'T' ? Mark::AssertsTrue : c == 'F' ? Mark::AssertsFalse : Mark::Silent);
    return r;
  };
  PreferenceInstance inst;
  inst.id = "hand-" + truth + "-" + a + "-" + b;
  for (char c : truth) inst.truth.values.push_back(c == '1');
  inst.truth.noise_floor = noise.empty() ? std::vector<double>(truth.size(), 0.0) : noise;
  for (char c : mask) inst.question_mask.push_back(c == '1');
  inst.response_a = marks(a);
  inst.response_b = marks(b);
  inst.gold_winner = determine_winner(inst.truth, inst.question_mask, inst.response_a, inst.response_b);
  return inst;
}

// Central-difference gradient of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double step = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), with the denominator floored at `floor` so
// that two numerically zero vectors compare equal.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rubricrl-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace rubricrl::test_support

#endif  // RUBRICRL_TESTS_TEST_SUPPORT_HPP_
