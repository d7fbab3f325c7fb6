#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dims/grad_check.hpp"
#include "dims/ops.hpp"
#include "dims/tensor.hpp"

namespace dims::test {

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(dist(rng));
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Values bounded away from zero, for checks that cross ReLU kinks.
inline Tensor away_from_zero(std::mt19937_64& rng, Shape shape, double gap = 0.1) {
  std::uniform_real_distribution<double> mag(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(sign(rng) ? mag(rng) : -mag(rng));
  return Tensor(std::move(shape), std::move(v), true);
}

/// sum(out * w) for a fixed random w, so every output entry gets a distinct weight.
inline Tensor weighted_sum(const Tensor& out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  auto w = random_tensor(rng, out.shape(), -1.0, 1.0, false);
  return sum(mul(out, w));
}

inline std::vector<Real> to_vector(std::span<const Real> s) { return {s.begin(), s.end()}; }

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("dims-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
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

}  // namespace dims::test
