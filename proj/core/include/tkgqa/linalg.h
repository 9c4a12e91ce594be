#ifndef TKGQA_LINALG_H_
#define TKGQA_LINALG_H_

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace tkgqa {

// All training math runs in double precision; checkpoints narrow to float32.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Deterministic random source. The conversions below avoid the
// implementation-defined std distributions so streams match across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Fills with Uniform(-1/sqrt(fan), 1/sqrt(fan)).
inline void fill_uniform(Matrix& m, double scale, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(-scale, scale);
  }
}

// Numerically stable softmax.
inline Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

// log(sum(exp(x))) without overflow.
inline double log_sum_exp(const Vector& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace tkgqa

#endif  // TKGQA_LINALG_H_
