#pragma once

#include <cstdint>

namespace hal {

// Keyed counter-based random stream. Draw i is a pure function of (key, i),
// so independent streams never perturb each other and adding a consumer to
// one purpose leaves every other purpose's draws untouched. All samplers are
// implemented locally (no std::*_distribution) so results are identical
// across platforms and standard libraries.
class RngStream {
public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();

  // Uniform on (0, 1), open at both ends.
  double uniform();

  // Standard normal via inverse CDF.
  double normal();
  double normal(double mean, double sd);

  int bernoulli(double p);

  // Beta(alpha, beta) by Johnk's exact rejection sampler; valid for all
  // positive shapes and exact for the U-shaped cases alpha, beta < 1.
  double beta(double alpha, double beta);

  std::uint64_t key() const { return key_; }

private:
  std::uint64_t key_ = 0x9e3779b97f4a7c15ull;
  std::uint64_t counter_ = 0;
};

// Derives a stream key from (base_seed, replicate, purpose).
RngStream make_stream(std::uint64_t base_seed, std::uint64_t replicate,
                      std::uint64_t purpose);

std::uint64_t mix64(std::uint64_t v);

// Inverse of the standard normal CDF (Acklam's rational approximation with
// one Halley refinement; absolute error well below 1e-14 on (1e-300, 1)).
double normal_quantile(double p);

double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace hal
