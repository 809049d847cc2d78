#include "moranfilt/random.hpp"

#include "moranfilt/errors.hpp"

#include <algorithm>
#include <numeric>

namespace moranfilt {

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d6f7261u};
  return Rng(seq);
}

std::vector<Index> uniform_subsample(Index n, Index m, std::uint64_t seed) {
  if (m < 0 || m > n) throw InvalidArgument("subsample size out of range");
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  Rng rng = make_stream(seed, 0x5b5);
  // Partial Fisher-Yates over the first m slots.
  for (Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
  }
  all.resize(static_cast<std::size_t>(m));
  std::sort(all.begin(), all.end());
  return all;
}

VectorXd standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

}  // namespace moranfilt
