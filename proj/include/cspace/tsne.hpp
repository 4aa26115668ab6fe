#ifndef CSPACE_TSNE_HPP
#define CSPACE_TSNE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

/**
 * @file tsne.hpp
 * @brief t-SNE with optional per-point anchors.
 *
 * Exact gradients are used up to `exact_threshold` points, Barnes-Hut
 * approximation above it. Anchored points are reset to their fixed position
 * after every update, and their momentum is cleared, so they act as immovable
 * attractors and repellers for the free points.
 */

namespace cspace {

struct TsneParams {
    double perplexity = 5.0;
    double theta = 0.5;
    int iterations = 5000;
    double learning_rate = 200.0;
    std::uint64_t seed = 42;

    double exaggeration = 12.0;
    int stop_lying_iter = 250;
    double momentum = 0.5;
    double final_momentum = 0.8;
    int mom_switch_iter = 250;

    /// Point counts above this switch to Barnes-Hut; theta is ignored at or below it.
    std::size_t exact_threshold = 500;
    /// KL divergence is recorded every this many iterations and at the last one.
    int kl_every = 50;

    /// Throws InvalidArgument when perplexity <= 0, theta outside [0, 1] or iterations < 1.
    void validate() const;
};

struct TsneProgress {
    int iteration = 0;
    int total = 0;
};

/// Return false to cancel; the run then throws Error(Cancelled).
using TsneCallback = std::function<bool(const TsneProgress&)>;

struct TsneResult {
    /// Row-major n x 2.
    std::vector<double> coords;
    /// (iteration, KL divergence against the unexaggerated affinities).
    std::vector<std::pair<int, double>> kl_trace;

    double kl_at(int iteration) const;
    double final_kl() const { return kl_trace.empty() ? 0.0 : kl_trace.back().second; }
};

/**
 * @param data Row-major n x dim input.
 * @param fixed Optional anchor per point (size n or empty).
 * @param init Optional row-major n x 2 starting layout; seeded Gaussian noise (sd 1e-4) otherwise.
 */
TsneResult run_tsne(std::span<const double> data, std::size_t n, std::size_t dim, const TsneParams& params,
                    const std::vector<std::optional<std::pair<double, double>>>& fixed = {},
                    std::vector<double> init = {}, const TsneCallback& callback = {});

/// Box-Muller over mt19937_64 bits, identical on every standard library.
class PortableGaussian {
public:
    explicit PortableGaussian(std::uint64_t seed);
    double operator()();

private:
    std::mt19937_64 rng_;
    std::optional<double> spare_;
    double uniform();
};

}  // namespace cspace

#endif
