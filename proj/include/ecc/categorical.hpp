#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ecc {

/// Raised when two categorical distributions live on different atom grids.
class SupportMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Equally spaced atom grid z_min = z_1 < ... < z_K = z_max.
///
/// Atoms are always derived from (z_min, z_max, K); distributions carry a copy
/// of these three numbers only, so two grids compare equal exactly when they
/// were built from the same triple.
class Support {
public:
    Support(double z_min, double z_max, std::size_t n_atoms);

    double z_min() const { return z_min_; }
    double z_max() const { return z_max_; }
    std::size_t size() const { return n_atoms_; }
    double delta() const { return delta_; }

    double atom(std::size_t i) const;
    std::vector<double> atoms() const;

    bool operator==(const Support& other) const = default;

private:
    double z_min_;
    double z_max_;
    std::size_t n_atoms_;
    double delta_;
};

/// Probability vector over a Support.
class Categorical {
public:
    /// Validates non-negativity and unit mass (1e-9 absolute).
    Categorical(Support support, std::vector<double> probs);

    static Categorical uniform(const Support& support);
    static Categorical dirac_atom(const Support& support, std::size_t index);

    const Support& support() const { return support_; }
    std::span<const double> probs() const { return probs_; }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::size_t size() const { return probs_.size(); }

    bool operator==(const Categorical& other) const = default;

private:
    Support support_;
    std::vector<double> probs_;
};

struct WeightedAtom {
    double weight;
    double location;
};

/// Finite mixture of Dirac measures, sum_j w_j delta_{y_j}.
class DiracMixture {
public:
    explicit DiracMixture(std::vector<WeightedAtom> atoms);

    std::span<const WeightedAtom> atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

private:
    std::vector<WeightedAtom> atoms_;
};

/// Cramér projection of a single Dirac measure onto the grid. Locations
/// outside [z_min, z_max] are clipped to the nearest edge atom.
Categorical project_dirac(const Support& support, double y);

/// Cramér projection extended linearly over the mixture components.
Categorical project_mixture(const Support& support, const DiracMixture& mixture);

/// Push-forward through x -> r + gamma * x. Zero-mass atoms are dropped; with
/// gamma == 0 all mass collapses onto the single location r.
DiracMixture pushforward(const Categorical& nu, double reward, double gamma);

/// Projected one-step Bellman backup of nu: project(pushforward(nu, r, gamma)).
Categorical bellman_target(const Support& support, const Categorical& nu, double reward,
                           double gamma);

/// Weighted linear pool of distributions on a common grid.
///
/// Computed as p_0 + sum_j w_j (p_j - p_0), which equals sum_j w_j p_j whenever
/// the weights sum to one and returns p_0 bit-for-bit when all inputs agree.
Categorical mix(std::span<const Categorical> dists, std::span<const double> weights);

/// Equal-weight pool (1/k) sum_j p_j.
Categorical mix_equal(std::span<const Categorical> dists);

/// KL(target || model) with 0 log 0 = 0. A positive `smoothing` replaces the
/// model by (q_i + eps) / (1 + K eps) before evaluation.
double kl(const Categorical& target, const Categorical& model, double smoothing = 0.0);

/// sqrt(dz) * || F_a - F_b ||_2 over the cumulative mass vectors.
double cramer_distance(const Categorical& a, const Categorical& b);

/// First moment sum_i p_i z_i.
double mean(const Categorical& nu);

}  // namespace ecc
