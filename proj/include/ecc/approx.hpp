#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecc/categorical.hpp"

namespace ecc {

enum class Architecture : std::uint32_t {
    /// logits = W^T f; a table of logit rows when f is one-hot.
    tabular_logits = 1,
    /// logits = W2 relu(W1 f + b1) + b2.
    one_hidden_layer = 2,
};

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

struct ApproxDims {
    std::size_t feature_dim;
    std::size_t hidden_dim;  // ignored by tabular_logits
    std::size_t n_actions;
    std::size_t n_atoms;

    bool operator==(const ApproxDims&) const = default;
};

std::size_t weight_count(Architecture arch, const ApproxDims& dims);

/// Immutable weight vector plus the shape needed to interpret it.
///
/// Layout, row-major:
///   tabular_logits:   W[feature][action * K + atom]
///   one_hidden_layer: W1[hidden][feature], b1[hidden],
///                     W2[action * K + atom][hidden], b2[action * K + atom]
class ApproximatorParams {
public:
    ApproximatorParams(Architecture arch, ApproxDims dims, std::vector<double> weights,
                       std::uint64_t seed = 0);

    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
    static ApproximatorParams random(Architecture arch, ApproxDims dims, std::uint64_t seed);
    static ApproximatorParams zeros(Architecture arch, ApproxDims dims);

    Architecture architecture() const { return arch_; }
    const ApproxDims& dims() const { return dims_; }
    std::span<const double> weights() const { return weights_; }
    std::uint64_t seed() const { return seed_; }

    bool operator==(const ApproximatorParams&) const = default;

private:
    Architecture arch_;
    ApproxDims dims_;
    std::vector<double> weights_;
    std::uint64_t seed_;
};

/// Raw logits, n_actions * K values.
std::vector<double> logits(const ApproximatorParams& params, std::span<const double> features);

/// Softmax head: one Categorical per action.
std::vector<Categorical> forward(const ApproximatorParams& params, const Support& support,
                                 std::span<const double> features);

/// Q(x, a) = mean of each action's categorical.
std::vector<double> q_values(const ApproximatorParams& params, const Support& support,
                             std::span<const double> features);

/// Adds d KL(target || phi(x, action)) / d theta into `grad` and returns the
/// loss. `smoothing` is the KL model-side smoothing constant.
double accumulate_kl_grad(const ApproximatorParams& params, std::span<const double> features,
                          std::size_t action, const Categorical& target, double smoothing,
                          std::span<double> grad);

struct LossAndGrad {
    double loss;
    std::vector<double> grad;
};

LossAndGrad kl_loss_and_grad(const ApproximatorParams& params, std::span<const double> features,
                             std::size_t action, const Categorical& target,
                             double smoothing = 0.0);

struct GradientUpdateRule {
    double learning_rate = 0.1;
    /// Rescales the gradient to this l2 norm when it is longer.
    std::optional<double> clip_norm;
};

/// theta - lr * grad. Throws std::domain_error on a non-finite gradient.
ApproximatorParams apply_update(const ApproximatorParams& params, std::span<const double> grad,
                                const GradientUpdateRule& rule);

/// Binary checkpoint: "ECCPARAM", u32 version, u32 architecture, u64 feature,
/// hidden, action and atom dims, u64 seed, u64 weight count, then the
/// weights as little-endian IEEE-754 doubles.
void save_checkpoint(std::ostream& out, const ApproximatorParams& params);
ApproximatorParams load_checkpoint(std::istream& in);

}  // namespace ecc
