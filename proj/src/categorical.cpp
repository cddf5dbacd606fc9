#include "ecc/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ecc {

namespace {

constexpr double kMassTolerance = 1e-9;

void require_same_support(const Support& a, const Support& b) {
    if (!(a == b)) {
        throw SupportMismatch("categorical distributions are defined on different supports");
    }
}

// Adds w * project_dirac(support, y) into `probs`.
void accumulate_dirac(const Support& support, double y, double w, std::vector<double>& probs) {
    const std::size_t k = support.size();
    if (!(y > support.z_min())) {
        probs.front() += w;
        return;
    }
    if (!(y < support.z_max())) {
        probs.back() += w;
        return;
    }
    const double b = (y - support.z_min()) / support.delta();
    auto lower = static_cast<std::size_t>(std::floor(b));
    lower = std::min(lower, k - 2);
    // Rounding in b can put y just outside [z_lower, z_upper]; pick the bracket
    // from the atoms themselves.
    if (y < support.atom(lower) && lower > 0) {
        --lower;
    } else if (y > support.atom(lower + 1) && lower + 2 < k) {
        ++lower;
    }
    const std::size_t upper = lower + 1;
    if (y == support.atom(lower)) {
        probs[lower] += w;
        return;
    }
    if (y == support.atom(upper)) {
        probs[upper] += w;
        return;
    }
    const double lower_share = std::clamp((support.atom(upper) - y) / support.delta(), 0.0, 1.0);
    probs[lower] += w * lower_share;
    probs[upper] += w * (1.0 - lower_share);
}

}  // namespace

Support::Support(double z_min, double z_max, std::size_t n_atoms)
    : z_min_(z_min), z_max_(z_max), n_atoms_(n_atoms), delta_(0.0) {
    if (n_atoms < 2) {
        throw std::invalid_argument("support needs at least two atoms");
    }
    if (!std::isfinite(z_min) || !std::isfinite(z_max) || !(z_min < z_max)) {
        throw std::invalid_argument("support requires finite z_min < z_max");
    }
    delta_ = (z_max - z_min) / static_cast<double>(n_atoms - 1);
}

double Support::atom(std::size_t i) const {
    if (i + 1 == n_atoms_) {
        return z_max_;
    }
    return z_min_ + static_cast<double>(i) * delta_;
}

std::vector<double> Support::atoms() const {
    std::vector<double> out(n_atoms_);
    for (std::size_t i = 0; i < n_atoms_; ++i) {
        out[i] = atom(i);
    }
    return out;
}

Categorical::Categorical(Support support, std::vector<double> probs)
    : support_(support), probs_(std::move(probs)) {
    if (probs_.size() != support_.size()) {
        throw std::invalid_argument("probability vector length " + std::to_string(probs_.size()) +
                                    " does not match support size " +
                                    std::to_string(support_.size()));
    }
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument("categorical probabilities must be finite and non-negative");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
        throw std::invalid_argument("categorical probabilities sum to " + std::to_string(total));
    }
}

Categorical Categorical::uniform(const Support& support) {
    return Categorical(support,
                       std::vector<double>(support.size(), 1.0 / static_cast<double>(support.size())));
}

Categorical Categorical::dirac_atom(const Support& support, std::size_t index) {
    if (index >= support.size()) {
        throw std::out_of_range("atom index out of range");
    }
    std::vector<double> p(support.size(), 0.0);
    p[index] = 1.0;
    return Categorical(support, std::move(p));
}

DiracMixture::DiracMixture(std::vector<WeightedAtom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) {
        throw std::invalid_argument("Dirac mixture must be non-empty");
    }
    double total = 0.0;
    for (const auto& a : atoms_) {
        if (!(a.weight >= 0.0) || !std::isfinite(a.location)) {
            throw std::invalid_argument("Dirac mixture needs non-negative weights and finite locations");
        }
        total += a.weight;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
        throw std::invalid_argument("Dirac mixture weights sum to " + std::to_string(total));
    }
}

Categorical project_dirac(const Support& support, double y) {
    std::vector<double> p(support.size(), 0.0);
    accumulate_dirac(support, y, 1.0, p);
    return Categorical(support, std::move(p));
}

Categorical project_mixture(const Support& support, const DiracMixture& mixture) {
    std::vector<double> p(support.size(), 0.0);
    for (const auto& a : mixture.atoms()) {
        accumulate_dirac(support, a.location, a.weight, p);
    }
    return Categorical(support, std::move(p));
}

DiracMixture pushforward(const Categorical& nu, double reward, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("pushforward requires 0 <= gamma < 1");
    }
    if (gamma == 0.0) {
        return DiracMixture({{1.0, reward}});
    }
    std::vector<WeightedAtom> out;
    out.reserve(nu.size());
    const auto& support = nu.support();
    for (std::size_t i = 0; i < nu.size(); ++i) {
        if (nu[i] > 0.0) {
            out.push_back({nu[i], reward + gamma * support.atom(i)});
        }
    }
    return DiracMixture(std::move(out));
}

Categorical bellman_target(const Support& support, const Categorical& nu, double reward,
                           double gamma) {
    return project_mixture(support, pushforward(nu, reward, gamma));
}

Categorical mix(std::span<const Categorical> dists, std::span<const double> weights) {
    if (dists.empty() || dists.size() != weights.size()) {
        throw std::invalid_argument("mix needs one weight per distribution");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) {
            throw std::invalid_argument("mixture weights must be non-negative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
        throw std::invalid_argument("mixture weights sum to " + std::to_string(total));
    }
    const Categorical& anchor = dists.front();
    for (const auto& d : dists) {
        require_same_support(anchor.support(), d.support());
    }
    std::vector<double> p(anchor.probs().begin(), anchor.probs().end());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double shift = 0.0;
        for (std::size_t j = 1; j < dists.size(); ++j) {
            shift += weights[j] * (dists[j][i] - anchor[i]);
        }
        p[i] = std::max(0.0, p[i] + shift);
    }
    return Categorical(anchor.support(), std::move(p));
}

Categorical mix_equal(std::span<const Categorical> dists) {
    std::vector<double> w(dists.size(), 1.0 / static_cast<double>(dists.size()));
    return mix(dists, w);
}

double kl(const Categorical& target, const Categorical& model, double smoothing) {
    require_same_support(target.support(), model.support());
    const double k = static_cast<double>(target.size());
    double total = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double p = target[i];
        if (p == 0.0) {
            continue;
        }
        double q = model[i];
        if (smoothing > 0.0) {
            q = (q + smoothing) / (1.0 + k * smoothing);
        }
        if (q == 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        total += p * std::log(p / q);
    }
    // Rounding can leave -1e-17 for identical inputs.
    return std::max(0.0, total);
}

double cramer_distance(const Categorical& a, const Categorical& b) {
    require_same_support(a.support(), b.support());
    double cdf_a = 0.0;
    double cdf_b = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        cdf_a += a[i];
        cdf_b += b[i];
        const double d = cdf_a - cdf_b;
        sq += d * d;
    }
    return std::sqrt(a.support().delta() * sq);
}

double mean(const Categorical& nu) {
    double total = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        total += nu[i] * nu.support().atom(i);
    }
    return total;
}

}  // namespace ecc
