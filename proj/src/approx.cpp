#include "ecc/approx.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "ecc/random.hpp"

namespace ecc {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'C', 'C', 'P', 'A', 'R', 'A', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

struct HiddenLayout {
    std::size_t w1 = 0;
    std::size_t b1 = 0;
    std::size_t w2 = 0;
    std::size_t b2 = 0;
};

HiddenLayout hidden_layout(const ApproxDims& d) {
    HiddenLayout l;
    l.w1 = 0;
    l.b1 = l.w1 + d.hidden_dim * d.feature_dim;
    l.w2 = l.b1 + d.hidden_dim;
    l.b2 = l.w2 + d.n_actions * d.n_atoms * d.hidden_dim;
    return l;
}

void check_features(const ApproximatorParams& params, std::span<const double> features) {
    if (features.size() != params.dims().feature_dim) {
        throw std::invalid_argument("feature vector has length " + std::to_string(features.size()) +
                                    ", expected " + std::to_string(params.dims().feature_dim));
    }
}

// Returns hidden pre-activations when the architecture has a hidden layer.
std::vector<double> compute_logits(const ApproximatorParams& params,
                                   std::span<const double> features,
                                   std::vector<double>* hidden_pre) {
    const auto& d = params.dims();
    const auto w = params.weights();
    const std::size_t outputs = d.n_actions * d.n_atoms;
    std::vector<double> out(outputs, 0.0);
    if (params.architecture() == Architecture::tabular_logits) {
        for (std::size_t f = 0; f < d.feature_dim; ++f) {
            const double v = features[f];
            if (v == 0.0) {
                continue;
            }
            const double* row = w.data() + f * outputs;
            for (std::size_t o = 0; o < outputs; ++o) {
                out[o] += v * row[o];
            }
        }
        return out;
    }
    const HiddenLayout l = hidden_layout(d);
    std::vector<double> pre(d.hidden_dim);
    for (std::size_t h = 0; h < d.hidden_dim; ++h) {
        double s = w[l.b1 + h];
        const double* row = w.data() + l.w1 + h * d.feature_dim;
        for (std::size_t f = 0; f < d.feature_dim; ++f) {
            s += row[f] * features[f];
        }
        pre[h] = s;
    }
    for (std::size_t o = 0; o < outputs; ++o) {
        double s = w[l.b2 + o];
        const double* row = w.data() + l.w2 + o * d.hidden_dim;
        for (std::size_t h = 0; h < d.hidden_dim; ++h) {
            s += row[h] * std::max(0.0, pre[h]);
        }
        out[o] = s;
    }
    if (hidden_pre != nullptr) {
        *hidden_pre = std::move(pre);
    }
    return out;
}

// Shifted by the max logit so exp never overflows.
std::vector<double> softmax(std::span<const double> z) {
    const double peak = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - peak);
        total += p[i];
    }
    for (double& v : p) {
        v /= total;
    }
    return p;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

std::uint64_t get_uint(std::istream& in, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) {
            throw std::runtime_error("checkpoint truncated");
        }
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

}  // namespace

std::string to_string(Architecture arch) {
    switch (arch) {
        case Architecture::tabular_logits:
            return "tabular";
        case Architecture::one_hidden_layer:
            return "mlp";
    }
    return "unknown";
}

Architecture architecture_from_string(const std::string& name) {
    if (name == "tabular" || name == "tabular-logits" || name == "tabular_logits") {
        return Architecture::tabular_logits;
    }
    if (name == "mlp" || name == "one-hidden-layer" || name == "one_hidden_layer") {
        return Architecture::one_hidden_layer;
    }
    throw std::invalid_argument("unknown architecture '" + name + "'");
}

std::size_t weight_count(Architecture arch, const ApproxDims& d) {
    const std::size_t outputs = d.n_actions * d.n_atoms;
    if (arch == Architecture::tabular_logits) {
        return d.feature_dim * outputs;
    }
    return d.hidden_dim * d.feature_dim + d.hidden_dim + outputs * d.hidden_dim + outputs;
}

ApproximatorParams::ApproximatorParams(Architecture arch, ApproxDims dims,
                                       std::vector<double> weights, std::uint64_t seed)
    : arch_(arch), dims_(dims), weights_(std::move(weights)), seed_(seed) {
    if (arch != Architecture::tabular_logits && arch != Architecture::one_hidden_layer) {
        throw std::invalid_argument("unknown architecture tag");
    }
    if (dims.feature_dim == 0 || dims.n_actions == 0 || dims.n_atoms < 2 ||
        (arch == Architecture::one_hidden_layer && dims.hidden_dim == 0)) {
        throw std::invalid_argument("approximator dimensions must be positive");
    }
    if (weights_.size() != weight_count(arch, dims)) {
        throw std::invalid_argument("weight vector has " + std::to_string(weights_.size()) +
                                    " entries, architecture needs " +
                                    std::to_string(weight_count(arch, dims)));
    }
    for (double w : weights_) {
        if (!std::isfinite(w)) {
            throw std::invalid_argument("approximator weights must be finite");
        }
    }
}

ApproximatorParams ApproximatorParams::random(Architecture arch, ApproxDims dims,
                                              std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(weight_count(arch, dims));
    auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = begin; i < end; ++i) {
            w[i] = rng.uniform(-bound, bound);
        }
    };
    if (arch == Architecture::tabular_logits) {
        fill(0, w.size(), dims.feature_dim);
    } else {
        const HiddenLayout l = hidden_layout(dims);
        fill(l.w1, l.w2, dims.feature_dim);
        fill(l.w2, w.size(), dims.hidden_dim);
    }
    return ApproximatorParams(arch, dims, std::move(w), seed);
}

ApproximatorParams ApproximatorParams::zeros(Architecture arch, ApproxDims dims) {
    return ApproximatorParams(arch, dims, std::vector<double>(weight_count(arch, dims), 0.0));
}

std::vector<double> logits(const ApproximatorParams& params, std::span<const double> features) {
    check_features(params, features);
    return compute_logits(params, features, nullptr);
}

std::vector<Categorical> forward(const ApproximatorParams& params, const Support& support,
                                 std::span<const double> features) {
    const auto& d = params.dims();
    if (support.size() != d.n_atoms) {
        throw std::invalid_argument("support size does not match the approximator head");
    }
    const std::vector<double> z = logits(params, features);
    std::vector<Categorical> out;
    out.reserve(d.n_actions);
    for (std::size_t a = 0; a < d.n_actions; ++a) {
        out.emplace_back(support,
                         softmax(std::span<const double>(z).subspan(a * d.n_atoms, d.n_atoms)));
    }
    return out;
}

std::vector<double> q_values(const ApproximatorParams& params, const Support& support,
                             std::span<const double> features) {
    std::vector<double> q;
    for (const auto& c : forward(params, support, features)) {
        q.push_back(mean(c));
    }
    return q;
}

double accumulate_kl_grad(const ApproximatorParams& params, std::span<const double> features,
                          std::size_t action, const Categorical& target, double smoothing,
                          std::span<double> grad) {
    check_features(params, features);
    const auto& d = params.dims();
    if (action >= d.n_actions) {
        throw std::out_of_range("action index out of range");
    }
    if (target.size() != d.n_atoms) {
        throw std::invalid_argument("target size does not match the approximator head");
    }
    if (grad.size() != params.weights().size()) {
        throw std::invalid_argument("gradient buffer has the wrong size");
    }
    std::vector<double> hidden_pre;
    const std::vector<double> z = compute_logits(params, features, &hidden_pre);
    const std::size_t offset = action * d.n_atoms;
    const std::vector<double> q =
        softmax(std::span<const double>(z).subspan(offset, d.n_atoms));

    // dL/dz_j = -p_j q_j / (q_j + eps) + q_j sum_i p_i q_i / (q_i + eps);
    // with eps = 0 this is q_j - p_j.
    const double k = static_cast<double>(d.n_atoms);
    double loss = 0.0;
    double weighted = 0.0;
    std::vector<double> ratio(d.n_atoms);
    for (std::size_t i = 0; i < d.n_atoms; ++i) {
        const double p = target[i];
        const double qs = (q[i] + smoothing) / (1.0 + k * smoothing);
        if (p > 0.0) {
            loss += p * std::log(p / qs);
        }
        ratio[i] = smoothing > 0.0 ? q[i] / (q[i] + smoothing) : 1.0;
        weighted += p * ratio[i];
    }
    std::vector<double> dz(d.n_atoms);
    for (std::size_t j = 0; j < d.n_atoms; ++j) {
        dz[j] = smoothing > 0.0 ? q[j] * weighted - target[j] * ratio[j] : q[j] - target[j];
    }

    const auto w = params.weights();
    if (params.architecture() == Architecture::tabular_logits) {
        const std::size_t outputs = d.n_actions * d.n_atoms;
        for (std::size_t f = 0; f < d.feature_dim; ++f) {
            const double v = features[f];
            if (v == 0.0) {
                continue;
            }
            double* row = grad.data() + f * outputs + offset;
            for (std::size_t j = 0; j < d.n_atoms; ++j) {
                row[j] += v * dz[j];
            }
        }
        return loss;
    }

    const HiddenLayout l = hidden_layout(d);
    std::vector<double> dh(d.hidden_dim, 0.0);
    for (std::size_t j = 0; j < d.n_atoms; ++j) {
        const std::size_t o = offset + j;
        const double* w2_row = w.data() + l.w2 + o * d.hidden_dim;
        double* g2_row = grad.data() + l.w2 + o * d.hidden_dim;
        for (std::size_t h = 0; h < d.hidden_dim; ++h) {
            g2_row[h] += dz[j] * std::max(0.0, hidden_pre[h]);
            dh[h] += dz[j] * w2_row[h];
        }
        grad[l.b2 + o] += dz[j];
    }
    for (std::size_t h = 0; h < d.hidden_dim; ++h) {
        if (!(hidden_pre[h] > 0.0)) {
            continue;
        }
        double* g1_row = grad.data() + l.w1 + h * d.feature_dim;
        for (std::size_t f = 0; f < d.feature_dim; ++f) {
            g1_row[f] += dh[h] * features[f];
        }
        grad[l.b1 + h] += dh[h];
    }
    return loss;
}

LossAndGrad kl_loss_and_grad(const ApproximatorParams& params, std::span<const double> features,
                             std::size_t action, const Categorical& target, double smoothing) {
    LossAndGrad out{0.0, std::vector<double>(params.weights().size(), 0.0)};
    out.loss = accumulate_kl_grad(params, features, action, target, smoothing, out.grad);
    return out;
}

ApproximatorParams apply_update(const ApproximatorParams& params, std::span<const double> grad,
                                const GradientUpdateRule& rule) {
    if (!(rule.learning_rate >= 0.0)) {
        throw std::invalid_argument("learning rate must be non-negative");
    }
    if (grad.size() != params.weights().size()) {
        throw std::invalid_argument("gradient has the wrong size");
    }
    double norm_sq = 0.0;
    for (double g : grad) {
        if (!std::isfinite(g)) {
            throw std::domain_error("rejected non-finite gradient");
        }
        norm_sq += g * g;
    }
    double scale = rule.learning_rate;
    if (rule.clip_norm) {
        const double norm = std::sqrt(norm_sq);
        if (norm > *rule.clip_norm) {
            scale *= *rule.clip_norm / norm;
        }
    }
    std::vector<double> w(params.weights().begin(), params.weights().end());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= scale * grad[i];
    }
    return ApproximatorParams(params.architecture(), params.dims(), std::move(w), params.seed());
}

void save_checkpoint(std::ostream& out, const ApproximatorParams& params) {
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(params.architecture()));
    const auto& d = params.dims();
    put_u64(out, d.feature_dim);
    put_u64(out, d.hidden_dim);
    put_u64(out, d.n_actions);
    put_u64(out, d.n_atoms);
    put_u64(out, params.seed());
    put_u64(out, params.weights().size());
    for (double w : params.weights()) {
        put_u64(out, std::bit_cast<std::uint64_t>(w));
    }
    if (!out) {
        throw std::runtime_error("failed to write checkpoint");
    }
}

ApproximatorParams load_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw std::runtime_error("not an approximator checkpoint");
    }
    const auto version = get_uint(in, 4);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto arch = static_cast<Architecture>(get_uint(in, 4));
    ApproxDims d{};
    d.feature_dim = get_uint(in, 8);
    d.hidden_dim = get_uint(in, 8);
    d.n_actions = get_uint(in, 8);
    d.n_atoms = get_uint(in, 8);
    const std::uint64_t seed = get_uint(in, 8);
    const std::uint64_t count = get_uint(in, 8);
    if (arch != Architecture::tabular_logits && arch != Architecture::one_hidden_layer) {
        throw std::runtime_error("unknown architecture tag in checkpoint");
    }
    if (count != weight_count(arch, d)) {
        throw std::runtime_error("checkpoint weight count does not match its dimensions");
    }
    std::vector<double> w(count);
    for (auto& v : w) {
        v = std::bit_cast<double>(get_uint(in, 8));
    }
    return ApproximatorParams(arch, d, std::move(w), seed);
}

}  // namespace ecc
