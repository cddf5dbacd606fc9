#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ecc/approx.hpp"
#include "oracles.hpp"

using namespace ecc;

namespace {

const Support kSupport(-1.0, 1.0, 7);
const ApproxDims kDims{4, 6, 3, 7};

/// Loss recomputed from the logits with the test's own softmax and KL.
double loss_oracle(const ApproximatorParams& p, const std::vector<double>& f, std::size_t action,
                   const std::vector<double>& target) {
    const auto z = logits(p, f);
    const std::size_t k = p.dims().n_atoms;
    const std::vector<double> row(z.begin() + static_cast<long>(action * k),
                                  z.begin() + static_cast<long>((action + 1) * k));
    return oracle::kl(target, oracle::softmax(row));
}

std::vector<double> random_features(std::mt19937_64& g, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> f(n);
    for (auto& v : f) v = u(g);
    return f;
}

double max_relative_error(Architecture arch, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    const auto params = ApproximatorParams::random(arch, kDims, seed);
    const auto features = random_features(g, kDims.feature_dim);
    const std::size_t action = g() % kDims.n_actions;
    const auto target = oracle::random_probs(g, kSupport.size(), seed % 2 == 0);
    const auto analytic = kl_loss_and_grad(params, features, action, Categorical(kSupport, target));

    const double h = 1e-5;
    double worst = 0.0;
    std::vector<double> w(params.weights().begin(), params.weights().end());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double orig = w[i];
        w[i] = orig + h;
        const double up = loss_oracle(ApproximatorParams(arch, kDims, w, seed), features, action, target);
        w[i] = orig - h;
        const double down = loss_oracle(ApproximatorParams(arch, kDims, w, seed), features, action, target);
        w[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.grad[i];
        const double scale = std::max(std::abs(a), std::abs(numeric));
        if (scale < 1e-9) continue;  // both vanish
        worst = std::max(worst, std::abs(a - numeric) / scale);
    }
    return worst;
}

}  // namespace

TEST_CASE("architecture names") {
    CHECK(architecture_from_string("tabular") == Architecture::tabular_logits);
    CHECK(architecture_from_string("mlp") == Architecture::one_hidden_layer);
    CHECK(to_string(Architecture::one_hidden_layer) == "mlp");
    CHECK_THROWS(architecture_from_string("cnn"));
}

TEST_CASE("zero weights give uniform outputs") {
    for (auto arch : {Architecture::tabular_logits, Architecture::one_hidden_layer}) {
        const auto p = ApproximatorParams::zeros(arch, kDims);
        const auto out = forward(p, kSupport, std::vector<double>{1, 0, 0, 0});
        REQUIRE(out.size() == kDims.n_actions);
        for (const auto& c : out) {
            CHECK(c == Categorical::uniform(kSupport));
        }
    }
}

TEST_CASE("softmax shift invariance") {
    // tabular weights W[f][a K + k]; adding c to one action's row for an
    // active one-hot feature shifts all of that action's logits by c
    const auto p = ApproximatorParams::random(Architecture::tabular_logits, kDims, 5);
    std::vector<double> w(p.weights().begin(), p.weights().end());
    const std::size_t width = kDims.n_actions * kDims.n_atoms;
    for (std::size_t k = 0; k < kDims.n_atoms; ++k) {
        w[2 * width + 1 * kDims.n_atoms + k] += 3.7;
    }
    const ApproximatorParams shifted(Architecture::tabular_logits, kDims, w, 5);
    const std::vector<double> f{0, 0, 1, 0};
    const auto a = forward(p, kSupport, f);
    const auto b = forward(shifted, kSupport, f);
    for (std::size_t k = 0; k < kDims.n_atoms; ++k) {
        CHECK(std::abs(a[1][k] - b[1][k]) <= 1e-12);
    }
}

TEST_CASE("outputs are valid and strictly positive") {
    std::mt19937_64 g(41);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto arch = trial % 2 == 0 ? Architecture::tabular_logits : Architecture::one_hidden_layer;
        const auto p = ApproximatorParams::random(arch, kDims, static_cast<std::uint64_t>(trial));
        for (const auto& c : forward(p, kSupport, random_features(g, kDims.feature_dim))) {
            double s = 0.0;
            for (double v : c.probs()) {
                CHECK(v > 0.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("dimension mismatches are rejected") {
    const auto p = ApproximatorParams::random(Architecture::tabular_logits, kDims, 1);
    CHECK_THROWS(forward(p, kSupport, std::vector<double>{1, 0}));
    CHECK_THROWS(forward(p, Support(0.0, 1.0, 5), std::vector<double>{1, 0, 0, 0}));
    CHECK_THROWS(ApproximatorParams(Architecture::tabular_logits, kDims, std::vector<double>(3, 0.0), 0));
}

TEST_CASE("loss and gradient vanish at the model's own output") {
    for (auto arch : {Architecture::tabular_logits, Architecture::one_hidden_layer}) {
        const auto p = ApproximatorParams::random(arch, kDims, 9);
        const std::vector<double> f{0.3, -0.2, 0.9, 0.1};
        const auto out = forward(p, kSupport, f);
        const auto lg = kl_loss_and_grad(p, f, 2, out[2]);
        CHECK(std::abs(lg.loss) <= 1e-12);
        for (double v : lg.grad) {
            CHECK(std::abs(v) <= 1e-10);
        }
    }
}

TEST_CASE("tabular logit gradient is p minus the target") {
    const auto p = ApproximatorParams::random(Architecture::tabular_logits, kDims, 13);
    const std::vector<double> f{0, 1, 0, 0};
    const std::size_t action = 2;
    const std::size_t j = 4;
    const auto lg = kl_loss_and_grad(p, f, action, Categorical::dirac_atom(kSupport, j));
    const auto probs = forward(p, kSupport, f)[action];
    const std::size_t width = kDims.n_actions * kDims.n_atoms;
    for (std::size_t k = 0; k < kDims.n_atoms; ++k) {
        const double expected = probs[k] - (k == j ? 1.0 : 0.0);
        CHECK(lg.grad[1 * width + action * kDims.n_atoms + k] == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(lg.loss == doctest::Approx(-std::log(probs[j])).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences") {
    for (auto arch : {Architecture::tabular_logits, Architecture::one_hidden_layer}) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            worst = std::max(worst, max_relative_error(arch, seed));
        }
        CHECK_MESSAGE(worst <= 1e-5, to_string(arch) << " worst relative error " << worst);
    }
}

TEST_CASE("smoothed loss gradient matches finite differences") {
    const double eps = 1e-3;  // large enough to make the smoothing visible
    std::mt19937_64 g(43);
    for (auto arch : {Architecture::tabular_logits, Architecture::one_hidden_layer}) {
        const auto p = ApproximatorParams::random(arch, kDims, 21);
        const auto f = random_features(g, kDims.feature_dim);
        const Categorical target(kSupport, oracle::random_probs(g, kSupport.size()));
        const auto lg = kl_loss_and_grad(p, f, 1, target, eps);
        std::vector<double> w(p.weights().begin(), p.weights().end());
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w[i];
            w[i] = orig + 1e-5;
            const double up = kl(target, forward(ApproximatorParams(arch, kDims, w, 0), kSupport, f)[1], eps);
            w[i] = orig - 1e-5;
            const double down = kl(target, forward(ApproximatorParams(arch, kDims, w, 0), kSupport, f)[1], eps);
            w[i] = orig;
            const double numeric = (up - down) / 2e-5;
            CHECK(std::abs(lg.grad[i] - numeric) <= 1e-5 * std::max(1.0, std::abs(numeric)));
        }
    }
}

TEST_CASE("apply_update") {
    const auto p = ApproximatorParams::random(Architecture::one_hidden_layer, kDims, 3);
    const std::vector<double> zero(p.weights().size(), 0.0);
    CHECK(apply_update(p, zero, {0.1, std::nullopt}).weights().size() == p.weights().size());
    CHECK(std::equal(p.weights().begin(), p.weights().end(),
                     apply_update(p, zero, {0.1, std::nullopt}).weights().begin()));
    std::vector<double> ones(p.weights().size(), 1.0);
    const auto same = apply_update(p, ones, {0.0, std::nullopt});
    CHECK(std::equal(p.weights().begin(), p.weights().end(), same.weights().begin()));

    const auto stepped = apply_update(p, ones, {0.5, std::nullopt});
    for (std::size_t i = 0; i < ones.size(); ++i) {
        CHECK(stepped.weights()[i] == p.weights()[i] - 0.5);
    }
    const auto clipped = apply_update(p, ones, {1.0, 1.0});
    double moved = 0.0;
    for (std::size_t i = 0; i < ones.size(); ++i) {
        moved += std::pow(p.weights()[i] - clipped.weights()[i], 2);
    }
    CHECK(std::sqrt(moved) == doctest::Approx(1.0).epsilon(1e-12));

    ones[3] = std::nan("");
    CHECK_THROWS_AS(apply_update(p, ones, {0.1, std::nullopt}), std::domain_error);
}

TEST_CASE("repeated updates fit a fixed target") {
    auto p = ApproximatorParams::random(Architecture::tabular_logits, kDims, 17);
    const std::vector<double> f{0, 0, 0, 1};
    std::mt19937_64 g(47);
    const Categorical target(kSupport, oracle::random_probs(g, kSupport.size()));
    double loss = 0.0;
    for (int step = 0; step < 5000; ++step) {
        const auto lg = kl_loss_and_grad(p, f, 0, target);
        loss = lg.loss;
        if (loss < 1e-4) break;
        p = apply_update(p, lg.grad, {0.1, std::nullopt});
    }
    CHECK(loss < 1e-4);
}

TEST_CASE("checkpoint round trip") {
    for (auto arch : {Architecture::tabular_logits, Architecture::one_hidden_layer}) {
        const auto p = ApproximatorParams::random(arch, kDims, 123);
        std::stringstream ss;
        save_checkpoint(ss, p);
        const std::string bytes = ss.str();
        CHECK(bytes.substr(0, 8) == "ECCPARAM");
        std::stringstream in(bytes);
        const auto back = load_checkpoint(in);
        CHECK(back.architecture() == arch);
        CHECK(back.dims() == kDims);
        CHECK(std::equal(p.weights().begin(), p.weights().end(), back.weights().begin(),
                         back.weights().end()));
        std::stringstream truncated(bytes.substr(0, bytes.size() - 4));
        CHECK_THROWS(load_checkpoint(truncated));
        std::string bad = bytes;
        bad[0] = 'X';
        std::stringstream wrong(bad);
        CHECK_THROWS(load_checkpoint(wrong));
    }
}
