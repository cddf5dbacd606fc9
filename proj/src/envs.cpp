#include "ecc/envs.hpp"

#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ecc {

Env::Env(std::shared_ptr<const EnvSpec> spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(seed) {
    if (!spec_) {
        throw std::invalid_argument("environment needs a spec");
    }
    if (spec_->start_state >= spec_->mdp.n_states()) {
        throw std::invalid_argument("start state out of range");
    }
    if (spec_->episode_cap == 0) {
        throw std::invalid_argument("episode cap must be positive");
    }
}

Observation Env::reset() {
    state_ = spec_->start_state;
    steps_ = 0;
    started_ = true;
    over_ = spec_->mdp.is_terminal(state_);
    return {state_, one_hot(feature_dim(), state_)};
}

StepResult Env::step(ActionIndex action) {
    if (!started_) {
        throw std::logic_error("step called before reset");
    }
    if (over_) {
        throw std::logic_error("step called after the episode ended");
    }
    if (action >= n_actions()) {
        throw std::out_of_range("action index out of range");
    }
    const auto branches = spec_->mdp.branches(state_, action);
    const double u = rng_.uniform();
    double cumulative = 0.0;
    const Branch* chosen = &branches.back();
    for (const Branch& b : branches) {
        cumulative += b.prob;
        if (u < cumulative) {
            chosen = &b;
            break;
        }
    }
    state_ = chosen->next_state;
    ++steps_;
    const bool terminal = spec_->mdp.is_terminal(state_);
    const bool truncated = !terminal && steps_ >= spec_->episode_cap;
    over_ = terminal || truncated;
    return {chosen->reward, {state_, one_hot(feature_dim(), state_)}, terminal, truncated};
}

std::vector<double> one_hot(std::size_t dim, std::size_t index) {
    std::vector<double> f(dim, 0.0);
    f.at(index) = 1.0;
    return f;
}

EnvSpec make_chain(std::size_t n, double gamma) {
    if (n < 2) {
        throw std::invalid_argument("chain needs at least two states");
    }
    const std::size_t goal = n - 1;
    std::vector<std::vector<Branch>> t(n * 2);
    for (StateIndex x = 0; x < goal; ++x) {
        t[x * 2 + 0] = {{1.0, 0.0, x == 0 ? 0 : x - 1}};
        t[x * 2 + 1] = {{1.0, x + 1 == goal ? 1.0 : 0.0, x + 1}};
    }
    return EnvSpec{"chain" + std::to_string(n), FiniteMdp(n, 2, gamma, std::move(t), {goal}), 0,
                   10 * n, Support(0.0, 1.0, 21)};
}

EnvSpec make_cliff(std::size_t width, std::size_t height, double gamma) {
    if (width < 3 || height < 2) {
        throw std::invalid_argument("cliff world needs width >= 3 and height >= 2");
    }
    const std::size_t n = width * height;
    auto index = [&](std::size_t row, std::size_t col) { return row * width + col; };
    const std::size_t bottom = height - 1;
    const StateIndex start = index(bottom, 0);
    const StateIndex goal = index(bottom, width - 1);
    std::vector<StateIndex> terminals{goal};
    for (std::size_t c = 1; c + 1 < width; ++c) {
        terminals.push_back(index(bottom, c));
    }
    auto is_cliff = [&](std::size_t row, std::size_t col) {
        return row == bottom && col > 0 && col + 1 < width;
    };
    std::vector<std::vector<Branch>> t(n * 4);
    for (std::size_t row = 0; row < height; ++row) {
        for (std::size_t col = 0; col < width; ++col) {
            const StateIndex x = index(row, col);
            if (x == goal || is_cliff(row, col)) {
                continue;
            }
            const std::size_t up = row == 0 ? row : row - 1;
            const std::size_t down = row == bottom ? row : row + 1;
            const std::size_t left = col == 0 ? col : col - 1;
            const std::size_t right = col + 1 == width ? col : col + 1;
            const std::pair<std::size_t, std::size_t> moves[4] = {
                {up, col}, {row, right}, {down, col}, {row, left}};
            for (ActionIndex a = 0; a < 4; ++a) {
                const auto [r2, c2] = moves[a];
                const double reward = is_cliff(r2, c2) ? -100.0 : -1.0;
                t[x * 4 + a] = {{1.0, reward, index(r2, c2)}};
            }
        }
    }
    return EnvSpec{"cliff" + std::to_string(width) + "x" + std::to_string(height),
                   FiniteMdp(n, 4, gamma, std::move(t), std::move(terminals)), start, 100,
                   Support(-110.0, 0.0, 51)};
}

EnvSpec make_two_path(const TwoPathParams& p) {
    if (p.safe_length == 0 || p.risky_length == 0) {
        throw std::invalid_argument("two_path corridors need at least one state");
    }
    const std::size_t n = 2 + p.safe_length + p.risky_length;
    const StateIndex terminal = n - 1;
    const StateIndex safe_first = 1;
    const StateIndex risky_first = 1 + p.safe_length;
    std::vector<std::vector<Branch>> t(n * 2);
    t[0 * 2 + 0] = {{1.0, 0.0, safe_first}};
    t[0 * 2 + 1] = {{1.0, 0.0, risky_first}};
    for (std::size_t j = 0; j < p.safe_length; ++j) {
        const StateIndex x = safe_first + j;
        t[x * 2 + 0] = j + 1 == p.safe_length ? std::vector<Branch>{{1.0, p.safe_reward, terminal}}
                                               : std::vector<Branch>{{1.0, 0.0, x + 1}};
        t[x * 2 + 1] = {{1.0, p.retreat_penalty, 0}};
    }
    for (std::size_t j = 0; j < p.risky_length; ++j) {
        const StateIndex x = risky_first + j;
        if (j + 1 == p.risky_length) {
            t[x * 2 + 0] = {{p.risky_high_prob, p.risky_high, terminal},
                            {1.0 - p.risky_high_prob, p.risky_low, terminal}};
        } else {
            t[x * 2 + 0] = {{1.0, 0.0, x + 1}};
        }
        t[x * 2 + 1] = {{1.0, p.retreat_penalty, 0}};
    }
    return EnvSpec{"two_path", FiniteMdp(n, 2, p.gamma, std::move(t), {terminal}), 0,
                   p.episode_cap, Support(-10.0, 15.0, 51)};
}

std::vector<EnvSpec> built_in_envs() {
    std::vector<EnvSpec> out;
    out.push_back(make_chain(5));
    out.push_back(make_cliff(12, 4));
    out.push_back(make_two_path());
    return out;
}

EnvSpec make_env(const std::string& name) {
    if (name == "two_path") {
        return make_two_path();
    }
    if (name == "chain") {
        return make_chain(5);
    }
    if (name == "cliff") {
        return make_cliff(12, 4);
    }
    try {
        if (name.rfind("chain", 0) == 0) {
            std::size_t used = 0;
            const auto n = std::stoul(name.substr(5), &used);
            if (used == name.size() - 5) {
                return make_chain(n);
            }
        }
        if (name.rfind("cliff", 0) == 0) {
            const auto x = name.find('x', 5);
            if (x != std::string::npos) {
                return make_cliff(std::stoul(name.substr(5, x - 5)), std::stoul(name.substr(x + 1)));
            }
        }
    } catch (const std::logic_error&) {
        // fall through to the error below
    }
    throw std::invalid_argument("unknown environment '" + name + "'");
}

EnvSpec parse_env_spec(std::istream& in) {
    MdpDocument doc = parse_mdp_document(in);
    auto field = [&](const std::string& key) -> const std::vector<std::string>* {
        auto it = doc.extra.find(key);
        return it == doc.extra.end() ? nullptr : &it->second;
    };
    auto line_of = [&](const std::string& key) { return doc.extra_lines.at(key); };
    auto single = [&](const std::string& key) -> const std::string& {
        const auto* v = field(key);
        if (v->size() != 1) {
            throw MdpParseError(line_of(key), "'" + key + "' expects one value");
        }
        return v->front();
    };
    auto to_size = [&](const std::string& key, const std::string& token) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(token, &used);
            if (used != token.size() || token.front() == '-') {
                throw std::invalid_argument(token);
            }
            return static_cast<std::size_t>(v);
        } catch (const std::logic_error&) {
            throw MdpParseError(line_of(key), "cannot parse '" + key + "' from '" + token + "'");
        }
    };
    auto to_double = [&](const std::string& key, const std::string& token) {
        try {
            std::size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size()) {
                throw std::invalid_argument(token);
            }
            return v;
        } catch (const std::logic_error&) {
            throw MdpParseError(line_of(key), "cannot parse '" + key + "' from '" + token + "'");
        }
    };

    EnvSpec spec{"unnamed", doc.mdp, 0, 100, std::nullopt};
    if (field("name") != nullptr) {
        spec.name = single("name");
    }
    if (field("start") != nullptr) {
        spec.start_state = to_size("start", single("start"));
        if (spec.start_state >= spec.mdp.n_states()) {
            throw MdpParseError(line_of("start"), "start state out of range");
        }
    }
    if (field("episode_cap") != nullptr) {
        spec.episode_cap = to_size("episode_cap", single("episode_cap"));
        if (spec.episode_cap == 0) {
            throw MdpParseError(line_of("episode_cap"), "episode_cap must be positive");
        }
    }
    if (const auto* s = field("support")) {
        if (s->size() != 3) {
            throw MdpParseError(line_of("support"), "'support' expects z_min z_max K");
        }
        try {
            spec.support = Support(to_double("support", (*s)[0]), to_double("support", (*s)[1]),
                                   to_size("support", (*s)[2]));
        } catch (const std::invalid_argument& e) {
            throw MdpParseError(line_of("support"), e.what());
        }
    }
    for (const auto& [key, values] : doc.extra) {
        if (key != "name" && key != "start" && key != "episode_cap" && key != "support") {
            throw MdpParseError(line_of(key), "unknown header key '" + key + "'");
        }
    }
    return spec;
}

EnvSpec load_env_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open env spec file " + path);
    }
    return parse_env_spec(in);
}

void write_env_spec(std::ostream& out, const EnvSpec& spec) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "name " << spec.name << "\n";
    out << "start " << spec.start_state << "\n";
    out << "episode_cap " << spec.episode_cap << "\n";
    if (spec.support) {
        out << "support " << spec.support->z_min() << ' ' << spec.support->z_max() << ' '
            << spec.support->size() << "\n";
    }
    out.precision(old_precision);
    write_mdp(out, spec.mdp);
}

}  // namespace ecc
