#include "ecc/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

namespace ecc {

namespace {

constexpr double kRowTolerance = 1e-9;

void validate_row(std::span<const double> row, const char* what) {
    double total = 0.0;
    for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument(std::string(what) + " has a negative or non-finite entry");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kRowTolerance) {
        throw std::invalid_argument(std::string(what) + " row sums to " + std::to_string(total));
    }
}

void check_shapes(const FiniteMdp& mdp, std::size_t n_states, std::size_t n_actions) {
    if (mdp.n_states() != n_states || mdp.n_actions() != n_actions) {
        throw std::invalid_argument("table shape does not match the MDP");
    }
}

void record_clipping(const Support& support, const DiracMixture& m, ClipReport& report) {
    double lower = 0.0;
    double upper = 0.0;
    for (const auto& a : m.atoms()) {
        if (a.location < support.z_min()) {
            lower += a.weight;
        } else if (a.location > support.z_max()) {
            upper += a.weight;
        }
    }
    report.lower_mass = std::max(report.lower_mass, lower);
    report.upper_mass = std::max(report.upper_mass, upper);
}

void emit_clip_warning(const ClipReport& report, const char* op) {
    if (report.significant()) {
        std::clog << "warning: " << op << " clipped mass " << report.lower_mass << " below z_min and "
                  << report.upper_mass << " above z_max\n";
    }
}

// Projected backup of one (x, a) entry; `next_action_weights(x')` gives the
// distribution over a' used at each non-terminal successor.
template <typename NextWeights>
Categorical backup_entry(const FiniteMdp& mdp, const ReturnFunction& eta, StateIndex x,
                         ActionIndex a, NextWeights&& next_action_weights, ClipReport& report) {
    const Support& support = eta.support();
    std::vector<WeightedAtom> atoms;
    for (const Branch& b : mdp.branches(x, a)) {
        if (b.prob == 0.0) {
            continue;
        }
        if (mdp.is_terminal(b.next_state)) {
            atoms.push_back({b.prob, b.reward});
            continue;
        }
        const std::span<const double> w = next_action_weights(b.next_state);
        for (ActionIndex a2 = 0; a2 < mdp.n_actions(); ++a2) {
            if (w[a2] == 0.0) {
                continue;
            }
            const Categorical& nu = eta.at(b.next_state, a2);
            for (std::size_t i = 0; i < nu.size(); ++i) {
                if (nu[i] > 0.0) {
                    atoms.push_back(
                        {b.prob * w[a2] * nu[i], b.reward + mdp.gamma() * support.atom(i)});
                }
            }
        }
    }
    DiracMixture mixture(std::move(atoms));
    record_clipping(support, mixture, report);
    return project_mixture(support, mixture);
}

}  // namespace

FiniteMdp::FiniteMdp(std::size_t n_states, std::size_t n_actions, double gamma,
                     std::vector<std::vector<Branch>> transitions,
                     std::vector<StateIndex> terminal_states)
    : n_states_(n_states),
      n_actions_(n_actions),
      gamma_(gamma),
      transitions_(std::move(transitions)),
      terminal_(n_states, false) {
    if (n_states == 0 || n_actions == 0) {
        throw std::invalid_argument("MDP needs at least one state and one action");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("MDP discount must lie in [0, 1)");
    }
    if (transitions_.size() != n_states * n_actions) {
        throw std::invalid_argument("MDP needs one branch list per state-action pair");
    }
    for (StateIndex t : terminal_states) {
        if (t >= n_states) {
            throw std::invalid_argument("terminal state index out of range");
        }
        terminal_[t] = true;
    }
    for (StateIndex x = 0; x < n_states; ++x) {
        for (ActionIndex a = 0; a < n_actions; ++a) {
            auto& list = transitions_[x * n_actions + a];
            if (terminal_[x]) {
                if (list.empty()) {
                    list.push_back({1.0, 0.0, x});
                }
                for (const auto& b : list) {
                    if (b.next_state != x || b.reward != 0.0) {
                        throw std::invalid_argument("terminal state " + std::to_string(x) +
                                                    " must self-loop with reward 0");
                    }
                }
            }
            if (list.empty()) {
                throw std::invalid_argument("state " + std::to_string(x) + " action " +
                                            std::to_string(a) + " has no transitions");
            }
            double total = 0.0;
            for (const auto& b : list) {
                if (!(b.prob >= 0.0) || !std::isfinite(b.reward)) {
                    throw std::invalid_argument("transition probabilities must be non-negative "
                                                "and rewards finite");
                }
                if (b.next_state >= n_states) {
                    throw std::invalid_argument("next state index out of range");
                }
                total += b.prob;
            }
            if (std::abs(total - 1.0) > kRowTolerance) {
                throw std::invalid_argument("transition probabilities for state " +
                                            std::to_string(x) + " action " + std::to_string(a) +
                                            " sum to " + std::to_string(total));
            }
        }
    }
}

std::span<const Branch> FiniteMdp::branches(StateIndex x, ActionIndex a) const {
    return transitions_.at(x * n_actions_ + a);
}

std::vector<StateIndex> FiniteMdp::terminal_states() const {
    std::vector<StateIndex> out;
    for (StateIndex x = 0; x < n_states_; ++x) {
        if (terminal_[x]) {
            out.push_back(x);
        }
    }
    return out;
}

QTable::QTable(std::size_t n_states, std::size_t n_actions, std::vector<double> values)
    : StateActionTable<double>(n_states, n_actions, std::move(values)) {
    for (double v : this->values()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("Q-table entries must be finite");
        }
    }
}

QTable QTable::zeros(std::size_t n_states, std::size_t n_actions) {
    return QTable(n_states, n_actions, std::vector<double>(n_states * n_actions, 0.0));
}

TabularPolicy::TabularPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> probs)
    : StateActionTable<double>(n_states, n_actions, std::move(probs)) {
    for (StateIndex x = 0; x < n_states; ++x) {
        validate_row(row(x), "policy");
    }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
    return TabularPolicy(n_states, n_actions,
                         std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions)));
}

ReturnFunction::ReturnFunction(std::size_t n_states, std::size_t n_actions,
                               std::vector<Categorical> table)
    : StateActionTable<Categorical>(n_states, n_actions, std::move(table)) {
    const Support& s = values().front().support();
    for (const auto& c : values()) {
        if (!(c.support() == s)) {
            throw SupportMismatch("return function entries must share one support");
        }
    }
}

ReturnFunction ReturnFunction::filled(std::size_t n_states, std::size_t n_actions,
                                      const Categorical& value) {
    return ReturnFunction(n_states, n_actions, std::vector<Categorical>(n_states * n_actions, value));
}

void ReturnFunction::set(StateIndex x, ActionIndex a, Categorical value) {
    if (!(value.support() == support())) {
        throw SupportMismatch("return function entries must share one support");
    }
    at(x, a) = std::move(value);
}

ActionIndex argmax_action(std::span<const double> values) {
    ActionIndex best = 0;
    for (ActionIndex a = 1; a < values.size(); ++a) {
        if (values[a] > values[best]) {
            best = a;
        }
    }
    return best;
}

QTable q_values(const ReturnFunction& eta) {
    std::vector<double> v;
    v.reserve(eta.values().size());
    for (const auto& c : eta.values()) {
        v.push_back(mean(c));
    }
    return QTable(eta.n_states(), eta.n_actions(), std::move(v));
}

TabularPolicy greedy_policy(const QTable& q) {
    std::vector<double> probs(q.n_states() * q.n_actions(), 0.0);
    for (StateIndex x = 0; x < q.n_states(); ++x) {
        probs[x * q.n_actions() + argmax_action(q.row(x))] = 1.0;
    }
    return TabularPolicy(q.n_states(), q.n_actions(), std::move(probs));
}

QTable expected_bellman(const FiniteMdp& mdp, const TabularPolicy& pi, const QTable& q) {
    check_shapes(mdp, q.n_states(), q.n_actions());
    check_shapes(mdp, pi.n_states(), pi.n_actions());
    std::vector<double> out(mdp.n_states() * mdp.n_actions());
    for (StateIndex x = 0; x < mdp.n_states(); ++x) {
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
            double total = 0.0;
            for (const Branch& b : mdp.branches(x, a)) {
                double next = 0.0;
                if (!mdp.is_terminal(b.next_state)) {
                    for (ActionIndex a2 = 0; a2 < mdp.n_actions(); ++a2) {
                        next += pi.at(b.next_state, a2) * q.at(b.next_state, a2);
                    }
                }
                total += b.prob * (b.reward + mdp.gamma() * next);
            }
            out[x * mdp.n_actions() + a] = total;
        }
    }
    return QTable(mdp.n_states(), mdp.n_actions(), std::move(out));
}

QTable expected_optimality(const FiniteMdp& mdp, const QTable& q) {
    check_shapes(mdp, q.n_states(), q.n_actions());
    std::vector<double> out(mdp.n_states() * mdp.n_actions());
    for (StateIndex x = 0; x < mdp.n_states(); ++x) {
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
            double total = 0.0;
            for (const Branch& b : mdp.branches(x, a)) {
                double next = 0.0;
                if (!mdp.is_terminal(b.next_state)) {
                    const auto row = q.row(b.next_state);
                    next = row[argmax_action(row)];
                }
                total += b.prob * (b.reward + mdp.gamma() * next);
            }
            out[x * mdp.n_actions() + a] = total;
        }
    }
    return QTable(mdp.n_states(), mdp.n_actions(), std::move(out));
}

ReturnFunction dist_bellman(const FiniteMdp& mdp, const TabularPolicy& pi,
                            const ReturnFunction& eta, ClipReport* report) {
    check_shapes(mdp, eta.n_states(), eta.n_actions());
    check_shapes(mdp, pi.n_states(), pi.n_actions());
    ClipReport local;
    std::vector<Categorical> out;
    out.reserve(mdp.n_states() * mdp.n_actions());
    auto weights = [&](StateIndex x2) { return pi.row(x2); };
    for (StateIndex x = 0; x < mdp.n_states(); ++x) {
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
            out.push_back(backup_entry(mdp, eta, x, a, weights, local));
        }
    }
    if (report != nullptr) {
        *report = local;
    } else {
        emit_clip_warning(local, "dist_bellman");
    }
    return ReturnFunction(mdp.n_states(), mdp.n_actions(), std::move(out));
}

ReturnFunction dist_optimality(const FiniteMdp& mdp, const ReturnFunction& eta,
                               ClipReport* report) {
    check_shapes(mdp, eta.n_states(), eta.n_actions());
    const TabularPolicy greedy = greedy_policy(q_values(eta));
    ClipReport local;
    std::vector<Categorical> out;
    out.reserve(mdp.n_states() * mdp.n_actions());
    auto weights = [&](StateIndex x2) { return greedy.row(x2); };
    for (StateIndex x = 0; x < mdp.n_states(); ++x) {
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
            out.push_back(backup_entry(mdp, eta, x, a, weights, local));
        }
    }
    if (report != nullptr) {
        *report = local;
    } else {
        emit_clip_warning(local, "dist_optimality");
    }
    return ReturnFunction(mdp.n_states(), mdp.n_actions(), std::move(out));
}

double sup_distance(const QTable& a, const QTable& b) {
    if (a.n_states() != b.n_states() || a.n_actions() != b.n_actions()) {
        throw std::invalid_argument("Q-table shapes differ");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
    }
    return d;
}

double sup_cramer_distance(const ReturnFunction& a, const ReturnFunction& b) {
    if (a.n_states() != b.n_states() || a.n_actions() != b.n_actions()) {
        throw std::invalid_argument("return function shapes differ");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        d = std::max(d, cramer_distance(a.values()[i], b.values()[i]));
    }
    return d;
}

FixedPointResult<QTable> solve_q_evaluation(const FiniteMdp& mdp, const TabularPolicy& pi,
                                            double tol, std::size_t max_iter) {
    return solve_fixed_point<QTable>(
        [&](const QTable& q) { return expected_bellman(mdp, pi, q); },
        QTable::zeros(mdp.n_states(), mdp.n_actions()), sup_distance, tol, max_iter);
}

FixedPointResult<QTable> solve_q_optimal(const FiniteMdp& mdp, double tol, std::size_t max_iter) {
    return solve_fixed_point<QTable>([&](const QTable& q) { return expected_optimality(mdp, q); },
                                     QTable::zeros(mdp.n_states(), mdp.n_actions()),
                                     sup_distance, tol, max_iter);
}

FixedPointResult<ReturnFunction> solve_dist_evaluation(const FiniteMdp& mdp,
                                                       const TabularPolicy& pi,
                                                       const ReturnFunction& init, double tol,
                                                       std::size_t max_iter) {
    return solve_fixed_point<ReturnFunction>(
        [&](const ReturnFunction& eta) { return dist_bellman(mdp, pi, eta); }, init,
        sup_cramer_distance, tol, max_iter);
}

FixedPointResult<ReturnFunction> solve_dist_optimal(const FiniteMdp& mdp,
                                                    const ReturnFunction& init, double tol,
                                                    std::size_t max_iter) {
    return solve_fixed_point<ReturnFunction>(
        [&](const ReturnFunction& eta) { return dist_optimality(mdp, eta); }, init,
        sup_cramer_distance, tol, max_iter);
}

MdpParseError::MdpParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

template <typename T>
T parse_number(const std::string& token, std::size_t line, const char* field) {
    std::istringstream in(token);
    T value{};
    in >> value;
    if (in.fail() || !in.eof()) {
        throw MdpParseError(line, std::string("cannot parse ") + field + " from '" + token + "'");
    }
    return value;
}

std::size_t parse_index(const std::string& token, std::size_t line, const char* field) {
    if (!token.empty() && token.front() == '-') {
        throw MdpParseError(line, std::string(field) + " must be non-negative");
    }
    return parse_number<std::size_t>(token, line, field);
}

}  // namespace

MdpDocument parse_mdp_document(std::istream& in) {
    std::optional<std::size_t> n_states;
    std::optional<std::size_t> n_actions;
    std::optional<double> gamma;
    std::vector<StateIndex> terminals;
    std::size_t terminal_line = 0;
    struct Row {
        std::size_t line;
        StateIndex x;
        ActionIndex a;
        Branch branch;
    };
    std::vector<Row> rows;
    std::map<std::string, std::vector<std::string>> extra;
    std::map<std::string, std::size_t> extra_lines;

    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (auto hash = text.find('#'); hash != std::string::npos) {
            text.erase(hash);
        }
        std::istringstream ls(text);
        std::vector<std::string> tokens;
        for (std::string t; ls >> t;) {
            tokens.push_back(t);
        }
        if (tokens.empty()) {
            continue;
        }
        const std::string& key = tokens.front();
        auto require_count = [&](std::size_t n) {
            if (tokens.size() != n) {
                throw MdpParseError(line_no, "'" + key + "' expects " + std::to_string(n - 1) +
                                                 " value(s)");
            }
        };
        if (key == "n_states") {
            require_count(2);
            n_states = parse_index(tokens[1], line_no, "n_states");
        } else if (key == "n_actions") {
            require_count(2);
            n_actions = parse_index(tokens[1], line_no, "n_actions");
        } else if (key == "gamma") {
            require_count(2);
            gamma = parse_number<double>(tokens[1], line_no, "gamma");
            if (!(*gamma >= 0.0 && *gamma < 1.0)) {
                throw MdpParseError(line_no, "gamma must lie in [0, 1)");
            }
        } else if (key == "terminal") {
            terminal_line = line_no;
            for (std::size_t i = 1; i < tokens.size(); ++i) {
                terminals.push_back(parse_index(tokens[i], line_no, "terminal state"));
            }
        } else if (std::isdigit(static_cast<unsigned char>(key.front())) != 0) {
            require_count(5);
            Row row{line_no, parse_index(tokens[0], line_no, "state"),
                    parse_index(tokens[1], line_no, "action"),
                    Branch{parse_number<double>(tokens[2], line_no, "probability"),
                           parse_number<double>(tokens[3], line_no, "reward"),
                           parse_index(tokens[4], line_no, "next state")}};
            if (!(row.branch.prob >= 0.0 && row.branch.prob <= 1.0)) {
                throw MdpParseError(line_no, "probability must lie in [0, 1]");
            }
            if (!std::isfinite(row.branch.reward)) {
                throw MdpParseError(line_no, "reward must be finite");
            }
            rows.push_back(row);
        } else {
            extra[key] = std::vector<std::string>(tokens.begin() + 1, tokens.end());
            extra_lines[key] = line_no;
        }
    }
    if (!n_states || !n_actions || !gamma) {
        throw MdpParseError(line_no, "missing one of n_states, n_actions, gamma");
    }
    if (*n_states == 0 || *n_actions == 0) {
        throw MdpParseError(line_no, "n_states and n_actions must be positive");
    }
    for (StateIndex t : terminals) {
        if (t >= *n_states) {
            throw MdpParseError(terminal_line, "terminal state " + std::to_string(t) + " out of range");
        }
    }
    std::vector<std::vector<Branch>> transitions(*n_states * *n_actions);
    std::vector<std::size_t> first_line(*n_states * *n_actions, 0);
    for (const Row& r : rows) {
        if (r.x >= *n_states || r.a >= *n_actions || r.branch.next_state >= *n_states) {
            throw MdpParseError(r.line, "state or action index out of range");
        }
        const std::size_t idx = r.x * *n_actions + r.a;
        transitions[idx].push_back(r.branch);
        if (first_line[idx] == 0) {
            first_line[idx] = r.line;
        }
    }
    std::vector<bool> is_terminal(*n_states, false);
    for (StateIndex t : terminals) {
        is_terminal[t] = true;
    }
    for (StateIndex x = 0; x < *n_states; ++x) {
        for (ActionIndex a = 0; a < *n_actions; ++a) {
            const std::size_t idx = x * *n_actions + a;
            const auto& list = transitions[idx];
            if (list.empty()) {
                if (!is_terminal[x]) {
                    throw MdpParseError(line_no, "no transitions for state " + std::to_string(x) +
                                                     " action " + std::to_string(a));
                }
                continue;
            }
            double total = 0.0;
            for (const auto& b : list) {
                total += b.prob;
                if (is_terminal[x] && (b.next_state != x || b.reward != 0.0)) {
                    throw MdpParseError(first_line[idx], "terminal state " + std::to_string(x) +
                                                             " must self-loop with reward 0");
                }
            }
            if (std::abs(total - 1.0) > kRowTolerance) {
                throw MdpParseError(first_line[idx], "probabilities for state " +
                                                         std::to_string(x) + " action " +
                                                         std::to_string(a) + " sum to " +
                                                         std::to_string(total));
            }
        }
    }
    return MdpDocument{FiniteMdp(*n_states, *n_actions, *gamma, std::move(transitions), terminals),
                       std::move(extra), std::move(extra_lines)};
}

FiniteMdp parse_mdp(std::istream& in) {
    auto doc = parse_mdp_document(in);
    if (!doc.extra.empty()) {
        const auto& [key, line] = *doc.extra_lines.begin();
        throw MdpParseError(line, "unknown key '" + key + "'");
    }
    return std::move(doc.mdp);
}

void write_mdp(std::ostream& out, const FiniteMdp& mdp) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "n_states " << mdp.n_states() << "\n";
    out << "n_actions " << mdp.n_actions() << "\n";
    out << "gamma " << mdp.gamma() << "\n";
    out << "terminal";
    for (StateIndex t : mdp.terminal_states()) {
        out << ' ' << t;
    }
    out << "\n";
    for (StateIndex x = 0; x < mdp.n_states(); ++x) {
        if (mdp.is_terminal(x)) {
            continue;
        }
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
            for (const Branch& b : mdp.branches(x, a)) {
                out << x << ' ' << a << ' ' << b.prob << ' ' << b.reward << ' ' << b.next_state
                    << "\n";
            }
        }
    }
    out.precision(old_precision);
}

}  // namespace ecc
