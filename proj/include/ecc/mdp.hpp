#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecc/categorical.hpp"

namespace ecc {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// One outcome of p(r, x' | x, a).
struct Branch {
    double prob;
    double reward;
    StateIndex next_state;
};

/// Finite MDP with an explicit transition kernel.
///
/// Terminal states are absorbing: every action self-loops with reward 0. When
/// a terminal state is given without transitions, the self-loops are added.
class FiniteMdp {
public:
    FiniteMdp(std::size_t n_states, std::size_t n_actions, double gamma,
              std::vector<std::vector<Branch>> transitions, std::vector<StateIndex> terminal_states);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }
    std::span<const Branch> branches(StateIndex x, ActionIndex a) const;
    bool is_terminal(StateIndex x) const { return terminal_[x]; }
    std::vector<StateIndex> terminal_states() const;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    double gamma_;
    std::vector<std::vector<Branch>> transitions_;  // index x * n_actions + a
    std::vector<bool> terminal_;
};

/// Dense state-action table; the common layout of QTable, policies and
/// return functions.
template <typename T>
class StateActionTable {
public:
    StateActionTable(std::size_t n_states, std::size_t n_actions, std::vector<T> values)
        : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {
        if (values_.size() != n_states * n_actions) {
            throw std::invalid_argument("state-action table has the wrong number of entries");
        }
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    const T& at(StateIndex x, ActionIndex a) const { return values_[x * n_actions_ + a]; }
    T& at(StateIndex x, ActionIndex a) { return values_[x * n_actions_ + a]; }
    std::span<const T> row(StateIndex x) const {
        return std::span<const T>(values_).subspan(x * n_actions_, n_actions_);
    }
    std::span<const T> values() const { return values_; }

    bool operator==(const StateActionTable&) const = default;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<T> values_;
};

class QTable : public StateActionTable<double> {
public:
    QTable(std::size_t n_states, std::size_t n_actions, std::vector<double> values);
    static QTable zeros(std::size_t n_states, std::size_t n_actions);
};

/// Stationary policy pi(a | x); rows are validated probability vectors.
class TabularPolicy : public StateActionTable<double> {
public:
    TabularPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> probs);
    static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
};

/// Per state-action categorical return distributions on one shared Support.
class ReturnFunction : public StateActionTable<Categorical> {
public:
    ReturnFunction(std::size_t n_states, std::size_t n_actions, std::vector<Categorical> table);
    static ReturnFunction filled(std::size_t n_states, std::size_t n_actions,
                                 const Categorical& value);

    const Support& support() const { return at(0, 0).support(); }
    void set(StateIndex x, ActionIndex a, Categorical value);
};

/// Lowest-index argmax.
ActionIndex argmax_action(std::span<const double> values);

QTable q_values(const ReturnFunction& eta);

/// Deterministic greedy policy with lowest-index tie-breaking.
TabularPolicy greedy_policy(const QTable& q);

/// Largest mass clipped at either support edge by one operator application.
struct ClipReport {
    double lower_mass = 0.0;
    double upper_mass = 0.0;
    bool significant() const { return lower_mass >= 1e-6 || upper_mass >= 1e-6; }
};

QTable expected_bellman(const FiniteMdp& mdp, const TabularPolicy& pi, const QTable& q);
QTable expected_optimality(const FiniteMdp& mdp, const QTable& q);

/// Projected distributional evaluation operator.
///
/// When `report` is null, a warning is written to std::clog if a
/// significant amount of mass had to be clipped.
ReturnFunction dist_bellman(const FiniteMdp& mdp, const TabularPolicy& pi,
                            const ReturnFunction& eta, ClipReport* report = nullptr);

/// Projected distributional optimality operator; each next state contributes
/// the branch of its greedy action under Q_eta.
ReturnFunction dist_optimality(const FiniteMdp& mdp, const ReturnFunction& eta,
                               ClipReport* report = nullptr);

double sup_distance(const QTable& a, const QTable& b);
double sup_cramer_distance(const ReturnFunction& a, const ReturnFunction& b);

template <typename T>
struct FixedPointResult {
    T value;
    /// Operator applications before the iterate stopped moving by more than tol.
    std::size_t iterations;
    bool converged;
};

template <typename T>
FixedPointResult<T> solve_fixed_point(const std::function<T(const T&)>& op, T init,
                                      const std::function<double(const T&, const T&)>& distance,
                                      double tol, std::size_t max_iter) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("fixed-point tolerance must be positive");
    }
    T current = std::move(init);
    for (std::size_t i = 0; i < max_iter; ++i) {
        T next = op(current);
        const bool done = distance(next, current) < tol;
        current = std::move(next);
        if (done) {
            return {std::move(current), i, true};
        }
    }
    return {std::move(current), max_iter, false};
}

FixedPointResult<QTable> solve_q_evaluation(const FiniteMdp& mdp, const TabularPolicy& pi,
                                            double tol = 1e-12, std::size_t max_iter = 100000);
FixedPointResult<QTable> solve_q_optimal(const FiniteMdp& mdp, double tol = 1e-12,
                                         std::size_t max_iter = 100000);
FixedPointResult<ReturnFunction> solve_dist_evaluation(const FiniteMdp& mdp,
                                                       const TabularPolicy& pi,
                                                       const ReturnFunction& init,
                                                       double tol = 1e-10,
                                                       std::size_t max_iter = 100000);
FixedPointResult<ReturnFunction> solve_dist_optimal(const FiniteMdp& mdp,
                                                    const ReturnFunction& init,
                                                    double tol = 1e-10,
                                                    std::size_t max_iter = 100000);

class MdpParseError : public std::runtime_error {
public:
    MdpParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parsed MDP file: the kernel plus any header keys the MDP itself does not
/// use (env spec files add `start`, `episode_cap`, ...).
struct MdpDocument {
    FiniteMdp mdp;
    std::map<std::string, std::vector<std::string>> extra;
    std::map<std::string, std::size_t> extra_lines;
};

/// Text format, one record per line, `#` starts a comment:
///
///     n_states 5
///     n_actions 2
///     gamma 0.9
///     terminal 4
///     0 1 1.0 0.0 1        # x a prob reward x_next
MdpDocument parse_mdp_document(std::istream& in);
FiniteMdp parse_mdp(std::istream& in);
void write_mdp(std::ostream& out, const FiniteMdp& mdp);

}  // namespace ecc
