#include "hydrotwin/scheduler.hpp"

#include "hydrotwin/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

namespace hydrotwin {

namespace {

constexpr int unconstrained_counter = std::numeric_limits<int>::max() / 2;

int start_counter(const ScheduleProblem& p, std::size_t r) {
    return p.initial_steps_in_state.empty() ? unconstrained_counter : p.initial_steps_in_state[r];
}

bool may_switch(const ReactorSpec& spec, bool running, int steps_in_state) {
    return steps_in_state >= (running ? spec.min_up_steps : spec.min_down_steps);
}

bool within_bounds(const ScheduleProblem& p, double level) {
    if (!p.level_bounds) return true;
    constexpr double slack = 1e-9;
    return level >= p.level_bounds->lo - slack && level <= p.level_bounds->hi + slack;
}

double cost_of(double deviation, int switches, double omega) {
    return deviation + omega * static_cast<double>(switches);
}

} // namespace

bool costs_tie(double a, double b) noexcept {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) <= 1e-12 * scale;
}

void HysteresisPolicy::validate() const {
    if (on_above_pct < off_below_pct)
        fail(ErrorCode::validation, "hysteresis on_above_pct must be >= off_below_pct");
}

void ScheduleProblem::validate() const {
    grid.validate();
    const auto R = reactors.size();
    if (R == 0) fail(ErrorCode::validation, "problem needs at least one reactor");
    for (std::size_t i = 0; i < R; ++i) {
        if (reactors[i].id != static_cast<int>(i) + 1)
            fail(ErrorCode::validation, "reactor ids must be contiguous from 1");
        if (!(reactors[i].rate_pct_per_step > 0.0))
            fail(ErrorCode::validation, "reactor rate must be positive");
        if (reactors[i].min_up_steps < 0 || reactors[i].min_down_steps < 0)
            fail(ErrorCode::validation, "min up/down steps must be non-negative");
    }
    if (initial_status.size() != R)
        fail(ErrorCode::dimension, "initial_status length must equal reactor count");
    if (!initial_steps_in_state.empty() && initial_steps_in_state.size() != R)
        fail(ErrorCode::dimension, "initial_steps_in_state length must equal reactor count");
    for (int s : initial_steps_in_state)
        if (s < 0) fail(ErrorCode::validation, "initial steps in state must be non-negative");
    if (inflow_forecast_pct.size() != static_cast<std::size_t>(grid.horizon_steps))
        fail(ErrorCode::dimension, "inflow forecast length must equal horizon");
    for (double v : inflow_forecast_pct)
        if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::validation, "inflows must be finite and >= 0");
    if (!(target_level_pct >= 0.0 && target_level_pct <= 100.0))
        fail(ErrorCode::validation, "target level must lie in [0, 100]");
    if (!std::isfinite(initial_level_pct)) fail(ErrorCode::validation, "initial level must be finite");
    if (!(omega >= 0.0) || !std::isfinite(omega)) fail(ErrorCode::validation, "omega must be >= 0");
    if (level_bounds && level_bounds->lo > level_bounds->hi)
        fail(ErrorCode::validation, "level bounds must satisfy lo <= hi");
}

ScheduleSolution objective_value(const ScheduleProblem& problem, const Schedule& schedule) {
    problem.validate();
    const int R = problem.reactor_count();
    const int T = problem.horizon();
    if (schedule.reactors() != R || schedule.steps() != T)
        fail(ErrorCode::dimension, "schedule dimensions do not match problem");

    ScheduleSolution sol;
    sol.schedule = schedule;
    sol.omega_used = problem.omega;
    sol.levels.reserve(static_cast<std::size_t>(T) + 1);

    double level = problem.initial_level_pct;
    sol.levels.push_back(level);
    double deviation = std::fabs(level - problem.target_level_pct);
    int switches = 0;
    for (int t = 0; t < T; ++t) {
        level += problem.inflow_forecast_pct[static_cast<std::size_t>(t)];
        for (int r = 0; r < R; ++r) {
            const bool now = schedule.on(r, t);
            const bool before = t == 0 ? problem.initial_status[static_cast<std::size_t>(r)]
                                       : schedule.on(r, t - 1);
            if (now) level -= problem.reactors[static_cast<std::size_t>(r)].rate_pct_per_step;
            if (now != before) ++switches;
        }
        sol.levels.push_back(level);
        deviation += std::fabs(level - problem.target_level_pct);
    }
    sol.deviation_sum = deviation;
    sol.switch_count = switches;
    sol.objective = cost_of(deviation, switches, problem.omega);
    sol.optimal = false;
    return sol;
}

bool satisfies_constraints(const ScheduleProblem& problem, const Schedule& schedule) {
    const auto eval = objective_value(problem, schedule);
    for (std::size_t t = 1; t < eval.levels.size(); ++t)
        if (!within_bounds(problem, eval.levels[t])) return false;
    for (int r = 0; r < problem.reactor_count(); ++r) {
        const auto& spec = problem.reactors[static_cast<std::size_t>(r)];
        bool running = problem.initial_status[static_cast<std::size_t>(r)];
        int in_state = start_counter(problem, static_cast<std::size_t>(r));
        for (int t = 0; t < problem.horizon(); ++t) {
            const bool now = schedule.on(r, t);
            if (now != running) {
                if (!may_switch(spec, running, in_state)) return false;
                running = now;
                in_state = 1;
            } else {
                ++in_state;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Exact solver: forward dynamic programming over time.
//
// The future cost of a partial schedule depends only on (per-reactor status,
// capped steps-in-state, cumulative throughput). Throughput is tracked as
// on-step counts per distinct rate value so equal states compare exactly.
// Every DP state carries the row-major bit key of its best prefix; among
// equal-cost prefixes reaching one state, the lexicographically smaller key
// is the one any lexicographically minimal optimum extends.
// ---------------------------------------------------------------------------

namespace {

struct StateLayout {
    int reactors = 0;
    std::vector<int> cap;            // counter saturates at cap[r]
    std::vector<int> class_of;       // rate class per reactor
    std::vector<double> class_rate;
    std::vector<int> class_limit;    // max on-count per class over the horizon
    std::vector<std::uint64_t> radix;

    std::size_t fields() const { return radix.size(); }
};

StateLayout make_layout(const ScheduleProblem& p) {
    StateLayout L;
    L.reactors = p.reactor_count();
    const int T = p.horizon();
    for (const auto& spec : p.reactors) {
        L.cap.push_back(std::max({spec.min_up_steps, spec.min_down_steps, 1}));
        auto it = std::find(L.class_rate.begin(), L.class_rate.end(), spec.rate_pct_per_step);
        if (it == L.class_rate.end()) {
            L.class_of.push_back(static_cast<int>(L.class_rate.size()));
            L.class_rate.push_back(spec.rate_pct_per_step);
            L.class_limit.push_back(T);
        } else {
            const auto c = static_cast<std::size_t>(it - L.class_rate.begin());
            L.class_of.push_back(static_cast<int>(c));
            L.class_limit[c] += T;
        }
    }
    long double space = 1.0L;
    for (int r = 0; r < L.reactors; ++r) {
        L.radix.push_back(2);
        L.radix.push_back(static_cast<std::uint64_t>(L.cap[static_cast<std::size_t>(r)]) + 1);
    }
    for (int limit : L.class_limit) L.radix.push_back(static_cast<std::uint64_t>(limit) + 1);
    for (auto rdx : L.radix) space *= static_cast<long double>(rdx);
    if (space > static_cast<long double>(std::numeric_limits<std::uint64_t>::max() / 2))
        fail(ErrorCode::size_guard, "scheduler state space too large to encode");
    return L;
}

std::uint64_t encode(const StateLayout& L, const std::vector<int>& fields) {
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < L.fields(); ++i) code = code * L.radix[i] + static_cast<std::uint64_t>(fields[i]);
    return code;
}

void decode(const StateLayout& L, std::uint64_t code, std::vector<int>& fields) {
    fields.resize(L.fields());
    for (std::size_t i = L.fields(); i-- > 0;) {
        fields[i] = static_cast<int>(code % L.radix[i]);
        code /= L.radix[i];
    }
}

struct Layer {
    std::size_t key_words = 0;
    std::vector<std::uint64_t> codes;
    std::vector<double> deviation;
    std::vector<int> switches;
    std::vector<std::uint64_t> keys;   // key_words per node
    std::unordered_map<std::uint64_t, std::size_t> index;

    std::size_t size() const { return codes.size(); }
    const std::uint64_t* key(std::size_t n) const { return keys.data() + n * key_words; }
    std::uint64_t* key(std::size_t n) { return keys.data() + n * key_words; }
};

int compare_keys(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    for (std::size_t i = 0; i < words; ++i) {
        if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
    }
    return 0;
}

// True when (cost_a, key_a) should replace (cost_b, key_b).
bool better(double cost_a, const std::uint64_t* key_a, double cost_b, const std::uint64_t* key_b,
            std::size_t words) {
    if (costs_tie(cost_a, cost_b)) return compare_keys(key_a, key_b, words) < 0;
    return cost_a < cost_b;
}

} // namespace

ScheduleSolution solve_exact(const ScheduleProblem& problem, const SolverOptions& options) {
    problem.validate();
    const int R = problem.reactor_count();
    const int T = problem.horizon();
    if (static_cast<long>(R) * T > options.max_decision_vars)
        fail(ErrorCode::size_guard, "problem has " + std::to_string(R * T) +
                                        " decision variables; limit is " +
                                        std::to_string(options.max_decision_vars));

    const StateLayout L = make_layout(problem);
    const std::size_t words_per_row = (static_cast<std::size_t>(T) + 63) / 64;
    const std::size_t key_words = words_per_row * static_cast<std::size_t>(R);
    const double omega = problem.omega;
    const double target = problem.target_level_pct;

    std::vector<double> cum_inflow(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = 0; t < T; ++t)
        cum_inflow[static_cast<std::size_t>(t) + 1] =
            cum_inflow[static_cast<std::size_t>(t)] + problem.inflow_forecast_pct[static_cast<std::size_t>(t)];

    Layer current;
    current.key_words = key_words;
    {
        std::vector<int> fields;
        for (int r = 0; r < R; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            fields.push_back(problem.initial_status[ru] ? 1 : 0);
            fields.push_back(std::min(start_counter(problem, ru), L.cap[ru]));
        }
        for (std::size_t c = 0; c < L.class_rate.size(); ++c) fields.push_back(0);
        current.codes.push_back(encode(L, fields));
        current.deviation.push_back(std::fabs(problem.initial_level_pct - target));
        current.switches.push_back(0);
        current.keys.assign(key_words, 0);
    }

    std::int64_t expanded = 0;
    bool truncated = false;
    std::vector<int> fields, next_fields;
    std::vector<std::uint64_t> scratch_key(key_words);
    const std::uint32_t masks = 1u << R;

    for (int t = 0; t < T; ++t) {
        if (options.node_budget && expanded + static_cast<std::int64_t>(current.size()) > *options.node_budget)
            truncated = true;
        if (truncated && current.size() > static_cast<std::size_t>(options.beam_width)) {
            std::vector<std::size_t> order(current.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return better(cost_of(current.deviation[a], current.switches[a], omega), current.key(a),
                              cost_of(current.deviation[b], current.switches[b], omega), current.key(b),
                              key_words);
            });
            order.resize(static_cast<std::size_t>(options.beam_width));
            std::sort(order.begin(), order.end());
            Layer kept;
            kept.key_words = key_words;
            for (std::size_t n : order) {
                kept.codes.push_back(current.codes[n]);
                kept.deviation.push_back(current.deviation[n]);
                kept.switches.push_back(current.switches[n]);
                kept.keys.insert(kept.keys.end(), current.key(n), current.key(n) + key_words);
            }
            current = std::move(kept);
        }

        Layer next;
        next.key_words = key_words;
        const double base_level = problem.initial_level_pct + cum_inflow[static_cast<std::size_t>(t) + 1];
        const std::size_t word = static_cast<std::size_t>(t) / 64;
        const std::uint64_t bit = std::uint64_t{1} << (63 - (t % 64));

        for (std::size_t n = 0; n < current.size(); ++n) {
            ++expanded;
            decode(L, current.codes[n], fields);
            for (std::uint32_t mask = 0; mask < masks; ++mask) {
                next_fields = fields;
                int switched = 0;
                bool allowed = true;
                for (int r = 0; r < R && allowed; ++r) {
                    const auto ru = static_cast<std::size_t>(r);
                    const bool running = fields[2 * ru] != 0;
                    const int in_state = fields[2 * ru + 1];
                    const bool on = (mask >> r) & 1u;
                    if (on != running) {
                        if (!may_switch(problem.reactors[ru], running, in_state)) allowed = false;
                        next_fields[2 * ru] = on ? 1 : 0;
                        next_fields[2 * ru + 1] = 1;
                        ++switched;
                    } else {
                        next_fields[2 * ru + 1] = std::min(in_state + 1, L.cap[ru]);
                    }
                    if (on) ++next_fields[2 * static_cast<std::size_t>(R) + static_cast<std::size_t>(L.class_of[ru])];
                }
                if (!allowed) continue;

                double throughput = 0.0;
                for (std::size_t c = 0; c < L.class_rate.size(); ++c)
                    throughput += L.class_rate[c] * next_fields[2 * static_cast<std::size_t>(R) + c];
                const double level = base_level - throughput;
                if (!within_bounds(problem, level)) continue;

                const double dev = current.deviation[n] + std::fabs(level - target);
                const int sw = current.switches[n] + switched;
                std::copy(current.key(n), current.key(n) + key_words, scratch_key.begin());
                for (int r = 0; r < R; ++r)
                    if ((mask >> r) & 1u) scratch_key[static_cast<std::size_t>(r) * words_per_row + word] |= bit;

                const std::uint64_t code = encode(L, next_fields);
                auto [it, inserted] = next.index.try_emplace(code, next.size());
                if (inserted) {
                    next.codes.push_back(code);
                    next.deviation.push_back(dev);
                    next.switches.push_back(sw);
                    next.keys.insert(next.keys.end(), scratch_key.begin(), scratch_key.end());
                } else {
                    const std::size_t m = it->second;
                    if (better(cost_of(dev, sw, omega), scratch_key.data(),
                               cost_of(next.deviation[m], next.switches[m], omega), next.key(m), key_words)) {
                        next.deviation[m] = dev;
                        next.switches[m] = sw;
                        std::copy(scratch_key.begin(), scratch_key.end(), next.key(m));
                    }
                }
            }
        }
        if (next.size() == 0) {
            fail(ErrorCode::infeasible,
                 truncated ? "no feasible schedule found within the node budget"
                           : "no schedule satisfies the level bounds and min up/down constraints");
        }
        current = std::move(next);
    }

    std::size_t best = 0;
    for (std::size_t n = 1; n < current.size(); ++n) {
        if (better(cost_of(current.deviation[n], current.switches[n], omega), current.key(n),
                   cost_of(current.deviation[best], current.switches[best], omega), current.key(best),
                   key_words))
            best = n;
    }

    Schedule schedule(R, T);
    const std::uint64_t* key = current.key(best);
    for (int r = 0; r < R; ++r)
        for (int t = 0; t < T; ++t) {
            const std::uint64_t w = key[static_cast<std::size_t>(r) * words_per_row + static_cast<std::size_t>(t) / 64];
            schedule.set(r, t, (w >> (63 - (t % 64))) & 1u);
        }

    ScheduleSolution sol = objective_value(problem, schedule);
    sol.optimal = !truncated;
    sol.nodes_explored = expanded;
    return sol;
}

// ---------------------------------------------------------------------------
// Brute-force oracle. Enumerates every column sequence with plain recursion,
// computing levels by the same recursion objective_value uses. No pruning.
// ---------------------------------------------------------------------------

namespace {

struct Enumerator {
    static constexpr int max_reactors = 24;   // R*T <= 24 and T >= 1
    using Counters = std::array<int, max_reactors>;

    const ScheduleProblem& p;
    int R, T;
    std::vector<std::uint32_t> columns;

    std::vector<std::uint32_t> best_columns;
    double best_cost = std::numeric_limits<double>::infinity();
    double best_dev = 0.0;
    int best_sw = 0;
    bool found = false;
    std::int64_t leaves = 0;

    // Row-major lexicographic comparison of two column sequences.
    bool lex_less(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) const {
        for (int r = 0; r < R; ++r)
            for (int t = 0; t < T; ++t) {
                const bool x = (a[static_cast<std::size_t>(t)] >> r) & 1u;
                const bool y = (b[static_cast<std::size_t>(t)] >> r) & 1u;
                if (x != y) return !x;
            }
        return false;
    }

    // Every schedule is a leaf; infeasible ones are walked to the end and discarded.
    void visit(int t, double level, double dev, int sw, bool feasible, std::uint32_t running, const Counters& in_state) {
        if (t == T) {
            ++leaves;
            if (!feasible) return;
            const double cost = cost_of(dev, sw, p.omega);
            const bool take = !found || (costs_tie(cost, best_cost) ? lex_less(columns, best_columns)
                                                                     : cost < best_cost);
            if (take) {
                found = true;
                best_cost = cost;
                best_dev = dev;
                best_sw = sw;
                best_columns = columns;
            }
            return;
        }
        const auto tu = static_cast<std::size_t>(t);
        for (std::uint32_t mask = 0; mask < (1u << R); ++mask) {
            columns[tu] = mask;
            double next_level = level + p.inflow_forecast_pct[tu];
            int switched = 0;
            bool ok = feasible;
            Counters next = in_state;
            for (int r = 0; r < R; ++r) {
                const auto ru = static_cast<std::size_t>(r);
                const bool on = (mask >> r) & 1u;
                const bool was_on = (running >> r) & 1u;
                if (on) next_level -= p.reactors[ru].rate_pct_per_step;
                if (on != was_on) {
                    if (!may_switch(p.reactors[ru], was_on, next[ru])) ok = false;
                    next[ru] = 1;
                    ++switched;
                } else if (next[ru] < unconstrained_counter) {
                    ++next[ru];
                }
            }
            if (!within_bounds(p, next_level)) ok = false;
            visit(t + 1, next_level, dev + std::fabs(next_level - p.target_level_pct), sw + switched, ok, mask, next);
        }
    }
};

} // namespace

ScheduleSolution brute_force(const ScheduleProblem& problem) {
    problem.validate();
    const int R = problem.reactor_count();
    const int T = problem.horizon();
    if (R * T > 24) fail(ErrorCode::size_guard, "brute force limited to R*T <= 24");

    Enumerator e{problem, R, T, std::vector<std::uint32_t>(static_cast<std::size_t>(T), 0), {}};
    std::uint32_t running = 0;
    Enumerator::Counters in_state{};
    for (int r = 0; r < R; ++r) {
        const auto ru = static_cast<std::size_t>(r);
        if (problem.initial_status[ru]) running |= 1u << r;
        in_state[ru] = start_counter(problem, ru);
    }
    e.visit(0, problem.initial_level_pct, std::fabs(problem.initial_level_pct - problem.target_level_pct),
            0, true, running, in_state);
    if (!e.found) fail(ErrorCode::infeasible, "no schedule satisfies the constraints");

    Schedule schedule(R, T);
    for (int t = 0; t < T; ++t)
        for (int r = 0; r < R; ++r) schedule.set(r, t, (e.best_columns[static_cast<std::size_t>(t)] >> r) & 1u);
    ScheduleSolution sol = objective_value(problem, schedule);
    sol.optimal = true;
    sol.nodes_explored = e.leaves;
    return sol;
}

Schedule hysteresis_baseline(const ScheduleProblem& problem, const HysteresisPolicy& policy) {
    problem.validate();
    policy.validate();
    const int R = problem.reactor_count();
    const int T = problem.horizon();
    Schedule schedule(R, T);

    std::vector<bool> running(problem.initial_status);
    std::vector<int> in_state;
    for (int r = 0; r < R; ++r) in_state.push_back(start_counter(problem, static_cast<std::size_t>(r)));

    double level = problem.initial_level_pct;
    for (int t = 0; t < T; ++t) {
        const double inflow = problem.inflow_forecast_pct[static_cast<std::size_t>(t)];
        std::vector<bool> decision(running);
        auto projected = [&] {
            double l = level + inflow;
            for (int r = 0; r < R; ++r)
                if (decision[static_cast<std::size_t>(r)]) l -= problem.reactors[static_cast<std::size_t>(r)].rate_pct_per_step;
            return l;
        };
        for (int r = 0; r < R; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            if (projected() > policy.on_above_pct && !decision[ru] &&
                may_switch(problem.reactors[ru], false, in_state[ru]))
                decision[ru] = true;
        }
        for (int r = 0; r < R; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            if (projected() < policy.off_below_pct && decision[ru] && running[ru] &&
                may_switch(problem.reactors[ru], true, in_state[ru]))
                decision[ru] = false;
        }
        level = projected();
        for (int r = 0; r < R; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            schedule.set(r, t, decision[ru]);
            if (decision[ru] != running[ru]) {
                running[ru] = decision[ru];
                in_state[ru] = 1;
            } else if (in_state[ru] < unconstrained_counter) {
                ++in_state[ru];
            }
        }
    }
    return schedule;
}

} // namespace hydrotwin
