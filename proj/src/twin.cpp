#include "hydrotwin/twin.hpp"

#include "hydrotwin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hydrotwin {

void TimeGrid::validate() const {
    if (step_minutes < 1) fail(ErrorCode::validation, "step_minutes must be >= 1");
    if (horizon_steps < 1) fail(ErrorCode::validation, "horizon_steps must be >= 1");
}

bool OperatingPoint::in_bounds() const noexcept {
    return temp_setpoint_c >= temp_min && temp_setpoint_c <= temp_max &&
           dry_solids_frac >= ds_min && dry_solids_frac <= ds_max &&
           cycle_minutes >= cycle_min && cycle_minutes <= cycle_max;
}

void OperatingPoint::validate() const {
    if (!in_bounds()) {
        fail(ErrorCode::domain,
             "operating point out of bounds: T=" + std::to_string(temp_setpoint_c) +
                 " DS=" + std::to_string(dry_solids_frac) +
                 " cycle=" + std::to_string(cycle_minutes));
    }
}

void Plant::validate() const {
    if (!(capacity_m3 > 0.0)) fail(ErrorCode::validation, "tank capacity must be positive");
    if (reactors.empty()) fail(ErrorCode::validation, "plant needs at least one reactor");
    for (std::size_t i = 0; i < reactors.size(); ++i) {
        const auto& r = reactors[i];
        if (r.id != static_cast<int>(i) + 1)
            fail(ErrorCode::validation, "reactor ids must be contiguous from 1");
        if (!(r.rate_pct_per_step > 0.0))
            fail(ErrorCode::validation, "reactor rate must be positive");
        if (r.min_up_steps < 0 || r.min_down_steps < 0)
            fail(ErrorCode::validation, "min up/down steps must be non-negative");
    }
}

Plant Plant::default_plant() {
    Plant p;
    p.capacity_m3 = 500.0;
    for (int id = 1; id <= 3; ++id) p.reactors.push_back({id, 4.0, 2, 2});
    return p;
}

void GroundTruthParams::validate() const {
    if (noise_sigma_energy < 0.0 || noise_sigma_quality < 0.0)
        fail(ErrorCode::validation, "noise sigmas must be non-negative");
}

Schedule::Schedule(int reactors, int steps, bool value)
    : reactors_(reactors), steps_(steps),
      cells_(static_cast<std::size_t>(reactors) * static_cast<std::size_t>(steps), value ? 1 : 0) {
    if (reactors < 0 || steps < 0) fail(ErrorCode::dimension, "negative schedule dimensions");
}

std::size_t Schedule::index(int reactor, int step) const {
    if (reactor < 0 || reactor >= reactors_ || step < 0 || step >= steps_)
        fail(ErrorCode::dimension, "schedule index out of range");
    return static_cast<std::size_t>(reactor) * static_cast<std::size_t>(steps_) +
           static_cast<std::size_t>(step);
}

bool Schedule::any_on(int step) const { return count_on(step) > 0; }

int Schedule::count_on(int step) const {
    int n = 0;
    for (int r = 0; r < reactors_; ++r) n += on(r, step) ? 1 : 0;
    return n;
}

std::vector<bool> Schedule::column(int step) const {
    std::vector<bool> col(static_cast<std::size_t>(reactors_));
    for (int r = 0; r < reactors_; ++r) col[static_cast<std::size_t>(r)] = on(r, step);
    return col;
}

PlantState initial_state(const Plant& plant, double level_pct) {
    PlantState s;
    s.tank = {level_pct, plant.capacity_m3};
    s.reactors.assign(plant.reactors.size(), ReactorStatus{false, 0});
    return s;
}

StepResult step_dynamics(const Plant& plant, const PlantState& state, double inflow_pct,
                         const std::vector<bool>& decisions) {
    if (decisions.size() != plant.reactors.size() || state.reactors.size() != plant.reactors.size())
        fail(ErrorCode::dimension, "decision vector length must equal reactor count");
    if (!(inflow_pct >= 0.0)) fail(ErrorCode::domain, "inflow must be non-negative");

    StepResult out;
    out.next_state = state;
    double level = state.tank.level_pct + inflow_pct;
    for (std::size_t r = 0; r < decisions.size(); ++r) {
        if (decisions[r]) level -= plant.reactors[r].rate_pct_per_step;
        auto& status = out.next_state.reactors[r];
        if (status.running == decisions[r]) {
            ++status.steps_in_state;
        } else {
            status.running = decisions[r];
            status.steps_in_state = 1;
        }
    }
    out.overflow = level > 100.0;
    out.underflow = level < 0.0;
    out.next_state.tank.level_pct = std::clamp(level, 0.0, 100.0);
    ++out.next_state.t_index;
    return out;
}

double true_energy(const OperatingPoint& op, const GroundTruthParams& p) {
    op.validate();
    const double dt = op.temp_setpoint_c - 150.0;
    const double dc = op.cycle_minutes - 20.0;
    const double dds = op.dry_solids_frac - 0.12;
    const double interaction = (op.temp_setpoint_c - 165.0) * (op.dry_solids_frac - 0.16);
    return p.e0 + p.a_temp * dt + p.a_cycle * dc + p.a_ds * dds + p.a_interaction * interaction;
}

double true_quality(const OperatingPoint& op, const GroundTruthParams& p) {
    op.validate();
    const double z = p.b_temp * (op.temp_setpoint_c - 160.0) + p.b_cycle * (op.cycle_minutes - 25.0);
    return 1.0 / (1.0 + std::exp(-z));
}

Observation sample_observation(const OperatingPoint& op, const GroundTruthParams& params,
                               std::mt19937_64& rng) {
    params.validate();
    Observation obs{true_energy(op, params), true_quality(op, params)};
    if (params.noise_sigma_energy > 0.0) {
        std::normal_distribution<double> noise(0.0, params.noise_sigma_energy);
        obs.energy += noise(rng);
    }
    if (params.noise_sigma_quality > 0.0) {
        std::normal_distribution<double> noise(0.0, params.noise_sigma_quality);
        obs.quality = std::clamp(obs.quality + noise(rng), 0.0, 1.0);
    }
    return obs;
}

double EpisodeResult::total_energy() const {
    double total = 0.0;
    for (double e : energy_kwh) total += e;
    return total;
}

std::vector<double> EpisodeResult::levels() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.next_state.tank.level_pct);
    return out;
}

EpisodeResult simulate_episode(const Plant& plant, const PlantState& initial,
                               std::span<const double> inflows_pct, const Schedule& schedule,
                               std::span<const std::optional<OperatingPoint>> op_points,
                               const GroundTruthParams& params) {
    const auto horizon = inflows_pct.size();
    if (schedule.steps() != static_cast<int>(horizon) || op_points.size() != horizon)
        fail(ErrorCode::dimension, "schedule, operating points and inflows must cover the horizon");
    if (schedule.reactors() != plant.reactor_count())
        fail(ErrorCode::dimension, "schedule reactor count does not match plant");

    EpisodeResult ep;
    ep.steps.reserve(horizon);
    PlantState state = initial;
    for (std::size_t t = 0; t < horizon; ++t) {
        const int step = static_cast<int>(t);
        if (op_points[t]) state.op_point = *op_points[t];
        auto result = step_dynamics(plant, state, inflows_pct[t], schedule.column(step));

        double throughput_pct = 0.0;
        for (int r = 0; r < schedule.reactors(); ++r)
            if (schedule.on(r, step)) throughput_pct += plant.reactors[static_cast<std::size_t>(r)].rate_pct_per_step;
        if (throughput_pct > 0.0) {
            const double volume_m3 = throughput_pct * plant.capacity_m3 / 100.0;
            ep.energy_kwh.push_back(volume_m3 * true_energy(state.op_point, params));
            ep.quality.emplace_back(true_quality(state.op_point, params));
        } else {
            ep.energy_kwh.push_back(0.0);
            ep.quality.emplace_back(std::nullopt);
        }
        state = result.next_state;
        ep.steps.push_back(std::move(result));
    }
    return ep;
}

void InflowGenerator::validate() const {
    if (mean_pct < 0.0 || diurnal_amplitude_pct < 0.0 || noise_sigma_pct < 0.0 || storm_pct < 0.0)
        fail(ErrorCode::validation, "inflow generator magnitudes must be >= 0");
    if (steps_per_day < 1) fail(ErrorCode::validation, "steps_per_day must be >= 1");
    if (!(storm_probability >= 0.0 && storm_probability <= 1.0))
        fail(ErrorCode::validation, "storm_probability must lie in [0, 1]");
}

std::vector<double> InflowGenerator::generate(int first_step, int count, std::mt19937_64& rng) const {
    validate();
    constexpr double two_pi = 6.283185307179586;
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        const int phase = (first_step + i) % steps_per_day;
        double v = mean_pct + diurnal_amplitude_pct * std::sin(two_pi * phase / steps_per_day);
        // Both draws happen every step so the stream stays aligned across configs.
        const double z = noise(rng);
        const double u = unit(rng);
        v += noise_sigma_pct * z;
        if (u < storm_probability) v += storm_pct;
        out.push_back(std::max(v, 0.0));
    }
    return out;
}

} // namespace hydrotwin
