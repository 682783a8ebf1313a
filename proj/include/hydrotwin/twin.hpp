#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace hydrotwin {

using Timestamp = std::chrono::sys_seconds;

struct TimeGrid {
    Timestamp start{};
    int step_minutes = 15;
    int horizon_steps = 96;

    void validate() const;
    Timestamp time_at(int step) const {
        return start + std::chrono::minutes(static_cast<std::int64_t>(step_minutes) * step);
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct TankState {
    double level_pct = 50.0;
    double capacity_m3 = 500.0;
};

struct ReactorSpec {
    int id = 1;
    double rate_pct_per_step = 4.0;
    int min_up_steps = 0;
    int min_down_steps = 0;
};

struct ReactorStatus {
    bool running = false;
    int steps_in_state = 0;

    friend bool operator==(const ReactorStatus&, const ReactorStatus&) = default;
};

/// Continuous reactor parameters. Every field lives in a closed interval; the
/// bounds below are part of the contract and checked by validate().
struct OperatingPoint {
    static constexpr double temp_min = 150.0, temp_max = 180.0;
    static constexpr double ds_min = 0.12, ds_max = 0.20;
    static constexpr double cycle_min = 20.0, cycle_max = 40.0;

    double temp_setpoint_c = 165.0;
    double dry_solids_frac = 0.16;
    double cycle_minutes = 30.0;

    bool in_bounds() const noexcept;
    void validate() const;

    friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

/// Static plant description: the tank and the reactor train that drains it.
struct Plant {
    double capacity_m3 = 500.0;
    std::vector<ReactorSpec> reactors;

    int reactor_count() const noexcept { return static_cast<int>(reactors.size()); }
    void validate() const;

    /// Three identical reactors, 4 % of capacity per step each, min up/down 2.
    static Plant default_plant();
};

struct PlantState {
    int t_index = 0;
    TankState tank;
    std::vector<ReactorStatus> reactors;
    OperatingPoint op_point;

    friend bool operator==(const PlantState&, const PlantState&) = default;
};

struct GroundTruthParams {
    double e0 = 35.0;
    double a_temp = 0.9;
    double a_cycle = 0.2;
    double a_ds = -150.0;
    double a_interaction = 4.0;
    double b_temp = 0.25;
    double b_cycle = 0.1;
    double noise_sigma_energy = 0.5;
    double noise_sigma_quality = 0.01;
    std::uint64_t seed = 42;

    void validate() const;
    static GroundTruthParams noiseless() {
        GroundTruthParams p;
        p.noise_sigma_energy = 0.0;
        p.noise_sigma_quality = 0.0;
        return p;
    }
};

struct StepResult {
    PlantState next_state;
    bool overflow = false;
    bool underflow = false;
};

/// Binary on/off decisions x[r][t], stored row-major (reactor-major). The
/// flattened cell order is the order used for lexicographic tie-breaks.
class Schedule {
public:
    Schedule() = default;
    Schedule(int reactors, int steps, bool value = false);

    int reactors() const noexcept { return reactors_; }
    int steps() const noexcept { return steps_; }

    bool on(int reactor, int step) const { return cells_[index(reactor, step)] != 0; }
    void set(int reactor, int step, bool value) { cells_[index(reactor, step)] = value ? 1 : 0; }

    bool any_on(int step) const;
    int count_on(int step) const;
    std::vector<bool> column(int step) const;
    const std::vector<std::uint8_t>& cells() const noexcept { return cells_; }

    friend bool operator==(const Schedule&, const Schedule&) = default;
    friend auto operator<=>(const Schedule& a, const Schedule& b) { return a.cells_ <=> b.cells_; }

private:
    std::size_t index(int reactor, int step) const;

    int reactors_ = 0;
    int steps_ = 0;
    std::vector<std::uint8_t> cells_;
};

PlantState initial_state(const Plant& plant, double level_pct);

StepResult step_dynamics(const Plant& plant, const PlantState& state, double inflow_pct,
                         const std::vector<bool>& decisions);

double true_energy(const OperatingPoint& op, const GroundTruthParams& params = {});
double true_quality(const OperatingPoint& op, const GroundTruthParams& params = {});

struct Observation {
    double energy = 0.0;
    double quality = 0.0;
};

Observation sample_observation(const OperatingPoint& op, const GroundTruthParams& params,
                               std::mt19937_64& rng);

struct EpisodeResult {
    std::vector<StepResult> steps;
    std::vector<double> energy_kwh;               // realized, volume-weighted
    std::vector<std::optional<double>> quality;   // absent for all-OFF steps

    double total_energy() const;
    std::vector<double> levels() const;
};

/// Replays a schedule through the dynamics. Active steps without an explicit
/// operating point run at the state's current point.
EpisodeResult simulate_episode(const Plant& plant, const PlantState& initial,
                               std::span<const double> inflows_pct, const Schedule& schedule,
                               std::span<const std::optional<OperatingPoint>> op_points,
                               const GroundTruthParams& params = {});

/// Synthetic tank inflow in percent of capacity per step: a daily cycle plus
/// gaussian noise and occasional storm pulses, clipped at zero.
struct InflowGenerator {
    double mean_pct = 6.0;
    double diurnal_amplitude_pct = 3.0;
    int steps_per_day = 96;
    double noise_sigma_pct = 1.0;
    double storm_probability = 0.01;
    double storm_pct = 6.0;

    void validate() const;
    /// Inflows for steps first_step .. first_step+count-1 of the daily cycle.
    std::vector<double> generate(int first_step, int count, std::mt19937_64& rng) const;
};

} // namespace hydrotwin
