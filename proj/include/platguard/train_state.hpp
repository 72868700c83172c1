#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "platguard/station_geometry.hpp"

namespace platguard {

/*
 * Train state at the platform.
 *
 *        present                 stationary x confirm_frames
 *   OFF ---------> IN ---------------------------------------> ON
 *    ^              |                                          |
 *    |              | absent (did not stop)                    | moving or absent
 *    |              v                                          |
 *    +---------- OUT <-----------------------------------------+
 *   absent x confirm_frames
 *
 * Every other situation is a self-loop. Streak counters reset on each
 * state change.
 */
enum class TrainState : std::uint8_t { Off, In, On, Out };

inline std::string_view to_string(TrainState s) noexcept {
    switch (s) {
        case TrainState::Off: return "OFF";
        case TrainState::In: return "IN";
        case TrainState::On: return "ON";
        case TrainState::Out: return "OUT";
    }
    return "?";
}

inline std::optional<TrainState> train_state_from_string(std::string_view s) noexcept {
    if (s == "OFF") return TrainState::Off;
    if (s == "IN") return TrainState::In;
    if (s == "ON") return TrainState::On;
    if (s == "OUT") return TrainState::Out;
    return std::nullopt;
}

/// Per-frame evidence about the train inside the RISK zone.
struct TrainObservation {
    bool present = false;
    double displacement_px = 0;  // centroid motion of the largest in-zone train box since last frame
    double occupancy = 0;        // fraction of the RISK zone covered by train boxes, clamped to 1
    std::optional<Point> centroid;  // of the largest in-zone train box; feeds the next observation
};

struct FsmConfig {
    double stationary_eps_px = 2.0;
    std::uint32_t confirm_frames = 5;

    void validate() const {
        if (!(stationary_eps_px > 0)) throw ConfigError("stationary_eps_px must be positive");
        if (confirm_frames < 1) throw ConfigError("confirm_frames must be >= 1");
    }
};

struct FsmCounters {
    std::uint32_t stationary_streak = 0;
    std::uint32_t absent_streak = 0;
    bool operator==(const FsmCounters&) const = default;
};

/// Summarises the train detections for one frame. A train box counts when its
/// ground point lies in the zone or the box overlaps the zone.
inline TrainObservation observe_train(std::span<const Detection> trains, const Zone& risk_zone,
                                      const std::optional<TrainObservation>& previous = std::nullopt) {
    TrainObservation obs;
    const double zone_area = risk_zone.area();
    double covered = 0;
    const Detection* largest = nullptr;
    for (const auto& d : trains) {
        const double overlap = overlap_area(d.box, risk_zone);
        if (!(overlap > 0) && !point_in_zone(ground_point(d), risk_zone)) continue;
        covered += overlap;
        if (!largest || d.box.area() > largest->box.area()) largest = &d;
    }
    if (!largest) return obs;

    obs.present = true;
    obs.occupancy = zone_area > 0 ? std::min(1.0, covered / zone_area) : 0.0;
    obs.centroid = Point{largest->box.center_x(), largest->box.center_y()};
    if (previous && previous->present && previous->centroid)
        obs.displacement_px = std::hypot(obs.centroid->x - previous->centroid->x,
                                         obs.centroid->y - previous->centroid->y);
    return obs;
}

/// One transition-table step.
inline std::pair<TrainState, FsmCounters> step_fsm(TrainState state, const TrainObservation& obs,
                                                   const FsmConfig& config, FsmCounters counters) {
    auto move_to = [](TrainState next) { return std::pair{next, FsmCounters{}}; };
    const bool stationary = obs.present && obs.displacement_px < config.stationary_eps_px;

    switch (state) {
        case TrainState::Off:
            if (obs.present) return move_to(TrainState::In);
            break;
        case TrainState::In:
            if (!obs.present) return move_to(TrainState::Out);
            counters.stationary_streak = stationary ? counters.stationary_streak + 1 : 0;
            if (counters.stationary_streak >= config.confirm_frames) return move_to(TrainState::On);
            break;
        case TrainState::On:
            if (!stationary) return move_to(TrainState::Out);
            break;
        case TrainState::Out:
            counters.absent_streak = obs.present ? 0 : counters.absent_streak + 1;
            if (counters.absent_streak >= config.confirm_frames) return move_to(TrainState::Off);
            break;
    }
    return {state, counters};
}

/// Single-writer FSM holder. state() may be read from other threads.
class TrainStateMachine {
public:
    explicit TrainStateMachine(FsmConfig config = {}, TrainState initial = TrainState::Off)
        : config_(config), state_(initial) {
        config_.validate();
    }

    /// Returns the (from, to) pair when the step changed state.
    std::optional<std::pair<TrainState, TrainState>> step(const TrainObservation& obs) {
        const TrainState from = state_.load(std::memory_order_relaxed);
        auto [to, counters] = step_fsm(from, obs, config_, counters_);
        counters_ = counters;
        last_obs_ = obs;
        state_.store(to, std::memory_order_release);
        if (to != from) return std::pair{from, to};
        return std::nullopt;
    }

    TrainState state() const noexcept { return state_.load(std::memory_order_acquire); }
    const FsmCounters& counters() const noexcept { return counters_; }
    const std::optional<TrainObservation>& last_observation() const noexcept { return last_obs_; }
    const FsmConfig& config() const noexcept { return config_; }

private:
    FsmConfig config_;
    std::atomic<TrainState> state_;
    FsmCounters counters_;
    std::optional<TrainObservation> last_obs_;
};

}  // namespace platguard
