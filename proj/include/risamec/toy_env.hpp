#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "risamec/env.hpp"

namespace risamec {

// One-dimensional target seeking: the state is the position on [-1, 1], the
// single action entry is a velocity, and the reward is -|position - goal|.
// Used to sanity-check learners on a problem with a known optimum.
class TargetSeekingEnv {
public:
    struct Params {
        double goal = 0.5;
        double max_step = 0.1;
        int episode_steps = 50;
    };

    TargetSeekingEnv() = default;
    explicit TargetSeekingEnv(Params p) : p_(p) {}

    int state_size() const { return 1; }
    int action_size() const { return 1; }
    bool done() const { return t_ >= p_.episode_steps; }
    double position() const { return x_; }
    double goal() const { return p_.goal; }

    std::vector<double> reset(std::uint64_t seed, int /*episode*/ = 0)
    {
        std::mt19937_64 g(seed);
        x_ = std::uniform_real_distribution<double>(-1.0, 1.0)(g);
        t_ = 0;
        return {x_};
    }

    StepResult step(std::span<const double> action)
    {
        if (done())
            throw LifecycleError("step called on a finished episode");
        if (action.size() != 1)
            throw ShapeError("TargetSeekingEnv: action must have one entry");
        x_ = std::clamp(x_ + p_.max_step * std::clamp(action[0], -1.0, 1.0), -1.0, 1.0);
        ++t_;
        StepResult r;
        r.next_state = {x_};
        r.reward = -std::abs(x_ - p_.goal);
        r.done = done();
        return r;
    }

private:
    Params p_;
    double x_ = 0.0;
    int t_ = 0;
};

} // namespace risamec
