#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "risamec/geometry.hpp"

namespace risamec {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

// Row-major copies of sampled transitions.
struct Batch {
    std::size_t size = 0;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<double> states;
    std::vector<double> actions;
    std::vector<double> rewards;
    std::vector<double> next_states;
    std::vector<unsigned char> dones;

    std::span<const double> state(std::size_t i) const { return {states.data() + i * state_dim, state_dim}; }
    std::span<const double> action(std::size_t i) const { return {actions.data() + i * action_dim, action_dim}; }
    std::span<const double> next_state(std::size_t i) const
    {
        return {next_states.data() + i * state_dim, state_dim};
    }
};

/// Fixed-capacity ring buffer; storage grows lazily up to capacity.
class ReplayMemory {
public:
    ReplayMemory() = default;
    ReplayMemory(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
        : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim)
    {
        if (capacity == 0)
            throw ShapeError("ReplayMemory: capacity must be positive");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return size_; }
    std::size_t cursor() const { return cursor_; }
    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_dim() const { return action_dim_; }

    void push(const Transition& t)
    {
        if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_
            || t.action.size() != action_dim_)
            throw ShapeError("ReplayMemory::push: transition dimensions do not match");
        if (size_ < capacity_ && cursor_ == size_) {
            states_.insert(states_.end(), t.state.begin(), t.state.end());
            actions_.insert(actions_.end(), t.action.begin(), t.action.end());
            next_states_.insert(next_states_.end(), t.next_state.begin(), t.next_state.end());
            rewards_.push_back(t.reward);
            dones_.push_back(t.done ? 1 : 0);
        } else {
            std::copy(t.state.begin(), t.state.end(), states_.begin() + cursor_ * state_dim_);
            std::copy(t.action.begin(), t.action.end(), actions_.begin() + cursor_ * action_dim_);
            std::copy(t.next_state.begin(), t.next_state.end(), next_states_.begin() + cursor_ * state_dim_);
            rewards_[cursor_] = t.reward;
            dones_[cursor_] = t.done ? 1 : 0;
        }
        cursor_ = (cursor_ + 1) % capacity_;
        if (size_ < capacity_)
            ++size_;
    }

    /// i-th oldest stored transition, 0 <= i < size().
    Transition ordered(std::size_t i) const
    {
        const std::size_t start = size_ < capacity_ ? 0 : cursor_;
        return slot(size_ < capacity_ ? i : (start + i) % capacity_);
    }

    Transition slot(std::size_t j) const
    {
        Transition t;
        t.state.assign(states_.begin() + j * state_dim_, states_.begin() + (j + 1) * state_dim_);
        t.action.assign(actions_.begin() + j * action_dim_, actions_.begin() + (j + 1) * action_dim_);
        t.next_state.assign(next_states_.begin() + j * state_dim_, next_states_.begin() + (j + 1) * state_dim_);
        t.reward = rewards_[j];
        t.done = dones_[j] != 0;
        return t;
    }

    /// Uniform sampling with replacement; nullopt while fewer than
    /// batch_size transitions are stored.
    template <class Rng>
    std::optional<Batch> sample(std::size_t batch_size, Rng& rng) const
    {
        if (batch_size == 0 || size_ < batch_size)
            return std::nullopt;
        std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
        Batch b;
        b.size = batch_size;
        b.state_dim = state_dim_;
        b.action_dim = action_dim_;
        b.states.resize(batch_size * state_dim_);
        b.actions.resize(batch_size * action_dim_);
        b.next_states.resize(batch_size * state_dim_);
        b.rewards.resize(batch_size);
        b.dones.resize(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) {
            const std::size_t j = pick(rng);
            std::copy_n(states_.begin() + j * state_dim_, state_dim_, b.states.begin() + i * state_dim_);
            std::copy_n(actions_.begin() + j * action_dim_, action_dim_, b.actions.begin() + i * action_dim_);
            std::copy_n(next_states_.begin() + j * state_dim_, state_dim_,
                        b.next_states.begin() + i * state_dim_);
            b.rewards[i] = rewards_[j];
            b.dones[i] = dones_[j];
        }
        return b;
    }

    // Raw storage, for checkpointing.
    std::vector<double>& raw_states() { return states_; }
    std::vector<double>& raw_actions() { return actions_; }
    std::vector<double>& raw_next_states() { return next_states_; }
    std::vector<double>& raw_rewards() { return rewards_; }
    std::vector<unsigned char>& raw_dones() { return dones_; }
    void restore_counters(std::size_t size, std::size_t cursor)
    {
        size_ = size;
        cursor_ = cursor;
    }

private:
    std::size_t capacity_ = 1;
    std::size_t state_dim_ = 0;
    std::size_t action_dim_ = 0;
    std::size_t size_ = 0;
    std::size_t cursor_ = 0;
    std::vector<double> states_;
    std::vector<double> actions_;
    std::vector<double> next_states_;
    std::vector<double> rewards_;
    std::vector<unsigned char> dones_;
};

} // namespace risamec
