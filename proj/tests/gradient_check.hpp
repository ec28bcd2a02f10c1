#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "risamec/ddpg.hpp"

namespace risamec::gradcheck {

inline Batch random_batch(std::size_t n, std::size_t sd, std::size_t ad, std::mt19937_64& g)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Batch b;
    b.size = n;
    b.state_dim = sd;
    b.action_dim = ad;
    b.states.resize(n * sd);
    b.actions.resize(n * ad);
    b.next_states.resize(n * sd);
    b.rewards.resize(n);
    b.dones.resize(n);
    for (double& x : b.states)
        x = u(g);
    for (double& x : b.actions)
        x = u(g);
    for (double& x : b.next_states)
        x = u(g);
    for (double& x : b.rewards)
        x = u(g);
    for (std::size_t i = 0; i < n; ++i)
        b.dones[i] = (i % 3 == 0) ? 1 : 0;
    return b;
}

inline NetQuartet random_quartet(int sd, int ad, std::mt19937_64& g, bool through_target = true)
{
    DdpgConfig cfg;
    cfg.hidden = {6, 5};
    cfg.discount = 0.9;
    cfg.actor_grad_through_target = through_target;
    auto q = NetQuartet::make(sd, ad, cfg, g);
    // targets differ from the train networks so both paths are exercised
    std::normal_distribution<double> n(0.0, 0.1);
    for (double& p : q.actor_target.params())
        p += n(g);
    for (double& p : q.critic_target.params())
        p += n(g);
    return q;
}

// Central differences of f over every entry of params.
template <class F>
std::vector<double> finite_difference(std::span<double> params, F&& f, double h = 1e-6)
{
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = f();
        params[i] = keep - h;
        const double down = f();
        params[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// ||analytic - numeric|| / max(||analytic||, ||numeric||) in the Euclidean norm.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric)
{
    double diff = 0.0, a = 0.0, n = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        a += analytic[i] * analytic[i];
        n += numeric[i] * numeric[i];
    }
    const double scale = std::sqrt(std::max(a, n));
    return scale > 0.0 ? std::sqrt(diff) / scale : 0.0;
}

} // namespace risamec::gradcheck
