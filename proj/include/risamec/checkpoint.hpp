#pragma once

// Versioned binary checkpoint container.
//
//   "RISAMECK"            8-byte magic
//   u32 version           currently 1
//   u64 n, n bytes        JSON metadata (kind, counters, PRNG state, shapes)
//   repeated blocks       u64 count + count little-endian doubles (or bytes)
//
// Block order per kind:
//   ddpg: actor, actor_target, critic, critic_target, actor m, actor v,
//         critic m, critic v, memory states, actions, next_states, rewards, dones
//   dql:  q, q_target, m, v, memory states, actions, next_states, rewards, dones
// Memory blocks are empty when the checkpoint was written without replay data.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "risamec/baselines.hpp"
#include "risamec/ddpg.hpp"

namespace risamec {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr char kMagic[8] = {'R', 'I', 'S', 'A', 'M', 'E', 'C', 'K'};
inline constexpr std::uint32_t kVersion = 1;

class BlockWriter {
public:
    explicit BlockWriter(const std::string& path) : os_(path, std::ios::binary)
    {
        if (!os_)
            throw CheckpointError("cannot open checkpoint for writing: " + path);
    }

    void header(const nlohmann::json& meta)
    {
        os_.write(kMagic, sizeof kMagic);
        raw(kVersion);
        const std::string s = meta.dump();
        raw(static_cast<std::uint64_t>(s.size()));
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    template <class T>
    void block(const std::vector<T>& v)
    {
        raw(static_cast<std::uint64_t>(v.size()));
        os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
    }

    void block(std::span<const double> v) { block(std::vector<double>(v.begin(), v.end())); }

    void finish()
    {
        os_.flush();
        if (!os_)
            throw CheckpointError("checkpoint write failed");
    }

private:
    template <class T>
    void raw(T x)
    {
        os_.write(reinterpret_cast<const char*>(&x), sizeof x);
    }

    std::ofstream os_;
};

class BlockReader {
public:
    explicit BlockReader(const std::string& path) : is_(path, std::ios::binary)
    {
        if (!is_)
            throw CheckpointError("cannot open checkpoint: " + path);
    }

    nlohmann::json header()
    {
        char magic[8];
        is_.read(magic, sizeof magic);
        if (!is_ || !std::equal(magic, magic + 8, kMagic))
            throw CheckpointError("not a checkpoint file (bad magic)");
        const auto version = raw<std::uint32_t>();
        if (version != kVersion)
            throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
        const auto n = raw<std::uint64_t>();
        std::string s(n, '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        return nlohmann::json::parse(s);
    }

    template <class T>
    std::vector<T> block()
    {
        const auto n = raw<std::uint64_t>();
        std::vector<T> v(n);
        is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
        if (!is_)
            throw CheckpointError("truncated checkpoint");
        return v;
    }

    void into(std::span<double> dst)
    {
        auto v = block<double>();
        if (v.size() != dst.size())
            throw CheckpointError("checkpoint block size does not match the network shape");
        std::copy(v.begin(), v.end(), dst.begin());
    }

private:
    template <class T>
    T raw()
    {
        T x{};
        is_.read(reinterpret_cast<char*>(&x), sizeof x);
        if (!is_)
            throw CheckpointError("truncated checkpoint");
        return x;
    }

    std::ifstream is_;
};

template <class Rng>
std::string rng_state(const Rng& rng)
{
    std::ostringstream os;
    os << rng;
    return os.str();
}

template <class Rng>
void set_rng_state(Rng& rng, const std::string& s)
{
    std::istringstream is(s);
    is >> rng;
    if (!is)
        throw CheckpointError("corrupt PRNG state in checkpoint");
}

inline void write_memory(BlockWriter& w, ReplayMemory& m, bool include)
{
    if (include) {
        w.block(m.raw_states());
        w.block(m.raw_actions());
        w.block(m.raw_next_states());
        w.block(m.raw_rewards());
        w.block(m.raw_dones());
    } else {
        for (int i = 0; i < 4; ++i)
            w.block(std::vector<double>{});
        w.block(std::vector<unsigned char>{});
    }
}

inline void read_memory(BlockReader& r, ReplayMemory& m, const nlohmann::json& meta)
{
    m.raw_states() = r.block<double>();
    m.raw_actions() = r.block<double>();
    m.raw_next_states() = r.block<double>();
    m.raw_rewards() = r.block<double>();
    m.raw_dones() = r.block<unsigned char>();
    if (meta.at("memory_included").get<bool>())
        m.restore_counters(meta.at("memory_size").get<std::size_t>(), meta.at("memory_cursor").get<std::size_t>());
    else
        m.restore_counters(0, 0);
}

} // namespace detail

/// Everything needed to continue a training run where it stopped.
inline void save_checkpoint(const std::string& path, DdpgAgent& agent, int next_episode,
                            bool include_memory = true, const nlohmann::json& extra = {})
{
    auto& q = agent.quartet();
    nlohmann::json meta;
    meta["kind"] = DdpgAgent::kind;
    meta["next_episode"] = next_episode;
    meta["steps"] = agent.steps();
    meta["updates"] = q.updates;
    meta["actor_opt_steps"] = q.actor_opt.steps();
    meta["critic_opt_steps"] = q.critic_opt.steps();
    meta["actor_sizes"] = q.actor.sizes();
    meta["critic_sizes"] = q.critic.sizes();
    meta["rng"] = detail::rng_state(agent.rng());
    meta["noise_sigma"] = agent.noise().sigma();
    meta["memory_included"] = include_memory;
    meta["memory_size"] = agent.memory().size();
    meta["memory_cursor"] = agent.memory().cursor();
    meta["memory_capacity"] = agent.memory().capacity();
    meta["extra"] = extra;

    detail::BlockWriter w(path);
    w.header(meta);
    w.block(q.actor.params());
    w.block(q.actor_target.params());
    w.block(q.critic.params());
    w.block(q.critic_target.params());
    w.block(q.actor_opt.first_moment());
    w.block(q.actor_opt.second_moment());
    w.block(q.critic_opt.first_moment());
    w.block(q.critic_opt.second_moment());
    detail::write_memory(w, agent.memory(), include_memory);
    w.finish();
}

/// Restores into an agent built with the same shapes; returns the metadata.
inline nlohmann::json load_checkpoint(const std::string& path, DdpgAgent& agent)
{
    detail::BlockReader r(path);
    auto meta = r.header();
    if (meta.at("kind") != DdpgAgent::kind)
        throw CheckpointError("checkpoint holds a '" + meta.at("kind").get<std::string>() + "' agent");
    auto& q = agent.quartet();
    if (meta.at("actor_sizes").get<std::vector<int>>() != q.actor.sizes()
        || meta.at("critic_sizes").get<std::vector<int>>() != q.critic.sizes())
        throw CheckpointError("checkpoint network shapes differ from the configured agent");
    r.into(q.actor.params());
    r.into(q.actor_target.params());
    r.into(q.critic.params());
    r.into(q.critic_target.params());
    r.into(q.actor_opt.first_moment());
    r.into(q.actor_opt.second_moment());
    r.into(q.critic_opt.first_moment());
    r.into(q.critic_opt.second_moment());
    q.actor_opt.set_steps(meta.at("actor_opt_steps").get<long long>());
    q.critic_opt.set_steps(meta.at("critic_opt_steps").get<long long>());
    q.updates = meta.at("updates").get<long long>();
    detail::read_memory(r, agent.memory(), meta);
    agent.set_steps(meta.at("steps").get<long long>());
    agent.noise().set_sigma(meta.at("noise_sigma").get<double>());
    detail::set_rng_state(agent.rng(), meta.at("rng").get<std::string>());
    return meta;
}

inline void save_checkpoint(const std::string& path, DqlAgent& agent, int next_episode,
                            bool include_memory = true, const nlohmann::json& extra = {})
{
    nlohmann::json meta;
    meta["kind"] = DqlAgent::kind;
    meta["next_episode"] = next_episode;
    meta["steps"] = agent.steps();
    meta["updates"] = agent.updates();
    meta["opt_steps"] = agent.optimizer().steps();
    meta["q_sizes"] = agent.network().sizes();
    meta["rng"] = detail::rng_state(agent.rng());
    meta["epsilon"] = agent.epsilon();
    meta["memory_included"] = include_memory;
    meta["memory_size"] = agent.memory().size();
    meta["memory_cursor"] = agent.memory().cursor();
    meta["memory_capacity"] = agent.memory().capacity();
    meta["extra"] = extra;

    detail::BlockWriter w(path);
    w.header(meta);
    w.block(agent.network().params());
    w.block(agent.target().params());
    w.block(agent.optimizer().first_moment());
    w.block(agent.optimizer().second_moment());
    detail::write_memory(w, agent.memory(), include_memory);
    w.finish();
}

inline nlohmann::json load_checkpoint(const std::string& path, DqlAgent& agent)
{
    detail::BlockReader r(path);
    auto meta = r.header();
    if (meta.at("kind") != DqlAgent::kind)
        throw CheckpointError("checkpoint holds a '" + meta.at("kind").get<std::string>() + "' agent");
    if (meta.at("q_sizes").get<std::vector<int>>() != agent.network().sizes())
        throw CheckpointError("checkpoint network shapes differ from the configured agent");
    r.into(agent.network().params());
    r.into(agent.target().params());
    r.into(agent.optimizer().first_moment());
    r.into(agent.optimizer().second_moment());
    agent.optimizer().set_steps(meta.at("opt_steps").get<long long>());
    agent.set_updates(meta.at("updates").get<long long>());
    detail::read_memory(r, agent.memory(), meta);
    agent.set_steps(meta.at("steps").get<long long>());
    agent.set_epsilon(meta.at("epsilon").get<double>());
    detail::set_rng_state(agent.rng(), meta.at("rng").get<std::string>());
    return meta;
}

} // namespace risamec
