#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "risamec/env.hpp"
#include "test_util.hpp"

using namespace risamec;

namespace {

std::vector<double> hover_action(const ScenarioConfig& cfg)
{
    std::vector<double> a(static_cast<std::size_t>(cfg.action_size()), 0.0);
    const auto O = static_cast<std::size_t>(cfg.num_elements());
    for (std::size_t o = 0; o < O; ++o)
        a[2 * o] = 1.0;
    a[2 * O] = -1.0;     // speed 0
    a[2 * O + 2] = -1.0; // alpha 0
    a[2 * O + 3] = -1.0; // UE 0
    return a;
}

std::vector<double> random_action(const ScenarioConfig& cfg, std::mt19937_64& g)
{
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    std::vector<double> a(static_cast<std::size_t>(cfg.action_size()));
    for (double& x : a)
        x = u(g);
    return a;
}

} // namespace

TEST(Dimensions, TableOnePresetSizes)
{
    const auto cfg = ScenarioConfig::table1();
    EXPECT_EQ(cfg.num_elements(), 64);
    EXPECT_EQ(cfg.state_size(), 136);
    EXPECT_EQ(cfg.action_size(), 132);
    Environment env(cfg);
    EXPECT_EQ(env.reset(3).size(), 136u);
}

TEST(Dimensions, EveryElementCount)
{
    for (int O : {1, 2, 8, 16, 32, 64, 100}) {
        auto cfg = ScenarioConfig::desk();
        cfg.ris.num_elements = O;
        Environment env(cfg);
        const auto s = env.reset(1);
        EXPECT_EQ(s.size(), static_cast<std::size_t>(2 * O + 8));
        EXPECT_EQ(cfg.action_size(), 2 * O + 4);
        const auto r = env.step(hover_action(cfg));
        EXPECT_EQ(r.next_state.size(), s.size());
    }
}

TEST(Reset, DeterministicPerSeed)
{
    Environment a(ScenarioConfig::table1());
    Environment b(ScenarioConfig::table1());
    EXPECT_EQ(a.reset(42), b.reset(42));
    EXPECT_EQ(a.reset(42), a.reset(42));
    EXPECT_EQ(a.world().ues.size(), 6u);
    a.reset(43);
    b.reset(42);
    EXPECT_NE(a.world().ues[0].x, b.world().ues[0].x);
}

TEST(Reset, ClimbEnergyDeducted)
{
    Environment env(ScenarioConfig::table1());
    env.reset(1);
    EXPECT_TRUE(rel_near(env.log().climb_energy, 12.0 * (168.8 + 11.46 * 5.0), kRel));
    EXPECT_TRUE(rel_near(env.log().climb_energy, 2713.2, kRel));
    EXPECT_TRUE(rel_near(env.world().energy_remaining, 140e3 - 2713.2, kRel));
    EXPECT_EQ(env.world().uav.z, 60.0);
    EXPECT_EQ(env.world().uav.x, 0.0);
    for (double p : env.world().phases)
        EXPECT_EQ(p, 0.0);
}

TEST(Reset, UniformFixedPlacementSharedAcrossSeeds)
{
    Environment env(ScenarioConfig::desk());
    env.reset(1);
    const auto ues = env.world().ues;
    env.reset(999);
    ASSERT_EQ(env.world().ues.size(), ues.size());
    for (std::size_t i = 0; i < ues.size(); ++i)
        EXPECT_EQ(env.world().ues[i].x, ues[i].x);
}

TEST(Reset, InvalidConfigListsFields)
{
    auto cfg = ScenarioConfig::table1();
    cfg.num_ues = 0;
    cfg.episode_slots = 0;
    try {
        Environment env(cfg);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_GE(e.problems().size(), 2u);
    }
}

TEST(DecodeAction, SpeedEndpoint)
{
    const auto cfg = ScenarioConfig::table1();
    auto a = hover_action(cfg);
    a[2 * 64] = 1.0;
    EXPECT_EQ(decode_action(a, cfg).speed, 10.0);
    a[2 * 64] = 5.0; // clamped on ingestion
    EXPECT_EQ(decode_action(a, cfg).speed, 10.0);
}

TEST(DecodeAction, UeBinEndpoints)
{
    const auto cfg = ScenarioConfig::table1();
    auto a = hover_action(cfg);
    a[2 * 64 + 3] = -1.0;
    EXPECT_EQ(decode_action(a, cfg).selected_ue, 0);
    a[2 * 64 + 3] = 1.0;
    EXPECT_EQ(decode_action(a, cfg).selected_ue, 5);
}

TEST(DecodeAction, PhaseFromAtan2)
{
    auto cfg = ScenarioConfig::desk();
    auto a = hover_action(cfg);
    a[0] = 0.0;
    a[1] = 1.0;
    a[2] = 0.0;
    a[3] = 0.0;
    const auto c = decode_action(a, cfg);
    EXPECT_TRUE(rel_near(c.phases[0], kPi / 2.0, kRel));
    EXPECT_EQ(c.phases[1], 0.0);
}

TEST(DecodeAction, AlphaAndHeading)
{
    auto cfg = ScenarioConfig::desk();
    auto a = hover_action(cfg);
    const std::size_t O = 8;
    a[2 * O + 1] = 0.0;
    a[2 * O + 2] = 0.2;
    auto c = decode_action(a, cfg);
    EXPECT_TRUE(rel_near(c.heading, kPi, kRel));
    EXPECT_TRUE(rel_near(c.alpha, 0.6, kRel));
    cfg.binary_offload = true;
    EXPECT_EQ(decode_action(a, cfg).alpha, 1.0);
    a[2 * O + 2] = -0.2;
    EXPECT_EQ(decode_action(a, cfg).alpha, 0.0);
}

TEST(DecodeAction, WrongLengthIsShapeError)
{
    const auto cfg = ScenarioConfig::desk();
    std::vector<double> a(static_cast<std::size_t>(cfg.action_size() - 1), 0.0);
    EXPECT_THROW(decode_action(a, cfg), ShapeError);
}

TEST(DecodeAction, PropertiesOnRandomInputs)
{
    const auto cfg = ScenarioConfig::table1();
    std::mt19937_64 g(8);
    for (int i = 0; i < 500; ++i) {
        const auto c = decode_action(random_action(cfg, g), cfg);
        EXPECT_GE(c.speed, 0.0);
        EXPECT_LE(c.speed, cfg.power.max_speed);
        EXPECT_GE(c.selected_ue, 0);
        EXPECT_LT(c.selected_ue, cfg.num_ues);
        EXPECT_GE(c.alpha, 0.0);
        EXPECT_LE(c.alpha, 1.0);
        for (double p : c.phases) {
            EXPECT_GE(p, 0.0);
            EXPECT_LT(p, kTwoPi);
        }
    }
}

TEST(WriteControls, RoundTripsThroughDecode)
{
    const auto cfg = ScenarioConfig::table1();
    std::vector<double> a(static_cast<std::size_t>(cfg.action_size()), 0.0);
    write_controls(a, cfg, 7.5, 1.2, 0.3, 4);
    const auto c = decode_action(a, cfg);
    EXPECT_TRUE(rel_near(c.speed, 7.5, 1e-12));
    EXPECT_TRUE(rel_near(c.heading, 1.2, 1e-12));
    EXPECT_TRUE(rel_near(c.alpha, 0.3, 1e-12));
    EXPECT_EQ(c.selected_ue, 4);
}

TEST(Step, HoverRewardIsSecrecyOverHoverEnergy)
{
    auto cfg = ScenarioConfig::desk();
    cfg.reward_scale = 1.0;
    Environment env(cfg);
    env.reset(2);
    const auto r = env.step(hover_action(cfg));
    EXPECT_TRUE(rel_near(r.info.propulsion_J, 84.4, kRel));
    EXPECT_EQ(r.info.compute_J, 0.0);
    EXPECT_FALSE(r.info.violations.latency);
    EXPECT_FALSE(r.info.violations.budget);
    EXPECT_TRUE(rel_near(r.reward, r.info.secrecy_rate / 84.4, kRel));
}

TEST(Step, ZeroSecrecyGivesZeroReward)
{
    auto cfg = ScenarioConfig::desk();
    cfg.placement.policy = PlacementPolicy::Fixed;
    // the eavesdropper sits next to the UE, so it always out-hears the UAV
    cfg.placement.ues = {{300.0, 200.0, 0.0}, {310.0, 200.0, 0.0}};
    cfg.placement.eves = {{300.5, 200.0, 0.0}};
    Environment env(cfg);
    env.reset(1);
    const auto r = env.step(hover_action(cfg));
    EXPECT_EQ(r.info.secrecy_rate, 0.0);
    EXPECT_EQ(r.reward, 0.0);
}

TEST(Step, EastwardKinematics)
{
    const auto cfg = ScenarioConfig::desk();
    Environment env(cfg);
    env.reset(1);
    auto a = hover_action(cfg);
    const std::size_t O = 8;
    a[2 * O] = 1.0;      // full speed
    a[2 * O + 1] = -1.0; // heading 0: due east
    env.step(a);
    EXPECT_TRUE(rel_near(env.world().uav.x, 5.0, kRel));
    EXPECT_NEAR(env.world().uav.y, 0.0, 1e-12);
}

TEST(Step, ClipsAtAreaBoundary)
{
    const auto cfg = ScenarioConfig::desk();
    Environment env(cfg);
    env.reset(1);
    auto a = hover_action(cfg);
    a[2 * 8] = 1.0;
    a[2 * 8 + 1] = 0.0; // heading pi: west, into the wall
    env.step(a);
    EXPECT_EQ(env.world().uav.x, 0.0);
}

TEST(Step, OnlySelectedUeProgresses)
{
    const auto cfg = ScenarioConfig::desk();
    Environment env(cfg);
    env.reset(1);
    auto a = hover_action(cfg);
    a[2 * 8 + 2] = 1.0; // full offload
    a[2 * 8 + 3] = 1.0; // UE 1
    const auto r = env.step(a);
    EXPECT_EQ(r.info.selected_ue, 1);
    EXPECT_EQ(env.world().tasks[0].delivered_bits, 0.0);
    EXPECT_EQ(env.world().tasks[0].served_slots, 0);
    EXPECT_EQ(env.world().tasks[1].served_slots, 1);
    EXPECT_TRUE(rel_near(env.world().tasks[1].delivered_bits, r.info.bits_delivered, kRel));
}

TEST(Step, LifecycleErrors)
{
    auto cfg = ScenarioConfig::desk();
    cfg.episode_slots = 3;
    Environment env(cfg);
    EXPECT_THROW(env.step(hover_action(cfg)), LifecycleError);
    env.reset(1);
    EXPECT_FALSE(env.step(hover_action(cfg)).done);
    EXPECT_FALSE(env.step(hover_action(cfg)).done);
    EXPECT_TRUE(env.step(hover_action(cfg)).done);
    EXPECT_THROW(env.step(hover_action(cfg)), LifecycleError);
    std::vector<double> bad(3, 0.0);
    env.reset(1);
    EXPECT_THROW(env.step(bad), ShapeError);
}

TEST(Step, EnergyExhaustionEndsEpisode)
{
    auto cfg = ScenarioConfig::desk();
    cfg.initial_energy = 2713.2 + 100.0;
    Environment env(cfg);
    env.reset(1);
    EXPECT_FALSE(env.step(hover_action(cfg)).done);
    EXPECT_TRUE(env.step(hover_action(cfg)).done);
}

TEST(Step, LatencyViolationIsReported)
{
    auto cfg = ScenarioConfig::desk();
    cfg.tasks.deadline = 1.0; // local execution alone takes >= 5 s
    Environment env(cfg);
    env.reset(1);
    const auto r = env.step(hover_action(cfg));
    EXPECT_TRUE(r.info.violations.latency);
    EXPECT_GE(constraint_report(env.log()).latency, 1);
}

TEST(Step, BudgetViolationIsPenalized)
{
    auto cfg = ScenarioConfig::desk();
    cfg.compute.amec_cycle_budget = 1.0;
    cfg.reward_scale = 1.0;
    Environment env(cfg);
    env.reset(1);
    auto a = hover_action(cfg);
    a[2 * 8 + 2] = 1.0;
    const auto r = env.step(a);
    EXPECT_TRUE(r.info.violations.budget);
    const double base = see_objective(r.info.secrecy_rate, r.info.propulsion_J, r.info.compute_J);
    double expected = base - 0.1 * std::abs(base);
    if (r.info.violations.latency)
        expected -= 0.1 * std::abs(base);
    EXPECT_TRUE(rel_near(r.reward, expected, kRel));
}

TEST(Episode, InvariantsUnderRandomPolicy)
{
    for (auto cfg : {ScenarioConfig::desk(), ScenarioConfig::table1()}) {
        cfg.stochastic_los = true;
        Environment env(cfg);
        std::mt19937_64 g(17);
        for (int ep = 0; ep < 3; ++ep) {
            env.reset(100 + ep, ep);
            double prev_energy = env.world().energy_remaining;
            Position3D prev = env.world().uav;
            while (!env.done()) {
                const auto r = env.step(random_action(cfg, g));
                EXPECT_LE(distance(prev, env.world().uav), cfg.power.slot_duration * cfg.power.max_speed + 1e-9);
                EXPECT_LE(env.world().energy_remaining, prev_energy);
                for (double s : r.next_state) {
                    EXPECT_TRUE(std::isfinite(s));
                    EXPECT_GE(s, -1.0);
                    EXPECT_LE(s, 1.0);
                }
                prev = env.world().uav;
                prev_energy = env.world().energy_remaining;
            }
            const auto rep = constraint_report(env.log());
            EXPECT_EQ(rep.phase, 0);
            EXPECT_EQ(rep.velocity, 0);
            EXPECT_EQ(rep.selection, 0);
            EXPECT_EQ(rep.offload, 0);
            EXPECT_LT(env.log().bookkeeping_residual(), 1e-9);
            EXPECT_GE(env.log().see(), 0.0);
            EXPECT_GE(env.log().energy_fraction(), 0.0);
            EXPECT_LE(env.log().energy_fraction(), 1.0);
        }
    }
}

TEST(Episode, ReplayIsBitIdentical)
{
    const auto cfg = ScenarioConfig::desk();
    std::mt19937_64 g(4);
    std::vector<std::vector<double>> actions;
    for (int i = 0; i < cfg.episode_slots; ++i)
        actions.push_back(random_action(cfg, g));
    auto play = [&] {
        Environment env(cfg);
        env.reset(77);
        std::ostringstream os;
        for (const auto& a : actions)
            env.step(a);
        write_slot_rows(os, env.log(), "h", 77);
        return os.str();
    };
    EXPECT_EQ(play(), play());
}

TEST(EncodeState, Examples)
{
    const auto cfg = ScenarioConfig::table1();
    Environment env(cfg);
    env.reset(1);
    WorldSnapshot w = env.world();
    w.energy_remaining = cfg.initial_energy;
    w.uav = {600.0, 400.0, 60.0};
    const auto s = encode_state(w, cfg);
    EXPECT_EQ(s[0], 1.0);
    EXPECT_EQ(s[1], 0.0);
    EXPECT_EQ(s[128], 1.0);
    EXPECT_EQ(s[129], 1.0);
    EXPECT_EQ(s[131], 1.0);
}

TEST(EncodeState, OutOfRangeSnapshot)
{
    const auto cfg = ScenarioConfig::desk();
    Environment env(cfg);
    env.reset(1);
    WorldSnapshot w = env.world();
    w.uav.x = 1e4;
    EXPECT_THROW(encode_state(w, cfg), EncodingError);
    w = env.world();
    w.phases.pop_back();
    EXPECT_THROW(encode_state(w, cfg), EncodingError);
}

TEST(ConstraintReport, CountsRecordedViolations)
{
    EpisodeLog log;
    log.num_ues = 2;
    log.max_step_displacement = 5.0;
    SlotRecord ok;
    SlotRecord bad;
    bad.viol_latency = true;
    bad.displacement = 6.0;
    bad.selected_ue = 2;
    bad.alpha = 1.5;
    bad.phases_valid = false;
    bad.viol_budget = true;
    log.slots = {ok, bad, bad};
    const auto r = constraint_report(log);
    EXPECT_EQ(r.latency, 2);
    EXPECT_EQ(r.velocity, 2);
    EXPECT_EQ(r.selection, 2);
    EXPECT_EQ(r.offload, 2);
    EXPECT_EQ(r.phase, 2);
    EXPECT_EQ(r.budget, 2);
    EXPECT_EQ(r.by_construction(), 8);
}

TEST(SlotCsv, HeaderColumns)
{
    EXPECT_STREQ(kSlotCsvHeader,
                 "episode,slot,x,y,z,speed,heading,selected_ue,alpha,secrecy_bps,propulsion_J,compute_J,"
                 "energy_remaining_J,reward,viol_latency,viol_budget,config_hash,seed");
}
