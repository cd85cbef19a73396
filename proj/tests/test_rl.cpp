#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "qmlkit/errors.hpp"
#include "qmlkit/rl.hpp"

using namespace qmlkit;
using namespace qmlkit::rl;

namespace {

EnvConfig small_config() {
    EnvConfig c;
    c.params.p = 0.8;
    c.params.gamma = 1.0;
    c.params.dt = 0.05;
    c.params.t_final = 20.0;
    c.action_period = 2.0;
    c.max_actions = 4;
    return c;
}

MazeEnv small_env(std::uint64_t seed = 1) { return MazeEnv(maze::generate_perfect_maze(3, 3, seed), small_config()); }

double plain_walk(const maze::MazeGraph& m, const qsw::QSWParams& params) {
    const auto model = qsw::build_model(m, params);
    return qsw::evolve(qsw::initial_state(model), model).p_sink_series.back();
}

}  // namespace

TEST_CASE("configuration") {
    CHECK_NOTHROW(small_config().validate());
    EnvConfig c = small_config();
    c.max_actions = 11;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = small_config();
    c.action_period = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = small_config();
    c.params.p = 2.0;
    CHECK_THROWS_AS(MazeEnv(maze::generate_perfect_maze(2, 2, 0), c), InvalidInput);

    AgentConfig a;
    CHECK_NOTHROW(a.validate());
    a.epsilon_end = 1.5;
    CHECK_THROWS_AS(a.validate(), InvalidInput);
}

TEST_CASE("action space") {
    const auto env = small_env();
    const auto& actions = env.action_space();
    REQUIRE(actions.size() == 13);  // 12 grid pairs in 3x3, plus NoOp
    CHECK(actions.front().is_noop());
    for (std::size_t k = 2; k < actions.size(); ++k) CHECK(*actions[k - 1].toggle < *actions[k].toggle);
    CHECK(env.action_index(Action::toggle_link(4, 1)) == env.action_index(Action::toggle_link(1, 4)));
    CHECK(Action::toggle_link(4, 1).toggle == maze::Edge{1, 4});
    CHECK_THROWS_AS(env.action_index(Action::toggle_link(0, 4)), InvalidInput);
    CHECK(Action::noop().to_string() == "noop");
    CHECK(Action::toggle_link(3, 0).to_string() == "toggle(0,3)");
}

TEST_CASE("reset") {
    auto env = small_env(2);
    const auto obs = env.reset(7);
    CHECK(obs.step_index == 0);
    CHECK(obs.populations(0) == 1.0);
    CHECK(obs.populations.sum() == 1.0);
    const auto pairs = maze::grid_adjacent_pairs(3, 3);
    for (std::size_t k = 0; k < pairs.size(); ++k) CHECK(obs.adjacency_bits[k] == env.base_maze().linked(pairs[k].first, pairs[k].second));
    env.step(Action::toggle_link(0, 1));
    const auto again = env.reset(7);
    CHECK(again.adjacency_bits == obs.adjacency_bits);
    CHECK(again.populations == obs.populations);
    CHECK(env.maze() == env.base_maze());
}

TEST_CASE("NoOp episodes reproduce the plain walk") {
    for (std::uint64_t s : {1u, 2u, 3u}) {
        auto env = small_env(s);
        const double expected = plain_walk(env.base_maze(), env.config().params);
        CHECK(std::abs(baseline(env) - expected) <= 1e-9);
        CHECK(std::abs(evaluate(env, Policy::noop(), 3) - expected) <= 1e-9);
    }
    // with the horizon exactly covered by decisions
    EnvConfig c = small_config();
    c.max_actions = 10;
    MazeEnv env(maze::generate_perfect_maze(3, 3, 4), c);
    CHECK(std::abs(baseline(env) - plain_walk(env.base_maze(), c.params)) <= 1e-9);
}

TEST_CASE("rewards telescope to the final sink population") {
    auto env = small_env(5);
    env.reset();
    double total = 0.0;
    const std::vector<Action> plan{Action::toggle_link(4, 5), Action::noop(), Action::toggle_link(7, 8), Action::toggle_link(4, 5)};
    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto r = env.step(plan[k]);
        total += r.reward;
        CHECK(r.reward >= -1e-15);
        CHECK(r.done == (k + 1 == plan.size()));
        CHECK(r.observation.step_index == static_cast<int>(k + 1));
        const auto st = env.state();  // validates trace / Hermiticity / PSD
        CHECK(std::abs(st.trace() - 1.0) < 1e-9);
    }
    CHECK(std::abs(total - env.p_sink()) <= 1e-9);
    CHECK_THROWS_AS(env.step(Action::noop()), InvalidInput);
}

TEST_CASE("illegal actions leave the episode untouched") {
    auto env = small_env(5);
    env.reset();
    env.step(Action::noop());
    const auto rho = env.rho();
    const auto key = env.state_key();
    CHECK_THROWS_AS(env.step(Action::toggle_link(0, 8)), InvalidInput);
    CHECK_THROWS_AS(env.step_index(99), InvalidInput);
    CHECK(env.rho() == rho);
    CHECK(env.state_key() == key);
    CHECK(env.current_step() == 1);
}

TEST_CASE("cutting the entrance off lowers the escape") {
    // find a maze whose entrance is a leaf
    std::uint64_t seed = 0;
    while (maze::degrees(maze::generate_perfect_maze(3, 3, seed))(0) != 1) ++seed;
    auto env = small_env(seed);
    const int only = env.base_maze().linked(0, 1) ? 1 : 3;
    env.reset();
    env.step(Action::toggle_link(0, only));
    while (!env.done()) env.step(Action::noop());
    const double cut = env.p_sink();
    CHECK(cut < baseline(env));
}

TEST_CASE("cache does not change results") {
    auto cached = small_env(6);
    auto plain = small_env(6);
    cached.enable_cache(50);
    AgentConfig agent;
    const auto a = train(cached, agent, 60, 9);
    const auto b = train(plain, agent, 60, 9);
    CHECK(a.curve.rewards == b.curve.rewards);
    CHECK(a.policy.table() == b.policy.table());
    CHECK(cached.cache_hits() > 0);
    CHECK(plain.cache_hits() == 0);
}

TEST_CASE("training") {
    SUBCASE("greedy single episode is the NoOp policy") {
        auto env = small_env(3);
        AgentConfig agent;
        agent.epsilon_start = agent.epsilon_end = 0.0;
        const auto result = train(env, agent, 1, 4);
        for (const auto& [key, action] : result.policy.table()) CHECK(action.is_noop());
        REQUIRE(result.curve.rewards.size() == 1);
        CHECK(std::abs(result.curve.rewards[0] - baseline(env)) <= 1e-12);
        CHECK(result.curve.window == 1);
    }
    SUBCASE("deterministic given the seed") {
        auto env = small_env(3);
        const auto a = train(env, AgentConfig{}, 40, 11);
        const auto b = train(env, AgentConfig{}, 40, 11);
        CHECK(a.curve.rewards == b.curve.rewards);
        CHECK(a.policy.table() == b.policy.table());
        const auto c = train(env, AgentConfig{}, 40, 12);
        CHECK(a.curve.rewards != c.curve.rewards);
    }
    SUBCASE("curve lengths") {
        auto env = small_env(3);
        const auto r = train(env, AgentConfig{}, 30, 1);
        CHECK(r.curve.rewards.size() == 30);
        CHECK(r.curve.running_average.size() == 30);
        CHECK(r.curve.window == 30);
    }
    SUBCASE("trained policy does not lose to NoOp") {
        auto env = small_env(1);
        env.enable_cache(5000);
        const auto r = train(env, AgentConfig{}, 400, 3);
        const auto rec = run_episode(env, r.policy);
        CHECK(rec.actions.size() <= 4u);
        CHECK(rec.final_p_sink >= baseline(env));
        CHECK(std::abs(std::accumulate(rec.rewards.begin(), rec.rewards.end(), 0.0) - rec.final_p_sink) <= 1e-9);
        CHECK(evaluate(env, r.policy, 1) == evaluate(env, r.policy, 5));
    }
    CHECK_THROWS_AS([] {
        auto env = small_env();
        train(env, AgentConfig{}, 0, 0);
    }(), InvalidInput);
}

TEST_CASE("running average") {
    const std::vector<double> v{1, 2, 3, 4, 5};
    const auto avg = running_average(v, 2);
    CHECK(avg == std::vector<double>{1.0, 1.5, 2.5, 3.5, 4.5});
    CHECK(running_average(v, 100).back() == 3.0);
    CHECK_THROWS_AS(running_average(v, 0), InvalidInput);
}

TEST_CASE("state keys") {
    const StateKey k{3, 0xdeadbeef0123ULL};
    CHECK(k.to_string() == "3:0000deadbeef0123");
    CHECK(StateKey::parse(k.to_string()) == k);
    CHECK_THROWS_AS(StateKey::parse("3"), ParseError);
    CHECK_THROWS_AS(StateKey::parse("x:12"), ParseError);
    const auto m = maze::generate_perfect_maze(3, 3, 1);
    CHECK(topology_hash(m) == topology_hash(maze::generate_perfect_maze(3, 3, 1)));
    CHECK(topology_hash(m) != topology_hash(maze::toggle_link(m, 0, 1)));
}

TEST_CASE("policy and curve export") {
    Policy p;
    p.set({0, 1}, Action::toggle_link(1, 0));
    p.set({1, 2}, Action::noop());
    std::ostringstream os;
    write_policy_json(os, p, {{"seed", "4"}});
    std::istringstream is(os.str());
    const Policy back = read_policy_json(is);
    CHECK(back.table() == p.table());
    CHECK(back.act({5, 5}).is_noop());
    CHECK(os.str().find("\"seed\": \"4\"") != std::string::npos);

    std::istringstream bad(R"({"policy": {"0:00": [1]}})");
    CHECK_THROWS_AS(read_policy_json(bad), ParseError);
    std::istringstream broken("{");
    CHECK_THROWS_AS(read_policy_json(broken), ParseError);

    LearningCurve c{{0.1, 0.3}, {0.1, 0.2}, 2};
    std::ostringstream csv;
    write_learning_curve_csv(csv, c, {{"episodes", "2"}});
    CHECK(csv.str() == "# episodes=2\nepisode,reward,running_avg_100\n0,0.10000000000000001,0.10000000000000001\n1,0.29999999999999999,0.20000000000000001\n");
}
