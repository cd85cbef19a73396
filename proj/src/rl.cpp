#include "qmlkit/rl.hpp"

#include "json.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "qmlkit/errors.hpp"
#include "qmlkit/random.hpp"

namespace qmlkit::rl {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_step(std::uint64_t h, std::uint64_t byte) { return (h ^ byte) * kFnvPrime; }

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::size_t argmax_first(const std::vector<double>& q) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

}  // namespace

Action Action::toggle_link(maze::Node i, maze::Node j) {
    return Action{maze::Edge{std::min(i, j), std::max(i, j)}};
}

std::string Action::to_string() const {
    if (is_noop()) return "noop";
    return "toggle(" + std::to_string(toggle->first) + "," + std::to_string(toggle->second) + ")";
}

void EnvConfig::validate() const {
    params.validate();
    if (!std::isfinite(action_period) || action_period <= 0.0) throw InvalidInput("action period must be > 0");
    if (max_actions < 1) throw InvalidInput("max_actions must be >= 1");
    if (max_actions * action_period > params.t_final * (1.0 + 1e-12))
        throw InvalidInput("max_actions * action_period must not exceed t_final");
}

std::string StateKey::to_string() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%d:%016" PRIx64, step, topology);
    return buf;
}

StateKey StateKey::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size())
        throw ParseError("", "state key '" + text + "' is not <step>:<hash>");
    StateKey key;
    try {
        std::size_t used = 0;
        key.step = std::stoi(text.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("step");
        const std::string hex = text.substr(colon + 1);
        key.topology = std::stoull(hex, &used, 16);
        if (used != hex.size()) throw std::invalid_argument("hash");
    } catch (const std::logic_error&) {
        throw ParseError("", "state key '" + text + "' is not <step>:<hash>");
    }
    return key;
}

std::size_t StateKeyHash::operator()(const StateKey& k) const noexcept {
    return static_cast<std::size_t>(mix_seed(k.topology ^ (static_cast<std::uint64_t>(k.step) << 56)));
}

std::uint64_t topology_hash(const maze::MazeGraph& m) {
    std::uint64_t h = kFnvOffset;
    for (const auto& [i, j] : maze::grid_adjacent_pairs(m.width(), m.height()))
        h = fnv_step(h, m.linked(i, j) ? 1 : 0);
    return h;
}

struct MazeEnv::Cached {
    std::vector<std::size_t> history;
    maze::MazeGraph maze;
    qsw::Matrix rho;
    std::size_t integration_steps;
};

MazeEnv::MazeEnv(maze::MazeGraph base_maze, EnvConfig config)
    : base_(std::move(base_maze)), config_(config), maze_(base_), propagator_(base_.node_count() + 1) {
    config_.validate();
    actions_.push_back(Action::noop());
    for (const auto& e : maze::grid_adjacent_pairs(base_.width(), base_.height())) {
        pair_index_.emplace(e, actions_.size());
        actions_.push_back(Action{e});
    }
    reset();
}

MazeEnv::~MazeEnv() = default;
MazeEnv::MazeEnv(MazeEnv&&) noexcept = default;
MazeEnv& MazeEnv::operator=(MazeEnv&&) noexcept = default;

std::size_t MazeEnv::action_index(const Action& a) const {
    if (a.is_noop()) return 0;
    const auto [i, j] = *a.toggle;
    if (i == j) throw InvalidInput("illegal action: self-link " + a.to_string());
    const auto it = pair_index_.find({std::min(i, j), std::max(i, j)});
    if (it == pair_index_.end()) throw InvalidInput("illegal action: " + a.to_string() + " is not a grid-adjacent pair");
    return it->second;
}

Observation MazeEnv::reset(std::uint64_t /*seed*/) {
    maze_ = base_;
    model_.emplace(qsw::build_model(maze_, config_.params));
    rho_ = qsw::initial_state(*model_).matrix();
    step_index_ = 0;
    integration_steps_ = 0;
    history_.clear();
    return observe();
}

Observation MazeEnv::observe() const {
    Observation obs;
    obs.step_index = step_index_;
    obs.populations = rho_.diagonal().real();
    obs.adjacency_bits.reserve(actions_.size() - 1);
    for (std::size_t k = 1; k < actions_.size(); ++k) {
        const auto [i, j] = *actions_[k].toggle;
        obs.adjacency_bits.push_back(maze_.linked(i, j));
    }
    return obs;
}

StateKey MazeEnv::state_key() const { return {step_index_, topology_hash(maze_)}; }

qsw::State MazeEnv::state() const { return qsw::State(rho_, propagation_tolerances()); }

void MazeEnv::integrate(double duration) {
    integration_steps_ += propagator_.advance(rho_, *model_, duration, integration_steps_);
}

StepResult MazeEnv::step(const Action& action) { return step_index(action_index(action)); }

StepResult MazeEnv::step_index(std::size_t action) {
    if (done()) throw InvalidInput("step: episode is finished; call reset()");
    if (action >= actions_.size()) throw InvalidInput("step: action index out of range");

    const double before = p_sink();
    history_.push_back(action);

    std::uint64_t key = kFnvOffset;
    for (std::size_t a : history_) key = fnv_step(key, a);

    const Cached* hit = nullptr;
    if (cache_capacity_ > 0) {
        if (const auto it = cache_.find(key); it != cache_.end())
            for (const auto& entry : it->second)
                if (entry.history == history_) hit = &entry;
    }

    if (hit) {
        ++cache_hits_;
        if (!actions_[action].is_noop()) {
            maze_ = hit->maze;
            model_.emplace(qsw::build_model(maze_, config_.params));
        }
        rho_ = hit->rho;
        integration_steps_ = hit->integration_steps;
        ++step_index_;
    } else {
        if (const auto& t = actions_[action].toggle) {
            maze_ = maze::toggle_link(maze_, t->first, t->second);
            model_.emplace(qsw::build_model(maze_, config_.params));
        }
        integrate(config_.action_period);
        ++step_index_;
        if (done()) integrate(config_.params.t_final - config_.max_actions * config_.action_period);
        if (cache_capacity_ > 0) {
            if (cache_size_ >= cache_capacity_) {
                cache_.clear();
                cache_size_ = 0;
            }
            cache_[key].push_back({history_, maze_, rho_, integration_steps_});
            ++cache_size_;
        }
    }

    StepResult out;
    out.observation = observe();
    out.reward = p_sink() - before;
    out.done = done();
    return out;
}

void MazeEnv::enable_cache(std::size_t capacity) {
    cache_capacity_ = capacity;
    cache_.clear();
    cache_size_ = 0;
}

Action Policy::act(const StateKey& key) const {
    const auto it = table_.find(key);
    return it == table_.end() ? Action::noop() : it->second;
}

EpisodeRecord run_episode(MazeEnv& env, const Policy& policy) {
    EpisodeRecord rec;
    env.reset();
    while (!env.done()) {
        const Action a = policy.act(env.state_key());
        const StepResult r = env.step(a);
        rec.actions.push_back(a);
        rec.rewards.push_back(r.reward);
    }
    rec.final_p_sink = env.p_sink();
    return rec;
}

double evaluate(MazeEnv& env, const Policy& policy, int n_runs) {
    if (n_runs < 1) throw InvalidInput("evaluate: n_runs must be >= 1");
    double total = 0.0;
    for (int r = 0; r < n_runs; ++r) total += run_episode(env, policy).final_p_sink;
    return total / n_runs;
}

double baseline(MazeEnv& env) { return evaluate(env, Policy::noop(), 1); }

void AgentConfig::validate() const {
    if (!std::isfinite(learning_rate) || learning_rate < 0.0 || learning_rate > 1.0)
        throw InvalidInput("learning rate must lie in [0, 1]");
    if (!std::isfinite(discount) || discount < 0.0 || discount > 1.0) throw InvalidInput("discount must lie in [0, 1]");
    for (double e : {epsilon_start, epsilon_end})
        if (!std::isfinite(e) || e < 0.0 || e > 1.0) throw InvalidInput("epsilon must lie in [0, 1]");
    if (!std::isfinite(epsilon_decay_fraction) || epsilon_decay_fraction < 0.0 || epsilon_decay_fraction > 1.0)
        throw InvalidInput("epsilon decay fraction must lie in [0, 1]");
}

std::vector<double> running_average(const std::vector<double>& values, std::size_t window) {
    if (window == 0) throw InvalidInput("running_average: window must be >= 1");
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        sum += values[k];
        if (k >= window) sum -= values[k - window];
        out[k] = sum / static_cast<double>(std::min(k + 1, window));
    }
    return out;
}

TrainResult train(MazeEnv& env, const AgentConfig& agent, int episodes, std::uint64_t seed) {
    agent.validate();
    if (episodes < 1) throw InvalidInput("train: episodes must be >= 1");

    const std::size_t n_actions = env.action_space().size();
    std::unordered_map<StateKey, std::vector<double>, StateKeyHash> q;
    auto row = [&](const StateKey& s) -> std::vector<double>& {
        auto [it, inserted] = q.try_emplace(s);
        if (inserted) it->second.assign(n_actions, 0.0);
        return it->second;
    };

    Rng rng(seed);
    const double decay_episodes = agent.epsilon_decay_fraction * episodes;
    TrainResult result;
    result.curve.rewards.reserve(static_cast<std::size_t>(episodes));

    for (int e = 0; e < episodes; ++e) {
        const double epsilon = (e < decay_episodes)
                                   ? agent.epsilon_start + (agent.epsilon_end - agent.epsilon_start) * (e / decay_episodes)
                                   : agent.epsilon_end;
        env.reset();
        double total = 0.0;
        while (!env.done()) {
            const StateKey s = env.state_key();
            std::size_t a;
            if (epsilon > 0.0 && rng.uniform() < epsilon)
                a = static_cast<std::size_t>(rng.below(n_actions));
            else
                a = argmax_first(row(s));
            const StepResult r = env.step_index(a);
            total += r.reward;

            double target = r.reward;
            if (!r.done) {
                const auto it = q.find(env.state_key());
                if (it != q.end()) target += agent.discount * *std::max_element(it->second.begin(), it->second.end());
            }
            double& qsa = row(s)[a];
            qsa += agent.learning_rate * (target - qsa);
        }
        result.curve.rewards.push_back(total);
    }

    for (const auto& [s, values] : q) result.policy.set(s, env.action_space()[argmax_first(values)]);
    result.curve.window = std::min<std::size_t>(100, static_cast<std::size_t>(episodes));
    result.curve.running_average = running_average(result.curve.rewards, result.curve.window);
    return result;
}

void write_learning_curve_csv(std::ostream& os, const LearningCurve& curve, const HeaderLines& header) {
    for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
    os << "episode,reward,running_avg_100\n";
    for (std::size_t e = 0; e < curve.rewards.size(); ++e)
        os << e << ',' << format_real(curve.rewards[e]) << ',' << format_real(curve.running_average[e]) << '\n';
}

void write_policy_json(std::ostream& os, const Policy& policy, const HeaderLines& header) {
    nlohmann::ordered_json doc;
    auto& config = doc["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : header) config[k] = v;
    auto& table = doc["policy"] = nlohmann::ordered_json::object();
    for (const auto& [key, action] : policy.table()) {
        if (action.is_noop())
            table[key.to_string()] = "noop";
        else
            table[key.to_string()] = {action.toggle->first, action.toggle->second};
    }
    os << doc.dump(1) << '\n';
}

Policy read_policy_json(std::istream& is) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("byte " + std::to_string(e.byte), "malformed JSON");
    }
    if (!doc.is_object() || !doc.contains("policy") || !doc["policy"].is_object())
        throw ParseError("/policy", "expected an object");
    Policy policy;
    for (const auto& [k, v] : doc["policy"].items()) {
        const std::string loc = "/policy/" + k;
        StateKey key;
        try {
            key = StateKey::parse(k);
        } catch (const ParseError& e) {
            throw ParseError(loc, e.what());
        }
        if (v.is_string() && v == "noop") {
            policy.set(key, Action::noop());
        } else if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
            policy.set(key, Action::toggle_link(v[0].get<int>(), v[1].get<int>()));
        } else {
            throw ParseError(loc, "expected \"noop\" or [i, j]");
        }
    }
    return policy;
}

}  // namespace qmlkit::rl
