#pragma once

// Episodic control of the maze walker: at periodic instants the agent may add
// or remove one wall between grid-adjacent cells, and is rewarded with the
// population that reached the sink during the following interval.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qmlkit/maze.hpp"
#include "qmlkit/qsw.hpp"

namespace qmlkit::rl {

/// NoOp, or flip the link between two grid-adjacent cells.
struct Action {
    std::optional<maze::Edge> toggle;

    static Action noop() { return {}; }
    /// Stores the pair with i < j.
    static Action toggle_link(maze::Node i, maze::Node j);

    bool is_noop() const noexcept { return !toggle.has_value(); }
    std::string to_string() const;

    friend bool operator==(const Action&, const Action&) = default;
};

struct EnvConfig {
    qsw::QSWParams params;
    /// Time between consecutive decisions.
    double action_period = 1.0;
    /// Decisions per episode (K).
    int max_actions = 8;

    void validate() const;
};

struct Observation {
    int step_index = 0;
    /// Diagonal of rho: maze nodes, then the sink.
    Eigen::VectorXd populations;
    /// One bit per entry of MazeEnv::action_space() after NoOp: is that pair currently linked?
    std::vector<bool> adjacency_bits;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
};

/// (decision index, hash of the current link set)
struct StateKey {
    int step = 0;
    std::uint64_t topology = 0;

    std::string to_string() const;
    static StateKey parse(const std::string& text);

    friend bool operator==(const StateKey&, const StateKey&) = default;
    friend auto operator<=>(const StateKey&, const StateKey&) = default;
};

struct StateKeyHash {
    std::size_t operator()(const StateKey& k) const noexcept;
};

/// FNV-1a over the link bits of every grid-adjacent pair.
std::uint64_t topology_hash(const maze::MazeGraph& maze);

class MazeEnv {
public:
    MazeEnv(maze::MazeGraph base_maze, EnvConfig config);
    ~MazeEnv();
    MazeEnv(MazeEnv&&) noexcept;
    MazeEnv& operator=(MazeEnv&&) noexcept;

    const maze::MazeGraph& base_maze() const noexcept { return base_; }
    const EnvConfig& config() const noexcept { return config_; }
    /// NoOp first, then every grid-adjacent pair in lexicographic order.
    const std::vector<Action>& action_space() const noexcept { return actions_; }
    /// Index into action_space(); throws InvalidInput for illegal actions.
    std::size_t action_index(const Action& a) const;

    /// Dynamics are deterministic; the seed is accepted for interface symmetry and ignored.
    Observation reset(std::uint64_t seed = 0);
    /// Throws InvalidInput (leaving the episode untouched) for an illegal action or a finished episode.
    StepResult step(const Action& action);
    StepResult step_index(std::size_t action);

    bool done() const noexcept { return step_index_ >= config_.max_actions; }
    int current_step() const noexcept { return step_index_; }
    const maze::MazeGraph& maze() const noexcept { return maze_; }
    const qsw::Matrix& rho() const noexcept { return rho_; }
    double p_sink() const { return rho_(rho_.rows() - 1, rho_.cols() - 1).real(); }
    StateKey state_key() const;
    /// Current state validated as a density matrix with propagation tolerances.
    qsw::State state() const;

    /// Memoize transitions by action history (at most `capacity` entries, cleared when full).
    /// Results are identical with or without the cache.
    void enable_cache(std::size_t capacity);
    std::size_t cache_hits() const noexcept { return cache_hits_; }

private:
    struct Cached;

    Observation observe() const;
    void integrate(double duration);

    maze::MazeGraph base_;
    EnvConfig config_;
    std::vector<Action> actions_;
    std::map<maze::Edge, std::size_t> pair_index_;

    maze::MazeGraph maze_;
    std::optional<qsw::LindbladModel> model_;
    qsw::Matrix rho_;
    qsw::Propagator propagator_;
    int step_index_ = 0;
    std::size_t integration_steps_ = 0;
    std::vector<std::size_t> history_;

    std::size_t cache_capacity_ = 0;
    std::size_t cache_hits_ = 0;
    std::unordered_map<std::uint64_t, std::vector<Cached>> cache_;
    std::size_t cache_size_ = 0;
};

struct EpisodeRecord {
    std::vector<Action> actions;
    std::vector<double> rewards;
    double final_p_sink = 0.0;
};

/// Greedy lookup table; states not in the table take NoOp.
class Policy {
public:
    Policy() = default;

    void set(const StateKey& key, const Action& action) { table_[key] = action; }
    Action act(const StateKey& key) const;
    const std::map<StateKey, Action>& table() const noexcept { return table_; }
    std::size_t size() const noexcept { return table_.size(); }

    static Policy noop() { return {}; }

private:
    std::map<StateKey, Action> table_;
};

/// Resets and plays one greedy episode.
EpisodeRecord run_episode(MazeEnv& env, const Policy& policy);

/// Mean final p_sink over n_runs greedy rollouts.
double evaluate(MazeEnv& env, const Policy& policy, int n_runs = 1);

/// NoOp-policy final p_sink.
double baseline(MazeEnv& env);

struct AgentConfig {
    double learning_rate = 0.1;
    double discount = 1.0;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    /// Fraction of training over which epsilon decays linearly.
    double epsilon_decay_fraction = 0.5;

    void validate() const;
};

struct LearningCurve {
    /// Total reward of each training episode (its final p_sink).
    std::vector<double> rewards;
    /// Trailing mean over min(100, episodes) episodes (fewer at the start).
    std::vector<double> running_average;
    std::size_t window = 0;
};

struct TrainResult {
    Policy policy;
    LearningCurve curve;
};

/// Tabular Q-learning with epsilon-greedy exploration over StateKey.
TrainResult train(MazeEnv& env, const AgentConfig& agent, int episodes, std::uint64_t seed);

std::vector<double> running_average(const std::vector<double>& values, std::size_t window);

using HeaderLines = qsw::HeaderLines;

/// `# key=value` header, then `episode,reward,running_avg_100`.
void write_learning_curve_csv(std::ostream& os, const LearningCurve& curve, const HeaderLines& header);
/// {"config": {...}, "policy": {"<step>:<hash>": "noop" | [i, j], ...}}
void write_policy_json(std::ostream& os, const Policy& policy, const HeaderLines& header);
/// Throws ParseError.
Policy read_policy_json(std::istream& is);

}  // namespace qmlkit::rl
