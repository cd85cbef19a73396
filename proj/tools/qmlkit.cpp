// Command-line runner: maze generation, walker evolution, maze-control training
// and evaluation, and embedding training / Gram matrices.
//
// Exit codes: 0 success, 2 invalid configuration or input, 3 numerical failure.

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qmlkit/embed.hpp"
#include "qmlkit/errors.hpp"
#include "qmlkit/maze.hpp"
#include "qmlkit/qsw.hpp"
#include "qmlkit/rl.hpp"

namespace {

using namespace qmlkit;
using HeaderLines = std::vector<std::pair<std::string, std::string>>;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

/// Configuration problems detected by the runner itself (unreadable files and the like).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    return out;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Every option of the subcommand with its resolved value, in declaration order.
HeaderLines resolved_config(const CLI::App& sub) {
    HeaderLines out{{"command", sub.get_name()}};
    std::istringstream lines(sub.config_to_str(true, false));
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find('=');
        if (line.empty() || line[0] == '[' || line[0] == '#' || eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\"");
            const auto e = s.find_last_not_of(" \t\"");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

maze::MazeGraph load_maze(const std::string& path, int exit_override) {
    maze::MazeGraph m = maze::deserialize(read_file(path));
    return exit_override >= 0 ? m.with_exit(exit_override) : m;
}

struct WalkOptions {
    std::string maze_path;
    int exit = -1;
    double p = 0.8;
    double gamma = 1.0;
    double dt = 0.005;
    double t_final = 10.0;
};

void add_walk_options(CLI::App* sub, WalkOptions& w) {
    sub->add_option("--maze", w.maze_path, "Maze JSON file")->required();
    sub->add_option("--exit", w.exit, "Override the maze's exit node (-1 keeps it)")->capture_default_str();
    sub->add_option("--p", w.p, "Mixing parameter p in [0, 1]")->capture_default_str();
    sub->add_option("--gamma", w.gamma, "Sink rate")->capture_default_str();
    sub->add_option("--dt", w.dt, "RK4 step")->capture_default_str();
    sub->add_option("--t-final", w.t_final, "Horizon")->capture_default_str();
}

qsw::QSWParams walk_params(const WalkOptions& w) {
    qsw::QSWParams p;
    p.p = w.p;
    p.gamma = w.gamma;
    p.dt = w.dt;
    p.t_final = w.t_final;
    p.validate();
    return p;
}

// ---------------------------------------------------------------- maze-gen

struct MazeGenOptions {
    int width = 0;
    int height = 0;
    std::uint64_t seed = 0;
    int exit = -1;
    std::string output;
};

int run_maze_gen(const MazeGenOptions& o) {
    if (o.width < 2 || o.height < 2) throw InvalidInput("--width and --height must be >= 2");
    const maze::MazeGraph m = o.exit >= 0 ? maze::generate_perfect_maze(o.width, o.height, o.seed, o.exit)
                                          : maze::generate_perfect_maze(o.width, o.height, o.seed);
    auto out = open_output(o.output);
    out << maze::serialize(m);
    std::cout << "wrote " << o.output << ": " << m.node_count() << " cells, " << m.edge_count() << " links\n";
    return kExitOk;
}

// ---------------------------------------------------------------- qsw-run

struct QswRunOptions {
    WalkOptions walk;
    std::size_t sample_every = 10;
    std::string output;
    std::string snapshots;
};

int run_qsw(const QswRunOptions& o, const HeaderLines& header) {
    const auto params = walk_params(o.walk);
    if (o.sample_every == 0) throw InvalidInput("--sample-every must be >= 1");
    const auto m = load_maze(o.walk.maze_path, o.walk.exit);
    const auto model = qsw::build_model(m, params);
    const auto traj = qsw::evolve(qsw::initial_state(model), model, o.sample_every);
    {
        auto out = open_output(o.output);
        qsw::write_trajectory_csv(out, traj, header);
    }
    if (!o.snapshots.empty()) {
        auto out = open_output(o.snapshots);
        qsw::write_snapshots_json(out, traj, header);
    }
    const auto integral = qsw::p_sink_from_integral(traj, model);
    std::cout << "p_sink=" << format_real(traj.p_sink_series.back()) << '\n'
              << "p_sink_integral=" << format_real(integral.back()) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- rl-train / rl-eval

struct EnvOptions {
    WalkOptions walk{.maze_path = {}, .dt = 0.1, .t_final = 100.0};
    double action_period = 5.0;
    int max_actions = 8;
    std::size_t cache = 20000;
};

void add_env_options(CLI::App* sub, EnvOptions& e) {
    add_walk_options(sub, e.walk);
    sub->add_option("--action-period", e.action_period, "Time between decisions")->capture_default_str();
    sub->add_option("--max-actions", e.max_actions, "Decisions per episode (K)")->capture_default_str();
    sub->add_option("--cache", e.cache, "Transition cache entries (0 disables)")->capture_default_str();
}

rl::MazeEnv make_env(const EnvOptions& e) {
    rl::EnvConfig cfg;
    cfg.params = walk_params(e.walk);
    cfg.action_period = e.action_period;
    cfg.max_actions = e.max_actions;
    cfg.validate();
    rl::MazeEnv env(load_maze(e.walk.maze_path, e.walk.exit), cfg);
    if (e.cache > 0) env.enable_cache(e.cache);
    return env;
}

struct RlTrainOptions {
    EnvOptions env;
    rl::AgentConfig agent;
    int episodes = 2000;
    std::uint64_t seed = 0;
    std::string curve;
    std::string policy;
};

int run_rl_train(const RlTrainOptions& o, const HeaderLines& header) {
    o.agent.validate();
    if (o.episodes < 1) throw InvalidInput("--episodes must be >= 1");
    auto env = make_env(o.env);
    const auto result = rl::train(env, o.agent, o.episodes, o.seed);
    {
        auto out = open_output(o.curve);
        rl::write_learning_curve_csv(out, result.curve, header);
    }
    {
        auto out = open_output(o.policy);
        rl::write_policy_json(out, result.policy, header);
    }
    const double base = rl::baseline(env);
    const auto rec = rl::run_episode(env, result.policy);
    std::cout << "baseline_p_sink=" << format_real(base) << '\n'
              << "policy_p_sink=" << format_real(rec.final_p_sink) << '\n'
              << "policy_actions=";
    for (std::size_t k = 0; k < rec.actions.size(); ++k) std::cout << (k ? " " : "") << rec.actions[k].to_string();
    std::cout << '\n';
    return kExitOk;
}

struct RlEvalOptions {
    EnvOptions env;
    std::string policy;
    int runs = 1;
    std::string output;
};

int run_rl_eval(const RlEvalOptions& o, const HeaderLines& header) {
    if (o.runs < 1) throw InvalidInput("--runs must be >= 1");
    auto env = make_env(o.env);
    rl::Policy policy;
    if (!o.policy.empty()) {
        std::istringstream in(read_file(o.policy));
        policy = rl::read_policy_json(in);
        for (const auto& [key, action] : policy.table()) {
            try {
                env.action_index(action);
            } catch (const InvalidInput& e) {
                throw ParseError(o.policy + " /policy/" + key.to_string(), e.what());
            }
        }
    }
    const double base = rl::baseline(env);
    const double value = rl::evaluate(env, policy, o.runs);
    std::ostringstream report;
    report << "baseline_p_sink=" << format_real(base) << '\n'
           << "policy_p_sink=" << format_real(value) << '\n'
           << "relative_gain=" << format_real(base > 0.0 ? value / base - 1.0 : 0.0) << '\n';
    std::cout << report.str();
    if (!o.output.empty()) {
        auto out = open_output(o.output);
        for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
        out << report.str();
    }
    return kExitOk;
}

// ---------------------------------------------------------------- embed-train / embed-gram

struct DataOptions {
    std::string dataset;
    int n_per_class = 20;
    std::uint64_t data_seed = 1;
};

void add_data_options(CLI::App* sub, DataOptions& d, int default_per_class) {
    d.n_per_class = default_per_class;
    sub->add_option("--dataset", d.dataset, "Dataset JSON file; generated when omitted");
    sub->add_option("--n-per-class", d.n_per_class, "Generated points per class")->capture_default_str();
    sub->add_option("--data-seed", d.data_seed, "Seed for the generated dataset")->capture_default_str();
}

embed::LabeledDataset1D load_data(const DataOptions& d) {
    if (!d.dataset.empty()) return embed::dataset_from_json(read_file(d.dataset));
    return embed::synth_dataset(d.n_per_class, d.data_seed);
}

void write_model_json(const std::string& path, const embed::EmbeddingModel& model, const HeaderLines& header) {
    nlohmann::ordered_json doc;
    auto& config = doc["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : header) config[k] = v;
    doc["thetas"] = model.thetas;
    auto out = open_output(path);
    out << doc.dump(1) << '\n';
}

embed::EmbeddingModel read_model_json(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + " byte " + std::to_string(e.byte), "malformed JSON");
    }
    const auto it = doc.find("thetas");
    if (it == doc.end() || !it->is_array() || it->size() != 3) throw ParseError(path + " /thetas", "expected 3 numbers");
    embed::EmbeddingModel m;
    for (int k = 0; k < 3; ++k) {
        if (!(*it)[k].is_number()) throw ParseError(path + " /thetas/" + std::to_string(k), "expected a number");
        m.thetas[k] = (*it)[k].get<double>();
    }
    return m;
}

struct EmbedTrainOptions {
    DataOptions data;
    embed::TrainConfig train;
    std::string log;
    std::string model_out;
    std::string dataset_out;
};

int run_embed_train(const EmbedTrainOptions& o, const HeaderLines& header) {
    if (o.train.epochs < 1) throw InvalidInput("--epochs must be >= 1");
    if (!(o.train.learning_rate >= 0.0)) throw InvalidInput("--lr must be >= 0");
    const auto data = load_data(o.data);
    const auto result = embed::train(data, o.train);
    {
        auto out = open_output(o.log);
        embed::write_training_log_csv(out, result, header);
    }
    if (!o.model_out.empty()) write_model_json(o.model_out, result.model, header);
    if (!o.dataset_out.empty()) {
        auto out = open_output(o.dataset_out);
        out << embed::dataset_to_json(data);
    }
    std::cout << "initial_loss=" << format_real(result.history.front().loss) << '\n'
              << "final_loss=" << format_real(result.history.back().loss) << '\n'
              << "thetas=" << format_real(result.model.thetas[0]) << ',' << format_real(result.model.thetas[1]) << ','
              << format_real(result.model.thetas[2]) << '\n';
    return kExitOk;
}

struct EmbedGramOptions {
    DataOptions data;
    std::string model;
    std::vector<double> thetas;
    std::string mode = "exact";
    std::uint64_t shots = 100;
    std::uint64_t seed = 0;
    std::string output;
};

int run_embed_gram(const EmbedGramOptions& o, const HeaderLines& header) {
    if (o.mode != "exact" && o.mode != "sampled") throw InvalidInput("--mode must be exact or sampled");
    if (o.mode == "sampled" && o.shots == 0) throw InvalidInput("--shots must be >= 1");
    if (o.model.empty() == o.thetas.empty()) throw InvalidInput("give exactly one of --model or --thetas");
    if (!o.thetas.empty() && o.thetas.size() != 3) throw InvalidInput("--thetas needs three values");
    embed::EmbeddingModel model;
    if (!o.model.empty())
        model = read_model_json(o.model);
    else
        for (int k = 0; k < 3; ++k) model.thetas[k] = o.thetas[k];
    const auto data = load_data(o.data);
    const embed::GramMode mode =
        o.mode == "exact" ? embed::GramMode{embed::ExactOverlaps{}} : embed::GramMode{embed::SampledOverlaps{o.shots, o.seed}};
    const auto m = embed::gram(data, model, mode);
    {
        auto out = open_output(o.output);
        embed::write_gram_csv(out, m, header);
    }
    const auto blocks = embed::block_means(m, data.points());
    std::cout << "intra_mean=" << format_real(blocks.intra_mean) << '\n'
              << "inter_mean=" << format_real(blocks.inter_mean) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum maze walker and quantum-embedding classifier toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    MazeGenOptions maze_gen;
    auto* maze_cmd = app.add_subcommand("maze-gen", "Generate a perfect maze");
    maze_cmd->add_option("--width", maze_gen.width, "Cells per row (>= 2)")->required();
    maze_cmd->add_option("--height", maze_gen.height, "Rows (>= 2)")->required();
    maze_cmd->add_option("--seed", maze_gen.seed, "Generator seed")->required();
    maze_cmd->add_option("--exit", maze_gen.exit, "Exit node (default: upper-right cell)")->capture_default_str();
    maze_cmd->add_option("-o,--output", maze_gen.output, "Maze JSON output")->required();

    QswRunOptions qsw_run;
    auto* qsw_cmd = app.add_subcommand("qsw-run", "Evolve the walker on a maze and export the trajectory");
    add_walk_options(qsw_cmd, qsw_run.walk);
    qsw_cmd->add_option("--sample-every", qsw_run.sample_every, "Steps between CSV rows")->capture_default_str();
    qsw_cmd->add_option("-o,--output", qsw_run.output, "Trajectory CSV")->required();
    qsw_cmd->add_option("--snapshots", qsw_run.snapshots, "Optional JSON dump of full density matrices");

    RlTrainOptions rl_train;
    auto* rl_train_cmd = app.add_subcommand("rl-train", "Train a wall-toggling agent with tabular Q-learning");
    add_env_options(rl_train_cmd, rl_train.env);
    rl_train_cmd->add_option("--episodes", rl_train.episodes, "Training episodes")->capture_default_str();
    rl_train_cmd->add_option("--seed", rl_train.seed, "Exploration seed")->required();
    rl_train_cmd->add_option("--lr", rl_train.agent.learning_rate, "Q-learning rate")->capture_default_str();
    rl_train_cmd->add_option("--discount", rl_train.agent.discount, "Discount factor")->capture_default_str();
    rl_train_cmd->add_option("--eps-start", rl_train.agent.epsilon_start, "Initial epsilon")->capture_default_str();
    rl_train_cmd->add_option("--eps-end", rl_train.agent.epsilon_end, "Final epsilon")->capture_default_str();
    rl_train_cmd->add_option("--eps-decay", rl_train.agent.epsilon_decay_fraction, "Fraction of training spent decaying epsilon")
        ->capture_default_str();
    rl_train_cmd->add_option("--curve", rl_train.curve, "Learning-curve CSV")->required();
    rl_train_cmd->add_option("--policy", rl_train.policy, "Policy JSON")->required();

    RlEvalOptions rl_eval;
    auto* rl_eval_cmd = app.add_subcommand("rl-eval", "Compare a policy against the no-action baseline");
    add_env_options(rl_eval_cmd, rl_eval.env);
    rl_eval_cmd->add_option("--policy", rl_eval.policy, "Policy JSON (omit for the NoOp policy)");
    rl_eval_cmd->add_option("--runs", rl_eval.runs, "Greedy rollouts to average")->capture_default_str();
    rl_eval_cmd->add_option("-o,--output", rl_eval.output, "Optional report file");

    EmbedTrainOptions embed_train;
    auto* embed_train_cmd = app.add_subcommand("embed-train", "Train the embedding angles by gradient descent");
    add_data_options(embed_train_cmd, embed_train.data, 20);
    embed_train_cmd->add_option("--lr", embed_train.train.learning_rate, "Learning rate")->capture_default_str();
    embed_train_cmd->add_option("--epochs", embed_train.train.epochs, "Gradient steps")->capture_default_str();
    embed_train_cmd->add_option("--seed", embed_train.train.seed, "Initialization seed")->required();
    embed_train_cmd->add_option("--log", embed_train.log, "Training log CSV")->required();
    embed_train_cmd->add_option("--model-out", embed_train.model_out, "Trained angles as JSON");
    embed_train_cmd->add_option("--dataset-out", embed_train.dataset_out, "Training dataset as JSON");

    EmbedGramOptions embed_gram;
    auto* embed_gram_cmd = app.add_subcommand("embed-gram", "Gram matrix of embedded points");
    add_data_options(embed_gram_cmd, embed_gram.data, 5);
    embed_gram_cmd->add_option("--model", embed_gram.model, "Model JSON from embed-train");
    embed_gram_cmd->add_option("--thetas", embed_gram.thetas, "Three angles instead of --model")->delimiter(',');
    embed_gram_cmd->add_option("--mode", embed_gram.mode, "exact or sampled")->capture_default_str();
    embed_gram_cmd->add_option("--shots", embed_gram.shots, "SWAP-test shots per entry")->capture_default_str();
    embed_gram_cmd->add_option("--seed", embed_gram.seed, "Sampling seed")->capture_default_str();
    embed_gram_cmd->add_option("-o,--output", embed_gram.output, "Gram CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* failed = &app;
        for (const auto* sub : app.get_subcommands()) failed = sub;
        std::cerr << failed->help();
        return kExitConfig;
    }

    try {
        if (maze_cmd->parsed()) return run_maze_gen(maze_gen);
        if (qsw_cmd->parsed()) return run_qsw(qsw_run, resolved_config(*qsw_cmd));
        if (rl_train_cmd->parsed()) return run_rl_train(rl_train, resolved_config(*rl_train_cmd));
        if (rl_eval_cmd->parsed()) return run_rl_eval(rl_eval, resolved_config(*rl_eval_cmd));
        if (embed_train_cmd->parsed()) return run_embed_train(embed_train, resolved_config(*embed_train_cmd));
        if (embed_gram_cmd->parsed()) return run_embed_gram(embed_gram, resolved_config(*embed_gram_cmd));
    } catch (const IntegrationFailure& e) {
        std::cerr << "integration failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "invalid input file: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
