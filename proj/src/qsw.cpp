#include "qmlkit/qsw.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "qmlkit/errors.hpp"

namespace qmlkit::qsw {

namespace {

constexpr double kTraceDriftLimit = 1e-6;

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void QSWParams::validate() const {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw InvalidInput("p must lie in [0, 1]");
    if (sink_enabled && (!std::isfinite(gamma) || gamma <= 0.0)) throw InvalidInput("gamma must be > 0");
    if (!std::isfinite(t_final) || t_final <= 0.0) throw InvalidInput("t_final must be > 0");
    if (!std::isfinite(dt) || dt <= 0.0 || dt > t_final) throw InvalidInput("dt must satisfy 0 < dt <= t_final");
}

Matrix JumpOperator::matrix(Eigen::Index dimension) const {
    Matrix m = Matrix::Zero(dimension, dimension);
    m(target, source) = coefficient;
    return m;
}

LindbladModel::LindbladModel(const maze::MazeGraph& maze, QSWParams params)
    : dimension_(maze.node_count() + 1), entrance_(maze.entrance()), exit_(maze.exit()),
      params_(params) {
    params_.validate();
    const int n = maze.node_count();
    const maze::NodeDegrees deg = maze::degrees(maze);

    hamiltonian_ = Matrix::Zero(dimension_, dimension_);
    hamiltonian_.topLeftCorner(n, n) = maze.adjacency().cast<std::complex<double>>();

    neighbours_.assign(static_cast<std::size_t>(dimension_), {});
    for (maze::Node i = 0; i < n; ++i)
        for (maze::Node j = 0; j < n; ++j)
            if (maze.linked(i, j)) {
                neighbours_[i].push_back(j);
                // d_j >= 1 whenever A_ij = 1, so an isolated column simply yields no operators.
                jumps_.push_back({i, j, 1.0 / static_cast<double>(deg(j))});
            }

    decay_ = Eigen::VectorXd::Zero(dimension_);
    for (const auto& l : jumps_) decay_(l.source) += params_.p * l.coefficient * l.coefficient;
    if (params_.sink_enabled) decay_(exit_) += 2.0 * params_.gamma;
    damping_ = -0.5 * (decay_.replicate(1, dimension_) + decay_.transpose().replicate(dimension_, 1));
}

LindbladModel build_model(const maze::MazeGraph& maze, const QSWParams& params) {
    return LindbladModel(maze, params);
}

namespace {

void require_dimension(const Matrix& rho, const LindbladModel& model) {
    if (rho.rows() != model.dimension() || rho.cols() != model.dimension())
        throw InvalidInput("lindblad_rhs: state dimension " + std::to_string(rho.rows()) + "x" +
                           std::to_string(rho.cols()) + " does not match model dimension " +
                           std::to_string(model.dimension()));
}

// out = drho/dt, exploiting H = A (0/1, sparse) and single-entry jump operators.
void evaluate_rhs(const Matrix& rho, const LindbladModel& model, Matrix& out) {
    const Eigen::Index d = model.dimension();
    const auto& params = model.params();
    const auto& nbr = model.neighbours();
    const auto& kappa = model.decay_rates();
    const std::complex<double> coherent(0.0, -(1.0 - params.p));
    const bool has_coherent = params.p < 1.0;

    for (Eigen::Index b = 0; b < d; ++b) {
        const auto& nb = nbr[b];
        for (Eigen::Index a = 0; a < d; ++a) {
            std::complex<double> v = -0.5 * (kappa(a) + kappa(b)) * rho(a, b);
            if (has_coherent) {
                std::complex<double> comm(0.0, 0.0);
                for (int k : nbr[a]) comm += rho(k, b);
                for (int k : nb) comm -= rho(a, k);
                v += coherent * comm;
            }
            out(a, b) = v;
        }
    }
    for (const auto& l : model.jump_operators())
        out(l.target, l.target) += params.p * l.coefficient * l.coefficient * rho(l.source, l.source);
    if (params.sink_enabled) out(model.sink(), model.sink()) += 2.0 * params.gamma * rho(model.exit(), model.exit());
}

// Same generator for Hermitian rho. Uses rho H = sum of neighbour columns and
// H rho = (rho H)^dagger; every term keeps the output exactly Hermitian.
void evaluate_rhs_hermitian(const Matrix& rho, const LindbladModel& model, Matrix& rho_h, Matrix& out) {
    const Eigen::Index d = model.dimension();
    const auto& params = model.params();
    const auto& nbr = model.neighbours();

    const Eigen::MatrixXd& damping = model.damping();
    const double c = 1.0 - params.p;
    if (c > 0.0) {
        for (Eigen::Index j = 0; j < d; ++j) {
            rho_h.col(j).setZero();
            for (int k : nbr[j]) rho_h.col(j) += rho.col(k);
        }
    }
    for (Eigen::Index b = 0; b < d; ++b)
        for (Eigen::Index a = 0; a <= b; ++a) {
            const std::complex<double> r = rho(a, b);
            double re = damping(a, b) * r.real(), im = damping(a, b) * r.imag();
            if (c > 0.0) {
                // -i c [H, rho]_ab with [H, rho] = (rho H)^dagger - rho H
                const std::complex<double> z = std::conj(rho_h(b, a)) - rho_h(a, b);
                re += c * z.imag();
                im -= c * z.real();
            }
            out(a, b) = {re, im};
            out(b, a) = {re, -im};
        }
    for (const auto& l : model.jump_operators())
        out(l.target, l.target) += params.p * l.coefficient * l.coefficient * rho(l.source, l.source);
    if (params.sink_enabled) out(model.sink(), model.sink()) += 2.0 * params.gamma * rho(model.exit(), model.exit());
}

}  // namespace

Matrix lindblad_rhs(const Matrix& rho, const LindbladModel& model) {
    require_dimension(rho, model);
    Matrix out(model.dimension(), model.dimension());
    evaluate_rhs(rho, model, out);
    return out;
}

Matrix lindblad_rhs(const State& rho, const LindbladModel& model) { return lindblad_rhs(rho.matrix(), model); }

Matrix lindblad_rhs_dense(const Matrix& rho, const LindbladModel& model) {
    require_dimension(rho, model);
    const Eigen::Index d = model.dimension();
    const auto& params = model.params();
    const std::complex<double> i(0.0, 1.0);

    Matrix out = -(1.0 - params.p) * i * commutator(model.hamiltonian(), rho);
    Matrix crw = Matrix::Zero(d, d);
    for (const auto& jump : model.jump_operators()) {
        const Matrix l = jump.matrix(d);
        const Matrix ld = dagger(l);
        crw += l * rho * ld - 0.5 * anticommutator(ld * l, rho);
    }
    out += params.p * crw;
    if (params.sink_enabled) {
        const Matrix s_n = PureStated::basis(d, model.sink()).amplitudes() *
                           PureStated::basis(d, model.exit()).amplitudes().adjoint();
        const Matrix n_n = dagger(s_n) * s_n;
        out += params.gamma * (2.0 * s_n * rho * dagger(s_n) - anticommutator(n_n, rho));
    }
    return out;
}

State initial_state(const LindbladModel& model) {
    return State::pure(PureStated::basis(model.dimension(), model.entrance()));
}

Propagator::Propagator(Eigen::Index dimension)
    : k1_(dimension, dimension), k2_(dimension, dimension), k3_(dimension, dimension),
      k4_(dimension, dimension), tmp_(dimension, dimension), hrho_(dimension, dimension) {}

void Propagator::rhs_into(const Matrix& rho, const LindbladModel& model, Matrix& out) {
    evaluate_rhs_hermitian(rho, model, hrho_, out);
}

void Propagator::step(Matrix& rho, const LindbladModel& model, double h) {
    require_dimension(rho, model);
    if (k1_.rows() != model.dimension()) throw InvalidInput("Propagator: workspace dimension mismatch");
    rhs_into(rho, model, k1_);
    tmp_ = rho + (0.5 * h) * k1_;
    rhs_into(tmp_, model, k2_);
    tmp_ = rho + (0.5 * h) * k2_;
    rhs_into(tmp_, model, k3_);
    tmp_ = rho + h * k3_;
    rhs_into(tmp_, model, k4_);
    rho += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
}

std::size_t step_count(double duration, double dt) {
    if (duration <= 0.0) return 0;
    const double ratio = duration / dt;
    const auto full = static_cast<std::size_t>(std::floor(ratio + 1e-9));
    const double rest = duration - static_cast<double>(full) * dt;
    return full + (rest > 1e-12 * duration ? 1 : 0);
}

namespace {

void check_step(const Matrix& rho, std::size_t step) {
    const std::complex<double> tr = rho.trace();
    if (!std::isfinite(tr.real()) || !std::isfinite(tr.imag()) || !all_finite(rho))
        throw IntegrationFailure(step, "non-finite state");
    const double drift = std::abs(tr - 1.0);
    if (drift > kTraceDriftLimit)
        throw IntegrationFailure(step, "trace drift " + format_real(drift) + " exceeds 1e-6; reduce dt");
}

}  // namespace

std::size_t Propagator::advance(Matrix& rho, const LindbladModel& model, double duration, std::size_t step_offset) {
    const double dt = model.params().dt;
    const std::size_t steps = step_count(duration, dt);
    for (std::size_t k = 0; k < steps; ++k) {
        const double h = (k + 1 < steps) ? dt : duration - static_cast<double>(steps - 1) * dt;
        step(rho, model, h);
        check_step(rho, step_offset + k + 1);
    }
    return steps;
}

Trajectory evolve(const State& rho0, const LindbladModel& model, std::size_t sample_every) {
    if (rho0.dimension() != model.dimension()) throw InvalidInput("evolve: initial state dimension mismatch");
    if (sample_every == 0) throw InvalidInput("evolve: sample_every must be >= 1");

    const double dt = model.params().dt;
    const double t_final = model.params().t_final;
    const std::size_t steps = step_count(t_final, dt);
    const auto sink = model.sink();
    const auto exit = model.exit();

    Trajectory traj;
    traj.times.reserve(steps + 1);
    traj.p_sink_series.reserve(steps + 1);
    traj.exit_population.reserve(steps + 1);

    Matrix rho = rho0.matrix();
    Propagator prop(model.dimension());
    auto record = [&](std::size_t k, double t) {
        traj.times.push_back(t);
        traj.p_sink_series.push_back(rho(sink, sink).real());
        traj.exit_population.push_back(rho(exit, exit).real());
        if (k % sample_every == 0 || k == steps) {
            try {
                traj.snapshots.push_back({k, t, State(rho, propagation_tolerances())});
            } catch (const InvalidInput& e) {
                throw IntegrationFailure(k, e.what());
            }
        }
    };

    record(0, 0.0);
    for (std::size_t k = 1; k <= steps; ++k) {
        const double h = (k < steps) ? dt : t_final - static_cast<double>(steps - 1) * dt;
        prop.step(rho, model, h);
        check_step(rho, k);
        record(k, k < steps ? static_cast<double>(k) * dt : t_final);
    }
    return traj;
}

std::vector<double> p_sink_from_integral(const Trajectory& traj, const LindbladModel& model) {
    if (traj.times.empty()) throw InvalidInput("p_sink_from_integral: empty trajectory");
    if (traj.exit_population.size() != traj.times.size())
        throw InvalidInput("p_sink_from_integral: exit population series does not match time grid");
    const double rate = model.params().sink_enabled ? 2.0 * model.params().gamma : 0.0;
    std::vector<double> out(traj.times.size(), 0.0);
    for (std::size_t k = 1; k < traj.times.size(); ++k) {
        const double h = traj.times[k] - traj.times[k - 1];
        out[k] = out[k - 1] + rate * 0.5 * h * (traj.exit_population[k] + traj.exit_population[k - 1]);
    }
    return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const HeaderLines& header) {
    for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
    const Eigen::Index d = traj.snapshots.empty() ? 0 : traj.snapshots.front().state.dimension();
    os << "t,p_sink";
    for (Eigen::Index i = 0; i < d; ++i) os << ",pop_" << i;
    os << '\n';
    for (const auto& snap : traj.snapshots) {
        const auto pops = snap.state.populations();
        os << format_real(snap.time) << ',' << format_real(pops(d - 1));
        for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_real(pops(i));
        os << '\n';
    }
}

void write_snapshots_json(std::ostream& os, const Trajectory& traj, const HeaderLines& header) {
    nlohmann::ordered_json doc;
    auto& config = doc["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : header) config[k] = v;
    auto& snaps = doc["snapshots"] = nlohmann::ordered_json::array();
    for (const auto& snap : traj.snapshots) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        const auto& m = snap.state.matrix();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
            rows.push_back(std::move(row));
        }
        snaps.push_back({{"step", snap.step}, {"t", snap.time}, {"rho", std::move(rows)}});
    }
    os << doc.dump() << '\n';
}

}  // namespace qmlkit::qsw
