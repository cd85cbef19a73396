#pragma once

// Quantum stochastic walk on a maze, with an absorbing sink attached to the exit.
//
//   drho/dt = -(1-p) i[H, rho] + p L_crw(rho) + L_sink(rho)
//
// H is the adjacency matrix, L_crw is built from jump operators
// L_ij = (A_ij / d_j)|i><j| and L_sink moves population from the exit node n to
// the sink S at rate gamma. The sink is an explicit basis state (index N), so
// the generator is trace preserving and p_sink(t) is simply rho_SS(t).

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qmlkit/core.hpp"
#include "qmlkit/maze.hpp"

namespace qmlkit::qsw {

using Matrix = ComplexMatrix<double>;
using State = DensityMatrix<double>;

struct QSWParams {
    double p = 0.8;
    double gamma = 1.0;
    double dt = 0.005;
    double t_final = 10.0;
    /// Closed-system validation mode: drop the sink dissipator entirely (gamma is ignored).
    bool sink_enabled = true;

    /// Throws InvalidInput on any out-of-range field.
    void validate() const;
};

/// L = coefficient |target><source|
struct JumpOperator {
    maze::Node target;
    maze::Node source;
    double coefficient;

    /// Dense dimension x dimension form.
    Matrix matrix(Eigen::Index dimension) const;
};

class LindbladModel {
public:
    LindbladModel(const maze::MazeGraph& maze, QSWParams params);

    Eigen::Index dimension() const noexcept { return dimension_; }
    Eigen::Index sink() const noexcept { return dimension_ - 1; }
    maze::Node exit() const noexcept { return exit_; }
    maze::Node entrance() const noexcept { return entrance_; }
    const QSWParams& params() const noexcept { return params_; }
    const Matrix& hamiltonian() const noexcept { return hamiltonian_; }
    const std::vector<JumpOperator>& jump_operators() const noexcept { return jumps_; }

    /// Nodes linked to each node; the sink has none.
    const std::vector<std::vector<int>>& neighbours() const noexcept { return neighbours_; }
    /// Diagonal decay rates: p * sum_i c_ij^2 + 2 gamma [j == exit].
    const Eigen::VectorXd& decay_rates() const noexcept { return decay_; }
    /// -(kappa_a + kappa_b) / 2, the factor multiplying rho_ab in the dissipators.
    const Eigen::MatrixXd& damping() const noexcept { return damping_; }

private:
    Eigen::Index dimension_;
    maze::Node entrance_;
    maze::Node exit_;
    QSWParams params_;
    Matrix hamiltonian_;
    std::vector<JumpOperator> jumps_;
    std::vector<std::vector<int>> neighbours_;
    Eigen::VectorXd decay_;
    Eigen::MatrixXd damping_;
};

LindbladModel build_model(const maze::MazeGraph& maze, const QSWParams& params);

/// drho/dt. Works on any square matrix of the model dimension, not only valid states.
Matrix lindblad_rhs(const Matrix& rho, const LindbladModel& model);
Matrix lindblad_rhs(const State& rho, const LindbladModel& model);

/// Same generator evaluated literally with dense matrix products over every jump operator.
/// Slow; kept as a second route for cross-checking lindblad_rhs.
Matrix lindblad_rhs_dense(const Matrix& rho, const LindbladModel& model);

/// |entrance><entrance| in the (N+1)-dimensional space.
State initial_state(const LindbladModel& model);

/// Fixed-step RK4 stepper with reusable workspace.
class Propagator {
public:
    explicit Propagator(Eigen::Index dimension);

    /// Advances rho in place by `duration` using steps of model.params().dt; the final step
    /// is shortened to land exactly on the horizon. Throws IntegrationFailure (with the
    /// global step index, offset by `step_offset`) when the trace drifts by more than 1e-6
    /// or a non-finite entry appears. Returns the number of steps taken.
    std::size_t advance(Matrix& rho, const LindbladModel& model, double duration, std::size_t step_offset = 0);

    /// One RK4 step of size h. rho must be Hermitian; the update keeps it exactly Hermitian.
    void step(Matrix& rho, const LindbladModel& model, double h);

private:
    void rhs_into(const Matrix& rho, const LindbladModel& model, Matrix& out);

    Matrix k1_, k2_, k3_, k4_, tmp_, hrho_;
};

struct Snapshot {
    std::size_t step;
    double time;
    State state;
};

struct Trajectory {
    /// Per integration step, starting at t = 0.
    std::vector<double> times;
    std::vector<double> p_sink_series;    // rho_SS
    std::vector<double> exit_population;  // rho_nn
    /// Full states every `sample_every` steps, plus the final step.
    std::vector<Snapshot> snapshots;
};

/// Integrates from t = 0 to params.t_final.
Trajectory evolve(const State& rho0, const LindbladModel& model, std::size_t sample_every = 1);

/// p_sink(t) = 2 gamma * integral_0^t rho_nn, by the trapezoid rule over the trajectory's step grid.
std::vector<double> p_sink_from_integral(const Trajectory& traj, const LindbladModel& model);

/// Number of integration steps to cover `duration` at step `dt`, counting a shortened last step.
std::size_t step_count(double duration, double dt);

using HeaderLines = std::vector<std::pair<std::string, std::string>>;

/// `# key=value` header lines, then `t,p_sink,pop_0,...,pop_N` with one row per snapshot.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const HeaderLines& header);

/// Snapshots as JSON: {"config": {...}, "snapshots": [{"step", "t", "rho": [[[re, im], ...], ...]}]}.
void write_snapshots_json(std::ostream& os, const Trajectory& traj, const HeaderLines& header);

}  // namespace qmlkit::qsw
