#pragma once

// Single-qubit data re-uploading embedding of a real scalar,
//
//   |x> = R_X(x) R_Y(t3) R_X(x) R_Y(t2) R_X(x) R_Y(t1) R_X(x) |0>,
//
// its pairwise overlaps (exact, or estimated with a sampled SWAP test), and
// gradient-descent training of (t1, t2, t3) so that same-class points overlap
// and different-class points do not.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qmlkit/core.hpp"

namespace qmlkit::embed {

using Qubit = PureState<double>;

enum class Label { A, B };

std::string to_string(Label label);
/// "A" or "B"; throws InvalidInput otherwise.
Label parse_label(const std::string& text);

struct LabeledPoint {
    double x;
    Label label;
};

/// At least one point of each class, all coordinates finite.
class LabeledDataset1D {
public:
    explicit LabeledDataset1D(std::vector<LabeledPoint> points);

    const std::vector<LabeledPoint>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    const LabeledPoint& operator[](std::size_t i) const { return points_[i]; }

private:
    std::vector<LabeledPoint> points_;
};

struct EmbeddingModel {
    std::array<double, 3> thetas{0.0, 0.0, 0.0};
};

Qubit embed(double x, const EmbeddingModel& model);

/// |<a|b>|^2
double overlap_exact(const Qubit& a, const Qubit& b);

/// Ancilla outcome-0 probability of the SWAP test on |0>|a>|b>, from a 3-qubit state-vector simulation.
double swap_test_probability_zero(const Qubit& a, const Qubit& b);

struct SwapTestSample {
    std::uint64_t shots;
    std::uint64_t zeros;
    /// max(0, 2 zeros / shots - 1)
    double estimate;
};

/// `shots` independent ancilla measurements. Throws InvalidInput when shots == 0.
SwapTestSample swap_test_sample(const Qubit& a, const Qubit& b, std::uint64_t shots, std::uint64_t seed);
double swap_test(const Qubit& a, const Qubit& b, std::uint64_t shots, std::uint64_t seed);

using GramMatrix = Eigen::MatrixXd;

struct ExactOverlaps {};
struct SampledOverlaps {
    std::uint64_t shots;
    std::uint64_t seed;
};
using GramMode = std::variant<ExactOverlaps, SampledOverlaps>;

/// Each unordered pair (i <= j) is evaluated once. Sampled mode seeds pair (i, j) from
/// child_seed(seed, i, j), so results do not depend on evaluation order.
GramMatrix gram(std::span<const double> xs, const EmbeddingModel& model, const GramMode& mode = ExactOverlaps{});
GramMatrix gram(const LabeledDataset1D& data, const EmbeddingModel& model, const GramMode& mode = ExactOverlaps{});

std::vector<double> coordinates(std::span<const LabeledPoint> points);

/// mean over same-class pairs of (1 - M_ij) + mean over cross-class pairs of M_ij.
/// A term with no contributing pairs is omitted.
double loss(const EmbeddingModel& model, std::span<const LabeledPoint> points);
double loss(const EmbeddingModel& model, const LabeledDataset1D& data);

/// dC/dtheta_k by the parameter-shift rule, shifting theta_k by +-pi/2 in each copy of the pair.
std::array<double, 3> gradient(const EmbeddingModel& model, std::span<const LabeledPoint> points);
std::array<double, 3> gradient(const EmbeddingModel& model, const LabeledDataset1D& data);

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 300;
    std::uint64_t seed = 0;
};

struct TrainingStep {
    int epoch;
    double loss;
    std::array<double, 3> thetas;
};

struct TrainResult {
    EmbeddingModel model;
    /// Entry e holds the loss and angles after e updates, e = 0..epochs.
    std::vector<TrainingStep> history;
};

/// Full-batch gradient descent from thetas drawn uniformly on [-pi, pi).
TrainResult train(const LabeledDataset1D& data, const TrainConfig& config);

/// Class whose training points have the larger mean overlap with x; ties go to A.
Label classify(double x, const EmbeddingModel& model, const LabeledDataset1D& training);

struct BlockSummary {
    double intra_mean;
    double inter_mean;
};
/// Mean off-diagonal same-class and cross-class entries of a Gram matrix.
BlockSummary block_means(const GramMatrix& m, std::span<const LabeledPoint> points);

struct SynthConfig {
    double inner_half_width = 1.0;  // class B on [-w, w]
    double outer_min = 1.5;         // class A on +-[outer_min, outer_max]
    double outer_max = 3.0;
};

/// n_per_class points of each class: B nested inside the two A intervals. Needs n_per_class >= 2.
LabeledDataset1D synth_dataset(int n_per_class, std::uint64_t seed, const SynthConfig& shape = {});

using HeaderLines = std::vector<std::pair<std::string, std::string>>;

/// JSON array of {"x": ..., "label": "A" | "B"}.
std::string dataset_to_json(const LabeledDataset1D& data);
/// Throws ParseError.
LabeledDataset1D dataset_from_json(const std::string& text);

/// `# key=value` header, then one CSV row per matrix row.
void write_gram_csv(std::ostream& os, const GramMatrix& m, const HeaderLines& header);
/// `# key=value` header, then `epoch,loss,theta1,theta2,theta3`.
void write_training_log_csv(std::ostream& os, const TrainResult& result, const HeaderLines& header);

}  // namespace qmlkit::embed
