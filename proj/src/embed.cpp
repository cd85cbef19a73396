#include "qmlkit/embed.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "qmlkit/errors.hpp"
#include "qmlkit/random.hpp"

namespace qmlkit::embed {

namespace {

using Vec2 = ComplexVector<double>;

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string to_string(Label label) { return label == Label::A ? "A" : "B"; }

Label parse_label(const std::string& text) {
    if (text == "A") return Label::A;
    if (text == "B") return Label::B;
    throw InvalidInput("label must be \"A\" or \"B\", got \"" + text + "\"");
}

LabeledDataset1D::LabeledDataset1D(std::vector<LabeledPoint> points) : points_(std::move(points)) {
    bool has_a = false, has_b = false;
    for (const auto& p : points_) {
        if (!std::isfinite(p.x)) throw InvalidInput("dataset: non-finite coordinate");
        (p.label == Label::A ? has_a : has_b) = true;
    }
    if (!has_a || !has_b) throw InvalidInput("dataset: both classes need at least one point");
}

Qubit embed(double x, const EmbeddingModel& model) {
    if (!std::isfinite(x)) throw InvalidInput("embed: x must be finite");
    const ComplexMatrixd rx = rotation_x(x);
    Vec2 psi = Vec2::Zero(2);
    psi(0) = 1.0;
    psi = rx * psi;
    for (double theta : model.thetas) {
        psi = rotation_y(theta) * psi;
        psi = rx * psi;
    }
    return Qubit(std::move(psi));
}

// Clamped: rounding can push |<a|a>|^2 a few ulps past 1.
double overlap_exact(const Qubit& a, const Qubit& b) { return std::clamp(std::norm(a.inner(b)), 0.0, 1.0); }

double swap_test_probability_zero(const Qubit& a, const Qubit& b) {
    if (a.dimension() != 2 || b.dimension() != 2) throw InvalidInput("swap_test: single-qubit states expected");
    // Basis index = 4 * ancilla + 2 * qubit_a + qubit_b.
    Eigen::Matrix<std::complex<double>, 8, 1> psi = Eigen::Matrix<std::complex<double>, 8, 1>::Zero();
    for (int qa = 0; qa < 2; ++qa)
        for (int qb = 0; qb < 2; ++qb) psi(2 * qa + qb) = a(qa) * b(qb);

    const double r = std::numbers::sqrt2 / 2.0;
    auto hadamard_ancilla = [r](auto& v) {
        for (int k = 0; k < 4; ++k) {
            const auto lo = v(k), hi = v(4 + k);
            v(k) = r * (lo + hi);
            v(4 + k) = r * (lo - hi);
        }
    };
    hadamard_ancilla(psi);
    std::swap(psi(4 + 1), psi(4 + 2));  // controlled SWAP: |1,0,1> <-> |1,1,0>
    hadamard_ancilla(psi);

    double p0 = 0.0;
    for (int k = 0; k < 4; ++k) p0 += std::norm(psi(k));
    return std::clamp(p0, 0.0, 1.0);
}

SwapTestSample swap_test_sample(const Qubit& a, const Qubit& b, std::uint64_t shots, std::uint64_t seed) {
    if (shots == 0) throw InvalidInput("swap_test: shots must be >= 1");
    const double p0 = swap_test_probability_zero(a, b);
    Rng rng(seed);
    std::uint64_t zeros = 0;
    for (std::uint64_t s = 0; s < shots; ++s) zeros += rng.bernoulli(p0) ? 1 : 0;
    const double estimate = std::max(0.0, 2.0 * static_cast<double>(zeros) / static_cast<double>(shots) - 1.0);
    return {shots, zeros, estimate};
}

double swap_test(const Qubit& a, const Qubit& b, std::uint64_t shots, std::uint64_t seed) {
    return swap_test_sample(a, b, shots, seed).estimate;
}

GramMatrix gram(std::span<const double> xs, const EmbeddingModel& model, const GramMode& mode) {
    if (xs.empty()) throw InvalidInput("gram: empty dataset");
    std::vector<Qubit> states;
    states.reserve(xs.size());
    for (double x : xs) states.push_back(embed(x, model));

    const auto n = static_cast<Eigen::Index>(xs.size());
    GramMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            double v;
            if (const auto* sampled = std::get_if<SampledOverlaps>(&mode))
                v = swap_test(states[i], states[j], sampled->shots,
                              child_seed(sampled->seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)));
            else
                v = i == j ? 1.0 : overlap_exact(states[i], states[j]);
            m(i, j) = m(j, i) = v;
        }
    return m;
}

std::vector<double> coordinates(std::span<const LabeledPoint> points) {
    std::vector<double> xs;
    xs.reserve(points.size());
    for (const auto& p : points) xs.push_back(p.x);
    return xs;
}

GramMatrix gram(const LabeledDataset1D& data, const EmbeddingModel& model, const GramMode& mode) {
    return gram(coordinates(data.points()), model, mode);
}

namespace {

struct PairTerms {
    double same_weight = 0.0;   // 1 / #same-class pairs, or 0
    double cross_weight = 0.0;  // 1 / #cross-class pairs, or 0
};

PairTerms pair_weights(std::span<const LabeledPoint> points) {
    std::size_t same = 0, cross = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) (points[i].label == points[j].label ? same : cross) += 1;
    return {same ? 1.0 / static_cast<double>(same) : 0.0, cross ? 1.0 / static_cast<double>(cross) : 0.0};
}

}  // namespace

double loss(const EmbeddingModel& model, std::span<const LabeledPoint> points) {
    std::vector<Qubit> states;
    states.reserve(points.size());
    for (const auto& p : points) states.push_back(embed(p.x, model));
    const PairTerms w = pair_weights(points);
    double same = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double m = overlap_exact(states[i], states[j]);
            if (points[i].label == points[j].label)
                same += 1.0 - m;
            else
                cross += m;
        }
    return w.same_weight * same + w.cross_weight * cross;
}

double loss(const EmbeddingModel& model, const LabeledDataset1D& data) { return loss(model, data.points()); }

std::array<double, 3> gradient(const EmbeddingModel& model, std::span<const LabeledPoint> points) {
    constexpr double kShift = std::numbers::pi / 2.0;
    const std::size_t n = points.size();

    // Unshifted embeddings and, per parameter, the +pi/2 and -pi/2 shifted ones.
    std::vector<Qubit> base;
    std::array<std::vector<Qubit>, 3> plus, minus;
    base.reserve(n);
    for (const auto& p : points) base.push_back(embed(p.x, model));
    for (int k = 0; k < 3; ++k) {
        EmbeddingModel up = model, down = model;
        up.thetas[k] += kShift;
        down.thetas[k] -= kShift;
        plus[k].reserve(n);
        minus[k].reserve(n);
        for (const auto& p : points) {
            plus[k].push_back(embed(p.x, up));
            minus[k].push_back(embed(p.x, down));
        }
    }

    const PairTerms w = pair_weights(points);
    std::array<double, 3> grad{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            // dC/dM_ij
            const double weight = points[i].label == points[j].label ? -w.same_weight : w.cross_weight;
            for (int k = 0; k < 3; ++k) {
                const double d_first = 0.5 * (overlap_exact(plus[k][i], base[j]) - overlap_exact(minus[k][i], base[j]));
                const double d_second = 0.5 * (overlap_exact(base[i], plus[k][j]) - overlap_exact(base[i], minus[k][j]));
                grad[k] += weight * (d_first + d_second);
            }
        }
    return grad;
}

std::array<double, 3> gradient(const EmbeddingModel& model, const LabeledDataset1D& data) {
    return gradient(model, data.points());
}

TrainResult train(const LabeledDataset1D& data, const TrainConfig& config) {
    if (config.epochs < 1) throw InvalidInput("train: epochs must be >= 1");
    if (!std::isfinite(config.learning_rate) || config.learning_rate < 0.0)
        throw InvalidInput("train: learning rate must be finite and non-negative");

    Rng rng(config.seed);
    TrainResult result;
    for (double& t : result.model.thetas) t = rng.uniform(-std::numbers::pi, std::numbers::pi);

    result.history.reserve(static_cast<std::size_t>(config.epochs) + 1);
    result.history.push_back({0, loss(result.model, data), result.model.thetas});
    for (int e = 1; e <= config.epochs; ++e) {
        const auto g = gradient(result.model, data);
        for (int k = 0; k < 3; ++k) result.model.thetas[k] -= config.learning_rate * g[k];
        result.history.push_back({e, loss(result.model, data), result.model.thetas});
    }
    return result;
}

Label classify(double x, const EmbeddingModel& model, const LabeledDataset1D& training) {
    const Qubit psi = embed(x, model);
    double sum_a = 0.0, sum_b = 0.0;
    std::size_t n_a = 0, n_b = 0;
    for (const auto& p : training.points()) {
        const double m = overlap_exact(psi, embed(p.x, model));
        if (p.label == Label::A) {
            sum_a += m;
            ++n_a;
        } else {
            sum_b += m;
            ++n_b;
        }
    }
    return sum_a / static_cast<double>(n_a) >= sum_b / static_cast<double>(n_b) ? Label::A : Label::B;
}

BlockSummary block_means(const GramMatrix& m, std::span<const LabeledPoint> points) {
    if (m.rows() != static_cast<Eigen::Index>(points.size()) || m.cols() != m.rows())
        throw InvalidInput("block_means: matrix does not match the point list");
    double intra = 0.0, inter = 0.0;
    std::size_t n_intra = 0, n_inter = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            if (points[i].label == points[j].label) {
                intra += m(i, j);
                ++n_intra;
            } else {
                inter += m(i, j);
                ++n_inter;
            }
        }
    return {n_intra ? intra / static_cast<double>(n_intra) : 0.0, n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

LabeledDataset1D synth_dataset(int n_per_class, std::uint64_t seed, const SynthConfig& shape) {
    if (n_per_class < 2) throw InvalidInput("synth_dataset: n_per_class must be >= 2");
    if (!(shape.inner_half_width > 0.0 && shape.outer_min > shape.inner_half_width && shape.outer_max > shape.outer_min))
        throw InvalidInput("synth_dataset: need 0 < inner_half_width < outer_min < outer_max");
    Rng rng(seed);
    std::vector<LabeledPoint> points;
    points.reserve(2 * static_cast<std::size_t>(n_per_class));
    const int negative = (n_per_class + 1) / 2;
    for (int k = 0; k < n_per_class; ++k) {
        const double magnitude = rng.uniform(shape.outer_min, shape.outer_max);
        points.push_back({k < negative ? -magnitude : magnitude, Label::A});
    }
    for (int k = 0; k < n_per_class; ++k)
        points.push_back({rng.uniform(-shape.inner_half_width, shape.inner_half_width), Label::B});
    return LabeledDataset1D(std::move(points));
}

std::string dataset_to_json(const LabeledDataset1D& data) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& p : data.points()) doc.push_back({{"x", p.x}, {"label", to_string(p.label)}});
    return doc.dump(1) + "\n";
}

LabeledDataset1D dataset_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("byte " + std::to_string(e.byte), "malformed JSON");
    }
    if (!doc.is_array()) throw ParseError("/", "expected an array of {x, label}");
    std::vector<LabeledPoint> points;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const std::string loc = "/" + std::to_string(k);
        const auto& item = doc[k];
        if (!item.is_object() || !item.contains("x") || !item["x"].is_number())
            throw ParseError(loc + "/x", "expected a number");
        if (!item.contains("label") || !item["label"].is_string()) throw ParseError(loc + "/label", "expected \"A\" or \"B\"");
        try {
            points.push_back({item["x"].get<double>(), parse_label(item["label"].get<std::string>())});
        } catch (const InvalidInput& e) {
            throw ParseError(loc + "/label", e.what());
        }
    }
    try {
        return LabeledDataset1D(std::move(points));
    } catch (const InvalidInput& e) {
        throw ParseError("/", e.what());
    }
}

void write_gram_csv(std::ostream& os, const GramMatrix& m, const HeaderLines& header) {
    for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_real(m(i, j));
        os << '\n';
    }
}

void write_training_log_csv(std::ostream& os, const TrainResult& result, const HeaderLines& header) {
    for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
    os << "epoch,loss,theta1,theta2,theta3\n";
    for (const auto& step : result.history)
        os << step.epoch << ',' << format_real(step.loss) << ',' << format_real(step.thetas[0]) << ','
           << format_real(step.thetas[1]) << ',' << format_real(step.thetas[2]) << '\n';
}

}  // namespace qmlkit::embed
