#pragma once

// Dense complex linear algebra and quantum-state primitives.
//
// Everything here is header-only and templated on the real scalar type so the
// same code serves double (the default everywhere else) and long double when a
// test wants a tighter reference.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "qmlkit/errors.hpp"

namespace qmlkit {

template <typename Real>
using ComplexMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
using RealMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using ComplexMatrixd = ComplexMatrix<double>;
using ComplexVectord = ComplexVector<double>;

namespace detail {

template <typename DerivedA, typename DerivedB>
void require_same_square(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                         const char* op) {
    if (a.rows() != a.cols() || b.rows() != b.cols())
        throw InvalidInput(std::string(op) + ": operands must be square");
    if (a.rows() != b.rows())
        throw InvalidInput(std::string(op) + ": dimension mismatch (" + std::to_string(a.rows()) +
                           " vs " + std::to_string(b.rows()) + ")");
}

template <typename DerivedA, typename DerivedB>
using ProductPlain = ComplexMatrix<typename DerivedA::RealScalar>;

}  // namespace detail

/// Tolerances used when validating a density matrix.
template <typename Real>
struct StateTolerances {
    Real hermiticity;
    Real trace;
    Real min_eigenvalue;  // most negative eigenvalue accepted, as a magnitude
};

/// Strict tolerances applied when a state is built directly.
template <typename Real = double>
constexpr StateTolerances<Real> construction_tolerances() {
    return {Real(1e-10), Real(1e-8), Real(1e-8)};
}

/// Looser tolerances for states that come out of numerical propagation.
template <typename Real = double>
constexpr StateTolerances<Real> propagation_tolerances() {
    return {Real(1e-8), Real(1e-6), Real(1e-6)};
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const auto z = m(i, j);
            if (!std::isfinite(std::real(z)) || !std::isfinite(std::imag(z))) return false;
        }
    return true;
}

template <typename Derived>
typename Derived::PlainObject dagger(const Eigen::MatrixBase<Derived>& a) {
    return a.adjoint();
}

/// ab - ba
template <typename DerivedA, typename DerivedB>
detail::ProductPlain<DerivedA, DerivedB> commutator(const Eigen::MatrixBase<DerivedA>& a,
                                                    const Eigen::MatrixBase<DerivedB>& b) {
    detail::require_same_square(a, b, "commutator");
    detail::ProductPlain<DerivedA, DerivedB> out = a * b;
    out.noalias() -= b * a;
    return out;
}

/// ab + ba
template <typename DerivedA, typename DerivedB>
detail::ProductPlain<DerivedA, DerivedB> anticommutator(const Eigen::MatrixBase<DerivedA>& a,
                                                        const Eigen::MatrixBase<DerivedB>& b) {
    detail::require_same_square(a, b, "anticommutator");
    detail::ProductPlain<DerivedA, DerivedB> out = a * b;
    out.noalias() += b * a;
    return out;
}

/// max_ij |m - m^dagger|_ij
template <typename Derived>
typename Derived::RealScalar hermiticity_error(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols()) throw InvalidInput("hermiticity_error: matrix must be square");
    if (m.size() == 0) return 0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of a Hermitian matrix.
template <typename Derived>
typename Derived::RealScalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
    using Real = typename Derived::RealScalar;
    if (m.rows() != m.cols() || m.rows() == 0)
        throw InvalidInput("min_eigenvalue: matrix must be square and non-empty");
    if (!all_finite(m)) throw InvalidInput("min_eigenvalue: non-finite entries");
    if (hermiticity_error(m) > Real(1e-10)) throw InvalidInput("min_eigenvalue: matrix is not Hermitian");
    const ComplexMatrix<Real> h = m.template cast<std::complex<Real>>();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<Real>> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

namespace detail {

template <typename Real>
Real checked_half_angle(Real angle, const char* op) {
    if (!std::isfinite(angle)) throw InvalidInput(std::string(op) + ": angle must be finite");
    return angle / Real(2);
}

}  // namespace detail

/// exp(-i angle X / 2)
template <typename Real = double>
ComplexMatrix<Real> rotation_x(Real angle) {
    const Real half = detail::checked_half_angle(angle, "rotation_x");
    const std::complex<Real> c(std::cos(half), 0), s(0, -std::sin(half));
    ComplexMatrix<Real> r(2, 2);
    r << c, s, s, c;
    return r;
}

/// exp(-i angle Y / 2)
template <typename Real = double>
ComplexMatrix<Real> rotation_y(Real angle) {
    const Real half = detail::checked_half_angle(angle, "rotation_y");
    const Real c = std::cos(half), s = std::sin(half);
    ComplexMatrix<Real> r(2, 2);
    r << c, -s, s, c;
    return r;
}

template <typename Real = double>
ComplexMatrix<Real> pauli_x() {
    ComplexMatrix<Real> m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

template <typename Real = double>
ComplexMatrix<Real> pauli_y() {
    using C = std::complex<Real>;
    ComplexMatrix<Real> m(2, 2);
    m << C(0), C(0, -1), C(0, 1), C(0);
    return m;
}

template <typename Real = double>
ComplexMatrix<Real> pauli_z() {
    ComplexMatrix<Real> m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

/// Normalized state vector. Construction rejects anything whose norm is off by more than 1e-10.
template <typename Real = double>
class PureState {
public:
    using Vector = ComplexVector<Real>;

    explicit PureState(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
        if (amplitudes_.size() == 0) throw InvalidInput("PureState: empty amplitude vector");
        if (!all_finite(amplitudes_)) throw InvalidInput("PureState: non-finite amplitude");
        if (std::abs(amplitudes_.norm() - Real(1)) > Real(1e-10))
            throw InvalidInput("PureState: amplitudes are not normalized");
    }

    static PureState basis(Eigen::Index dimension, Eigen::Index index) {
        if (index < 0 || index >= dimension) throw InvalidInput("PureState::basis: index out of range");
        Vector v = Vector::Zero(dimension);
        v(index) = Real(1);
        return PureState(std::move(v));
    }

    const Vector& amplitudes() const noexcept { return amplitudes_; }
    Eigen::Index dimension() const noexcept { return amplitudes_.size(); }
    std::complex<Real> operator()(Eigen::Index i) const { return amplitudes_(i); }

    /// <this|other>
    std::complex<Real> inner(const PureState& other) const {
        if (other.dimension() != dimension()) throw InvalidInput("PureState::inner: dimension mismatch");
        return amplitudes_.dot(other.amplitudes_);
    }

private:
    Vector amplitudes_;
};

/// Hermitian, positive semidefinite, unit-trace matrix.
template <typename Real = double>
class DensityMatrix {
public:
    using Matrix = ComplexMatrix<Real>;

    explicit DensityMatrix(Matrix m, StateTolerances<Real> tol = construction_tolerances<Real>())
        : matrix_(std::move(m)) {
        validate(tol);
    }

    static DensityMatrix pure(const PureState<Real>& psi) {
        return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
    }

    const Matrix& matrix() const noexcept { return matrix_; }
    Eigen::Index dimension() const noexcept { return matrix_.rows(); }
    std::complex<Real> operator()(Eigen::Index i, Eigen::Index j) const { return matrix_(i, j); }

    Real trace() const { return std::real(matrix_.trace()); }
    Real purity() const { return std::real((matrix_ * matrix_).trace()); }
    RealVector<Real> populations() const { return matrix_.diagonal().real(); }

private:
    void validate(const StateTolerances<Real>& tol) const {
        if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols())
            throw InvalidInput("DensityMatrix: matrix must be square and non-empty");
        if (!all_finite(matrix_)) throw InvalidInput("DensityMatrix: non-finite entries");
        const Real herm = hermiticity_error(matrix_);
        if (herm > tol.hermiticity)
            throw InvalidInput("DensityMatrix: not Hermitian (error " + std::to_string(herm) + ")");
        const Real tr_err = std::abs(std::real(matrix_.trace()) - Real(1));
        if (tr_err > tol.trace)
            throw InvalidInput("DensityMatrix: trace deviates from 1 by " + std::to_string(tr_err));
        // Symmetrize before the eigensolve so the check above owns the Hermiticity tolerance.
        const Matrix sym = (matrix_ + matrix_.adjoint()) / Real(2);
        const Real lo = min_eigenvalue(sym);
        if (lo < -tol.min_eigenvalue)
            throw InvalidInput("DensityMatrix: not positive semidefinite (min eigenvalue " +
                               std::to_string(lo) + ")");
    }

    Matrix matrix_;
};

using PureStated = PureState<double>;
using DensityMatrixd = DensityMatrix<double>;

}  // namespace qmlkit
