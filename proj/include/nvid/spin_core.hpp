#pragma once

// Dense complex-Hermitian algebra for the 3-dimensional (single spin-1) and
// 9-dimensional (electron spin-1 x nuclear spin-1) state spaces.
//
// Basis ordering: m = +1, 0, -1 for a single spin; for the product space the
// electron projection mS is the slow index, i.e. index = 3*(1 - mS) + (1 - mI).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "nvid/errors.hpp"

namespace nvid {

constexpr int kSpinDim = 3;
constexpr int kProductDim = 9;

template <typename Real>
using Complex = std::complex<Real>;

// Stack-allocated, at most 9x9.
template <typename Real>
using HermitianMatrix = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                                      kProductDim, kProductDim>;

template <typename Real>
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1, Eigen::ColMajor, kProductDim, 1>;

using HermitianMatrixd = HermitianMatrix<double>;

struct BasisLabel {
	int mS = 0;
	int mI = 0; // unused (0) for single-spin labels

	friend bool operator==(const BasisLabel&, const BasisLabel&) = default;
};

constexpr int spin_index(int m) { return 1 - m; }

constexpr int product_index(int mS, int mI) { return 3 * (1 - mS) + (1 - mI); }

constexpr BasisLabel product_label(int index) { return {1 - index / 3, 1 - index % 3}; }

inline std::string to_string(const BasisLabel& b)
{
	return "|" + std::to_string(b.mS) + "," + std::to_string(b.mI) + ">";
}

template <typename Real>
struct SpinOperators {
	HermitianMatrix<Real> x;
	HermitianMatrix<Real> y;
	HermitianMatrix<Real> z;
};

template <typename Real>
struct EigenSystem {
	RealVector<Real> values;
	HermitianMatrix<Real> vectors; // column j pairs with values(j)
	std::vector<BasisLabel> labels; // empty until label_states
	std::vector<Real> overlaps;     // |<label_j|v_j>|^2
	int sweeps = 0;

	Eigen::Index dim() const { return values.size(); }

	// Eigenvalue of the labelled state |mS,mI>; requires labels in basis order.
	Real energy(int mS, int mI) const { return values(product_index(mS, mI)); }
};

template <typename Real = double>
SpinOperators<Real> spin1_operators()
{
	using C = Complex<Real>;
	const Real r = Real(1) / std::sqrt(Real(2));
	const C i(0, 1);
	SpinOperators<Real> s;
	s.x = HermitianMatrix<Real>::Zero(3, 3);
	s.y = HermitianMatrix<Real>::Zero(3, 3);
	s.z = HermitianMatrix<Real>::Zero(3, 3);
	s.x(0, 1) = s.x(1, 0) = s.x(1, 2) = s.x(2, 1) = C(r);
	s.y(0, 1) = -i * r;
	s.y(1, 0) = i * r;
	s.y(1, 2) = -i * r;
	s.y(2, 1) = i * r;
	s.z(0, 0) = C(1);
	s.z(2, 2) = C(-1);
	return s;
}

template <typename Real = double>
HermitianMatrix<Real> identity(Eigen::Index dim)
{
	return HermitianMatrix<Real>::Identity(dim, dim);
}

template <typename Real>
HermitianMatrix<Real> kron(const HermitianMatrix<Real>& a, const HermitianMatrix<Real>& b)
{
	if (a.rows() != kSpinDim || a.cols() != kSpinDim || b.rows() != kSpinDim || b.cols() != kSpinDim) {
		throw InvalidInput("kron: both factors must be 3x3, got " + std::to_string(a.rows()) + "x" +
		                   std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
		                   std::to_string(b.cols()));
	}
	HermitianMatrix<Real> out(kProductDim, kProductDim);
	for (int i = 0; i < kSpinDim; ++i)
		for (int j = 0; j < kSpinDim; ++j)
			out.block(3 * i, 3 * j, 3, 3) = a(i, j) * b;
	return out;
}

// Largest |h_ij - conj(h_ji)| relative to max(1, max|h_ij|).
template <typename Real>
Real hermitian_defect(const HermitianMatrix<Real>& h)
{
	Real scale = 1;
	for (Eigen::Index i = 0; i < h.size(); ++i)
		scale = std::max(scale, std::abs(h(i)));
	Real worst = 0;
	for (Eigen::Index i = 0; i < h.rows(); ++i)
		for (Eigen::Index j = i; j < h.cols(); ++j)
			worst = std::max(worst, std::abs(h(i, j) - std::conj(h(j, i))));
	return worst / scale;
}

template <typename Real>
void require_hermitian(const HermitianMatrix<Real>& h, Real tolerance = Real(1e-9))
{
	if (h.rows() != h.cols() || h.rows() == 0)
		throw InvalidInput("matrix must be square and non-empty");
	if (!(hermitian_defect(h) <= tolerance))
		throw InvalidInput("matrix is not Hermitian within relative tolerance");
}

template <typename Real>
Real off_diagonal_norm(const HermitianMatrix<Real>& h)
{
	Real sum = 0;
	for (Eigen::Index j = 0; j < h.cols(); ++j)
		for (Eigen::Index i = 0; i < h.rows(); ++i)
			if (i != j)
				sum += std::norm(h(i, j));
	return std::sqrt(sum);
}

struct JacobiOptions {
	int max_sweeps = 100;
	double off_threshold_hz = 1e-10;
};

// Cyclic complex Jacobi. Eigenvalues are left at the diagonal position they
// converge to; for weakly mixed Hamiltonians that is the position of the
// dominant basis state. Identical input produces identical output.
template <typename Real>
EigenSystem<Real> eigh(const HermitianMatrix<Real>& input, const JacobiOptions& opts = {})
{
	using C = Complex<Real>;
	require_hermitian(input);
	const Eigen::Index n = input.rows();
	HermitianMatrix<Real> a = (input + input.adjoint()) / Real(2);
	HermitianMatrix<Real> v = HermitianMatrix<Real>::Identity(n, n);
	const Real threshold = static_cast<Real>(opts.off_threshold_hz);

	int sweep = 0;
	for (;; ++sweep) {
		if (off_diagonal_norm(a) <= threshold)
			break;
		if (sweep == opts.max_sweeps)
			throw ConvergenceError("eigh: Jacobi did not converge in " + std::to_string(opts.max_sweeps) +
			                       " sweeps");
		for (Eigen::Index p = 0; p < n - 1; ++p) {
			for (Eigen::Index q = p + 1; q < n; ++q) {
				const C apq = a(p, q);
				const Real r = std::abs(apq);
				if (r == Real(0))
					continue;
				const Real app = a(p, p).real();
				const Real aqq = a(q, q).real();
				// Below the resolution of both diagonal entries: drop it.
				if (sweep > 3 && std::abs(app) + 100 * r == std::abs(app) &&
				    std::abs(aqq) + 100 * r == std::abs(aqq)) {
					a(p, q) = a(q, p) = C(0);
					continue;
				}
				const C phase = apq / r;
				const Real theta = (aqq - app) / (2 * r);
				Real t = Real(1) / (std::abs(theta) + std::sqrt(theta * theta + 1));
				if (theta < 0)
					t = -t;
				const Real c = Real(1) / std::sqrt(t * t + 1);
				const Real s = t * c;
				// U = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) plane.
				const C upp(c), upq(s);
				const C uqp = -s * std::conj(phase);
				const C uqq = c * std::conj(phase);
				for (Eigen::Index k = 0; k < n; ++k) {
					const C akp = a(k, p), akq = a(k, q);
					a(k, p) = akp * upp + akq * uqp;
					a(k, q) = akp * upq + akq * uqq;
				}
				for (Eigen::Index k = 0; k < n; ++k) {
					const C apk = a(p, k), aqk = a(q, k);
					a(p, k) = std::conj(upp) * apk + std::conj(uqp) * aqk;
					a(q, k) = std::conj(upq) * apk + std::conj(uqq) * aqk;
				}
				a(p, p) = C(app - t * r);
				a(q, q) = C(aqq + t * r);
				a(p, q) = a(q, p) = C(0);
				for (Eigen::Index k = 0; k < n; ++k) {
					const C vkp = v(k, p), vkq = v(k, q);
					v(k, p) = vkp * upp + vkq * uqp;
					v(k, q) = vkp * upq + vkq * uqq;
				}
			}
		}
	}

	EigenSystem<Real> es;
	es.values = a.diagonal().real();
	es.vectors = std::move(v);
	es.sweeps = sweep;
	return es;
}

namespace detail {

// Exhaustive best bijection restricted to overlaps above min_overlap.
template <typename Real>
bool best_assignment(const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& overlap, Real min_overlap,
                     std::vector<int>& best)
{
	const int n = static_cast<int>(overlap.rows());
	std::vector<int> current(n, -1);
	std::vector<bool> used(n, false);
	Real best_score = -1;
	// column j = eigenvector, row i = basis state
	auto dfs = [&](auto&& self, int j, Real score) -> void {
		if (j == n) {
			if (score > best_score) {
				best_score = score;
				best = current;
			}
			return;
		}
		for (int i = 0; i < n; ++i) {
			if (used[i] || overlap(i, j) <= min_overlap)
				continue;
			used[i] = true;
			current[j] = i;
			self(self, j + 1, score + overlap(i, j));
			used[i] = false;
		}
	};
	dfs(dfs, 0, Real(0));
	return best_score >= 0;
}

} // namespace detail

// Assigns each eigenvector the product basis state of maximum squared overlap
// and reorders the eigenpairs into basis order, so values(product_index(mS,
// mI)) is the energy of the state labelled |mS,mI>. Throws LabelingError when
// any eigenvector keeps less than half of its assigned basis state.
template <typename Real>
EigenSystem<Real> label_states(const EigenSystem<Real>& es)
{
	const int n = static_cast<int>(es.dim());
	if (n != kSpinDim && n != kProductDim)
		throw InvalidInput("label_states: dimension must be 3 or 9");
	Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> overlap = es.vectors.cwiseAbs2();

	std::vector<int> basis_of(n);
	std::vector<bool> claimed(n, false);
	bool bijective = true;
	for (int j = 0; j < n; ++j) {
		Eigen::Index best = 0;
		overlap.col(j).maxCoeff(&best);
		basis_of[j] = static_cast<int>(best);
		if (claimed[best])
			bijective = false;
		claimed[best] = true;
	}
	if (!bijective && !detail::best_assignment(overlap, Real(0.1), basis_of))
		throw LabelingError("label_states: no bijective assignment with overlaps above 0.1");

	EigenSystem<Real> out;
	out.values.resize(n);
	out.vectors.resize(n, n);
	out.labels.resize(n);
	out.overlaps.resize(n);
	out.sweeps = es.sweeps;
	for (int j = 0; j < n; ++j) {
		const int i = basis_of[j];
		const Real w = overlap(i, j);
		const BasisLabel label = n == kProductDim ? product_label(i) : BasisLabel{1 - i, 0};
		if (w < Real(0.5))
			throw LabelingError("label_states: state " + to_string(label) + " has maximum overlap " +
			                    std::to_string(static_cast<double>(w)) + " < 0.5 (level anticrossing)");
		out.values(i) = es.values(j);
		out.vectors.col(i) = es.vectors.col(j);
		out.labels[i] = label;
		out.overlaps[i] = w;
	}
	return out;
}

} // namespace nvid
