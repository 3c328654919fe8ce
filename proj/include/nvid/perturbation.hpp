#pragma once

// Analytic six-frequency model built from three-level reductions.
//
// The nine product states split into three electron subspaces. Every state k
// outside a subspace acts as the distant level of a three-level system formed
// with each pair of states of that subspace; the reduction below removes the
// coupling to k while shifting the near levels and renormalizing their direct
// coupling. Summing the contributions of all distant levels yields an
// effective 3x3 nuclear Hamiltonian per subspace, which a final second-order
// step turns into level energies and transition frequencies.
//
// Frequencies follow the same sign convention as the exact oracle:
// f = level(mI = +-1) - level(mI = 0) within each electron subspace.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "nvid/errors.hpp"
#include "nvid/hamiltonian.hpp"

namespace nvid {

inline constexpr double kMinDenominatorHz = 1e3;

// Hermitian three-level block
//   ( Delta   a       b      )
//   ( a*      delta1  c      )
//   ( b*      c*      delta2 )
// with Delta far from the near-degenerate pair.
template <typename Scalar>
struct ThreeLevelSystem {
	double Delta = 0;
	double delta1 = 0;
	double delta2 = 0;
	Scalar a{};
	Scalar b{};
	Scalar c{};
};

template <typename Scalar>
struct ThreeLevelReduction {
	double Delta = 0;
	double delta1 = 0;
	double delta2 = 0;
	Scalar c_eff{};
};

// keep_small_denominators = true:
//   Delta'  = Delta + |a|^2/(Delta - delta1) + |b|^2/(Delta - delta2)
//   delta1' = delta1 - |a|^2/(Delta - delta1)
//   delta2' = delta2 - |b|^2/(Delta - delta2)
//   c_eff   = c - a* b / Delta
// false: every denominator is Delta.
template <typename Scalar>
ThreeLevelReduction<Scalar> reduce_three_level(const ThreeLevelSystem<Scalar>& t,
                                               bool keep_small_denominators = true)
{
	using std::abs;
	const double scale = std::max({abs(t.delta1), abs(t.delta2), double(abs(t.a)), double(abs(t.b)),
	                               double(abs(t.c))});
	if (!(abs(t.Delta) > 10 * scale))
		throw InvalidInput("reduce_three_level: distant level must exceed 10x every other entry");
	const double d1 = keep_small_denominators ? t.Delta - t.delta1 : t.Delta;
	const double d2 = keep_small_denominators ? t.Delta - t.delta2 : t.Delta;
	if (abs(d1) < kMinDenominatorHz || abs(d2) < kMinDenominatorHz || abs(t.Delta) < kMinDenominatorHz)
		throw NearResonanceError("reduce_three_level: denominator below 1 kHz");
	const double a2 = std::norm(std::complex<double>(t.a));
	const double b2 = std::norm(std::complex<double>(t.b));
	ThreeLevelReduction<Scalar> r;
	r.Delta = t.Delta + a2 / d1 + b2 / d2;
	r.delta1 = t.delta1 - a2 / d1;
	r.delta2 = t.delta2 - b2 / d2;
	r.c_eff = t.c - Eigen::numext::conj(t.a) * t.b / t.Delta;
	return r;
}

// Effective nuclear Hamiltonian of one electron subspace, basis mI = +1, 0, -1.
struct SubspaceEffective {
	int mS = 0;
	double omega_p1 = 0; // effective level energies (Hz, same origin as H)
	double omega_0 = 0;
	double omega_m1 = 0;
	double Omega = 0;    // sqrt(2) * Re <+1|H_eff|0>
	Eigen::Matrix3cd matrix = Eigen::Matrix3cd::Zero();
};

struct PerturbationOptions {
	bool keep_small_denominators = true;
	// Second pass whose denominators use the level energies of the first pass
	// instead of the bare diagonal. Only meaningful with small denominators
	// kept; removes most of the fourth-order residual at high field and tilt.
	bool dressed_denominators = true;
};

SubspaceEffective subspace_effective(const NVParams& p, int mS, const PerturbationOptions& opts = {});

// Levels after the final second-order step inside the subspace (mI = +1, 0, -1).
std::array<double, 3> subspace_levels(const SubspaceEffective& eff);

FrequencySet analytic_nuclear_frequencies(const NVParams& p, const PerturbationOptions& opts = {});

inline constexpr double kAnalyticTolerance = 0.05; // Hz

struct SweepGrid {
	std::vector<double> fields_gauss;
	std::vector<double> angles_deg;
	std::vector<double> strain_hz; // applied to Ex', Ey', Ex, Ey together
	bool keep_small_denominators = true;
	bool dressed_denominators = true;

	// 400..600 G every 25 G, 0/0.05/0.1 deg, strain 0/0.5/1 MHz.
	static SweepGrid standard();
};

struct SweepPoint {
	double field_gauss = 0;
	double angle_deg = 0;
	double strain_hz = 0;
	bool in_domain = true;
	std::string error; // non-empty when a model failed at this point
	std::array<double, 6> analytic{};
	std::array<double, 6> exact{};

	double max_deviation() const;
	double mean_deviation() const;
	bool flagged() const { return !error.empty() || max_deviation() > kAnalyticTolerance; }
};

struct SweepReport {
	std::vector<SweepPoint> points;
	std::array<double, 6> max_by_transition{};
	std::array<double, 6> mean_by_transition{};
	double max_in_domain = 0;
	int flagged_in_domain = 0;
	int flagged_out_of_domain = 0;

	bool passes() const { return flagged_in_domain == 0; }
};

bool in_validated_domain(double field_gauss, double angle_deg, double strain_hz);

SweepReport validation_sweep(const SweepGrid& grid, int jobs = 1);

void write_sweep_csv(std::ostream& os, const SweepReport& report);

} // namespace nvid
