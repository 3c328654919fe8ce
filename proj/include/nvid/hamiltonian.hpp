#pragma once

// Ground-state Hamiltonian of the NV- electron spin coupled to its 14N nucleus,
// all coefficients in Hz:
//
//   H = D Sz^2 + we Sz + P Iz^2 + wn Iz + A_par Sz Iz + A_perp (Sx Ix + Sy Iy)
//       + wex Sx + wnx Ix + strain(S)
//
// Sign conventions:
//   - Zeeman energies are -gamma * B. With the electron gyromagnetic ratio
//     negative and the 14N ratio positive, a field along +z gives we > 0 and
//     wn < 0 and their ratio is gamma_e / gamma_n ~ -9113.85.
//   - A nuclear transition frequency is f = E(|mS, +-1>) - E(|mS, 0>), which
//     makes all six 14N frequencies negative, e.g. about -6.9586 MHz for the
//     0 <-> -1 transition inside mS = -1 at 51 mT.

#include <array>
#include <optional>
#include <string>

#include "nvid/spin_core.hpp"

namespace nvid {

// High-precision scalar used for oracle diagonalizations.
using OracleReal = long double;

namespace constants {
inline constexpr double gamma_e = -28.033e9;              // Hz/T
inline constexpr double gamma_n = 3.0766e6;               // Hz/T
inline constexpr double published_gamma_ratio = -9113.85; // gamma_e / gamma_n
inline constexpr double zero_field_splitting = 2.87e9;    // Hz
inline constexpr double quadrupole = -4945754.9;          // Hz
inline constexpr double hyperfine_par = -2164689.8;       // Hz
inline constexpr double hyperfine_perp = -2632.7e3;       // Hz
inline constexpr double nominal_field = 0.051;            // T
} // namespace constants

struct StrainFields {
	double Ez = 0;       // absorbed into the Sz^2 coefficient
	double Ex_prime = 0; // {Sx, Sz}
	double Ey_prime = 0; // {Sy, Sz}
	double Ex = 0;       // Sy^2 - Sx^2
	double Ey = 0;       // {Sx, Sy}

	friend bool operator==(const StrainFields&, const StrainFields&) = default;
};

struct NVParams {
	double D = 0;
	double omega_e = 0;
	double P = 0;
	double omega_n = 0;
	double A_par = 0;
	double A_perp = 0;
	double omega_ex = 0;
	double omega_nx = 0;
	StrainFields strain;

	friend bool operator==(const NVParams&, const NVParams&) = default;
};

// Throws InvalidInput unless |we| < D (or both zero) and, when both transverse
// Zeeman terms are non-zero, wex/we = wnx/wn to 1e-12 relative.
void validate(const NVParams& p);

// Published combined values at a field of `field_tesla` tilted by
// `misalignment_deg` from the NV axis. wn follows from we through
// `gamma_ratio`.
NVParams nominal_params(double field_tesla = constants::nominal_field, double misalignment_deg = 0.0,
                        double gamma_ratio = constants::published_gamma_ratio);

// Applies a field of `field_tesla` at `misalignment_deg` to the Zeeman terms of
// `p`, keeping the other coefficients.
NVParams with_field(NVParams p, double field_tesla, double misalignment_deg,
                    double gamma_ratio = constants::published_gamma_ratio);

enum class TransitionKind { nuclear, electron };

struct TransitionLabel {
	TransitionKind kind = TransitionKind::nuclear;
	int mS = 0;     // nuclear: electron subspace; electron: upper state mS (+1 or -1)
	int branch = 1; // nuclear only: 0 <-> branch, branch = +1 or -1
	int mI = 0;     // electron only: spectator nuclear projection

	static TransitionLabel nuclear(int mS, int branch);
	static TransitionLabel electron(int mS, int mI);

	// Position in the canonical six-entry order (mS = +1, 0, -1; branch +1, -1).
	int nuclear_index() const;
	std::string name() const;

	friend bool operator==(const TransitionLabel&, const TransitionLabel&) = default;
};

std::array<TransitionLabel, 6> nuclear_transitions();

// Parses names produced by TransitionLabel::name().
TransitionLabel parse_transition(const std::string& name);

struct ElectronPair {
	int mI = 1;
	double plus_hz = 0; // E(|+1,mI>) - E(|0,mI>)
	double minus_hz = 0;
	double plus_sigma_hz = 0;
	double minus_sigma_hz = 0;
};

struct FrequencySet {
	std::array<double, 6> nuclear{};
	std::array<double, 6> nuclear_sigma{};
	std::optional<ElectronPair> electron;

	double at(const TransitionLabel& t) const { return nuclear.at(t.nuclear_index()); }
};

template <typename Real = double>
HermitianMatrix<Real> build_full(const NVParams& p)
{
	validate(p);
	const auto s = spin1_operators<Real>();
	const HermitianMatrix<Real> one = identity<Real>(kSpinDim);
	auto R = [](double v) { return static_cast<Real>(v); };
	const StrainFields& e = p.strain;

	HermitianMatrix<Real> electron = R(p.D + e.Ez) * s.z * s.z + R(p.omega_e) * s.z + R(p.omega_ex) * s.x +
	                                 R(e.Ex_prime) * (s.x * s.z + s.z * s.x) +
	                                 R(e.Ey_prime) * (s.y * s.z + s.z * s.y) +
	                                 R(e.Ex) * (s.y * s.y - s.x * s.x) + R(e.Ey) * (s.x * s.y + s.y * s.x);
	HermitianMatrix<Real> nuclear = R(p.P) * s.z * s.z + R(p.omega_n) * s.z + R(p.omega_nx) * s.x;

	HermitianMatrix<Real> h = kron<Real>(electron, one) + kron<Real>(one, nuclear) +
	                          R(p.A_par) * kron<Real>(s.z, s.z) +
	                          R(p.A_perp) * (kron<Real>(s.x, s.x) + kron<Real>(s.y, s.y));
	return h;
}

// Labelled eigen-decomposition of build_full in OracleReal precision.
EigenSystem<OracleReal> exact_levels(const NVParams& p);

// Six nuclear frequencies from the labelled eigenvalues (zero sigmas).
FrequencySet exact_nuclear_frequencies(const NVParams& p);

// E(|+-1, mI>) - E(|0, mI>) for the given spectator mI.
ElectronPair exact_electron_frequencies(const NVParams& p, int mI);

double exact_frequency(const NVParams& p, const TransitionLabel& t);

inline constexpr double kSensitivityStepTesla = 1e-7;

// d f / d B in Hz per microtesla by central difference with a 0.1 uT step along
// the present field direction (along z when the field is zero). The nuclear
// Zeeman terms move by the electron shift divided by `gamma_ratio`.
double field_sensitivity(const NVParams& p, const TransitionLabel& t,
                         double gamma_ratio = constants::published_gamma_ratio);

} // namespace nvid
