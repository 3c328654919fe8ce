#pragma once

// Parameter recovery from measured transition frequencies.
//
// Two MW lines fix D and we; the six 14N lines fix P, wn, A_par, A_perp and,
// in the five-parameter model, the transverse field wex (wnx = wex wn / we).
// The two steps alternate until D and we stop moving. The nuclear step runs a
// Nelder-Mead search on the perturbative model, then Gauss-Newton on the
// exact diagonalization so noise-free data are reproduced to numerical
// precision.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nvid/hamiltonian.hpp"
#include "nvid/ramsey.hpp"

namespace nvid {

struct MeasuredSet {
	std::string center_id;
	std::array<double, 6> nuclear{};       // Hz, canonical order of nuclear_transitions()
	std::array<double, 6> nuclear_sigma{}; // Hz
	ElectronPair mw;                       // mI is the spectator assumption
	double field_hint_tesla = constants::nominal_field; // sign picks the sign of we

	void validate() const;
};

enum class ModelKind { five_param, four_param };

std::string to_string(ModelKind m);
ModelKind parse_model(const std::string& s); // "5", "4", "five_param", "four_param"

// Order of covariance rows and columns.
enum class Param { D, omega_e, P, omega_n, A_par, A_perp, omega_ex };

std::string to_string(Param p);

struct ParamEstimate {
	std::string center_id;
	ModelKind model = ModelKind::four_param;
	double D = 0;
	double omega_e = 0;
	double P = 0;
	double omega_n = 0;
	double A_par = 0;
	double A_perp = 0;
	double omega_ex = 0; // >= 0; the spectrum is even in wex
	// Hz^2, rows per Param; 6x6 for four_param, 7x7 for five_param. Empty
	// until propagate_errors. wex entries are NaN when wex sits at zero.
	Eigen::MatrixXd covariance;
	double weighted_residual = 0;  // Hz, exact model
	double analytic_residual = 0;  // Hz, perturbative model at the same point
	FitValue gamma_ratio;          // we / wn
	int rounds = 0;

	int size() const { return model == ModelKind::five_param ? 7 : 6; }
	double value(Param p) const;
	double sigma(Param p) const;
	NVParams params() const;
};

struct ElectronSolution {
	double D = 0;
	double omega_e = 0;
	Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero(); // D, we
	int iterations = 0;
};

struct InversionOptions {
	double mw_tolerance_hz = 1e-4;
	double simplex_tolerance_hz = 1e-4;
	int max_simplex_iterations = 20000;
	int max_rounds = 10;
	double residual_limit_hz = 100;
	double verification_limit_hz = 0.1;
	double jacobian_step_hz = 0.1;
};

// (D, we) reproducing the MW pair through the exact model, with the other
// coefficients taken from `context`. The pair is matched to the mS = +-1 lines
// by the sign of `field_sign` (positive: the higher line is 0 <-> +1).
ElectronSolution solve_D_omega_e(const ElectronPair& mw, const NVParams& context, double field_sign = 1.0,
                                 const InversionOptions& opts = {});

// Weighted least squares of the six nuclear lines. `warm` skips the global
// search and starts the exact refinement from a previous estimate.
ParamEstimate fit_parameters(const MeasuredSet& m, ModelKind model, const InversionOptions& opts = {},
                             const ParamEstimate* warm = nullptr);

// J[i][k] = d param_i / d freq_k by central differences (re-solving with each
// of the eight measured lines moved by +-step), covariance = J diag(sigma^2) J^T.
Eigen::MatrixXd propagate_errors(const MeasuredSet& m, const ParamEstimate& e, const InversionOptions& opts = {});

// we / wn with first-order propagation including their covariance.
FitValue gamma_ratio(const ParamEstimate& e);

struct MonteCarloCovariance {
	Eigen::MatrixXd covariance; // rows per Param, sample covariance of the refits
	Eigen::VectorXd mean;
	int draws = 0;
	int failures = 0; // refits that threw
};

// Redraws all eight measured lines with their sigmas around `m`, refits each
// draw and returns the sample covariance. Draw i uses seed + i.
MonteCarloCovariance monte_carlo_covariance(const MeasuredSet& m, ModelKind model, int draws, std::uint64_t seed,
                                            int jobs = 1, const InversionOptions& opts = {});

// fit_parameters + propagate_errors + gamma_ratio.
ParamEstimate estimate(const MeasuredSet& m, ModelKind model, const InversionOptions& opts = {});

// Weighted rms residual: sqrt(sum w_i (f_i - m_i)^2 / sum w_i), w_i = 1/sigma_i^2.
double weighted_residual(const std::array<double, 6>& model, const MeasuredSet& m);

// Frequencies generated by the exact model at `truth`, optionally with
// Gaussian noise of the stated sigmas.
MeasuredSet synthetic_measured_set(const NVParams& truth, double nuclear_sigma_hz, double mw_sigma_hz,
                                   std::optional<std::uint64_t> noise_seed = {}, int mI = 1,
                                   const std::string& center_id = "synthetic");

// Published combined coefficients at 51 mT, aligned; wn from the ratio.
NVParams combined_truth(double field_tesla = constants::nominal_field, double misalignment_deg = 0.0);

} // namespace nvid
