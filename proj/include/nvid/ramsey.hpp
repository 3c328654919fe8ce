#pragma once

// Ramsey fringes of one nuclear transition: shot-noise simulation and fitting
// with
//
//   s(t) = [a sin(2 pi df t + phi0) + b] exp(-(t/T2*)^p) + c
//
// The simulator can additionally let the offset b decay as exp(-t/T1).

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nvid/errors.hpp"

namespace nvid {

struct RamseyConfig {
	double true_detuning = 533.2; // Hz
	double T2_star = 0.01;        // s
	double stretch_p = 2.0;
	double amplitude_a = 0.3;
	double offset_b = 0.1;
	double baseline_c = 0.45;
	double phase_phi0 = 0.4; // rad
	double decline_T1 = std::numeric_limits<double>::infinity(); // s
	std::vector<double> time_points; // s
	int shots_per_point = 1;
	double photons_bright = 0.03; // mean photons per shot, state probability 1
	double photons_dark = 0.021;
	std::uint64_t rng_seed = 1;

	// 101 points over 10 ms with the shot count calibrated so that the fitted
	// detuning scatters by about 1.6 Hz.
	static RamseyConfig nominal();

	void validate() const;
};

struct RamseyTrace {
	std::vector<double> times;  // s
	std::vector<double> signal; // estimated state probability
	std::vector<double> sigma;

	std::size_t size() const { return times.size(); }
	void validate() const;
};

// Noise-free model value at time t, offset decline included.
double ramsey_signal(const RamseyConfig& cfg, double t);

// Per-point standard error of the normalized signal for n shots at mean
// photon number `photons` per shot.
double shot_noise_sigma(const RamseyConfig& cfg, double photons_per_shot);

// Photon counts per point: Poisson below 30 shots, normal approximation of the
// summed counts from 30 shots up. Reproducible for a fixed seed.
RamseyTrace simulate(const RamseyConfig& cfg);

// Expected signal with its analytic sigma; the infinite-shot limit of simulate.
RamseyTrace expected_trace(const RamseyConfig& cfg);

struct FitValue {
	double value = 0;
	double sigma = 0;
};

struct FitResult {
	FitValue detuning; // Hz, >= 0
	FitValue phi0;     // rad, wrapped to (-pi, pi]
	FitValue a;        // >= 0
	FitValue b;
	FitValue c;
	FitValue T2_star;
	FitValue p;
	double chi2_reduced = 0;
	int iterations = 0;
	bool converged = false;
	Eigen::Matrix<double, 7, 7> covariance = Eigen::Matrix<double, 7, 7>::Zero(); // df, phi0, a, b, c, T2*, p
};

struct FitOptions {
	int max_iterations = 200;
	double relative_step_tolerance = 1e-10;
	int periodogram_starts = 5;
};

// Caption-model value at t for a fit result.
double fitted_signal(const FitResult& f, double t);

// Frequencies of the strongest local maxima of the weighted periodogram,
// strongest first.
std::vector<double> periodogram_peaks(const RamseyTrace& trace, int count);

// Weighted Levenberg-Marquardt on the caption model. Without `init` the start
// comes from the periodogram; the next peaks are tried if the first start does
// not converge. Throws ConvergenceError on failure or a singular covariance.
FitResult fit(const RamseyTrace& trace, const std::optional<FitResult>& init = {}, const FitOptions& opts = {});

struct AbsoluteFrequency {
	double value = 0; // Hz
	double sigma = 0;
};

// rf_drive + detuning. With the signed convention of the Hamiltonian module the
// drive sits below the line, e.g. -6959102.0 + 533.2 = -6958568.8 Hz.
AbsoluteFrequency absolute_frequency(double rf_drive, const FitResult& fit, double rf_drive_sigma = 0);

struct CoverageReport {
	int runs = 0;
	int failures = 0;      // fits that threw
	int within_2sigma = 0; // |fitted - true| <= 2 sigma
	double mean_sigma = 0;
	double rms_error = 0;

	double fraction() const { return runs > 0 ? double(within_2sigma) / runs : 0.0; }
};

// Repeats simulate + fit with seeds cfg.rng_seed + i.
CoverageReport coverage_study(const RamseyConfig& cfg, int runs, int jobs = 1);

void write_trace_csv(std::ostream& os, const RamseyTrace& trace);
RamseyTrace read_trace_csv(std::istream& is);

} // namespace nvid
