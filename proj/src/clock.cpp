#include "nvid/clock.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "nvid/errors.hpp"

namespace nvid {

void ClockConfig::validate() const
{
	if (!(f0 > 0) || !(F > 0) || !(T2_star > 0) || !(volume_mm3 > 0) || !(carbon_density > 0))
		throw InvalidInput("ClockConfig: all quantities must be positive");
	if (F > 1)
		throw InvalidInput("ClockConfig: readout fidelity F must not exceed 1");
}

double ClockConfig::prefactor() const
{
	validate();
	return 1.0 / (2 * std::numbers::pi * f0 * F * std::sqrt(T2_star));
}

double instability(const ClockConfig& cfg, double N, double T)
{
	if (!(N >= 1))
		throw InvalidInput("instability: N must be at least 1");
	if (!(T > 0))
		throw InvalidInput("instability: averaging time must be positive");
	return cfg.prefactor() / std::sqrt(T * N);
}

std::uint64_t required_N(const ClockConfig& cfg, double target, double T)
{
	if (!(target > 0))
		throw InvalidInput("required_N: target must be positive");
	const double ratio = cfg.prefactor() / (target * std::sqrt(T));
	const double guess = std::ceil(ratio * ratio);
	if (!(guess < 1.8e19))
		throw InvalidInput("required_N: target needs more than 2^64 centers");
	std::uint64_t n = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(guess));
	// settle the rounding of the closed form
	while (n > 1 && instability(cfg, static_cast<double>(n - 1), T) <= target)
		--n;
	while (instability(cfg, static_cast<double>(n), T) > target)
		++n;
	return n;
}

double density_to_count(double ppb, double volume_mm3, double carbon_density)
{
	if (ppb < 0 || volume_mm3 < 0)
		throw InvalidInput("density_to_count: inputs must be non-negative");
	return ppb * 1e-9 * carbon_density * volume_mm3 * 1e-3;
}

double count_to_density(double N, double volume_mm3, double carbon_density)
{
	if (N < 0 || !(volume_mm3 > 0))
		throw InvalidInput("count_to_density: N non-negative and volume positive");
	return N / (carbon_density * volume_mm3 * 1e-3) * 1e9;
}

const std::vector<Benchmark>& benchmarks()
{
	static const std::vector<Benchmark> list = {
	    {"Cs chip-scale", "cs_chip", 2.5e-10, "commercial chip-scale Cs clock, typical datasheet"},
	    {"Rb", "rb", 2e-11, "commercial Rb frequency standard, typical datasheet"},
	    {"Cs beam", "cs_beam", 1.2e-11, "commercial Cs beam standard, typical datasheet"},
	};
	return list;
}

void emit_curve(std::ostream& os, const ClockConfig& cfg, double N_min, double N_max, int points_per_decade)
{
	if (!(N_min >= 1) || !(N_max >= N_min) || points_per_decade < 1)
		throw InvalidInput("emit_curve: need 1 <= N_min <= N_max and a positive grid density");
	// benchmarks as constant columns so each one plots as a horizontal line
	os << "N,density_ppb,instability_1s";
	for (const auto& b : benchmarks())
		os << ',' << b.column;
	os << '\n' << std::setprecision(10);
	const double lo = std::log10(N_min), hi = std::log10(N_max);
	const int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) * points_per_decade)));
	for (int i = 0; i <= steps; ++i) {
		const double N = i == steps ? N_max : std::pow(10.0, lo + (hi - lo) * i / steps);
		os << N << ',' << count_to_density(N, cfg.volume_mm3, cfg.carbon_density) << ',' << instability(cfg, N);
		for (const auto& b : benchmarks())
			os << ',' << b.instability;
		os << '\n';
	}
}

} // namespace nvid
