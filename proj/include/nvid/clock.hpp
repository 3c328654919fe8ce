#pragma once

// Nuclear-spin clock: fractional instability of an ensemble readout,
//
//   df/f0 = 1 / (2 pi f0 F sqrt(T2* T) sqrt(N))

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nvid {

namespace clock_constants {
inline constexpr int registry_version = 1;
// 3.52 g/cm^3 / 12.011 g/mol * 6.02214076e23 /mol
inline constexpr double carbon_density_cm3 = 1.76e23;
} // namespace clock_constants

struct ClockConfig {
	double f0 = 4945754.9;  // Hz, |P|
	double F = 0.015;       // readout fidelity
	double T2_star = 0.01;  // s
	double volume_mm3 = 1.0;
	double carbon_density = clock_constants::carbon_density_cm3; // per cm^3

	void validate() const;
	// instability at N = 1, T = 1 s
	double prefactor() const;
};

double instability(const ClockConfig& cfg, double N, double T = 1.0);

// Smallest N with instability(N, T) <= target.
std::uint64_t required_N(const ClockConfig& cfg, double target, double T = 1.0);

double density_to_count(double ppb, double volume_mm3,
                        double carbon_density = clock_constants::carbon_density_cm3);
double count_to_density(double N, double volume_mm3, double carbon_density = clock_constants::carbon_density_cm3);

struct Benchmark {
	std::string name;
	std::string column; // CSV column name
	double instability = 0; // at 1 s
	std::string source;
};

const std::vector<Benchmark>& benchmarks();

// N,density_ppb,instability_1s on a log grid plus one column per benchmark.
void emit_curve(std::ostream& os, const ClockConfig& cfg, double N_min, double N_max, int points_per_decade = 10);

} // namespace nvid
