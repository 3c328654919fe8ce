#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "nvid/clock.hpp"
#include "nvid/errors.hpp"

using namespace nvid;

TEST_CASE("instability law")
{
	const ClockConfig cfg;
	// 1 / (2 pi 4945754.9 * 0.015 * 0.1)
	CHECK(cfg.prefactor() == doctest::Approx(2.14536e-5).epsilon(1e-5));
	CHECK(instability(cfg, 1) == doctest::Approx(2e-5).epsilon(0.15));
	CHECK(instability(cfg, 1e12) == doctest::Approx(2e-11).epsilon(0.15));
	CHECK(instability(cfg, 1e6, 4.0) == doctest::Approx(instability(cfg, 1e6, 1.0) / 2));

	const double k = instability(cfg, 1, 1);
	for (double N : {1.0, 37.0, 1e9, 3e15})
		for (double T : {0.01, 1.0, 1000.0})
			CHECK(std::abs(instability(cfg, N, T) * std::sqrt(N * T) - k) <= 1e-12 * k);

	CHECK_THROWS_AS(instability(cfg, 0.5), InvalidInput);
	CHECK_THROWS_AS(instability(cfg, 10, 0), InvalidInput);
	ClockConfig bad = cfg;
	bad.F = 1.5;
	CHECK_THROWS_AS(instability(bad, 10), InvalidInput);
}

TEST_CASE("required ensemble size")
{
	const ClockConfig cfg;
	for (double target : {2e-11, 2.5e-10, 1.2e-11, 3.3e-7}) {
		const auto n = required_N(cfg, target);
		CHECK(instability(cfg, double(n)) <= target);
		if (n > 1)
			CHECK(instability(cfg, double(n - 1)) > target);
	}
	CHECK(double(required_N(cfg, 2e-11)) == doctest::Approx(1.15e12).epsilon(0.01));
	CHECK(required_N(cfg, instability(cfg, 1)) == 1);
	CHECK(required_N(cfg, 1.0) == 1);

	// with the prefactor rounded to 2e-5 the Cs chip level needs 6.4e9 centers
	ClockConfig rounded = cfg;
	rounded.f0 = 1.0 / (2 * 3.14159265358979323846 * cfg.F * std::sqrt(cfg.T2_star) * 2e-5);
	CHECK(double(required_N(rounded, 2.5e-10)) == doctest::Approx(6.4e9).epsilon(1e-6));
	CHECK(double(required_N(cfg, 2.5e-10)) == doctest::Approx(7.36e9).epsilon(0.01));

	for (std::uint64_t N : {1ull, 17ull, 123456ull, 1000000007ull}) {
		const auto back = required_N(cfg, instability(cfg, double(N)));
		CHECK(back + 1 >= N);
		CHECK(back <= N + 1);
	}
	CHECK_THROWS_AS(required_N(cfg, 0), InvalidInput);
}

TEST_CASE("density and count")
{
	CHECK(density_to_count(6, 1) == doctest::Approx(1.056e12));
	CHECK(density_to_count(6, 1) == doctest::Approx(1e12).epsilon(0.2));
	CHECK(density_to_count(0, 1) == 0);
	CHECK(density_to_count(100e3, 1) == doctest::Approx(1.76e16));
	CHECK(density_to_count(12, 1) == doctest::Approx(2 * density_to_count(6, 1)));
	CHECK(density_to_count(6, 3) == doctest::Approx(3 * density_to_count(6, 1)));
	CHECK(count_to_density(density_to_count(6, 2), 2) == doctest::Approx(6));
	CHECK_THROWS_AS(density_to_count(-1, 1), InvalidInput);
}

TEST_CASE("curve")
{
	const ClockConfig cfg;
	std::ostringstream os;
	emit_curve(os, cfg, 1, 1e16, 4);
	std::istringstream is(os.str());
	std::string line;
	std::getline(is, line);
	CHECK(line == "N,density_ppb,instability_1s,cs_chip,rb,cs_beam");
	std::vector<std::vector<double>> rows;
	while (std::getline(is, line)) {
		std::vector<double> row;
		std::stringstream ls(line);
		std::string cell;
		while (std::getline(ls, cell, ','))
			row.push_back(std::stod(cell));
		REQUIRE(row.size() == 6);
		rows.push_back(row);
	}
	REQUIRE(rows.size() == 65);
	CHECK(rows.front()[0] == 1);
	CHECK(rows.back()[0] == 1e16);
	for (std::size_t i = 1; i < rows.size(); ++i)
		CHECK(rows[i][2] < rows[i - 1][2]);
	const auto& at12 = rows[48];
	CHECK(at12[0] == doctest::Approx(1e12));
	CHECK(at12[2] == doctest::Approx(2e-11).epsilon(0.15));
	CHECK(at12[1] == doctest::Approx(6).epsilon(0.2));
	CHECK(at12[3] == 2.5e-10);
	CHECK(at12[4] == 2e-11);
	CHECK(at12[5] == 1.2e-11);
}
