#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nvid/ramsey.hpp"

using namespace nvid;

namespace {

std::string to_csv(const RamseyTrace& tr)
{
	std::ostringstream os;
	write_trace_csv(os, tr);
	return os.str();
}

} // namespace

TEST_CASE("signal model")
{
	const RamseyConfig cfg = RamseyConfig::nominal();
	CHECK(ramsey_signal(cfg, 0.0) ==
	      doctest::Approx(cfg.amplitude_a * std::sin(cfg.phase_phi0) + cfg.offset_b + cfg.baseline_c));

	// 533.2 Hz over a 10 ms window
	CHECK(cfg.true_detuning * (cfg.time_points.back() - cfg.time_points.front()) == doctest::Approx(5.332));

	RamseyConfig declining = cfg;
	declining.amplitude_a = 0;
	declining.decline_T1 = 0.005;
	const double t = 0.004;
	const double env = std::exp(-std::pow(t / cfg.T2_star, cfg.stretch_p));
	CHECK(ramsey_signal(declining, t) == doctest::Approx(cfg.offset_b * std::exp(-0.8) * env + cfg.baseline_c));
}

TEST_CASE("config validation")
{
	RamseyConfig cfg = RamseyConfig::nominal();
	cfg.T2_star = 0;
	CHECK_THROWS_AS(simulate(cfg), InvalidInput);
	cfg = RamseyConfig::nominal();
	cfg.time_points[3] = cfg.time_points[2];
	CHECK_THROWS_AS(simulate(cfg), InvalidInput);
	cfg = RamseyConfig::nominal();
	cfg.shots_per_point = 0;
	CHECK_THROWS_AS(simulate(cfg), InvalidInput);
}

TEST_CASE("simulation is reproducible for a fixed seed")
{
	RamseyConfig cfg = RamseyConfig::nominal();
	CHECK(to_csv(simulate(cfg)) == to_csv(simulate(cfg)));
	RamseyConfig other = cfg;
	other.rng_seed = 2;
	CHECK(to_csv(simulate(cfg)) != to_csv(simulate(other)));

	// few shots: integer photon counts per point
	cfg.shots_per_point = 10;
	const auto tr = simulate(cfg);
	const double contrast = cfg.photons_bright - cfg.photons_dark;
	for (std::size_t i = 0; i < tr.size(); ++i) {
		const double counts = (tr.signal[i] * contrast + cfg.photons_dark) * cfg.shots_per_point;
		CHECK(counts == doctest::Approx(std::round(counts)).epsilon(1e-9));
		CHECK(tr.sigma[i] > 0);
	}
}

TEST_CASE("noiseless trace is recovered exactly")
{
	const RamseyConfig cfg = RamseyConfig::nominal();
	const FitResult f = fit(expected_trace(cfg));
	REQUIRE(f.converged);
	CHECK(f.detuning.value == doctest::Approx(cfg.true_detuning).epsilon(1e-6));
	CHECK(f.phi0.value == doctest::Approx(cfg.phase_phi0).epsilon(1e-6));
	CHECK(f.a.value == doctest::Approx(cfg.amplitude_a).epsilon(1e-6));
	CHECK(f.b.value == doctest::Approx(cfg.offset_b).epsilon(1e-6));
	CHECK(f.c.value == doctest::Approx(cfg.baseline_c).epsilon(1e-6));
	CHECK(f.T2_star.value == doctest::Approx(cfg.T2_star).epsilon(1e-6));
	CHECK(f.p.value == doctest::Approx(cfg.stretch_p).epsilon(1e-6));
	CHECK(f.chi2_reduced < 1e-12);
	// the analytic sigmas are still those of the shot noise
	CHECK(f.detuning.sigma == doctest::Approx(1.6).epsilon(0.1));

	// a seed next to the optimum converges immediately
	FitResult seed = f;
	seed.detuning.value += 0.5;
	const FitResult g = fit(expected_trace(cfg), seed);
	CHECK(g.detuning.value == doctest::Approx(cfg.true_detuning).epsilon(1e-6));
}

TEST_CASE("canonical sign of the detuning")
{
	RamseyConfig cfg = RamseyConfig::nominal();
	cfg.true_detuning = -533.2;
	const FitResult f = fit(expected_trace(cfg));
	CHECK(f.detuning.value == doctest::Approx(533.2).epsilon(1e-6));
	CHECK(f.a.value > 0);
	CHECK(f.phi0.value == doctest::Approx(std::numbers::pi - cfg.phase_phi0).epsilon(1e-6));
}

TEST_CASE("uninformative traces are rejected")
{
	RamseyConfig cfg = RamseyConfig::nominal();
	cfg.amplitude_a = 0;
	cfg.offset_b = 0;
	CHECK_THROWS_AS(fit(expected_trace(cfg)), ConvergenceError);

	RamseyTrace tiny;
	for (int i = 0; i < 5; ++i) {
		tiny.times.push_back(i);
		tiny.signal.push_back(0.5);
		tiny.sigma.push_back(0.1);
	}
	CHECK_THROWS_AS(fit(tiny), InvalidInput);
}

TEST_CASE("periodogram lands near the true detuning")
{
	const RamseyConfig cfg = RamseyConfig::nominal();
	const auto peaks = periodogram_peaks(simulate(cfg), 5);
	REQUIRE(!peaks.empty());
	// half of the 1/span = 100 Hz resolution
	CHECK(std::abs(peaks.front() - cfg.true_detuning) < 50.0);
	CHECK(peaks.size() <= 5);
}

TEST_CASE("shifting the time origin only moves the phase")
{
	const RamseyConfig cfg = RamseyConfig::nominal();
	const RamseyTrace tr = simulate(cfg);
	RamseyTrace shifted = tr;
	const double t0 = 0.0123;
	for (double& t : shifted.times)
		t += t0;
	const FitResult a = fit(tr);
	const FitResult b = fit(shifted);
	CHECK(std::abs(a.detuning.value - b.detuning.value) < a.detuning.sigma);
}

TEST_CASE("detuning sigma scales as one over root shots")
{
	RamseyConfig cfg = RamseyConfig::nominal();
	auto mean_sigma = [&](int shots) {
		cfg.shots_per_point = shots;
		return coverage_study(cfg, 40).mean_sigma;
	};
	const double coarse = mean_sigma(20000);
	const double fine = mean_sigma(320000);
	CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("pulls of the detuning are unit normal")
{
	RamseyConfig cfg = RamseyConfig::nominal();
	const int runs = 200;
	double sum = 0, sum2 = 0;
	for (int i = 0; i < runs; ++i) {
		cfg.rng_seed = 7001 + i;
		const FitResult f = fit(simulate(cfg));
		const double z = (f.detuning.value - cfg.true_detuning) / f.detuning.sigma;
		sum += z;
		sum2 += z * z;
	}
	const double mean = sum / runs;
	const double sd = std::sqrt(sum2 / runs - mean * mean);
	CHECK(std::abs(mean) < 0.25);
	CHECK(sd == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("absolute frequency")
{
	FitResult f;
	f.converged = true;
	f.detuning = {533.2, 1.6};
	const auto abs = absolute_frequency(-6959102.0, f);
	CHECK(abs.value == doctest::Approx(-6958568.8).epsilon(1e-12));
	CHECK(abs.sigma == 1.6);

	f.detuning = {0.0, 1.6};
	CHECK(absolute_frequency(-6959102.0, f).value == -6959102.0);
	CHECK(absolute_frequency(-6959102.0, f, 1.2).sigma == doctest::Approx(2.0));

	f.converged = false;
	CHECK_THROWS_AS(absolute_frequency(-6959102.0, f), InvalidInput);
}

TEST_CASE("trace csv round trip")
{
	const RamseyTrace tr = simulate(RamseyConfig::nominal());
	std::istringstream in(to_csv(tr));
	const RamseyTrace back = read_trace_csv(in);
	CHECK(back.times == tr.times);
	CHECK(back.signal == tr.signal);
	CHECK(back.sigma == tr.sigma);

	std::istringstream bad("time_s,signal,sigma\n0,0.5,0\n");
	CHECK_THROWS_AS(read_trace_csv(bad), InvalidInput);
	std::istringstream headless("0,0.5,0.1\n");
	CHECK_THROWS_AS(read_trace_csv(headless), InvalidInput);
}
