// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>

#include "nvid/clock.hpp"
#include "nvid/hamiltonian.hpp"
#include "nvid/identity.hpp"
#include "nvid/inversion.hpp"
#include "nvid/io.hpp"
#include "nvid/parallel.hpp"
#include "nvid/perturbation.hpp"
#include "nvid/pipeline.hpp"
#include "nvid/ramsey.hpp"

using namespace nvid;

namespace {

// pinned tolerances
constexpr double kFidelityHz = 0.05;
constexpr double kFidelitySeconds = 10;
constexpr double kDegradedLowHz = 1, kDegradedHighHz = 100;
constexpr double kStrainHz = 1;
constexpr double kStrainField = 1e6;
constexpr int kRamseyRuns = 500;
constexpr std::uint64_t kRamseySeed = 1;
constexpr double kRamseyCoverage = 0.95;
constexpr double kRamseySeconds = 60;
constexpr double kRoundTripHz = 1e-3;
constexpr int kInversionRuns = 200;
constexpr std::uint64_t kInversionSeed = 1000;
constexpr double kNoisyResidualHz = 10; // "Hz-level": no residual reaches tens of Hz
constexpr double kCoverage3Sigma = 0.99;
constexpr int kMonteCarloDraws = 200;
constexpr std::uint64_t kMonteCarloSeed = 1000;
constexpr double kVarianceTolerance = 0.25;    // relative, diagonal
constexpr double kCorrelationTolerance = 0.25; // absolute, off-diagonal correlations
constexpr double kOffsetPull = 10;             // "tens of sigma"
constexpr double kConsistentPull = 2;
constexpr double kCombinedSigmaHz = 1;
constexpr double kPrefactor = 2e-5, kPrefactorTol = 0.15;
constexpr double kRbLevel = 2e-11, kRbTol = 0.15;
constexpr double kCount6ppb = 1e12, kCountTol = 0.20;

int jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& what)
{
	std::printf("%s [%d] %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
	std::fflush(stdout);
	failures += !pass;
}

template <typename... A>
std::string fmt(const char* f, A... a)
{
	char buf[512];
	std::snprintf(buf, sizeof buf, f, a...);
	return buf;
}

void criterion1()
{
	const auto t0 = std::chrono::steady_clock::now();
	const SweepReport r = validation_sweep(SweepGrid::standard(), jobs());
	const double t = seconds_since(t0);
	const bool pass = r.max_in_domain <= kFidelityHz && r.flagged_in_domain == 0 && t < kFidelitySeconds;
	report(1, pass,
	       fmt("perturbative fidelity: max |analytic - exact| %.4f Hz over %zu points (<= %.2f), %d flagged, %.2f s "
	           "(< %.0f s)",
	           r.max_in_domain, r.points.size(), kFidelityHz, r.flagged_in_domain, t, kFidelitySeconds));
}

void criterion2()
{
	SweepGrid g = SweepGrid::standard();
	g.keep_small_denominators = false;
	const SweepReport r = validation_sweep(g, jobs());
	const bool pass = r.max_in_domain >= kDegradedLowHz && r.max_in_domain <= kDegradedHighHz;
	report(2, pass,
	       fmt("small denominators dropped: max deviation %.2f Hz (in [%.0f, %.0f])", r.max_in_domain, kDegradedLowHz,
	           kDegradedHighHz));
}

void criterion3()
{
	const NVParams base = nominal_params();
	const auto ref = exact_nuclear_frequencies(base).nuclear;
	std::vector<std::pair<std::string, StrainFields>> cases;
	for (double s : {kStrainField, -kStrainField}) {
		StrainFields f;
		f.Ez = s;
		cases.push_back({"Ez", f});
		f = {};
		f.Ex_prime = s;
		cases.push_back({"Ex'", f});
		f = {};
		f.Ey_prime = s;
		cases.push_back({"Ey'", f});
		f = {};
		f.Ex = s;
		cases.push_back({"Ex", f});
		f = {};
		f.Ey = s;
		cases.push_back({"Ey", f});
		f = {};
		f.Ex_prime = f.Ey_prime = f.Ex = f.Ey = s;
		cases.push_back({"transverse", f});
		f.Ez = s;
		cases.push_back({"all", f});
	}
	double worst = 0;
	std::string where;
	for (const auto& [name, strain] : cases) {
		NVParams p = base;
		p.strain = strain;
		const auto f = exact_nuclear_frequencies(p).nuclear;
		for (int i = 0; i < 6; ++i) {
			const double d = std::abs(f[i] - ref[i]);
			if (d > worst) {
				worst = d;
				where = name + (strain.Ex_prime + strain.Ez + strain.Ex + strain.Ey + strain.Ey_prime > 0 ? " +" : " -") +
				        ", " + nuclear_transitions()[i].name();
			}
		}
	}
	report(3, worst < kStrainHz,
	       fmt("strain bound: max exact shift %.3f Hz at 1 MHz (%s) (< %.0f Hz)", worst, where.c_str(), kStrainHz));
}

void criterion4()
{
	RamseyConfig cfg = RamseyConfig::nominal();
	cfg.rng_seed = kRamseySeed;
	const auto t0 = std::chrono::steady_clock::now();
	const CoverageReport r = coverage_study(cfg, kRamseyRuns, jobs());
	const double t = seconds_since(t0);
	const bool pass = r.fraction() >= kRamseyCoverage && t < kRamseySeconds;
	report(4, pass,
	       fmt("Ramsey recovery: %d/%d within 2 sigma = %.3f (>= %.2f), mean sigma %.3f Hz, rms error %.3f Hz, "
	           "%d fit failures, seeds %llu..%llu, %.1f s (< %.0f s)",
	           r.within_2sigma, r.runs, r.fraction(), kRamseyCoverage, r.mean_sigma, r.rms_error, r.failures,
	           static_cast<unsigned long long>(kRamseySeed),
	           static_cast<unsigned long long>(kRamseySeed + kRamseyRuns - 1), t, kRamseySeconds));
}

void criterion5()
{
	const NVParams truth = combined_truth();
	const double tv[6] = {truth.D, truth.omega_e, truth.P, truth.omega_n, truth.A_par, truth.A_perp};

	double worst_clean = 0;
	const MeasuredSet clean = synthetic_measured_set(truth, 1.6, 1e3);
	for (auto model : {ModelKind::four_param, ModelKind::five_param}) {
		const ParamEstimate e = fit_parameters(clean, model);
		for (int i = 0; i < 6; ++i)
			worst_clean = std::max(worst_clean, std::abs(e.value(static_cast<Param>(i)) - tv[i]));
	}

	std::vector<std::array<int, 6>> inside(kInversionRuns);
	std::vector<double> residual(kInversionRuns, INFINITY);
	std::vector<char> ok(kInversionRuns, 0);
	parallel_for(kInversionRuns, jobs(), [&](std::size_t r) {
		const MeasuredSet m = synthetic_measured_set(truth, 1.6, 1e3, kInversionSeed + r);
		try {
			const ParamEstimate e = estimate(m, ModelKind::four_param);
			for (int i = 0; i < 6; ++i)
				inside[r][i] = std::abs(e.value(static_cast<Param>(i)) - tv[i]) <= 3 * e.sigma(static_cast<Param>(i));
			residual[r] = e.weighted_residual;
			ok[r] = 1;
		} catch (const Error&) {
		}
	});
	double min_cov = 1;
	int worst_param = 0;
	for (int i = 0; i < 6; ++i) {
		int n = 0;
		for (int r = 0; r < kInversionRuns; ++r)
			n += ok[r] && inside[r][i];
		const double c = double(n) / kInversionRuns;
		if (c < min_cov) {
			min_cov = c;
			worst_param = i;
		}
	}
	std::vector<double> sorted = residual;
	std::sort(sorted.begin(), sorted.end());
	const int failed = static_cast<int>(std::count(ok.begin(), ok.end(), 0));
	const bool pass = worst_clean <= kRoundTripHz && sorted.back() <= kNoisyResidualHz && min_cov >= kCoverage3Sigma;
	report(5, pass,
	       fmt("inversion round trip: noise-free max error %.2e Hz (<= %.0e, both models); 1.6 Hz noise: median "
	           "residual %.3f Hz, max %.3f Hz (<= %.0f), min 3-sigma coverage %.3f for %s (>= %.2f), %d failures, "
	           "seeds %llu..%llu",
	           worst_clean, kRoundTripHz, sorted[kInversionRuns / 2], sorted.back(), kNoisyResidualHz, min_cov,
	           to_string(static_cast<Param>(worst_param)).c_str(), kCoverage3Sigma, failed,
	           static_cast<unsigned long long>(kInversionSeed),
	           static_cast<unsigned long long>(kInversionSeed + kInversionRuns - 1)));
}

void criterion6()
{
	const MeasuredSet m = synthetic_measured_set(combined_truth(), 1.6, 1e3);
	const ParamEstimate e = estimate(m, ModelKind::four_param);
	const MonteCarloCovariance mc = monte_carlo_covariance(m, ModelKind::four_param, kMonteCarloDraws,
	                                                       kMonteCarloSeed, jobs());
	const Eigen::MatrixXd& J = e.covariance;
	const Eigen::MatrixXd& M = mc.covariance;
	double worst_var = 0, worst_corr = 0;
	for (int i = 0; i < 6; ++i) {
		worst_var = std::max(worst_var, std::abs(M(i, i) / J(i, i) - 1));
		for (int j = 0; j < i; ++j) {
			const double rj = J(i, j) / std::sqrt(J(i, i) * J(j, j));
			const double rm = M(i, j) / std::sqrt(M(i, i) * M(j, j));
			worst_corr = std::max(worst_corr, std::abs(rj - rm));
		}
	}
	const bool pass = worst_var <= kVarianceTolerance && worst_corr <= kCorrelationTolerance && mc.failures == 0;
	report(6, pass,
	       fmt("error propagation vs Monte-Carlo (%d draws, seed %llu): max variance deviation %.1f%% (<= %.0f%%), "
	           "max correlation difference %.3f (<= %.2f), %d refit failures",
	           mc.draws, static_cast<unsigned long long>(kMonteCarloSeed), 100 * worst_var, 100 * kVarianceTolerance,
	           worst_corr, kCorrelationTolerance, mc.failures));
}

void criterion7()
{
	const io::Dataset d = io::dataset_from_json(io::read_json_file(NVID_DATA_DIR "/seven_centers.json"));
	PipelineOptions opts;
	opts.jobs = jobs();
	const PipelineResult r = run_pipeline(d, opts);
	if (!r.cohort || r.failures() > 0) {
		report(7, false, "identity statistics: pipeline failed on the fixture");
		return;
	}
	double min_offset = INFINITY, max_rest = 0;
	for (auto p : {IdentityParam::P, IdentityParam::A_par, IdentityParam::A_perp, IdentityParam::gamma_ratio}) {
		for (const auto& c : r.cohort->at(p).centers) {
			const double pull = std::abs(r.cohort->at(p).leave_one_out ? c.pull_loo : c.pull);
			const bool offset = c.cohort == "in_SIL";
			if (offset && (p == IdentityParam::P || p == IdentityParam::A_par))
				min_offset = std::min(min_offset, pull);
			else
				max_rest = std::max(max_rest, pull);
		}
	}
	const auto& P = r.cohort->at(IdentityParam::P);
	const bool pass = min_offset >= kOffsetPull && max_rest <= kConsistentPull && P.mean.sigma < kCombinedSigmaHz &&
	                  P.dof == 4;
	report(7, pass,
	       fmt("identity statistics: offset pair min |pull| %.1f (>= %.0f) in P and A_par, other |pull| max %.2f "
	           "(<= %.0f), P combined over %d centers %.4f +- %.3f Hz (< %.0f Hz)",
	           min_offset, kOffsetPull, max_rest, kConsistentPull, P.dof + 1, P.mean.mean, P.mean.sigma,
	           kCombinedSigmaHz));
}

void criterion8()
{
	const ClockConfig cfg;
	const double pre = cfg.prefactor();
	const double rb = instability(cfg, 1e12);
	const double n6 = density_to_count(6, 1);
	const bool pass = std::abs(pre / kPrefactor - 1) <= kPrefactorTol && std::abs(rb / kRbLevel - 1) <= kRbTol &&
	                  std::abs(n6 / kCount6ppb - 1) <= kCountTol;
	report(8, pass,
	       fmt("clock model: prefactor %.4g (2e-5 +- 15%%), N=1e12 -> %.4g (2e-11 +- 15%%), 6 ppb in 1 mm^3 -> %.4g "
	           "centers (1e12 +- 20%%)",
	           pre, rb, n6));
}

} // namespace

int main()
{
	const std::function<void()> criteria[] = {criterion1, criterion2, criterion3, criterion4,
	                                          criterion5, criterion6, criterion7, criterion8};
	for (int i = 0; i < 8; ++i) {
		try {
			criteria[i]();
		} catch (const std::exception& e) {
			report(i + 1, false, std::string("threw: ") + e.what());
		}
	}
	return failures == 0 ? 0 : 1;
}
