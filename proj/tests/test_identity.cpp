#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "nvid/identity.hpp"

using namespace nvid;

namespace {

CenterRecord record(const std::string& id, const std::string& cohort, double P, double sP, double A_par = -2164689.8,
                    double A_perp = -2632.7e3, double ratio = -9113.85)
{
	CenterRecord r;
	r.center_id = id;
	r.cohort = cohort;
	ParamEstimate& e = r.estimate;
	e.center_id = id;
	e.P = P;
	e.A_par = A_par;
	e.A_perp = A_perp;
	e.covariance = Eigen::MatrixXd::Zero(6, 6);
	e.covariance.diagonal() << 700 * 700, 700 * 700, sP * sP, 0.7 * 0.7, sP * sP, 360.0 * 360.0;
	e.gamma_ratio = {ratio, 0.05};
	return r;
}

std::vector<CenterRecord> cohort_of(const std::vector<double>& P, double sigma)
{
	std::vector<CenterRecord> out;
	for (std::size_t i = 0; i < P.size(); ++i)
		out.push_back(record("nv" + std::to_string(i + 1), "far_from_SIL", P[i], sigma));
	return out;
}

} // namespace

TEST_CASE("weighted mean")
{
	const std::vector<double> one = {3.5}, one_s = {0.2};
	CHECK(weighted_mean(one, one_s).mean == 3.5);
	CHECK(weighted_mean(one, one_s).sigma == 0.2);

	const std::vector<double> two = {1.0, 1.0}, two_s = {2.0, 2.0};
	CHECK(weighted_mean(two, two_s).sigma == doctest::Approx(2.0 / std::sqrt(2.0)));

	const std::vector<double> x = {1.0, 4.0, -2.0, 7.5}, s = {0.5, 1.0, 2.0, 0.25};
	const auto m = weighted_mean(x, s);
	// weights 4, 1, 0.25, 16
	CHECK(m.mean == doctest::Approx((4 * 1.0 + 4.0 - 0.5 + 16 * 7.5) / 21.25));
	CHECK(m.sigma == doctest::Approx(1 / std::sqrt(21.25)));

	SUBCASE("permutation invariance and scale covariance")
	{
		const std::vector<double> xp = {7.5, -2.0, 1.0, 4.0}, sp = {0.25, 2.0, 0.5, 1.0};
		CHECK(weighted_mean(xp, sp).mean == doctest::Approx(m.mean).epsilon(1e-14));
		std::vector<double> xk, sk;
		for (std::size_t i = 0; i < x.size(); ++i) {
			xk.push_back(3 * x[i]);
			sk.push_back(3 * s[i]);
		}
		CHECK(weighted_mean(xk, sk).mean == doctest::Approx(3 * m.mean).epsilon(1e-14));
		CHECK(weighted_mean(xk, sk).sigma == doctest::Approx(3 * m.sigma).epsilon(1e-14));
	}

	SUBCASE("a record of infinite sigma changes nothing")
	{
		std::vector<double> xw = x, sw = s;
		xw.push_back(1e6);
		sw.push_back(1e30);
		CHECK(std::abs(weighted_mean(xw, sw).mean - m.mean) <= 1e-12 * std::abs(m.mean));
		CHECK(std::abs(weighted_mean(xw, sw).sigma - m.sigma) <= 1e-12 * m.sigma);
	}

	SUBCASE("five draws around the published quadrupole")
	{
		std::mt19937_64 rng(5);
		std::normal_distribution<double> z(-4945754.9, 2.0);
		std::vector<double> P, sP(5, 2.0);
		for (int i = 0; i < 5; ++i)
			P.push_back(z(rng));
		const auto c = weighted_mean(P, sP);
		CHECK(c.sigma == doctest::Approx(0.894).epsilon(0.01));
		CHECK(std::abs(c.mean + 4945754.9) < 3 * c.sigma);
	}

	const std::vector<double> none;
	CHECK_THROWS_AS(weighted_mean(none, none), InvalidInput);
	const std::vector<double> bad_s = {0.0};
	CHECK_THROWS_AS(weighted_mean(one, bad_s), InvalidInput);
}

TEST_CASE("consistency")
{
	SUBCASE("identical values")
	{
		const auto rep = consistency(cohort_of({5, 5, 5, 5}, 1.0), IdentityParam::P);
		CHECK(rep.chi2 == 0.0);
		CHECK(rep.dof == 3);
		CHECK(rep.consistent);
		for (const auto& c : rep.centers) {
			CHECK(c.pull == 0.0);
			CHECK(c.pull_loo == 0.0);
		}
	}

	SUBCASE("one center 40 Hz off")
	{
		auto recs = cohort_of({0, 0, 0, 0, 0, 40}, 1.0);
		const auto rep = consistency(recs, IdentityParam::P);
		CHECK(!rep.consistent);
		CHECK(rep.centers.back().pull_loo == doctest::Approx(40.0));
		// against the full mean it shares the offset with the others
		CHECK(rep.centers.back().pull == doctest::Approx(40.0 * 5 / 6));
		// the outlier also drags every other leave-one-out mean by 8 Hz
		CHECK(rep.centers.front().pull_loo == doctest::Approx(-8.0));
		CHECK(rep.outliers().size() == 6);

		ConsistencyOptions full;
		full.leave_one_out = false;
		const auto rep_full = consistency(recs, IdentityParam::P, full);
		CHECK(rep_full.centers.front().pull == doctest::Approx(-40.0 / 6));
		CHECK(rep_full.outliers().size() == 6);

		// with the outlier kept out of the mean only it is flagged
		std::vector<bool> include(6, true);
		include.back() = false;
		const auto rep_excl = consistency(recs, IdentityParam::P, include);
		CHECK(rep_excl.outliers() == std::vector<std::string>{"nv6"});
		CHECK(rep_excl.consistent);
	}

	SUBCASE("pulls are recomputable from the mean")
	{
		const auto rep = consistency(cohort_of({1.0, -0.5, 2.5, 0.3}, 0.8), IdentityParam::P);
		double chi2 = 0;
		for (const auto& c : rep.centers) {
			CHECK(c.pull == doctest::Approx((c.value - rep.mean.mean) / c.sigma));
			chi2 += c.pull * c.pull;
		}
		CHECK(rep.chi2 == doctest::Approx(chi2));
	}

	CHECK_THROWS_AS(consistency(cohort_of({1.0}, 1.0), IdentityParam::P), InvalidInput);
}

TEST_CASE("null-hypothesis statistics")
{
	std::mt19937_64 rng(2024);
	std::normal_distribution<double> z(0.0, 2.0);
	const int cohorts = 1000, n = 5;
	double chi2_sum = 0;
	int centers_ok = 0, cohorts_ok = 0;
	for (int k = 0; k < cohorts; ++k) {
		std::vector<double> P;
		for (int i = 0; i < n; ++i)
			P.push_back(z(rng));
		const auto rep = consistency(cohort_of(P, 2.0), IdentityParam::P);
		chi2_sum += rep.chi2;
		cohorts_ok += rep.consistent;
		for (const auto& c : rep.centers)
			centers_ok += c.consistent;
	}
	CHECK(chi2_sum / cohorts == doctest::Approx(n - 1).epsilon(0.1));
	// a leave-one-out pull over own sigma has sd sqrt(1 + 1/(n-1))
	CHECK(double(centers_ok) / (cohorts * n) == doctest::Approx(std::erf(2 / std::sqrt(1.25) / std::sqrt(2.0))).epsilon(0.02));
	// all five within 2 sigma at once: about 0.71 in this mode
	CHECK(double(cohorts_ok) / cohorts == doctest::Approx(0.71).epsilon(0.05));
}

TEST_CASE("cohort report")
{
	const double P0 = -4945754.9, A0 = -2164689.8;
	std::vector<CenterRecord> recs;
	for (int i = 0; i < 5; ++i)
		recs.push_back(record("nv" + std::to_string(i + 1), "far_from_SIL", P0, 0.7, A0));
	recs.push_back(record("nv6", "in_SIL", P0 + 30, 0.7, A0 + 30));
	recs.push_back(record("nv7", "in_SIL", P0 + 50, 0.7, A0 + 50));

	const CohortReport rep = cohort_report(recs);
	REQUIRE(rep.parameters.size() == 4);
	const auto& P = rep.at(IdentityParam::P);
	CHECK(P.mean.mean == doctest::Approx(P0).epsilon(1e-15));
	CHECK(P.mean.sigma == doctest::Approx(0.7 / std::sqrt(5.0)));
	CHECK(P.dof == 4);
	CHECK(P.consistent);
	CHECK(P.centers[5].pull == doctest::Approx(30 / 0.7));
	CHECK(P.centers[6].pull == doctest::Approx(50 / 0.7));
	CHECK(P.outliers() == std::vector<std::string>{"nv6", "nv7"});
	CHECK(rep.at(IdentityParam::A_par).outliers().size() == 2);
	CHECK(rep.at(IdentityParam::A_perp).dof == 6);
	CHECK(rep.at(IdentityParam::gamma_ratio).dof == 6);
	CHECK(rep.at(IdentityParam::A_perp).outliers().empty());

	std::ostringstream os;
	write_cohort_csv(os, rep);
	std::istringstream is(os.str());
	std::string line;
	std::getline(is, line);
	CHECK(line == "parameter,center_id,cohort,value,sigma,included,pull,pull_loo,mean,mean_sigma");
	int rows = 0;
	while (std::getline(is, line))
		++rows;
	CHECK(rows == 28);

	SUBCASE("no in_SIL centers")
	{
		recs.resize(5);
		CHECK(cohort_report(recs).at(IdentityParam::P).dof == 4);
	}

	SUBCASE("a single cohort falls back to all centers")
	{
		for (auto& r : recs)
			r.cohort = "other_sample";
		CHECK(cohort_report(recs).at(IdentityParam::P).dof == 6);
	}
}
