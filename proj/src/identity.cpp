#include "nvid/identity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "nvid/errors.hpp"

namespace nvid {

WeightedMean weighted_mean(std::span<const double> values, std::span<const double> sigmas)
{
	if (values.empty())
		throw InvalidInput("weighted_mean: empty input");
	if (values.size() != sigmas.size())
		throw InvalidInput("weighted_mean: values and sigmas differ in length");
	double sw = 0, swx = 0;
	for (std::size_t i = 0; i < values.size(); ++i) {
		if (!(sigmas[i] > 0))
			throw InvalidInput("weighted_mean: sigmas must be positive");
		const double w = 1.0 / (sigmas[i] * sigmas[i]);
		sw += w;
		swx += w * values[i];
	}
	return {swx / sw, 1.0 / std::sqrt(sw)};
}

std::string to_string(IdentityParam p)
{
	switch (p) {
	case IdentityParam::P: return "P";
	case IdentityParam::A_par: return "A_par";
	case IdentityParam::A_perp: return "A_perp";
	case IdentityParam::gamma_ratio: return "gamma_ratio";
	}
	return "?";
}

IdentityParam parse_identity_param(const std::string& s)
{
	for (auto p : {IdentityParam::P, IdentityParam::A_par, IdentityParam::A_perp, IdentityParam::gamma_ratio})
		if (to_string(p) == s)
			return p;
	throw InvalidInput("unknown identity parameter '" + s + "'");
}

double CenterRecord::value(IdentityParam p) const
{
	switch (p) {
	case IdentityParam::P: return estimate.P;
	case IdentityParam::A_par: return estimate.A_par;
	case IdentityParam::A_perp: return estimate.A_perp;
	case IdentityParam::gamma_ratio: return estimate.gamma_ratio.value;
	}
	return 0;
}

double CenterRecord::sigma(IdentityParam p) const
{
	switch (p) {
	case IdentityParam::P: return estimate.sigma(Param::P);
	case IdentityParam::A_par: return estimate.sigma(Param::A_par);
	case IdentityParam::A_perp: return estimate.sigma(Param::A_perp);
	case IdentityParam::gamma_ratio: return estimate.gamma_ratio.sigma;
	}
	return 0;
}

std::vector<std::string> ConsistencyReport::outliers() const
{
	std::vector<std::string> out;
	for (const auto& c : centers)
		if (!c.consistent)
			out.push_back(c.center_id);
	return out;
}

ConsistencyReport consistency(const std::vector<CenterRecord>& records, IdentityParam p,
                              const std::vector<bool>& include, const ConsistencyOptions& opts)
{
	if (records.size() != include.size())
		throw InvalidInput("consistency: inclusion mask does not match the records");
	std::vector<double> x, s;
	for (std::size_t i = 0; i < records.size(); ++i) {
		if (!(records[i].sigma(p) > 0))
			throw InvalidInput("consistency: center '" + records[i].center_id + "' has no positive sigma for " +
			                   to_string(p));
		if (include[i]) {
			x.push_back(records[i].value(p));
			s.push_back(records[i].sigma(p));
		}
	}
	if (x.size() < 2)
		throw InvalidInput("consistency: needs at least two centers in the mean");

	ConsistencyReport rep;
	rep.parameter = p;
	rep.mean = weighted_mean(x, s);
	rep.dof = static_cast<int>(x.size()) - 1;
	rep.leave_one_out = opts.leave_one_out;
	rep.threshold = opts.threshold;

	const double sw = 1.0 / (rep.mean.sigma * rep.mean.sigma);
	for (std::size_t i = 0; i < records.size(); ++i) {
		CenterPull c;
		c.center_id = records[i].center_id;
		c.cohort = records[i].cohort;
		c.value = records[i].value(p);
		c.sigma = records[i].sigma(p);
		c.included = include[i];
		c.pull = (c.value - rep.mean.mean) / c.sigma;
		if (c.included) {
			const double w = 1.0 / (c.sigma * c.sigma);
			const double loo = (rep.mean.mean * sw - w * c.value) / (sw - w);
			c.pull_loo = (c.value - loo) / c.sigma;
			rep.chi2 += c.pull * c.pull;
		} else {
			c.pull_loo = c.pull;
		}
		c.consistent = std::abs(opts.leave_one_out ? c.pull_loo : c.pull) <= opts.threshold;
		if (c.included && !c.consistent)
			rep.consistent = false;
		rep.centers.push_back(c);
	}
	return rep;
}

ConsistencyReport consistency(const std::vector<CenterRecord>& records, IdentityParam p,
                              const ConsistencyOptions& opts)
{
	return consistency(records, p, std::vector<bool>(records.size(), true), opts);
}

const ConsistencyReport& CohortReport::at(IdentityParam p) const
{
	for (const auto& r : parameters)
		if (r.parameter == p)
			return r;
	throw InvalidInput("cohort report has no entry for " + to_string(p));
}

CohortReport cohort_report(const std::vector<CenterRecord>& records, const CohortOptions& opts)
{
	CohortReport rep;
	for (auto p : {IdentityParam::P, IdentityParam::A_par, IdentityParam::A_perp, IdentityParam::gamma_ratio}) {
		std::vector<bool> include(records.size(), true);
		const auto it = opts.inclusion.find(p);
		if (it != opts.inclusion.end() && it->second) {
			const std::string& tag = *it->second;
			std::vector<bool> tagged(records.size());
			for (std::size_t i = 0; i < records.size(); ++i)
				tagged[i] = records[i].cohort == tag;
			if (std::count(tagged.begin(), tagged.end(), true) >= 2)
				include = tagged;
		}
		rep.parameters.push_back(consistency(records, p, include, opts.consistency));
	}
	return rep;
}

void write_cohort_csv(std::ostream& os, const CohortReport& report)
{
	os << "parameter,center_id,cohort,value,sigma,included,pull,pull_loo,mean,mean_sigma\n";
	os << std::setprecision(17);
	for (const auto& r : report.parameters)
		for (const auto& c : r.centers)
			os << to_string(r.parameter) << ',' << c.center_id << ',' << c.cohort << ',' << c.value << ','
			   << c.sigma << ',' << (c.included ? 1 : 0) << ',' << c.pull << ',' << c.pull_loo << ','
			   << r.mean.mean << ',' << r.mean.sigma << '\n';
}

} // namespace nvid
