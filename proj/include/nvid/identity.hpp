#pragma once

// Cross-center statistics: inverse-variance means, pulls and verdicts.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvid/inversion.hpp"

namespace nvid {

struct WeightedMean {
	double mean = 0;
	double sigma = 0;
};

WeightedMean weighted_mean(std::span<const double> values, std::span<const double> sigmas);

enum class IdentityParam { P, A_par, A_perp, gamma_ratio };

std::string to_string(IdentityParam p);
IdentityParam parse_identity_param(const std::string& s);

struct CenterRecord {
	std::string center_id;
	std::string cohort; // far_from_SIL, in_SIL, other_sample, ...
	ParamEstimate estimate;

	double value(IdentityParam p) const;
	double sigma(IdentityParam p) const;
};

struct CenterPull {
	std::string center_id;
	std::string cohort;
	double value = 0;
	double sigma = 0;
	bool included = false;  // contributes to the mean
	double pull = 0;        // against the full mean of the included set
	double pull_loo = 0;    // against the mean without this center
	bool consistent = true; // |pull| <= threshold in the configured mode
};

struct ConsistencyOptions {
	double threshold = 2.0;
	bool leave_one_out = true;
};

struct ConsistencyReport {
	IdentityParam parameter = IdentityParam::P;
	WeightedMean mean;
	std::vector<CenterPull> centers;
	double chi2 = 0; // sum of full-mean pulls of the included centers
	int dof = 0;
	bool leave_one_out = true;
	double threshold = 2.0;
	bool consistent = true; // every included center within threshold

	std::vector<std::string> outliers() const;
};

// `include[i]` marks the centers entering the mean; the rest are only compared
// against it. Pulls are deviation / own sigma.
ConsistencyReport consistency(const std::vector<CenterRecord>& records, IdentityParam p,
                              const std::vector<bool>& include, const ConsistencyOptions& opts = {});
ConsistencyReport consistency(const std::vector<CenterRecord>& records, IdentityParam p,
                              const ConsistencyOptions& opts = {});

struct CohortOptions {
	ConsistencyOptions consistency;
	// cohort tag defining the mean per parameter; unset means all centers.
	// A tag absent from the input also falls back to all centers.
	std::map<IdentityParam, std::optional<std::string>> inclusion = {
	    {IdentityParam::P, "far_from_SIL"},
	    {IdentityParam::A_par, "far_from_SIL"},
	    {IdentityParam::A_perp, std::nullopt},
	    {IdentityParam::gamma_ratio, std::nullopt},
	};
};

struct CohortReport {
	std::vector<ConsistencyReport> parameters; // P, A_par, A_perp, gamma_ratio

	const ConsistencyReport& at(IdentityParam p) const;
};

CohortReport cohort_report(const std::vector<CenterRecord>& records, const CohortOptions& opts = {});

// parameter,center_id,cohort,value,sigma,included,pull,pull_loo,mean,mean_sigma
void write_cohort_csv(std::ostream& os, const CohortReport& report);

} // namespace nvid
