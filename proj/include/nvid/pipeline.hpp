#pragma once

// Dataset -> Ramsey fits -> absolute frequencies -> parameter estimates ->
// cohort report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nvid/identity.hpp"
#include "nvid/io.hpp"

namespace nvid {

struct PipelineOptions {
	ModelKind model = ModelKind::four_param;
	int jobs = 1;
	int mc_draws = 0; // Monte-Carlo cross-check of the covariance per center
	std::uint64_t seed = 1;
	std::filesystem::path base_dir; // for relative trace paths
	InversionOptions inversion;
	CohortOptions cohort;
};

struct RamseyStage {
	TransitionLabel label;
	FitResult fit;
	AbsoluteFrequency absolute;
};

struct CenterResult {
	std::string center_id;
	std::string cohort;
	std::vector<RamseyStage> ramsey;
	std::optional<ParamEstimate> estimate;
	std::optional<MonteCarloCovariance> monte_carlo;
	std::string failed_stage; // empty, "ramsey" or "inversion"
	std::string error;
};

struct PipelineResult {
	std::vector<CenterResult> centers; // sorted by center_id
	std::optional<CohortReport> cohort;
	std::string cohort_error;

	int failures() const;
	std::vector<CenterRecord> records() const;
};

// Fills trace-backed lines of `c` from their fitted Ramsey traces.
std::vector<RamseyStage> resolve_traces(io::CenterInput& c, const std::filesystem::path& base_dir);

PipelineResult run_pipeline(const io::Dataset& d, const PipelineOptions& opts);

io::json to_json(const PipelineResult& r, const PipelineOptions& opts);

} // namespace nvid
