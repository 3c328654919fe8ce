#include "nvid/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "nvid/parallel.hpp"

namespace nvid {

int PipelineResult::failures() const
{
	return static_cast<int>(std::count_if(centers.begin(), centers.end(),
	                                      [](const CenterResult& c) { return !c.failed_stage.empty(); }));
}

std::vector<CenterRecord> PipelineResult::records() const
{
	std::vector<CenterRecord> out;
	for (const auto& c : centers)
		if (c.estimate)
			out.push_back({c.center_id, c.cohort, *c.estimate});
	return out;
}

std::vector<RamseyStage> resolve_traces(io::CenterInput& c, const std::filesystem::path& base_dir)
{
	std::vector<RamseyStage> stages;
	for (const auto& t : nuclear_transitions()) {
		const int i = t.nuclear_index();
		if (!c.traces[i])
			continue;
		std::filesystem::path path = c.traces[i]->csv;
		if (path.is_relative())
			path = base_dir / path;
		std::ifstream in(path);
		if (!in)
			throw InvalidInput("cannot open trace '" + path.string() + "'");
		RamseyStage s;
		s.label = t;
		s.fit = fit(read_trace_csv(in));
		s.absolute = absolute_frequency(c.traces[i]->rf_drive_hz, s.fit, c.traces[i]->rf_drive_sigma_hz);
		c.measured.nuclear[i] = s.absolute.value;
		c.measured.nuclear_sigma[i] = s.absolute.sigma;
		stages.push_back(s);
	}
	return stages;
}

PipelineResult run_pipeline(const io::Dataset& d, const PipelineOptions& opts)
{
	std::vector<io::CenterInput> inputs = d.centers;
	std::sort(inputs.begin(), inputs.end(),
	          [](const auto& a, const auto& b) { return a.measured.center_id < b.measured.center_id; });

	PipelineResult out;
	out.centers.resize(inputs.size());
	// centers in parallel; the Monte-Carlo draws inside run serially
	parallel_for(inputs.size(), opts.jobs, [&](std::size_t k) {
		io::CenterInput c = inputs[k];
		CenterResult& r = out.centers[k];
		r.center_id = c.measured.center_id;
		r.cohort = c.cohort;
		try {
			r.ramsey = resolve_traces(c, opts.base_dir);
		} catch (const Error& e) {
			r.failed_stage = "ramsey";
			r.error = e.what();
			return;
		}
		try {
			r.estimate = estimate(c.measured, opts.model, opts.inversion);
			if (opts.mc_draws > 0)
				r.monte_carlo = monte_carlo_covariance(c.measured, opts.model, opts.mc_draws,
				                                       opts.seed + 1000003ull * k, 1, opts.inversion);
		} catch (const Error& e) {
			r.failed_stage = "inversion";
			r.error = e.what();
		}
	});

	const auto recs = out.records();
	if (recs.size() >= 2) {
		try {
			out.cohort = cohort_report(recs, opts.cohort);
		} catch (const Error& e) {
			out.cohort_error = e.what();
		}
	} else {
		out.cohort_error = "fewer than two estimated centers";
	}
	return out;
}

io::json to_json(const PipelineResult& r, const PipelineOptions& opts)
{
	using io::json;
	json centers = json::array();
	for (const auto& c : r.centers) {
		json entry = {{"center_id", c.center_id}, {"cohort", c.cohort}};
		json ramsey = json::array();
		for (const auto& s : c.ramsey)
			ramsey.push_back({{"transition", s.label.name()},
			                  {"fit", io::to_json(s.fit)},
			                  {"absolute_hz", {{"value", s.absolute.value}, {"sigma", s.absolute.sigma}}}});
		entry["ramsey"] = ramsey;
		if (c.estimate)
			entry["estimate"] = io::to_json(*c.estimate);
		if (c.monte_carlo) {
			json cov = json::array();
			for (int i = 0; i < c.monte_carlo->covariance.rows(); ++i) {
				json row = json::array();
				for (int j = 0; j < c.monte_carlo->covariance.cols(); ++j)
					row.push_back(c.monte_carlo->covariance(i, j));
				cov.push_back(row);
			}
			entry["monte_carlo"] = {{"draws", c.monte_carlo->draws},
			                        {"failures", c.monte_carlo->failures},
			                        {"covariance", cov}};
		}
		if (!c.failed_stage.empty())
			entry["failure"] = {{"stage", c.failed_stage}, {"message", c.error}};
		centers.push_back(entry);
	}
	json doc = {{"schema", io::schema_tag("results")},
	            {"model", to_string(opts.model)},
	            {"seed", opts.seed},
	            {"mc_draws", opts.mc_draws},
	            {"centers", centers}};
	if (r.cohort)
		doc["cohort"] = io::to_json(*r.cohort);
	else
		doc["cohort_error"] = r.cohort_error;
	return doc;
}

} // namespace nvid
