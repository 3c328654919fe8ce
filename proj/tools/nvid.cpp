#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nvid/clock.hpp"
#include "nvid/identity.hpp"
#include "nvid/inversion.hpp"
#include "nvid/io.hpp"
#include "nvid/perturbation.hpp"
#include "nvid/pipeline.hpp"
#include "nvid/ramsey.hpp"

using namespace nvid;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, usage = 1, validation = 2, numerical = 3 };

// usage errors raised after CLI11 has accepted the arguments
struct UsageError : std::runtime_error {
	using std::runtime_error::runtime_error;
};

// "a:b:step" or "x,y,z"
std::vector<double> parse_grid(const std::string& s, const std::string& what)
{
	std::vector<double> out;
	auto num = [&](const std::string& t) {
		std::size_t used = 0;
		double v = 0;
		try {
			v = std::stod(t, &used);
		} catch (const std::exception&) {
			used = 0;
		}
		if (used == 0 || used != t.size() || !std::isfinite(v))
			throw UsageError("malformed " + what + " '" + s + "'");
		return v;
	};
	if (s.find(':') != std::string::npos) {
		std::vector<std::string> parts;
		std::stringstream ss(s);
		std::string part;
		while (std::getline(ss, part, ':'))
			parts.push_back(part);
		if (parts.size() != 3)
			throw UsageError("malformed " + what + " range '" + s + "' (expected start:stop:step)");
		const double a = num(parts[0]), b = num(parts[1]), step = num(parts[2]);
		if (!(step > 0) || b < a)
			throw UsageError("malformed " + what + " range '" + s + "'");
		for (int i = 0; a + i * step <= b + 1e-9 * std::abs(step); ++i)
			out.push_back(a + i * step);
		return out;
	}
	std::stringstream ss(s);
	std::string part;
	while (std::getline(ss, part, ','))
		out.push_back(num(part));
	if (out.empty())
		throw UsageError("empty " + what);
	return out;
}

void write_text(const fs::path& path, const std::string& body)
{
	if (path.has_parent_path())
		fs::create_directories(path.parent_path());
	std::ofstream out(path);
	if (!out)
		throw InvalidInput("cannot write '" + path.string() + "'");
	out << body;
}

void print_estimate(const ParamEstimate& e)
{
	std::printf("%s (%s): residual %.3f Hz\n", e.center_id.c_str(), to_string(e.model).c_str(), e.weighted_residual);
	for (int i = 0; i < e.size(); ++i) {
		const Param p = static_cast<Param>(i);
		std::printf("  %-9s %.3f +- %.3f Hz\n", to_string(p).c_str(), e.value(p), e.sigma(p));
	}
	std::printf("  gamma_e/gamma_n %.4f +- %.4f\n", e.gamma_ratio.value, e.gamma_ratio.sigma);
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"NV center spectroscopy: validation, Ramsey fitting, parameter inversion and clock estimates"};
	app.set_config("--config", "", "TOML/INI file with option defaults; flags take precedence");
	app.require_subcommand(1);

	// validate
	auto* validate_cmd = app.add_subcommand("validate", "Compare the perturbative formulas with exact diagonalization");
	std::string fields = "400:600:25", angles = "0,0.05,0.1", strains = "0,500000,1000000";
	std::string sweep_out = "sweep.csv";
	bool drop_small = false, no_dressing = false;
	int jobs = 1;
	validate_cmd->add_option("--fields", fields, "field grid in gauss, start:stop:step or list")->capture_default_str();
	validate_cmd->add_option("--angles", angles, "misalignment grid in degrees")->capture_default_str();
	validate_cmd->add_option("--strain", strains, "transverse strain grid in Hz")->capture_default_str();
	validate_cmd->add_flag("--drop-small-denominators", drop_small, "use electron-only energy gaps");
	validate_cmd->add_flag("--no-dressing", no_dressing, "skip the dressed-denominator pass");
	validate_cmd->add_option("--out", sweep_out, "CSV report")->capture_default_str();
	validate_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

	// simulate
	auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a shot-noise Ramsey trace");
	RamseyConfig sim = RamseyConfig::nominal();
	int points = static_cast<int>(sim.time_points.size());
	double span = sim.time_points.back();
	std::string trace_out;
	simulate_cmd->add_option("--detuning", sim.true_detuning, "Hz")->capture_default_str();
	simulate_cmd->add_option("--T2", sim.T2_star, "s")->capture_default_str();
	simulate_cmd->add_option("--stretch", sim.stretch_p)->capture_default_str();
	simulate_cmd->add_option("--amplitude", sim.amplitude_a)->capture_default_str();
	simulate_cmd->add_option("--offset", sim.offset_b)->capture_default_str();
	simulate_cmd->add_option("--baseline", sim.baseline_c)->capture_default_str();
	simulate_cmd->add_option("--phase", sim.phase_phi0, "rad")->capture_default_str();
	simulate_cmd->add_option("--T1", sim.decline_T1, "s, decline of the offset")->capture_default_str();
	simulate_cmd->add_option("--shots", sim.shots_per_point, "shots per point")->capture_default_str();
	simulate_cmd->add_option("--points", points)->capture_default_str()->check(CLI::Range(2, 1000000));
	simulate_cmd->add_option("--span", span, "last free-evolution time, s")->capture_default_str();
	simulate_cmd->add_option("--seed", sim.rng_seed)->capture_default_str();
	simulate_cmd->add_option("--out", trace_out, "trace CSV")->required();

	// fit
	auto* fit_cmd = app.add_subcommand("fit", "Fit a Ramsey trace");
	std::string trace_in, fit_out;
	std::optional<double> rf_drive;
	double rf_sigma = 0;
	fit_cmd->add_option("--trace", trace_in, "trace CSV (time_s,signal,sigma)")->required()->check(CLI::ExistingFile);
	fit_cmd->add_option("--rf-drive", rf_drive, "drive frequency in Hz for the absolute line position");
	fit_cmd->add_option("--rf-sigma", rf_sigma, "Hz")->capture_default_str();
	fit_cmd->add_option("--out", fit_out, "fit result JSON");

	// invert
	auto* invert_cmd = app.add_subcommand("invert", "Recover Hamiltonian parameters from one measured set");
	std::string measured_in, estimate_out, model_name = "4";
	int mc_draws = 0;
	std::uint64_t seed = 1;
	invert_cmd->add_option("--input", measured_in, "measured-set JSON")->required()->check(CLI::ExistingFile);
	invert_cmd->add_option("--model", model_name, "4 or 5")->capture_default_str()->check(CLI::IsMember({"4", "5"}));
	invert_cmd->add_option("--out", estimate_out, "estimate JSON");
	invert_cmd->add_option("--mc-draws", mc_draws, "Monte-Carlo covariance cross-check")->check(CLI::NonNegativeNumber);
	invert_cmd->add_option("--seed", seed)->capture_default_str();
	invert_cmd->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

	// identity
	auto* identity_cmd = app.add_subcommand("identity", "Cross-center consistency report");
	std::string cohort_in, report_out, csv_out;
	double threshold = 2.0;
	bool full_mean = false;
	identity_cmd->add_option("--input", cohort_in, "cohort JSON or results bundle")->required()->check(CLI::ExistingFile);
	identity_cmd->add_option("--out", report_out, "report JSON");
	identity_cmd->add_option("--csv", csv_out, "plot CSV");
	identity_cmd->add_option("--threshold", threshold, "pull threshold")->capture_default_str()->check(CLI::PositiveNumber);
	identity_cmd->add_flag("--full-mean", full_mean, "pulls against the full mean instead of leave-one-out");

	// clock
	auto* clock_cmd = app.add_subcommand("clock", "Ensemble clock instability");
	ClockConfig clock_cfg;
	std::string clock_json, curve_out;
	double N = 1e12, T = 1.0;
	std::optional<double> target, ppb;
	clock_cmd->add_option("--clock-config", clock_json, "clock JSON")->check(CLI::ExistingFile);
	clock_cmd->add_option("--f0", clock_cfg.f0, "Hz")->capture_default_str();
	clock_cmd->add_option("--F", clock_cfg.F, "readout fidelity")->capture_default_str();
	clock_cmd->add_option("--T2", clock_cfg.T2_star, "s")->capture_default_str();
	clock_cmd->add_option("--volume", clock_cfg.volume_mm3, "mm^3")->capture_default_str();
	clock_cmd->add_option("--N", N, "number of centers")->capture_default_str();
	clock_cmd->add_option("--T", T, "averaging time, s")->capture_default_str();
	clock_cmd->add_option("--target", target, "instability to reach at T");
	clock_cmd->add_option("--ppb", ppb, "density in ppb; overrides --N");
	clock_cmd->add_option("--curve", curve_out, "instability curve CSV over 1..1e16 centers");

	// pipeline
	auto* pipeline_cmd = app.add_subcommand("pipeline", "Dataset to cohort report");
	std::string dataset_in, out_dir = "results";
	pipeline_cmd->add_option("--dataset", dataset_in, "dataset JSON")->required()->check(CLI::ExistingFile);
	pipeline_cmd->add_option("--model", model_name, "4 or 5")->capture_default_str()->check(CLI::IsMember({"4", "5"}));
	pipeline_cmd->add_option("--seed", seed, "seed of the Monte-Carlo cross-check")->capture_default_str();
	pipeline_cmd->add_option("--mc-draws", mc_draws)->check(CLI::NonNegativeNumber);
	pipeline_cmd->add_option("--jobs", jobs)->check(CLI::PositiveNumber);
	pipeline_cmd->add_option("--out-dir", out_dir)->capture_default_str();

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp& e) {
		return app.exit(e);
	} catch (const CLI::CallForAllHelp& e) {
		return app.exit(e);
	} catch (const CLI::ParseError& e) {
		if (argc <= 1)
			std::cerr << app.help();
		else
			app.exit(e);
		return usage;
	}

	try {
		if (*validate_cmd) {
			SweepGrid grid;
			grid.fields_gauss = parse_grid(fields, "field grid");
			grid.angles_deg = parse_grid(angles, "angle grid");
			grid.strain_hz = parse_grid(strains, "strain grid");
			grid.keep_small_denominators = !drop_small;
			grid.dressed_denominators = !no_dressing;
			const SweepReport rep = validation_sweep(grid, jobs);
			std::ostringstream csv;
			write_sweep_csv(csv, rep);
			write_text(sweep_out, csv.str());
			std::printf("points %zu, max in-domain deviation %.4f Hz, flagged in/out of domain %d/%d\n",
			            rep.points.size(), rep.max_in_domain, rep.flagged_in_domain, rep.flagged_out_of_domain);
			std::printf("report: %s\n", sweep_out.c_str());
			return rep.passes() ? ok : validation;
		}
		if (*simulate_cmd) {
			sim.time_points.clear();
			for (int i = 0; i < points; ++i)
				sim.time_points.push_back(span * i / (points - 1));
			const RamseyTrace tr = simulate(sim);
			std::ostringstream csv;
			write_trace_csv(csv, tr);
			write_text(trace_out, csv.str());
			std::printf("wrote %zu points to %s\n", tr.size(), trace_out.c_str());
			return ok;
		}
		if (*fit_cmd) {
			std::ifstream in(trace_in);
			const FitResult f = fit(read_trace_csv(in));
			std::printf("detuning %.3f +- %.3f Hz, T2* %.4g s, p %.3f, chi2_red %.3f\n", f.detuning.value,
			            f.detuning.sigma, f.T2_star.value, f.p.value, f.chi2_reduced);
			io::json doc = io::to_json(f);
			if (rf_drive) {
				const auto abs = absolute_frequency(*rf_drive, f, rf_sigma);
				std::printf("line %.3f +- %.3f Hz\n", abs.value, abs.sigma);
				doc["absolute_hz"] = {{"value", abs.value}, {"sigma", abs.sigma}};
			}
			if (!fit_out.empty())
				io::write_json_file(fit_out, doc);
			return ok;
		}
		if (*invert_cmd) {
			const MeasuredSet m = io::measured_set_from_json(io::read_json_file(measured_in));
			const ModelKind model = parse_model(model_name);
			const ParamEstimate e = estimate(m, model);
			print_estimate(e);
			io::json doc = io::to_json(e);
			if (mc_draws > 0) {
				const auto mc = monte_carlo_covariance(m, model, mc_draws, seed, jobs);
				io::json cov = io::json::array();
				for (int i = 0; i < mc.covariance.rows(); ++i) {
					io::json row = io::json::array();
					for (int j = 0; j < mc.covariance.cols(); ++j)
						row.push_back(mc.covariance(i, j));
					cov.push_back(row);
				}
				doc["monte_carlo"] = {{"draws", mc.draws}, {"failures", mc.failures}, {"seed", seed}, {"covariance", cov}};
				for (int i = 0; i < e.size(); ++i)
					std::printf("  MC sigma %-9s %.3f Hz\n", to_string(static_cast<Param>(i)).c_str(),
					            std::sqrt(mc.covariance(i, i)));
			}
			if (!estimate_out.empty())
				io::write_json_file(estimate_out, doc);
			return ok;
		}
		if (*identity_cmd) {
			const auto recs = io::records_from_json(io::read_json_file(cohort_in));
			CohortOptions opts;
			opts.consistency.threshold = threshold;
			opts.consistency.leave_one_out = !full_mean;
			const CohortReport rep = cohort_report(recs, opts);
			for (const auto& r : rep.parameters) {
				std::printf("%-11s mean %.4f +- %.4f, chi2 %.2f / %d, outliers:", to_string(r.parameter).c_str(),
				            r.mean.mean, r.mean.sigma, r.chi2, r.dof);
				for (const auto& id : r.outliers())
					std::printf(" %s", id.c_str());
				std::printf("\n");
			}
			if (!report_out.empty())
				io::write_json_file(report_out, io::to_json(rep));
			if (!csv_out.empty()) {
				std::ostringstream csv;
				write_cohort_csv(csv, rep);
				write_text(csv_out, csv.str());
			}
			return ok;
		}
		if (*clock_cmd) {
			if (!clock_json.empty()) {
				const ClockConfig file = io::clock_config_from_json(io::read_json_file(clock_json));
				// explicit flags win over the file
				if (clock_cmd->count("--f0") == 0)
					clock_cfg.f0 = file.f0;
				if (clock_cmd->count("--F") == 0)
					clock_cfg.F = file.F;
				if (clock_cmd->count("--T2") == 0)
					clock_cfg.T2_star = file.T2_star;
				if (clock_cmd->count("--volume") == 0)
					clock_cfg.volume_mm3 = file.volume_mm3;
				clock_cfg.carbon_density = file.carbon_density;
			}
			clock_cfg.validate();
			if (ppb)
				N = density_to_count(*ppb, clock_cfg.volume_mm3, clock_cfg.carbon_density);
			std::printf("prefactor %.4g\n", clock_cfg.prefactor());
			std::printf("N %.4g (%.4g ppb in %.3g mm^3): instability %.4g at %.4g s\n", N,
			            count_to_density(N, clock_cfg.volume_mm3, clock_cfg.carbon_density), clock_cfg.volume_mm3,
			            instability(clock_cfg, N, T), T);
			for (const auto& b : benchmarks())
				std::printf("  %-14s %.3g\n", b.name.c_str(), b.instability);
			if (target)
				std::printf("required N for %.4g: %llu\n", *target,
				            static_cast<unsigned long long>(required_N(clock_cfg, *target, T)));
			if (!curve_out.empty()) {
				std::ostringstream csv;
				emit_curve(csv, clock_cfg, 1, 1e16);
				write_text(curve_out, csv.str());
			}
			return ok;
		}
		if (*pipeline_cmd) {
			const io::Dataset d = io::dataset_from_json(io::read_json_file(dataset_in));
			PipelineOptions opts;
			opts.model = parse_model(model_name);
			opts.jobs = jobs;
			opts.mc_draws = mc_draws;
			opts.seed = seed;
			opts.base_dir = fs::path(dataset_in).parent_path();
			const PipelineResult r = run_pipeline(d, opts);
			const fs::path dir = out_dir;
			io::write_json_file(dir / "results.json", to_json(r, opts));
			for (const auto& c : r.centers) {
				if (c.estimate)
					print_estimate(*c.estimate);
				else
					std::fprintf(stderr, "%s: %s failed: %s\n", c.center_id.c_str(), c.failed_stage.c_str(),
					             c.error.c_str());
			}
			if (r.cohort) {
				std::ostringstream csv;
				write_cohort_csv(csv, *r.cohort);
				write_text(dir / "cohort.csv", csv.str());
				for (const auto& p : r.cohort->parameters) {
					std::printf("%-11s mean %.4f +- %.4f, outliers:", to_string(p.parameter).c_str(), p.mean.mean,
					            p.mean.sigma);
					for (const auto& id : p.outliers())
						std::printf(" %s", id.c_str());
					std::printf("\n");
				}
			} else {
				std::fprintf(stderr, "cohort report skipped: %s\n", r.cohort_error.c_str());
			}
			std::printf("results: %s\n", (dir / "results.json").string().c_str());
			return r.failures() > 0 ? numerical : ok;
		}
	} catch (const UsageError& e) {
		std::fprintf(stderr, "usage error: %s\n", e.what());
		return usage;
	} catch (const InvalidInput& e) {
		std::fprintf(stderr, "invalid input: %s\n", e.what());
		return validation;
	} catch (const LabelingError& e) {
		std::fprintf(stderr, "labeling failure: %s\n", e.what());
		return validation;
	} catch (const Error& e) {
		std::fprintf(stderr, "numerical failure: %s\n", e.what());
		return numerical;
	} catch (const std::exception& e) {
		std::fprintf(stderr, "failure: %s\n", e.what());
		return numerical;
	}
	return usage;
}
