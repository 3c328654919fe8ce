// Writes the synthetic datasets under data/:
//   seven_centers.json  five centers at the combined values (far_from_SIL) and
//                       two with P and A_par raised by 30 and 50 Hz (in_SIL)
//   ramsey_demo.json    two centers, the first with every nuclear line backed
//                       by a simulated Ramsey trace in ramsey_demo/

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>

#include "nvid/inversion.hpp"
#include "nvid/io.hpp"
#include "nvid/ramsey.hpp"

using namespace nvid;
namespace fs = std::filesystem;

namespace {

io::CenterInput center(const NVParams& truth, const std::string& id, const std::string& cohort, double sigma,
                       double mw_sigma, std::optional<std::uint64_t> seed)
{
	io::CenterInput c;
	c.cohort = cohort;
	c.measured = synthetic_measured_set(truth, sigma, mw_sigma, seed, 1, id);
	return c;
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"Generate the synthetic datasets"};
	std::string out_dir = "data";
	double sigma = 1.6, mw_sigma = 1e3;
	std::optional<std::uint64_t> noise_seed;
	app.add_option("--out-dir", out_dir)->capture_default_str();
	app.add_option("--sigma", sigma, "nuclear line sigma, Hz")->capture_default_str();
	app.add_option("--mw-sigma", mw_sigma, "MW line sigma, Hz")->capture_default_str();
	app.add_option("--noise-seed", noise_seed, "add Gaussian noise to the seven-center lines");
	CLI11_PARSE(app, argc, argv);

	try {
		const fs::path dir = out_dir;
		const NVParams truth = combined_truth();

		io::Dataset seven;
		for (int i = 1; i <= 5; ++i) {
			auto seed = noise_seed ? std::optional<std::uint64_t>(*noise_seed + i) : std::nullopt;
			seven.centers.push_back(center(truth, "nv" + std::to_string(i), "far_from_SIL", sigma, mw_sigma, seed));
		}
		int k = 6;
		for (double offset : {30.0, 50.0}) {
			NVParams p = truth;
			p.P += offset;
			p.A_par += offset;
			auto seed = noise_seed ? std::optional<std::uint64_t>(*noise_seed + k) : std::nullopt;
			seven.centers.push_back(center(p, "nv" + std::to_string(k), "in_SIL", sigma, mw_sigma, seed));
			++k;
		}
		io::write_json_file(dir / "seven_centers.json", io::to_json(seven));

		io::Dataset demo;
		demo.centers.push_back(center(truth, "nv1", "far_from_SIL", sigma, mw_sigma, std::nullopt));
		demo.centers.push_back(center(truth, "nv2", "far_from_SIL", sigma, mw_sigma, std::nullopt));
		fs::create_directories(dir / "ramsey_demo");
		std::uint64_t seed = 1;
		for (const auto& t : nuclear_transitions()) {
			const int i = t.nuclear_index();
			RamseyConfig cfg = RamseyConfig::nominal();
			cfg.rng_seed = seed++;
			auto sign = [](int v) { return v > 0 ? std::string("p1") : v < 0 ? std::string("m1") : std::string("0"); };
			const std::string name = "ramsey_demo/ms_" + sign(t.mS) + "_branch_" + sign(t.branch) + ".csv";
			std::ofstream csv(dir / name);
			write_trace_csv(csv, simulate(cfg));
			// the drive sits one detuning below the line
			demo.centers[0].traces[i] =
			    io::TraceSource{name, demo.centers[0].measured.nuclear[i] - cfg.true_detuning, 0.0};
		}
		io::write_json_file(dir / "ramsey_demo.json", io::to_json(demo));
		std::printf("wrote %s and %s\n", (dir / "seven_centers.json").string().c_str(),
		            (dir / "ramsey_demo.json").string().c_str());
	} catch (const std::exception& e) {
		std::fprintf(stderr, "%s\n", e.what());
		return 3;
	}
	return 0;
}
