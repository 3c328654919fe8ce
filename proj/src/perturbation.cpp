#include "nvid/perturbation.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "nvid/parallel.hpp"

namespace nvid {

namespace {

// Relative to the bare |mS, 0> energy of the subspace, to keep the
// subtraction of GHz-scale electron energies out of the nuclear levels.
struct RelativeEffective {
	long double origin = 0;
	Eigen::Matrix3cd matrix = Eigen::Matrix3cd::Zero();
};

// `dressed`, when given, holds level energies from a previous pass; they
// replace the bare diagonal in every reduction denominator.
RelativeEffective compose_subspace(const HermitianMatrix<OracleReal>& h, const NVParams& p, int mS,
                                   const PerturbationOptions& opts,
                                   const std::array<long double, kProductDim>* dressed = nullptr)
{
	if (mS < -1 || mS > 1)
		throw InvalidInput("subspace_effective: mS must be -1, 0 or +1");
	const int base = product_index(mS, 1);
	RelativeEffective out;
	out.origin = h(base + 1, base + 1).real();
	auto rel = [&](int i) { return static_cast<double>(h(i, i).real() - out.origin); };
	auto level = [&](int i) {
		return static_cast<double>((dressed ? (*dressed)[i] : h(i, i).real()) - out.origin);
	};
	auto entry = [&](int i, int j) { return std::complex<double>(h(i, j)); };
	auto electron_energy = [&](int m) { return (p.D + p.strain.Ez) * m * m + p.omega_e * m; };

	Eigen::Matrix3cd& m = out.matrix;
	for (int r = 0; r < 3; ++r)
		for (int c = 0; c < 3; ++c)
			m(r, c) = r == c ? std::complex<double>(rel(base + r)) : entry(base + r, base + c);

	for (int k = 0; k < kProductDim; ++k) {
		if (k >= base && k < base + 3)
			continue;
		const int mS_k = product_label(k).mS;
		// cyclic pairs: each near state is delta1 exactly once per distant level
		for (int r = 0; r < 3; ++r) {
			const int s = (r + 1) % 3;
			const int i = base + r, j = base + s;
			ThreeLevelSystem<std::complex<double>> t;
			t.a = entry(k, i);
			t.b = entry(k, j);
			t.c = entry(i, j);
			if (t.a == 0.0 && t.b == 0.0)
				continue;
			if (opts.keep_small_denominators) {
				const double mid = 0.5 * (level(i) + level(j));
				t.Delta = level(k) - mid;
				t.delta1 = level(i) - mid;
				t.delta2 = level(j) - mid;
			} else {
				// electron-only gap: nuclear and hyperfine energies dropped
				t.Delta = electron_energy(mS_k) - electron_energy(mS);
			}
			const auto red = reduce_three_level(t, opts.keep_small_denominators);
			m(r, r) += red.delta1 - t.delta1;
			m(r, s) += red.c_eff - t.c;
			m(s, r) = std::conj(m(r, s));
		}
	}
	return out;
}

// Second-order nuclear step, levels relative to the subspace origin.
std::array<double, 3> relative_levels(const Eigen::Matrix3cd& m)
{
	std::array<double, 3> out{};
	for (int r = 0; r < 3; ++r) {
		const double dr = m(r, r).real();
		double level = dr;
		for (int s = 0; s < 3; ++s) {
			if (s == r)
				continue;
			const double gap = dr - m(s, s).real();
			if (std::abs(gap) < kMinDenominatorHz)
				throw NearResonanceError("nuclear levels within 1 kHz in subspace");
			level += std::norm(m(r, s)) / gap;
		}
		out[r] = level;
	}
	return out;
}

using Composition = std::array<RelativeEffective, 3>; // mS = +1, 0, -1

Composition compose_all(const NVParams& p, const PerturbationOptions& opts)
{
	const HermitianMatrix<OracleReal> h = build_full<OracleReal>(p);
	Composition comp;
	for (int mS : {1, 0, -1})
		comp[1 - mS] = compose_subspace(h, p, mS, opts);
	if (!opts.keep_small_denominators || !opts.dressed_denominators)
		return comp;
	std::array<long double, kProductDim> dressed{};
	for (int mS : {1, 0, -1}) {
		const auto levels = relative_levels(comp[1 - mS].matrix);
		for (int q = 0; q < 3; ++q)
			dressed[product_index(mS, 1) + q] = comp[1 - mS].origin + levels[q];
	}
	for (int mS : {1, 0, -1})
		comp[1 - mS] = compose_subspace(h, p, mS, opts, &dressed);
	return comp;
}

} // namespace

SubspaceEffective subspace_effective(const NVParams& p, int mS, const PerturbationOptions& opts)
{
	if (mS < -1 || mS > 1)
		throw InvalidInput("subspace_effective: mS must be -1, 0 or +1");
	const auto rel = compose_all(p, opts)[1 - mS];
	SubspaceEffective eff;
	eff.mS = mS;
	eff.matrix = rel.matrix;
	const double origin = static_cast<double>(rel.origin);
	eff.matrix.diagonal().array() += origin;
	eff.omega_p1 = origin + rel.matrix(0, 0).real();
	eff.omega_0 = origin + rel.matrix(1, 1).real();
	eff.omega_m1 = origin + rel.matrix(2, 2).real();
	eff.Omega = std::sqrt(2.0) * rel.matrix(0, 1).real();
	return eff;
}

std::array<double, 3> subspace_levels(const SubspaceEffective& eff)
{
	return relative_levels(eff.matrix);
}

FrequencySet analytic_nuclear_frequencies(const NVParams& p, const PerturbationOptions& opts)
{
	const auto comp = compose_all(p, opts);
	FrequencySet out;
	for (int mS : {1, 0, -1}) {
		const auto levels = relative_levels(comp[1 - mS].matrix);
		out.nuclear[TransitionLabel::nuclear(mS, 1).nuclear_index()] = levels[0] - levels[1];
		out.nuclear[TransitionLabel::nuclear(mS, -1).nuclear_index()] = levels[2] - levels[1];
	}
	return out;
}

SweepGrid SweepGrid::standard()
{
	SweepGrid g;
	for (double b = 400; b <= 600 + 1e-9; b += 25)
		g.fields_gauss.push_back(b);
	g.angles_deg = {0.0, 0.05, 0.1};
	g.strain_hz = {0.0, 0.5e6, 1e6};
	return g;
}

double SweepPoint::max_deviation() const
{
	double worst = 0;
	for (int i = 0; i < 6; ++i)
		worst = std::max(worst, std::abs(analytic[i] - exact[i]));
	return worst;
}

double SweepPoint::mean_deviation() const
{
	double sum = 0;
	for (int i = 0; i < 6; ++i)
		sum += std::abs(analytic[i] - exact[i]);
	return sum / 6;
}

bool in_validated_domain(double field_gauss, double angle_deg, double strain_hz)
{
	constexpr double eps = 1e-9;
	return field_gauss >= 400 - eps && field_gauss <= 600 + eps && std::abs(angle_deg) <= 0.1 + eps &&
	       std::abs(strain_hz) <= 1e6 * (1 + eps);
}

SweepReport validation_sweep(const SweepGrid& grid, int jobs)
{
	SweepReport report;
	for (double b : grid.fields_gauss)
		for (double a : grid.angles_deg)
			for (double s : grid.strain_hz) {
				SweepPoint pt;
				pt.field_gauss = b;
				pt.angle_deg = a;
				pt.strain_hz = s;
				pt.in_domain = in_validated_domain(b, a, s);
				report.points.push_back(pt);
			}

	PerturbationOptions opts;
	opts.keep_small_denominators = grid.keep_small_denominators;
	opts.dressed_denominators = grid.dressed_denominators;
	parallel_for(report.points.size(), jobs, [&](std::size_t idx) {
		SweepPoint& pt = report.points[idx];
		NVParams p = nominal_params(pt.field_gauss * 1e-4, pt.angle_deg);
		p.strain.Ex_prime = p.strain.Ey_prime = p.strain.Ex = p.strain.Ey = pt.strain_hz;
		try {
			pt.exact = exact_nuclear_frequencies(p).nuclear;
			pt.analytic = analytic_nuclear_frequencies(p, opts).nuclear;
		} catch (const Error& e) {
			pt.error = e.what();
		}
	});

	std::array<int, 6> counted{};
	for (const auto& pt : report.points) {
		if (pt.flagged())
			++(pt.in_domain ? report.flagged_in_domain : report.flagged_out_of_domain);
		if (!pt.error.empty())
			continue;
		for (int i = 0; i < 6; ++i) {
			const double d = std::abs(pt.analytic[i] - pt.exact[i]);
			report.max_by_transition[i] = std::max(report.max_by_transition[i], d);
			report.mean_by_transition[i] += d;
			++counted[i];
		}
		if (pt.in_domain)
			report.max_in_domain = std::max(report.max_in_domain, pt.max_deviation());
	}
	for (int i = 0; i < 6; ++i)
		if (counted[i] > 0)
			report.mean_by_transition[i] /= counted[i];
	return report;
}

void write_sweep_csv(std::ostream& os, const SweepReport& report)
{
	const auto labels = nuclear_transitions();
	os << "field_gauss,angle_deg,strain_hz,in_domain,transition,analytic_hz,exact_hz,deviation_hz,flagged\n";
	os << std::setprecision(15);
	for (const auto& pt : report.points) {
		for (int i = 0; i < 6; ++i) {
			const double dev = pt.error.empty() ? std::abs(pt.analytic[i] - pt.exact[i]) : std::nan("");
			os << pt.field_gauss << ',' << pt.angle_deg << ',' << pt.strain_hz << ',' << (pt.in_domain ? 1 : 0)
			   << ',' << labels[i].name() << ',' << pt.analytic[i] << ',' << pt.exact[i] << ',' << dev << ','
			   << (pt.flagged() ? 1 : 0) << '\n';
		}
	}
}

} // namespace nvid
