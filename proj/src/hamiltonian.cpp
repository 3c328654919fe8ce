#include "nvid/hamiltonian.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nvid {

void validate(const NVParams& p)
{
	const bool zero_field_split = p.D == 0 && p.omega_e == 0;
	if (!zero_field_split && !(std::abs(p.omega_e) < p.D)) {
		std::ostringstream msg;
		msg << "NVParams: |omega_e| = " << std::abs(p.omega_e) << " Hz must be below D = " << p.D << " Hz";
		throw InvalidInput(msg.str());
	}
	if (p.omega_ex != 0 && p.omega_nx != 0) {
		// wex/we = wnx/wn, compared cross-multiplied
		const double lhs = p.omega_ex * p.omega_n;
		const double rhs = p.omega_nx * p.omega_e;
		if (std::abs(lhs - rhs) > 1e-12 * std::max(std::abs(lhs), std::abs(rhs)))
			throw InvalidInput("NVParams: omega_ex/omega_e must equal omega_nx/omega_n");
	}
}

NVParams with_field(NVParams p, double field_tesla, double misalignment_deg, double gamma_ratio)
{
	const double theta = misalignment_deg * std::numbers::pi / 180.0;
	const double larmor_e = -constants::gamma_e * field_tesla;
	p.omega_e = larmor_e * std::cos(theta);
	p.omega_ex = larmor_e * std::sin(theta);
	p.omega_n = p.omega_e / gamma_ratio;
	p.omega_nx = p.omega_ex / gamma_ratio;
	return p;
}

NVParams nominal_params(double field_tesla, double misalignment_deg, double gamma_ratio)
{
	NVParams p;
	p.D = constants::zero_field_splitting;
	p.P = constants::quadrupole;
	p.A_par = constants::hyperfine_par;
	p.A_perp = constants::hyperfine_perp;
	return with_field(p, field_tesla, misalignment_deg, gamma_ratio);
}

TransitionLabel TransitionLabel::nuclear(int mS, int branch)
{
	if (mS < -1 || mS > 1 || (branch != 1 && branch != -1))
		throw InvalidInput("nuclear transition needs mS in {-1,0,1} and branch +-1");
	TransitionLabel t;
	t.kind = TransitionKind::nuclear;
	t.mS = mS;
	t.branch = branch;
	return t;
}

TransitionLabel TransitionLabel::electron(int mS, int mI)
{
	if ((mS != 1 && mS != -1) || mI < -1 || mI > 1)
		throw InvalidInput("electron transition needs mS = +-1 and mI in {-1,0,1}");
	TransitionLabel t;
	t.kind = TransitionKind::electron;
	t.mS = mS;
	t.branch = 0;
	t.mI = mI;
	return t;
}

int TransitionLabel::nuclear_index() const
{
	if (kind != TransitionKind::nuclear)
		throw InvalidInput("nuclear_index on an electron transition");
	return 2 * (1 - mS) + (branch == 1 ? 0 : 1);
}

namespace {
std::string signed_int(int v) { return v > 0 ? "+" + std::to_string(v) : std::to_string(v); }
} // namespace

std::string TransitionLabel::name() const
{
	if (kind == TransitionKind::nuclear)
		return "N(mS=" + signed_int(mS) + ",0<->" + signed_int(branch) + ")";
	return "E(0<->" + signed_int(mS) + ",mI=" + signed_int(mI) + ")";
}

std::array<TransitionLabel, 6> nuclear_transitions()
{
	return {TransitionLabel::nuclear(1, 1),  TransitionLabel::nuclear(1, -1), TransitionLabel::nuclear(0, 1),
	        TransitionLabel::nuclear(0, -1), TransitionLabel::nuclear(-1, 1), TransitionLabel::nuclear(-1, -1)};
}

TransitionLabel parse_transition(const std::string& name)
{
	for (const auto& t : nuclear_transitions())
		if (t.name() == name)
			return t;
	for (int mS : {1, -1})
		for (int mI : {1, 0, -1})
			if (TransitionLabel::electron(mS, mI).name() == name)
				return TransitionLabel::electron(mS, mI);
	throw InvalidInput("unknown transition label '" + name + "'");
}

EigenSystem<OracleReal> exact_levels(const NVParams& p)
{
	return label_states(eigh(build_full<OracleReal>(p)));
}

namespace {

FrequencySet nuclear_from_levels(const EigenSystem<OracleReal>& es)
{
	FrequencySet out;
	for (const auto& t : nuclear_transitions())
		out.nuclear[t.nuclear_index()] = static_cast<double>(es.energy(t.mS, t.branch) - es.energy(t.mS, 0));
	return out;
}

} // namespace

FrequencySet exact_nuclear_frequencies(const NVParams& p) { return nuclear_from_levels(exact_levels(p)); }

ElectronPair exact_electron_frequencies(const NVParams& p, int mI)
{
	if (mI < -1 || mI > 1)
		throw InvalidInput("electron transition needs mI in {-1,0,1}");
	const auto es = exact_levels(p);
	ElectronPair pair;
	pair.mI = mI;
	pair.plus_hz = static_cast<double>(es.energy(1, mI) - es.energy(0, mI));
	pair.minus_hz = static_cast<double>(es.energy(-1, mI) - es.energy(0, mI));
	return pair;
}

double exact_frequency(const NVParams& p, const TransitionLabel& t)
{
	const auto es = exact_levels(p);
	if (t.kind == TransitionKind::nuclear)
		return static_cast<double>(es.energy(t.mS, t.branch) - es.energy(t.mS, 0));
	return static_cast<double>(es.energy(t.mS, t.mI) - es.energy(0, t.mI));
}

double field_sensitivity(const NVParams& p, const TransitionLabel& t, double gamma_ratio)
{
	double ux = 0, uz = 1;
	const double norm = std::hypot(p.omega_e, p.omega_ex);
	if (norm > 0) {
		uz = p.omega_e / norm;
		ux = p.omega_ex / norm;
	}
	const double de = -constants::gamma_e * kSensitivityStepTesla;
	auto shifted = [&](double sign) {
		NVParams q = p;
		q.omega_e += sign * de * uz;
		q.omega_ex += sign * de * ux;
		q.omega_n += sign * de * uz / gamma_ratio;
		q.omega_nx += sign * de * ux / gamma_ratio;
		// keep the tied transverse term exactly proportional
		if (p.omega_ex != 0 && p.omega_nx != 0)
			q.omega_nx = q.omega_ex * q.omega_n / q.omega_e;
		return exact_frequency(q, t);
	};
	const double step_ut = kSensitivityStepTesla * 1e6;
	return (shifted(+1) - shifted(-1)) / (2 * step_ut);
}

} // namespace nvid
