#include "nvid/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace nvid::io {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// nlohmann writes NaN as null; read it back the same way
double number(const json& doc, const std::string& key)
{
	if (!doc.contains(key))
		throw InvalidInput("missing field '" + key + "'");
	const json& v = doc.at(key);
	if (v.is_null())
		return kNaN;
	if (!v.is_number())
		throw InvalidInput("field '" + key + "' must be a number");
	return v.get<double>();
}

double number_or(const json& doc, const std::string& key, double fallback)
{
	return doc.contains(key) ? number(doc, key) : fallback;
}

int integer(const json& doc, const std::string& key)
{
	if (!doc.contains(key) || !doc.at(key).is_number_integer())
		throw InvalidInput("field '" + key + "' must be an integer");
	return doc.at(key).get<int>();
}

std::string text(const json& doc, const std::string& key)
{
	if (!doc.contains(key) || !doc.at(key).is_string())
		throw InvalidInput("field '" + key + "' must be a string");
	return doc.at(key).get<std::string>();
}

const json& array(const json& doc, const std::string& key)
{
	if (!doc.contains(key) || !doc.at(key).is_array())
		throw InvalidInput("field '" + key + "' must be an array");
	return doc.at(key);
}

json fit_value(const FitValue& v) { return {{"value", v.value}, {"sigma", v.sigma}}; }

FitValue fit_value_from(const json& doc) { return {number(doc, "value"), number(doc, "sigma")}; }

constexpr std::array<Param, 7> kParams = {Param::D,    Param::omega_e, Param::P,       Param::omega_n,
                                          Param::A_par, Param::A_perp, Param::omega_ex};

} // namespace

std::string schema_tag(const std::string& kind) { return "nvid." + kind + "/" + std::to_string(schema_version); }

void require_schema(const json& doc, const std::string& kind)
{
	if (!doc.is_object())
		throw InvalidInput(kind + " document must be a JSON object");
	const std::string tag = text(doc, "schema");
	const std::string prefix = "nvid." + kind + "/";
	if (tag.rfind(prefix, 0) != 0)
		throw InvalidInput("expected a " + prefix + "* document, got '" + tag + "'");
	if (tag != schema_tag(kind))
		throw InvalidInput("unsupported schema version '" + tag + "'");
}

json read_json_file(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw InvalidInput("cannot open '" + path.string() + "'");
	try {
		return json::parse(in);
	} catch (const json::exception& e) {
		throw InvalidInput("'" + path.string() + "' is not valid JSON: " + e.what());
	}
}

void write_json_file(const std::filesystem::path& path, const json& doc)
{
	if (path.has_parent_path())
		std::filesystem::create_directories(path.parent_path());
	std::ofstream out(path);
	if (!out)
		throw InvalidInput("cannot write '" + path.string() + "'");
	out << doc.dump(2) << '\n';
}

json to_json(const NVParams& p)
{
	return {{"schema", schema_tag("params")},
	        {"D", p.D},
	        {"omega_e", p.omega_e},
	        {"omega_ex", p.omega_ex},
	        {"P", p.P},
	        {"omega_n", p.omega_n},
	        {"omega_nx", p.omega_nx},
	        {"A_par", p.A_par},
	        {"A_perp", p.A_perp},
	        {"strain",
	         {{"Ez", p.strain.Ez},
	          {"Ex_prime", p.strain.Ex_prime},
	          {"Ey_prime", p.strain.Ey_prime},
	          {"Ex", p.strain.Ex},
	          {"Ey", p.strain.Ey}}}};
}

NVParams params_from_json(const json& doc)
{
	require_schema(doc, "params");
	NVParams p;
	p.D = number(doc, "D");
	p.omega_e = number(doc, "omega_e");
	p.omega_ex = number_or(doc, "omega_ex", 0);
	p.P = number(doc, "P");
	p.omega_n = number(doc, "omega_n");
	p.omega_nx = number_or(doc, "omega_nx", 0);
	p.A_par = number(doc, "A_par");
	p.A_perp = number(doc, "A_perp");
	if (doc.contains("strain")) {
		const json& s = doc.at("strain");
		p.strain.Ez = number_or(s, "Ez", 0);
		p.strain.Ex_prime = number_or(s, "Ex_prime", 0);
		p.strain.Ey_prime = number_or(s, "Ey_prime", 0);
		p.strain.Ex = number_or(s, "Ex", 0);
		p.strain.Ey = number_or(s, "Ey", 0);
	}
	validate(p);
	return p;
}

json to_json(const CenterInput& c)
{
	const MeasuredSet& m = c.measured;
	json lines = json::array();
	for (const auto& t : nuclear_transitions()) {
		const int i = t.nuclear_index();
		json line = {{"mS", t.mS}, {"branch", t.branch}};
		if (c.traces[i]) {
			line["trace"] = {{"csv", c.traces[i]->csv},
			                 {"rf_drive_hz", c.traces[i]->rf_drive_hz},
			                 {"rf_drive_sigma_hz", c.traces[i]->rf_drive_sigma_hz}};
		} else {
			line["freq_hz"] = m.nuclear[i];
			line["sigma_hz"] = m.nuclear_sigma[i];
		}
		lines.push_back(line);
	}
	return {{"center_id", m.center_id},
	        {"cohort", c.cohort},
	        {"B_hint_mT", m.field_hint_tesla * 1e3},
	        {"transitions", lines},
	        {"mw",
	         {{{"mI", m.mw.mI}, {"freq_hz", m.mw.plus_hz}, {"sigma_hz", m.mw.plus_sigma_hz}},
	          {{"mI", m.mw.mI}, {"freq_hz", m.mw.minus_hz}, {"sigma_hz", m.mw.minus_sigma_hz}}}}};
}

CenterInput center_from_json(const json& doc)
{
	if (!doc.is_object())
		throw InvalidInput("center entry must be a JSON object");
	CenterInput c;
	MeasuredSet& m = c.measured;
	m.center_id = text(doc, "center_id");
	const std::string where = "center '" + m.center_id + "': ";
	try {
		if (doc.contains("cohort"))
			c.cohort = text(doc, "cohort");
		m.field_hint_tesla = number_or(doc, "B_hint_mT", constants::nominal_field * 1e3) * 1e-3;

		std::set<int> seen;
		for (const json& line : array(doc, "transitions")) {
			const int mS = integer(line, "mS"), branch = integer(line, "branch");
			if (mS < -1 || mS > 1 || (branch != 1 && branch != -1))
				throw InvalidInput("transition (mS " + std::to_string(mS) + ", branch " + std::to_string(branch) +
				                   ") is not a nuclear line");
			const int i = TransitionLabel::nuclear(mS, branch).nuclear_index();
			if (!seen.insert(i).second)
				throw InvalidInput("transition " + TransitionLabel::nuclear(mS, branch).name() + " listed twice");
			if (line.contains("trace")) {
				const json& t = line.at("trace");
				c.traces[i] = TraceSource{text(t, "csv"), number(t, "rf_drive_hz"),
				                          number_or(t, "rf_drive_sigma_hz", 0)};
				m.nuclear[i] = kNaN;
				m.nuclear_sigma[i] = kNaN;
			} else {
				m.nuclear[i] = number(line, "freq_hz");
				m.nuclear_sigma[i] = number(line, "sigma_hz");
			}
		}
		if (seen.size() != 6)
			throw InvalidInput("needs all six nuclear transitions, found " + std::to_string(seen.size()));

		const json& mw = array(doc, "mw");
		if (mw.size() != 2)
			throw InvalidInput("needs exactly two MW lines");
		const int mI = integer(mw[0], "mI");
		if (integer(mw[1], "mI") != mI)
			throw InvalidInput("both MW lines must share the spectator mI");
		m.mw.mI = mI;
		m.mw.plus_hz = number(mw[0], "freq_hz");
		m.mw.plus_sigma_hz = number(mw[0], "sigma_hz");
		m.mw.minus_hz = number(mw[1], "freq_hz");
		m.mw.minus_sigma_hz = number(mw[1], "sigma_hz");
		if (!(m.mw.plus_sigma_hz > 0) || !(m.mw.minus_sigma_hz > 0))
			throw InvalidInput("MW sigmas must be positive");
		for (int i = 0; i < 6; ++i)
			if (!c.traces[i] && !(m.nuclear_sigma[i] > 0))
				throw InvalidInput("nuclear sigmas must be positive");
	} catch (const InvalidInput& e) {
		throw InvalidInput(where + e.what());
	}
	return c;
}

json to_json(const MeasuredSet& m)
{
	CenterInput c;
	c.measured = m;
	json doc = to_json(c);
	doc.erase("cohort");
	doc["schema"] = schema_tag("measured_set");
	return doc;
}

MeasuredSet measured_set_from_json(const json& doc)
{
	require_schema(doc, "measured_set");
	const CenterInput c = center_from_json(doc);
	for (const auto& t : c.traces)
		if (t)
			throw InvalidInput("center '" + c.measured.center_id +
			                   "': trace-backed lines are only resolved by the pipeline");
	return c.measured;
}

json to_json(const Dataset& d)
{
	json centers = json::array();
	for (const auto& c : d.centers)
		centers.push_back(to_json(c));
	return {{"schema", schema_tag("dataset")}, {"centers", centers}};
}

Dataset dataset_from_json(const json& doc)
{
	require_schema(doc, "dataset");
	Dataset d;
	std::set<std::string> ids;
	for (const json& c : array(doc, "centers")) {
		d.centers.push_back(center_from_json(c));
		if (!ids.insert(d.centers.back().measured.center_id).second)
			throw InvalidInput("duplicate center_id '" + d.centers.back().measured.center_id + "'");
	}
	if (d.centers.empty())
		throw InvalidInput("dataset has no centers");
	return d;
}

json to_json(const FitResult& f)
{
	json cov = json::array();
	for (int i = 0; i < 7; ++i) {
		json row = json::array();
		for (int j = 0; j < 7; ++j)
			row.push_back(f.covariance(i, j));
		cov.push_back(row);
	}
	return {{"schema", schema_tag("ramsey_fit")},
	        {"detuning_hz", fit_value(f.detuning)},
	        {"phi0", fit_value(f.phi0)},
	        {"a", fit_value(f.a)},
	        {"b", fit_value(f.b)},
	        {"c", fit_value(f.c)},
	        {"T2_star_s", fit_value(f.T2_star)},
	        {"p", fit_value(f.p)},
	        {"chi2_reduced", f.chi2_reduced},
	        {"iterations", f.iterations},
	        {"converged", f.converged},
	        {"covariance", cov}};
}

FitResult fit_from_json(const json& doc)
{
	require_schema(doc, "ramsey_fit");
	FitResult f;
	f.detuning = fit_value_from(doc.at("detuning_hz"));
	f.phi0 = fit_value_from(doc.at("phi0"));
	f.a = fit_value_from(doc.at("a"));
	f.b = fit_value_from(doc.at("b"));
	f.c = fit_value_from(doc.at("c"));
	f.T2_star = fit_value_from(doc.at("T2_star_s"));
	f.p = fit_value_from(doc.at("p"));
	f.chi2_reduced = number(doc, "chi2_reduced");
	f.iterations = integer(doc, "iterations");
	f.converged = doc.at("converged").get<bool>();
	const json& cov = array(doc, "covariance");
	if (cov.size() != 7)
		throw InvalidInput("ramsey fit covariance must be 7x7");
	for (int i = 0; i < 7; ++i)
		for (int j = 0; j < 7; ++j)
			f.covariance(i, j) = cov.at(i).at(j).is_null() ? kNaN : cov.at(i).at(j).get<double>();
	return f;
}

json to_json(const ParamEstimate& e)
{
	json names = json::array(), values = json::object(), sigmas = json::object(), cov = json::array();
	for (int i = 0; i < e.size(); ++i) {
		const Param p = kParams[i];
		names.push_back(to_string(p));
		values[to_string(p)] = e.value(p);
		sigmas[to_string(p)] = e.covariance.rows() == e.size() ? e.sigma(p) : kNaN;
	}
	for (int i = 0; i < e.covariance.rows(); ++i) {
		json row = json::array();
		for (int j = 0; j < e.covariance.cols(); ++j)
			row.push_back(e.covariance(i, j));
		cov.push_back(row);
	}
	return {{"schema", schema_tag("estimate")},
	        {"center_id", e.center_id},
	        {"model", to_string(e.model)},
	        {"parameters", names},
	        {"values", values},
	        {"sigmas", sigmas},
	        {"covariance", cov},
	        {"gamma_ratio", fit_value(e.gamma_ratio)},
	        {"weighted_residual_hz", e.weighted_residual},
	        {"analytic_residual_hz", e.analytic_residual},
	        {"rounds", e.rounds}};
}

ParamEstimate estimate_from_json(const json& doc)
{
	require_schema(doc, "estimate");
	ParamEstimate e;
	e.center_id = text(doc, "center_id");
	e.model = parse_model(text(doc, "model"));
	const json& v = doc.at("values");
	e.D = number(v, "D");
	e.omega_e = number(v, "omega_e");
	e.P = number(v, "P");
	e.omega_n = number(v, "omega_n");
	e.A_par = number(v, "A_par");
	e.A_perp = number(v, "A_perp");
	e.omega_ex = e.model == ModelKind::five_param ? number(v, "omega_ex") : 0.0;
	const json& cov = array(doc, "covariance");
	if (!cov.empty()) {
		const int n = e.size();
		if (static_cast<int>(cov.size()) != n)
			throw InvalidInput("estimate covariance has the wrong size");
		e.covariance.resize(n, n);
		for (int i = 0; i < n; ++i) {
			if (!cov[i].is_array() || static_cast<int>(cov[i].size()) != n)
				throw InvalidInput("estimate covariance has the wrong size");
			for (int j = 0; j < n; ++j)
				e.covariance(i, j) = cov[i][j].is_null() ? kNaN : cov[i][j].get<double>();
		}
	}
	e.gamma_ratio = fit_value_from(doc.at("gamma_ratio"));
	e.weighted_residual = number(doc, "weighted_residual_hz");
	e.analytic_residual = number_or(doc, "analytic_residual_hz", kNaN);
	e.rounds = doc.contains("rounds") ? integer(doc, "rounds") : 0;
	return e;
}

json to_json(const std::vector<CenterRecord>& records)
{
	json centers = json::array();
	for (const auto& r : records)
		centers.push_back({{"center_id", r.center_id}, {"cohort", r.cohort}, {"estimate", to_json(r.estimate)}});
	return {{"schema", schema_tag("cohort")}, {"centers", centers}};
}

std::vector<CenterRecord> records_from_json(const json& doc)
{
	// a results bundle carries the same centers layout
	const bool bundle = doc.is_object() && doc.value("schema", std::string()) == schema_tag("results");
	if (!bundle)
		require_schema(doc, "cohort");
	std::vector<CenterRecord> out;
	for (const json& c : array(doc, "centers")) {
		if (!c.contains("estimate"))
			continue; // failed centers in a bundle
		CenterRecord r;
		r.estimate = estimate_from_json(c.at("estimate"));
		r.center_id = c.contains("center_id") ? text(c, "center_id") : r.estimate.center_id;
		r.cohort = c.contains("cohort") ? text(c, "cohort") : "other_sample";
		if (r.estimate.covariance.rows() == 0)
			throw InvalidInput("center '" + r.center_id + "': estimate has no covariance");
		out.push_back(r);
	}
	return out;
}

json to_json(const CohortReport& r)
{
	json params = json::array();
	for (const auto& c : r.parameters) {
		json centers = json::array();
		for (const auto& p : c.centers)
			centers.push_back({{"center_id", p.center_id},
			                   {"cohort", p.cohort},
			                   {"value", p.value},
			                   {"sigma", p.sigma},
			                   {"included", p.included},
			                   {"pull", p.pull},
			                   {"pull_loo", p.pull_loo},
			                   {"consistent", p.consistent}});
		params.push_back({{"parameter", to_string(c.parameter)},
		                  {"mean", c.mean.mean},
		                  {"sigma", c.mean.sigma},
		                  {"chi2", c.chi2},
		                  {"dof", c.dof},
		                  {"leave_one_out", c.leave_one_out},
		                  {"threshold", c.threshold},
		                  {"consistent", c.consistent},
		                  {"outliers", c.outliers()},
		                  {"centers", centers}});
	}
	return {{"schema", schema_tag("cohort_report")}, {"parameters", params}};
}

json to_json(const ClockConfig& c)
{
	return {{"schema", schema_tag("clock")},
	        {"f0_hz", c.f0},
	        {"F", c.F},
	        {"T2_star_s", c.T2_star},
	        {"volume_mm3", c.volume_mm3},
	        {"carbon_density_cm3", c.carbon_density}};
}

ClockConfig clock_config_from_json(const json& doc)
{
	require_schema(doc, "clock");
	ClockConfig c;
	c.f0 = number_or(doc, "f0_hz", c.f0);
	c.F = number_or(doc, "F", c.F);
	c.T2_star = number_or(doc, "T2_star_s", c.T2_star);
	c.volume_mm3 = number_or(doc, "volume_mm3", c.volume_mm3);
	c.carbon_density = number_or(doc, "carbon_density_cm3", c.carbon_density);
	c.validate();
	return c;
}

json sweep_summary(const SweepReport& r)
{
	return {{"schema", schema_tag("sweep")},
	        {"points", r.points.size()},
	        {"max_in_domain_hz", r.max_in_domain},
	        {"flagged_in_domain", r.flagged_in_domain},
	        {"flagged_out_of_domain", r.flagged_out_of_domain},
	        {"max_by_transition_hz", r.max_by_transition},
	        {"mean_by_transition_hz", r.mean_by_transition},
	        {"passes", r.passes()}};
}

} // namespace nvid::io
