#include "nvid/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "nvid/parallel.hpp"
#include "nvid/perturbation.hpp"

namespace nvid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Nuclear unknowns: P, wn, A_par, A_perp and, for five_param, s = wex^2.
using Vec = Eigen::VectorXd;

int nuclear_size(ModelKind m) { return m == ModelKind::five_param ? 5 : 4; }

NVParams assemble(double D, double omega_e, const Vec& y)
{
	NVParams p;
	p.D = D;
	p.omega_e = omega_e;
	p.P = y[0];
	p.omega_n = y[1];
	p.A_par = y[2];
	p.A_perp = y[3];
	if (y.size() > 4 && y[4] > 0) {
		p.omega_ex = std::sqrt(y[4]);
		p.omega_nx = p.omega_ex * p.omega_n / p.omega_e;
	}
	return p;
}

std::array<double, 6> exact_model(const NVParams& p) { return exact_nuclear_frequencies(p).nuclear; }

std::array<double, 6> analytic_model(const NVParams& p) { return analytic_nuclear_frequencies(p).nuclear; }

double chi2(const std::array<double, 6>& f, const MeasuredSet& m)
{
	double sum = 0;
	for (int i = 0; i < 6; ++i) {
		const double d = (f[i] - m.nuclear[i]) / m.nuclear_sigma[i];
		sum += d * d;
	}
	return sum;
}

// Zeroth-order H_par relations: f(mS, b) = P + b wn + b mS A_par.
Vec linear_start(const MeasuredSet& m, ModelKind model)
{
	auto f = [&](int mS, int b) { return m.nuclear[TransitionLabel::nuclear(mS, b).nuclear_index()]; };
	Vec y = Vec::Zero(nuclear_size(model));
	double sum = 0, split = 0;
	for (int mS : {1, 0, -1}) {
		sum += f(mS, 1) + f(mS, -1);
		split += f(mS, 1) - f(mS, -1);
	}
	y[0] = sum / 6;
	y[1] = split / 6;
	y[2] = ((f(1, 1) - f(1, -1)) - (f(-1, 1) - f(-1, -1))) / 4;
	y[3] = constants::hyperfine_perp;
	return y;
}

Vec clamp_misalignment(Vec y)
{
	if (y.size() > 4)
		y[4] = std::max(y[4], 0.0);
	return y;
}

Vec simplex_scales(ModelKind model)
{
	Vec s(nuclear_size(model));
	s.head(4) << 50.0, 50.0, 50.0, 2e3;
	if (s.size() > 4)
		s[4] = 1e10; // (1e5 Hz)^2
	return s;
}

// Nelder-Mead with standard coefficients, then a coordinate polish.
Vec nelder_mead(const std::function<double(const Vec&)>& f, Vec x0, const Vec& scale, double tol, int max_iter)
{
	const int n = static_cast<int>(x0.size());
	std::vector<Vec> v(n + 1, x0);
	std::vector<double> fv(n + 1);
	for (int i = 0; i < n; ++i)
		v[i + 1][i] += scale[i];
	for (int i = 0; i <= n; ++i)
		fv[i] = f(v[i]);

	std::vector<int> order(n + 1);
	for (int it = 0; it < max_iter; ++it) {
		std::iota(order.begin(), order.end(), 0);
		std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
		const int best = order.front(), worst = order.back(), second = order[n - 1];

		double spread = 0;
		for (int i = 0; i <= n; ++i)
			spread = std::max(spread, (v[i] - v[best]).cwiseAbs().cwiseQuotient(scale.cwiseMax(1.0)).maxCoeff() *
			                              scale.cwiseMax(1.0).minCoeff());
		if (spread < tol)
			break;

		Vec centroid = Vec::Zero(n);
		for (int i = 0; i <= n; ++i)
			if (i != worst)
				centroid += v[i];
		centroid /= n;

		const Vec xr = centroid + (centroid - v[worst]);
		const double fr = f(xr);
		if (fr < fv[best]) {
			const Vec xe = centroid + 2.0 * (centroid - v[worst]);
			const double fe = f(xe);
			if (fe < fr) {
				v[worst] = xe;
				fv[worst] = fe;
			} else {
				v[worst] = xr;
				fv[worst] = fr;
			}
		} else if (fr < fv[second]) {
			v[worst] = xr;
			fv[worst] = fr;
		} else {
			const bool outside = fr < fv[worst];
			const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (v[worst] - centroid));
			const double fc = f(xc);
			if (fc < std::min(fr, fv[worst])) {
				v[worst] = xc;
				fv[worst] = fc;
			} else {
				for (int i = 0; i <= n; ++i) {
					if (i == best)
						continue;
					v[i] = v[best] + 0.5 * (v[i] - v[best]);
					fv[i] = f(v[i]);
				}
			}
		}
	}
	const int best = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
	Vec x = v[best];
	double fx = fv[best];

	// coordinate polish: shrinking steps along each axis
	for (int k = 0; k < n; ++k) {
		for (double h = scale[k] * 0.1; h > scale[k] * 1e-9; h *= 0.5) {
			for (double dir : {1.0, -1.0}) {
				Vec t = x;
				t[k] += dir * h;
				const double ft = f(t);
				if (ft < fx) {
					x = t;
					fx = ft;
				}
			}
		}
	}
	return x;
}

// Damped Gauss-Newton on the exact model, s = wex^2 kept non-negative.
Vec exact_refine(const MeasuredSet& m, double D, double omega_e, Vec y)
{
	const int n = static_cast<int>(y.size());
	Vec steps(n);
	steps.head(4) << 0.5, 0.5, 0.5, 5.0;
	if (n > 4)
		steps[4] = 1e9;
	Vec tol(n);
	tol.head(4) << 1e-7, 1e-7, 1e-7, 1e-5;
	if (n > 4)
		tol[4] = 1e2;

	Eigen::Matrix<double, 6, 1> w;
	for (int i = 0; i < 6; ++i)
		w[i] = 1.0 / m.nuclear_sigma[i];
	auto residuals = [&](const Vec& x) {
		const auto f = exact_model(assemble(D, omega_e, x));
		Eigen::Matrix<double, 6, 1> r;
		for (int i = 0; i < 6; ++i)
			r[i] = w[i] * (f[i] - m.nuclear[i]);
		return r;
	};

	auto r = residuals(y);
	double lambda = 1e-6;
	for (int it = 0; it < 60; ++it) {
		Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, n);
		for (int k = 0; k < n; ++k) {
			Vec a = y, b = y;
			a[k] += steps[k];
			if (k == 4 && y[k] < steps[k]) {
				J.col(k) = (residuals(a) - r) / steps[k];
			} else {
				b[k] -= steps[k];
				J.col(k) = (residuals(a) - residuals(b)) / (2 * steps[k]);
			}
		}
		const Eigen::MatrixXd A = J.transpose() * J;
		const Vec g = J.transpose() * r;
		bool accepted = false;
		Vec step;
		while (lambda < 1e12) {
			Eigen::MatrixXd M = A;
			M.diagonal() += lambda * A.diagonal().cwiseMax(1e-300);
			step = M.ldlt().solve(-g);
			Vec trial = clamp_misalignment(y + step);
			const auto rt = residuals(trial);
			if (rt.squaredNorm() <= r.squaredNorm()) {
				step = trial - y;
				y = trial;
				r = rt;
				lambda = std::max(lambda * 0.1, 1e-12);
				accepted = true;
				break;
			}
			lambda *= 10;
		}
		if (!accepted || (step.cwiseAbs().array() < tol.array()).all())
			break;
	}
	return y;
}

double field_sign_of(const MeasuredSet& m) { return m.field_hint_tesla < 0 ? -1.0 : 1.0; }

} // namespace

void MeasuredSet::validate() const
{
	for (int i = 0; i < 6; ++i)
		if (!(nuclear_sigma[i] > 0) || !std::isfinite(nuclear[i]))
			throw InvalidInput("MeasuredSet '" + center_id + "': nuclear sigmas must be positive");
	if (!(mw.plus_sigma_hz > 0) || !(mw.minus_sigma_hz > 0))
		throw InvalidInput("MeasuredSet '" + center_id + "': MW sigmas must be positive");
	if (mw.mI < -1 || mw.mI > 1)
		throw InvalidInput("MeasuredSet '" + center_id + "': MW mI must be -1, 0 or +1");
}

std::string to_string(ModelKind m) { return m == ModelKind::five_param ? "five_param" : "four_param"; }

ModelKind parse_model(const std::string& s)
{
	if (s == "5" || s == "five_param")
		return ModelKind::five_param;
	if (s == "4" || s == "four_param")
		return ModelKind::four_param;
	throw InvalidInput("unknown model '" + s + "' (expected 4 or 5)");
}

std::string to_string(Param p)
{
	static const char* names[] = {"D", "omega_e", "P", "omega_n", "A_par", "A_perp", "omega_ex"};
	return names[static_cast<int>(p)];
}

double ParamEstimate::value(Param p) const
{
	switch (p) {
	case Param::D: return D;
	case Param::omega_e: return omega_e;
	case Param::P: return P;
	case Param::omega_n: return omega_n;
	case Param::A_par: return A_par;
	case Param::A_perp: return A_perp;
	case Param::omega_ex: return omega_ex;
	}
	return kNaN;
}

double ParamEstimate::sigma(Param p) const
{
	const int i = static_cast<int>(p);
	if (i >= covariance.rows())
		return kNaN;
	return std::sqrt(covariance(i, i));
}

NVParams ParamEstimate::params() const
{
	Vec y(model == ModelKind::five_param ? 5 : 4);
	y.head(4) << P, omega_n, A_par, A_perp;
	if (y.size() > 4)
		y[4] = omega_ex * omega_ex;
	return assemble(D, omega_e, y);
}

ElectronSolution solve_D_omega_e(const ElectronPair& mw, const NVParams& context, double field_sign,
                                 const InversionOptions& opts)
{
	if (!(mw.plus_sigma_hz > 0) || !(mw.minus_sigma_hz > 0))
		throw InvalidInput("solve_D_omega_e: MW sigmas must be positive");
	// order-insensitive: the field sign decides which line is 0 <-> +1
	const bool plus_first = (mw.plus_hz >= mw.minus_hz) == (field_sign >= 0);
	const double up = plus_first ? mw.plus_hz : mw.minus_hz;
	const double down = plus_first ? mw.minus_hz : mw.plus_hz;
	const double up_sigma = plus_first ? mw.plus_sigma_hz : mw.minus_sigma_hz;
	const double down_sigma = plus_first ? mw.minus_sigma_hz : mw.plus_sigma_hz;

	NVParams p = context;
	auto with = [&](double D, double we) {
		NVParams q = p;
		q.D = D;
		q.omega_e = we;
		if (q.omega_ex != 0)
			q.omega_nx = q.omega_ex * q.omega_n / q.omega_e;
		return q;
	};
	auto lines = [&](double D, double we) {
		const auto pair = exact_electron_frequencies(with(D, we), mw.mI);
		return Eigen::Vector2d(pair.plus_hz, pair.minus_hz);
	};

	// H_par closed form: f+- = D +- (we + A_par mI)
	double D = 0.5 * (up + down);
	double we = 0.5 * (up - down) - context.A_par * mw.mI;
	const Eigen::Vector2d target(up, down);

	const double h = 1e3;
	Eigen::Matrix2d J;
	J.col(0) = (lines(D + h, we) - lines(D - h, we)) / (2 * h);
	J.col(1) = (lines(D, we + h) - lines(D, we - h)) / (2 * h);
	const Eigen::Matrix2d Jinv = J.inverse();

	ElectronSolution sol;
	bool converged = false;
	for (int it = 1; it <= 50; ++it) {
		const Eigen::Vector2d step = -Jinv * (lines(D, we) - target);
		D += step[0];
		we += step[1];
		sol.iterations = it;
		if (step.cwiseAbs().maxCoeff() < opts.mw_tolerance_hz) {
			converged = true;
			break;
		}
	}
	if (!converged)
		throw ConvergenceError("solve_D_omega_e: no convergence within 50 iterations");
	const Eigen::Vector2d miss = lines(D, we) - target;
	if (std::abs(miss[0]) > 10 * up_sigma || std::abs(miss[1]) > 10 * down_sigma)
		throw InvalidInput("solve_D_omega_e: MW pair inconsistent with the model");

	sol.D = D;
	sol.omega_e = we;
	Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
	S(0, 0) = up_sigma * up_sigma;
	S(1, 1) = down_sigma * down_sigma;
	sol.covariance = Jinv * S * Jinv.transpose();
	return sol;
}

double weighted_residual(const std::array<double, 6>& model, const MeasuredSet& m)
{
	double num = 0, den = 0;
	for (int i = 0; i < 6; ++i) {
		const double w = 1.0 / (m.nuclear_sigma[i] * m.nuclear_sigma[i]);
		num += w * (model[i] - m.nuclear[i]) * (model[i] - m.nuclear[i]);
		den += w;
	}
	return std::sqrt(num / den);
}

ParamEstimate fit_parameters(const MeasuredSet& m, ModelKind model, const InversionOptions& opts,
                             const ParamEstimate* warm)
{
	m.validate();
	const double sign = field_sign_of(m);
	Vec y;
	double D, we;
	if (warm) {
		y = Vec(nuclear_size(model));
		y.head(4) << warm->P, warm->omega_n, warm->A_par, warm->A_perp;
		if (model == ModelKind::five_param)
			y[4] = warm->model == ModelKind::five_param ? warm->omega_ex * warm->omega_ex : 0.0;
		D = warm->D;
		we = warm->omega_e;
	} else {
		y = linear_start(m, model);
		NVParams ctx;
		ctx.P = y[0];
		ctx.A_par = y[2];
		ctx.A_perp = y[3];
		ctx.D = constants::zero_field_splitting;
		ctx.omega_e = sign * -constants::gamma_e * std::abs(m.field_hint_tesla);
		ctx.omega_n = y[1];
		const auto e = solve_D_omega_e(m.mw, ctx, sign, opts);
		D = e.D;
		we = e.omega_e;
	}

	int round = 0;
	for (; round < opts.max_rounds; ++round) {
		if (round == 0 && !warm) {
			auto objective = [&](const Vec& x) {
				const Vec c = clamp_misalignment(x);
				try {
					const double penalty = x.size() > 4 && x[4] < 0 ? -x[4] * 1e-6 : 0.0;
					return chi2(analytic_model(assemble(D, we, c)), m) + penalty;
				} catch (const Error&) {
					return std::numeric_limits<double>::infinity();
				}
			};
			// the four-parameter optimum seeds the misalignment search
			if (model == ModelKind::five_param) {
				Vec y4 = y.head(4);
				auto obj4 = [&](const Vec& x) { return chi2(analytic_model(assemble(D, we, x)), m); };
				y4 = nelder_mead(obj4, y4, simplex_scales(ModelKind::four_param), opts.simplex_tolerance_hz,
				                 opts.max_simplex_iterations);
				y.head(4) = y4;
				y[4] = 0;
			}
			y = clamp_misalignment(nelder_mead(objective, y, simplex_scales(model), opts.simplex_tolerance_hz,
			                                   opts.max_simplex_iterations));
		}
		y = exact_refine(m, D, we, y);

		const auto e = solve_D_omega_e(m.mw, assemble(D, we, y), sign, opts);
		const double moved = std::max(std::abs(e.D - D), std::abs(e.omega_e - we));
		D = e.D;
		we = e.omega_e;
		if (moved < opts.mw_tolerance_hz) {
			y = exact_refine(m, D, we, y);
			if (y.size() > 4) {
				// the aligned model is nested: keep it when the search ends above it
				Vec flat = exact_refine(m, D, we, Vec(y.head(4)));
				if (chi2(exact_model(assemble(D, we, flat)), m) <= chi2(exact_model(assemble(D, we, y)), m)) {
					y.head(4) = flat;
					y[4] = 0;
				}
			}
			break;
		}
	}
	if (round == opts.max_rounds)
		throw ConvergenceError("fit_parameters: MW and nuclear steps did not settle");

	ParamEstimate est;
	est.center_id = m.center_id;
	est.model = model;
	est.D = D;
	est.omega_e = we;
	est.P = y[0];
	est.omega_n = y[1];
	est.A_par = y[2];
	est.A_perp = y[3];
	est.omega_ex = y.size() > 4 ? std::sqrt(std::max(y[4], 0.0)) : 0.0;
	est.rounds = round + 1;

	const NVParams p = est.params();
	const auto exact = exact_model(p);
	const auto analytic = analytic_model(p);
	est.weighted_residual = weighted_residual(exact, m);
	est.analytic_residual = weighted_residual(analytic, m);
	double gap = 0;
	for (int i = 0; i < 6; ++i)
		gap = std::max(gap, std::abs(exact[i] - analytic[i]));
	if (gap > opts.verification_limit_hz)
		throw ConvergenceError("fit_parameters: perturbative and exact models differ by " + std::to_string(gap) +
		                       " Hz at the optimum (outside the validated domain)");
	if (est.weighted_residual > opts.residual_limit_hz)
		throw ConvergenceError("fit_parameters: residual " + std::to_string(est.weighted_residual) +
		                       " Hz exceeds the misfit limit");
	est.gamma_ratio = {we / est.omega_n, 0.0};
	return est;
}

Eigen::MatrixXd propagate_errors(const MeasuredSet& m, const ParamEstimate& e, const InversionOptions& opts)
{
	const int n = e.size();
	const double h = opts.jacobian_step_hz;
	// internal coordinates: wex enters as s = wex^2
	auto internal = [&](const ParamEstimate& x) {
		Vec v(n);
		v.head(6) << x.D, x.omega_e, x.P, x.omega_n, x.A_par, x.A_perp;
		if (n > 6)
			v[6] = x.omega_ex * x.omega_ex;
		return v;
	};

	Eigen::MatrixXd J(n, 8);
	Eigen::VectorXd sigma2(8);
	for (int k = 0; k < 8; ++k) {
		MeasuredSet plus = m, minus = m;
		if (k < 6) {
			plus.nuclear[k] += h;
			minus.nuclear[k] -= h;
			sigma2[k] = m.nuclear_sigma[k] * m.nuclear_sigma[k];
		} else if (k == 6) {
			plus.mw.plus_hz += h;
			minus.mw.plus_hz -= h;
			sigma2[k] = m.mw.plus_sigma_hz * m.mw.plus_sigma_hz;
		} else {
			plus.mw.minus_hz += h;
			minus.mw.minus_hz -= h;
			sigma2[k] = m.mw.minus_sigma_hz * m.mw.minus_sigma_hz;
		}
		try {
			J.col(k) = (internal(fit_parameters(plus, e.model, opts, &e)) -
			            internal(fit_parameters(minus, e.model, opts, &e))) /
			           (2 * h);
		} catch (const Error& err) {
			throw ConvergenceError(std::string("propagate_errors: re-solve failed: ") + err.what());
		}
	}
	Eigen::MatrixXd cov = J * sigma2.asDiagonal() * J.transpose();
	if (n > 6) {
		// d wex = d s / (2 wex); undefined on the wex = 0 boundary
		const double g = e.omega_ex > 0 ? 1.0 / (2 * e.omega_ex) : kNaN;
		cov.row(6) *= g;
		cov.col(6) *= g;
	}
	return 0.5 * (cov + cov.transpose());
}

FitValue gamma_ratio(const ParamEstimate& e)
{
	if (std::abs(e.omega_n) < 100)
		throw InvalidInput("gamma_ratio: |omega_n| below 100 Hz, ratio ill-conditioned");
	const double r = e.omega_e / e.omega_n;
	FitValue out{r, 0.0};
	if (e.covariance.rows() >= 4) {
		const int ie = static_cast<int>(Param::omega_e), in = static_cast<int>(Param::omega_n);
		// gradient of we/wn
		const double ge = 1.0 / e.omega_n, gn = -e.omega_e / (e.omega_n * e.omega_n);
		const double var = ge * ge * e.covariance(ie, ie) + gn * gn * e.covariance(in, in) +
		                   2 * ge * gn * e.covariance(ie, in);
		out.sigma = std::sqrt(std::max(var, 0.0));
	}
	return out;
}

ParamEstimate estimate(const MeasuredSet& m, ModelKind model, const InversionOptions& opts)
{
	ParamEstimate e = fit_parameters(m, model, opts);
	e.covariance = propagate_errors(m, e, opts);
	e.gamma_ratio = gamma_ratio(e);
	return e;
}

MonteCarloCovariance monte_carlo_covariance(const MeasuredSet& m, ModelKind model, int draws, std::uint64_t seed,
                                            int jobs, const InversionOptions& opts)
{
	if (draws < 2)
		throw InvalidInput("monte_carlo_covariance: needs at least two draws");
	m.validate();
	const int n = model == ModelKind::five_param ? 7 : 6;
	std::vector<Vec> out(draws);
	std::vector<char> ok(draws, 0);
	parallel_for(draws, jobs, [&](int i) {
		std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
		std::normal_distribution<double> z(0.0, 1.0);
		MeasuredSet d = m;
		for (int k = 0; k < 6; ++k)
			d.nuclear[k] += m.nuclear_sigma[k] * z(rng);
		d.mw.plus_hz += m.mw.plus_sigma_hz * z(rng);
		d.mw.minus_hz += m.mw.minus_sigma_hz * z(rng);
		try {
			const ParamEstimate e = fit_parameters(d, model, opts);
			out[i] = Vec(n);
			for (int k = 0; k < n; ++k)
				out[i][k] = e.value(static_cast<Param>(k));
			ok[i] = 1;
		} catch (const Error&) {
		}
	});

	MonteCarloCovariance mc;
	mc.mean = Vec::Zero(n);
	for (int i = 0; i < draws; ++i) {
		if (ok[i]) {
			mc.mean += out[i];
			++mc.draws;
		} else {
			++mc.failures;
		}
	}
	if (mc.draws < 2)
		throw ConvergenceError("monte_carlo_covariance: fewer than two refits succeeded");
	mc.mean /= mc.draws;
	mc.covariance = Eigen::MatrixXd::Zero(n, n);
	for (int i = 0; i < draws; ++i)
		if (ok[i])
			mc.covariance += (out[i] - mc.mean) * (out[i] - mc.mean).transpose();
	mc.covariance /= mc.draws - 1;
	return mc;
}

MeasuredSet synthetic_measured_set(const NVParams& truth, double nuclear_sigma_hz, double mw_sigma_hz,
                                   std::optional<std::uint64_t> noise_seed, int mI, const std::string& center_id)
{
	const auto es = exact_levels(truth);
	MeasuredSet m;
	m.center_id = center_id;
	for (const auto& t : nuclear_transitions()) {
		m.nuclear[t.nuclear_index()] = static_cast<double>(es.energy(t.mS, t.branch) - es.energy(t.mS, 0));
		m.nuclear_sigma[t.nuclear_index()] = nuclear_sigma_hz;
	}
	m.mw.mI = mI;
	m.mw.plus_hz = static_cast<double>(es.energy(1, mI) - es.energy(0, mI));
	m.mw.minus_hz = static_cast<double>(es.energy(-1, mI) - es.energy(0, mI));
	m.mw.plus_sigma_hz = m.mw.minus_sigma_hz = mw_sigma_hz;
	m.field_hint_tesla = truth.omega_e / -constants::gamma_e;
	if (noise_seed) {
		std::mt19937_64 rng(*noise_seed);
		std::normal_distribution<double> z(0.0, 1.0);
		for (int i = 0; i < 6; ++i)
			m.nuclear[i] += nuclear_sigma_hz * z(rng);
		m.mw.plus_hz += mw_sigma_hz * z(rng);
		m.mw.minus_hz += mw_sigma_hz * z(rng);
	}
	return m;
}

NVParams combined_truth(double field_tesla, double misalignment_deg)
{
	return nominal_params(field_tesla, misalignment_deg);
}

} // namespace nvid
