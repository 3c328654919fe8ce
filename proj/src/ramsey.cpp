#include "nvid/ramsey.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "nvid/parallel.hpp"

namespace nvid {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;
constexpr int kParams = 7;
using Vec7 = Eigen::Matrix<double, kParams, 1>;
using Mat7 = Eigen::Matrix<double, kParams, kParams>;

enum Index { kDf, kPhi, kA, kB, kC, kT2, kP };

double wrap_phase(double phi)
{
	phi = std::remainder(phi, two_pi);
	return phi <= -std::numbers::pi ? phi + two_pi : phi;
}

double envelope(double t, double T2, double p) { return std::exp(-std::pow(t / T2, p)); }

double model(const Vec7& q, double t)
{
	return (q[kA] * std::sin(two_pi * q[kDf] * t + q[kPhi]) + q[kB]) * envelope(t, q[kT2], q[kP]) + q[kC];
}

// Weighted residuals and their Jacobian.
void evaluate(const RamseyTrace& tr, const Vec7& q, Eigen::VectorXd& r, Eigen::Matrix<double, Eigen::Dynamic, kParams>& J)
{
	const Eigen::Index n = static_cast<Eigen::Index>(tr.size());
	r.resize(n);
	J.resize(n, kParams);
	for (Eigen::Index i = 0; i < n; ++i) {
		const double t = tr.times[i];
		const double w = 1.0 / tr.sigma[i];
		const double x = two_pi * q[kDf] * t + q[kPhi];
		const double s = std::sin(x), co = std::cos(x);
		const double u = t / q[kT2];
		const double up = t > 0 ? std::pow(u, q[kP]) : 0.0;
		const double env = std::exp(-up);
		const double inner = q[kA] * s + q[kB];
		r[i] = w * (inner * env + q[kC] - tr.signal[i]);
		J(i, kDf) = w * q[kA] * co * two_pi * t * env;
		J(i, kPhi) = w * q[kA] * co * env;
		J(i, kA) = w * s * env;
		J(i, kB) = w * env;
		J(i, kC) = w;
		J(i, kT2) = w * inner * env * q[kP] * up / q[kT2];
		J(i, kP) = t > 0 ? -w * inner * env * up * std::log(u) : 0.0;
	}
}

double chi2_of(const RamseyTrace& tr, const Vec7& q)
{
	double sum = 0;
	for (std::size_t i = 0; i < tr.size(); ++i) {
		const double d = (model(q, tr.times[i]) - tr.signal[i]) / tr.sigma[i];
		sum += d * d;
	}
	return sum;
}

bool admissible(const Vec7& q)
{
	return std::isfinite(q.sum()) && q[kT2] > 0 && q[kP] > 0.2 && q[kP] < 20;
}

struct LmOutcome {
	Vec7 q;
	Mat7 normal;
	double chi2 = 0;
	int iterations = 0;
	bool converged = false;
};

LmOutcome levenberg_marquardt(const RamseyTrace& tr, Vec7 q, const FitOptions& opts)
{
	Eigen::VectorXd r;
	Eigen::Matrix<double, Eigen::Dynamic, kParams> J;
	evaluate(tr, q, r, J);
	double chi2 = r.squaredNorm();
	double lambda = 1e-3;
	LmOutcome out;
	for (int it = 1; it <= opts.max_iterations; ++it) {
		out.iterations = it;
		const Mat7 A = J.transpose() * J;
		const Vec7 g = J.transpose() * r;
		bool accepted = false;
		while (lambda < 1e16) {
			Mat7 M = A;
			M.diagonal() += lambda * A.diagonal().cwiseMax(1e-30);
			const Vec7 step = M.ldlt().solve(-g);
			const Vec7 trial = q + step;
			if (step.allFinite() && admissible(trial)) {
				const double c = chi2_of(tr, trial);
				if (c <= chi2) {
					const double rel = (step.array().abs() / (trial.array().abs() + 1e-12)).maxCoeff();
					q = trial;
					chi2 = c;
					lambda = std::max(lambda / 10, 1e-12);
					accepted = true;
					if (rel < opts.relative_step_tolerance)
						out.converged = true;
					break;
				}
			}
			lambda *= 10;
		}
		if (!accepted) // no downhill step left at machine precision
			out.converged = true;
		evaluate(tr, q, r, J);
		if (out.converged)
			break;
	}
	out.q = q;
	out.chi2 = r.squaredNorm();
	out.normal = J.transpose() * J;
	return out;
}

double span(const RamseyTrace& tr) { return tr.times.back() - tr.times.front(); }

// Linear least squares for the sine, cosine, decaying offset and baseline at
// fixed frequency and envelope.
Vec7 linear_start(const RamseyTrace& tr, double f, double T2, double p, double& chi2)
{
	const Eigen::Index n = static_cast<Eigen::Index>(tr.size());
	Eigen::Matrix<double, Eigen::Dynamic, 4> X(n, 4);
	Eigen::VectorXd y(n);
	for (Eigen::Index i = 0; i < n; ++i) {
		const double t = tr.times[i], w = 1.0 / tr.sigma[i];
		const double env = envelope(t, T2, p);
		X(i, 0) = w * std::sin(two_pi * f * t) * env;
		X(i, 1) = w * std::cos(two_pi * f * t) * env;
		X(i, 2) = w * env;
		X(i, 3) = w;
		y[i] = w * tr.signal[i];
	}
	const Eigen::Vector4d beta = X.colPivHouseholderQr().solve(y);
	chi2 = (X * beta - y).squaredNorm();
	Vec7 q;
	q[kDf] = f;
	q[kA] = std::hypot(beta[0], beta[1]);
	q[kPhi] = std::atan2(beta[1], beta[0]);
	q[kB] = beta[2];
	q[kC] = beta[3];
	q[kT2] = T2;
	q[kP] = p;
	return q;
}

Vec7 periodogram_start(const RamseyTrace& tr, double f)
{
	double best = std::numeric_limits<double>::infinity();
	Vec7 start;
	for (double scale : {0.5, 1.0, 2.0, 4.0}) {
		double c = 0;
		const Vec7 q = linear_start(tr, f, scale * span(tr), 2.0, c);
		if (c < best) {
			best = c;
			start = q;
		}
	}
	return start;
}

Vec7 pack(const FitResult& f)
{
	Vec7 q;
	q << f.detuning.value, f.phi0.value, f.a.value, f.b.value, f.c.value, f.T2_star.value, f.p.value;
	return q;
}

FitResult unpack(const RamseyTrace& tr, const LmOutcome& lm)
{
	Vec7 q = lm.q;
	// scale-free singularity test on the normal matrix
	const Vec7 d = lm.normal.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
	const Mat7 scaled = d.asDiagonal() * lm.normal * d.asDiagonal();
	Eigen::SelfAdjointEigenSolver<Mat7> es(scaled);
	if (!(es.eigenvalues()[0] > 1e-13 * es.eigenvalues()[kParams - 1]))
		throw ConvergenceError("ramsey fit: singular covariance (no resolvable oscillation)");
	const Mat7 inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
	Mat7 cov = d.asDiagonal() * inv * d.asDiagonal();

	// canonical form: df >= 0 and a >= 0
	Vec7 flip = Vec7::Ones();
	if (q[kDf] < 0) {
		q[kDf] = -q[kDf];
		q[kPhi] = std::numbers::pi - q[kPhi];
		flip[kDf] = flip[kPhi] = -1;
	}
	if (q[kA] < 0) {
		q[kA] = -q[kA];
		q[kPhi] += std::numbers::pi;
		flip[kA] = -1;
	}
	q[kPhi] = wrap_phase(q[kPhi]);
	cov = flip.asDiagonal() * cov * flip.asDiagonal();

	FitResult f;
	FitValue* slots[kParams] = {&f.detuning, &f.phi0, &f.a, &f.b, &f.c, &f.T2_star, &f.p};
	for (int k = 0; k < kParams; ++k) {
		slots[k]->value = q[k];
		slots[k]->sigma = std::sqrt(cov(k, k));
	}
	f.covariance = cov;
	f.iterations = lm.iterations;
	f.converged = lm.converged;
	f.chi2_reduced = lm.chi2 / std::max<double>(1, double(tr.size()) - kParams);
	return f;
}

} // namespace

RamseyConfig RamseyConfig::nominal()
{
	RamseyConfig cfg;
	for (int i = 0; i <= 100; ++i)
		cfg.time_points.push_back(1e-4 * i);
	cfg.shots_per_point = 190000;
	return cfg;
}

void RamseyConfig::validate() const
{
	if (!(T2_star > 0))
		throw InvalidInput("RamseyConfig: T2_star must be positive");
	if (shots_per_point < 1)
		throw InvalidInput("RamseyConfig: shots_per_point must be at least 1");
	if (!(photons_bright >= 0) || !(photons_dark >= 0) || photons_bright == photons_dark)
		throw InvalidInput("RamseyConfig: photon rates must be non-negative and distinct");
	if (!(decline_T1 > 0))
		throw InvalidInput("RamseyConfig: decline_T1 must be positive");
	if (time_points.empty())
		throw InvalidInput("RamseyConfig: no time points");
	for (std::size_t i = 1; i < time_points.size(); ++i)
		if (!(time_points[i] > time_points[i - 1]))
			throw InvalidInput("RamseyConfig: time points must be strictly increasing");
}

void RamseyTrace::validate() const
{
	if (signal.size() != times.size() || sigma.size() != times.size())
		throw InvalidInput("RamseyTrace: column lengths differ");
	for (std::size_t i = 0; i < size(); ++i) {
		if (!(sigma[i] > 0) || !std::isfinite(signal[i]))
			throw InvalidInput("RamseyTrace: sigma must be positive and signal finite");
		if (i > 0 && !(times[i] > times[i - 1]))
			throw InvalidInput("RamseyTrace: times must be strictly increasing");
	}
}

double ramsey_signal(const RamseyConfig& cfg, double t)
{
	const double fringe = cfg.amplitude_a * std::sin(two_pi * cfg.true_detuning * t + cfg.phase_phi0);
	const double offset = cfg.offset_b * std::exp(-t / cfg.decline_T1);
	return (fringe + offset) * envelope(t, cfg.T2_star, cfg.stretch_p) + cfg.baseline_c;
}

double shot_noise_sigma(const RamseyConfig& cfg, double photons_per_shot)
{
	return std::sqrt(std::max(photons_per_shot, 0.0) / cfg.shots_per_point) /
	       std::abs(cfg.photons_bright - cfg.photons_dark);
}

RamseyTrace simulate(const RamseyConfig& cfg)
{
	cfg.validate();
	std::mt19937_64 rng(cfg.rng_seed);
	const double n = cfg.shots_per_point;
	const double contrast = cfg.photons_bright - cfg.photons_dark;
	RamseyTrace tr;
	for (double t : cfg.time_points) {
		const double prob = std::clamp(ramsey_signal(cfg, t), 0.0, 1.0);
		const double mean = n * (cfg.photons_dark + contrast * prob);
		double counts;
		if (cfg.shots_per_point < 30) {
			counts = static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
		} else {
			counts = std::max(0.0, std::normal_distribution<double>(mean, std::sqrt(mean))(rng));
		}
		const double rate = counts / n;
		tr.times.push_back(t);
		tr.signal.push_back((rate - cfg.photons_dark) / contrast);
		// at least one photon's worth so an empty point keeps a finite weight
		tr.sigma.push_back(shot_noise_sigma(cfg, std::max(rate, 1.0 / n)));
	}
	return tr;
}

RamseyTrace expected_trace(const RamseyConfig& cfg)
{
	cfg.validate();
	const double contrast = cfg.photons_bright - cfg.photons_dark;
	RamseyTrace tr;
	for (double t : cfg.time_points) {
		const double s = ramsey_signal(cfg, t);
		tr.times.push_back(t);
		tr.signal.push_back(s);
		const double prob = std::clamp(s, 0.0, 1.0);
		tr.sigma.push_back(shot_noise_sigma(cfg, std::max(cfg.photons_dark + contrast * prob, 1.0 / cfg.shots_per_point)));
	}
	return tr;
}

double fitted_signal(const FitResult& f, double t) { return model(pack(f), t); }

std::vector<double> periodogram_peaks(const RamseyTrace& tr, int count)
{
	tr.validate();
	if (tr.size() < 2)
		return {};
	std::vector<double> dt;
	for (std::size_t i = 1; i < tr.size(); ++i)
		dt.push_back(tr.times[i] - tr.times[i - 1]);
	std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
	const double nyquist = 0.5 / dt[dt.size() / 2];
	const double step = 1.0 / (10 * span(tr));

	std::vector<double> freq, power;
	for (double f = step; f <= nyquist; f += step) {
		double c = 0;
		linear_start(tr, f, 1e300, 1.0, c);
		freq.push_back(f);
		power.push_back(-c);
	}
	std::vector<std::size_t> peaks;
	for (std::size_t i = 0; i < power.size(); ++i) {
		const bool left = i == 0 || power[i] > power[i - 1];
		const bool right = i + 1 == power.size() || power[i] >= power[i + 1];
		if (left && right)
			peaks.push_back(i);
	}
	std::stable_sort(peaks.begin(), peaks.end(), [&](auto x, auto y) { return power[x] > power[y]; });
	if (peaks.size() > static_cast<std::size_t>(count))
		peaks.resize(count);
	std::vector<double> out;
	for (auto i : peaks) {
		// parabolic interpolation on the grid
		double f = freq[i];
		if (i > 0 && i + 1 < power.size()) {
			const double den = power[i - 1] - 2 * power[i] + power[i + 1];
			if (den < 0)
				f += 0.5 * step * (power[i - 1] - power[i + 1]) / den;
		}
		out.push_back(f);
	}
	return out;
}

FitResult fit(const RamseyTrace& trace, const std::optional<FitResult>& init, const FitOptions& opts)
{
	trace.validate();
	if (trace.size() < 8)
		throw InvalidInput("ramsey fit: need at least 8 points");

	std::vector<Vec7> starts;
	if (init)
		starts.push_back(pack(*init));
	for (double f : periodogram_peaks(trace, opts.periodogram_starts))
		starts.push_back(periodogram_start(trace, f));
	if (starts.empty())
		throw ConvergenceError("ramsey fit: no periodogram peak to start from");

	std::optional<LmOutcome> best;
	for (const auto& s : starts) {
		if (!admissible(s))
			continue;
		const auto lm = levenberg_marquardt(trace, s, opts);
		if (lm.converged && (!best || lm.chi2 < best->chi2))
			best = lm;
		const double dof = std::max<double>(1, double(trace.size()) - kParams);
		if (best && best->chi2 / dof < 2.0)
			break;
	}
	if (!best)
		throw ConvergenceError("ramsey fit: no start converged within the iteration cap");

	FitResult f = unpack(trace, *best);
	if (f.detuning.value * span(trace) < 1.0)
		throw ConvergenceError("ramsey fit: trace spans less than one fringe period");
	return f;
}

AbsoluteFrequency absolute_frequency(double rf_drive, const FitResult& fit, double rf_drive_sigma)
{
	if (!fit.converged)
		throw InvalidInput("absolute_frequency: fit did not converge");
	return {rf_drive + fit.detuning.value, std::hypot(fit.detuning.sigma, rf_drive_sigma)};
}

CoverageReport coverage_study(const RamseyConfig& cfg, int runs, int jobs)
{
	struct Run {
		bool ok = false;
		double error = 0;
		double sigma = 0;
	};
	std::vector<Run> out(std::max(runs, 0));
	parallel_for(out.size(), jobs, [&](std::size_t i) {
		RamseyConfig c = cfg;
		c.rng_seed = cfg.rng_seed + i;
		try {
			const FitResult f = fit(simulate(c));
			out[i] = {true, f.detuning.value - cfg.true_detuning, f.detuning.sigma};
		} catch (const Error&) {
		}
	});
	CoverageReport rep;
	rep.runs = runs;
	int ok = 0;
	for (const auto& r : out) {
		if (!r.ok) {
			++rep.failures;
			continue;
		}
		++ok;
		if (std::abs(r.error) <= 2 * r.sigma)
			++rep.within_2sigma;
		rep.mean_sigma += r.sigma;
		rep.rms_error += r.error * r.error;
	}
	if (ok > 0) {
		rep.mean_sigma /= ok;
		rep.rms_error = std::sqrt(rep.rms_error / ok);
	}
	return rep;
}

void write_trace_csv(std::ostream& os, const RamseyTrace& trace)
{
	os << "time_s,signal,sigma\n" << std::setprecision(17);
	for (std::size_t i = 0; i < trace.size(); ++i)
		os << trace.times[i] << ',' << trace.signal[i] << ',' << trace.sigma[i] << '\n';
}

RamseyTrace read_trace_csv(std::istream& is)
{
	std::string line;
	if (!std::getline(is, line) || line.rfind("time_s,signal,sigma", 0) != 0)
		throw InvalidInput("trace csv: expected header time_s,signal,sigma");
	RamseyTrace tr;
	int row = 1;
	while (std::getline(is, line)) {
		++row;
		if (line.empty() || line == "\r")
			continue;
		std::replace(line.begin(), line.end(), ',', ' ');
		std::istringstream fields(line);
		double t, s, e;
		if (!(fields >> t >> s >> e))
			throw InvalidInput("trace csv: malformed row " + std::to_string(row));
		tr.times.push_back(t);
		tr.signal.push_back(s);
		tr.sigma.push_back(e);
	}
	tr.validate();
	return tr;
}

} // namespace nvid
