#pragma once

// JSON documents exchanged by the command-line tool. Every document carries a
// "schema" tag "nvid.<kind>/<version>"; readers reject unknown kinds and
// versions.

#include <json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nvid/clock.hpp"
#include "nvid/identity.hpp"
#include "nvid/inversion.hpp"
#include "nvid/perturbation.hpp"
#include "nvid/ramsey.hpp"

namespace nvid::io {

using nlohmann::json;

inline constexpr int schema_version = 1;

std::string schema_tag(const std::string& kind);
// Throws InvalidInput unless doc["schema"] names `kind` at a supported version.
void require_schema(const json& doc, const std::string& kind);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& doc);

json to_json(const NVParams& p);
NVParams params_from_json(const json& doc);

// A Ramsey trace standing in for one nuclear line.
struct TraceSource {
	std::string csv; // relative paths resolve against the dataset directory
	double rf_drive_hz = 0;
	double rf_drive_sigma_hz = 0;
};

struct CenterInput {
	std::string cohort = "other_sample";
	MeasuredSet measured; // lines backed by a trace hold NaN until resolved
	std::array<std::optional<TraceSource>, 6> traces;
};

// {center_id, cohort?, B_hint_mT, transitions: [{mS, branch, freq_hz, sigma_hz}
// or {mS, branch, trace: {csv, rf_drive_hz, rf_drive_sigma_hz?}}],
// mw: [{mI, freq_hz, sigma_hz}, {mI, freq_hz, sigma_hz}]}. Each of the six
// nuclear lines exactly once, in any order.
json to_json(const CenterInput& c);
CenterInput center_from_json(const json& doc);

json to_json(const MeasuredSet& m);
MeasuredSet measured_set_from_json(const json& doc); // rejects trace-backed lines

struct Dataset {
	std::vector<CenterInput> centers;
};

json to_json(const Dataset& d);
Dataset dataset_from_json(const json& doc);

json to_json(const FitResult& f);
FitResult fit_from_json(const json& doc);

json to_json(const ParamEstimate& e);
ParamEstimate estimate_from_json(const json& doc);

// {schema: cohort, centers: [{center_id, cohort, estimate}]}; results bundles
// share the centers layout and are accepted too.
json to_json(const std::vector<CenterRecord>& records);
std::vector<CenterRecord> records_from_json(const json& doc);

json to_json(const CohortReport& r);

json to_json(const ClockConfig& c);
ClockConfig clock_config_from_json(const json& doc);

json sweep_summary(const SweepReport& r);

} // namespace nvid::io
