#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsctl/common.hpp"
#include "tsctl/experiments.hpp"
#include "tsctl/sim.hpp"
#include "tsctl/synth_global.hpp"
#include "tsctl/synth_local.hpp"

namespace tsctl {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Decimal with 17 significant digits — enough to round-trip any double.
// Non-finite values print as nan / inf / -inf.
std::string format_double(double v);

nlohmann::json matrix_json(const Mat& M);
nlohmann::json vector_json(const Vec& v);
Mat matrix_from_json(const nlohmann::json& j, const std::string& what);
Vec vector_from_json(const nlohmann::json& j, const std::string& what);

nlohmann::json polytope_json(const DerivativePolytope& poly);
DerivativePolytope polytope_from_json(const nlohmann::json& j);

// Certificates serialize with a "type" tag: "stability" for the global form,
// "region" when the enlargement/region data is present. Decision values
// (R, T, S, U) are included when available but are optional on the way back
// in, so hand-entered replay certificates (gains and Lyapunov pieces only)
// load fine. A missing L comes back as exact zeros shaped like K.
nlohmann::json certificate_json(const GlobalCertificate& cert);
nlohmann::json certificate_json(const LocalCertificate& cert);
bool certificate_is_local(const nlohmann::json& j);
GlobalCertificate global_certificate_from_json(const nlohmann::json& j);
LocalCertificate local_certificate_from_json(const nlohmann::json& j);

// CSV emitters. All numbers go through format_double, so identical inputs
// produce byte-identical text.
std::string vertices_csv(const DerivativePolytope& poly);  // one vertex per column
std::string trajectory_csv(const Trajectory& traj);        // t, x, h, hdot, u, V
std::string mask_csv(const DoaEstimate& doa);              // 0/1 grid, one y-row per line
std::string boundary_csv(const DoaEstimate& doa);          // loop, point, x1, x2
std::string sweep_csv(const SweepResult& result);

nlohmann::json doa_json(const DoaEstimate& doa);
nlohmann::json comparison_json(const DoaComparison& cmp);

// Run manifest: the exact command, a content hash per input file, library
// versions, stage timings, and the artifact names written next to it.
nlohmann::json manifest_json(const std::string& command, const std::vector<std::string>& inputs,
                             const std::vector<std::string>& outputs,
                             const std::map<std::string, double>& timings_seconds);

std::string read_text_file(const std::string& path);  // throws ParseError when unreadable
void write_text_file(const std::string& path, const std::string& content);

// dump(indent 2) plus a trailing newline, the convention for all JSON files.
std::string dump_json(const nlohmann::json& j);

}  // namespace tsctl
