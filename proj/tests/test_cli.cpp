#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tsctl/experiments.hpp"
#include "tsctl/jsonio.hpp"

using namespace tsctl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kCli = TSCTL_CLI_PATH;
const std::string kData = TSCTL_DATA_DIR;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunResult {
  int code = -1;
  std::string out, err;
};

// Fresh scratch directory per invocation label; the process output lands in
// files so assertions can inspect it.
RunResult run_cli(const std::string& label, const std::string& args) {
  const fs::path scratch = fs::path("cli_scratch") / label;
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const std::string out_file = (scratch / "stdout.txt").string();
  const std::string err_file = (scratch / "stderr.txt").string();
  const std::string cmd =
      std::string(kCli) + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  RunResult r;
  if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::string scratch_dir(const std::string& label) {
  return (fs::path("cli_scratch") / label).string();
}

// Drops the solve_seconds column (field 5 of 7; the quoted error field is
// last, so the first six commas are field separators).
std::string strip_time_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t commas = 0, begin = std::string::npos, end = std::string::npos;
    for (std::size_t i = 0; i < line.size() && commas < 5; ++i) {
      if (line[i] != ',') continue;
      ++commas;
      if (commas == 4) begin = i;
      if (commas == 5) end = i;
    }
    if (begin != std::string::npos && end != std::string::npos)
      line.erase(begin, end - begin);
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("vertex listing matches the enumeration oracle") {
  RunResult r = run_cli("vertices", "vertices --phi -1,1 --out " + scratch_dir("vertices") +
                                        "/out");
  CHECK(r.code == 0);
  DerivativePolytope poly = enumerate_vertices(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  const std::string want = vertices_csv(poly);
  CHECK(r.out.substr(0, want.size()) == want);
  CHECK(slurp(scratch_dir("vertices") + "/out/vertices.csv") == want);

  // four-rule asymmetric bounds through the pair form agree with the library
  Vec lo(4), hi(4);
  lo << -1.0, -2.0, -0.5, -1.5;
  hi << 2.0, 1.0, 0.75, 0.25;
  RunResult r4 = run_cli("vertices4",
                         "vertices --phi=-1,2,-2,1,-0.5,0.75,-1.5,0.25 --rules 4 --out " +
                             scratch_dir("vertices4") + "/out");
  CHECK(r4.code == 0);
  CHECK(r4.out.substr(0, vertices_csv(enumerate_vertices(lo, hi)).size()) ==
        vertices_csv(enumerate_vertices(lo, hi)));
}

TEST_CASE("bundled parametric template instantiates the benchmark matrices") {
  json tj = json::parse(read_text_file(kData + "/parametric_ab.json"));
  tj["params"]["a"] = 7.5;
  tj["params"]["b"] = 1.3;
  TsModel from_file = parse_model(tj);
  TsModel direct = parametric_model(7.5, 1.3);
  REQUIRE(from_file.r == direct.r);
  for (int i = 0; i < direct.r; ++i) {
    CHECK((from_file.A[i] - direct.A[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((from_file.B[i] - direct.B[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("synth writes a certificate that re-verifies in process") {
  const std::string dir = scratch_dir("synth") + "/out";
  RunResult r = run_cli("synth", "synth " + kData + "/parametric_ab.json --set a=5 "
                                     "--set b=1.5 --out " + dir);
  CHECK(r.code == 0);
  json cj = json::parse(read_text_file(dir + "/certificate.json"));
  CHECK(cj.at("type") == "stability");
  CHECK(cj.at("verification").at("ok").get<bool>());
  GlobalCertificate cert = global_certificate_from_json(cj);
  REQUIRE(cert.K.size() == 2);
  CHECK(cert.K[0].rows() == 1);
  CHECK(cert.K[0].cols() == 2);
  CertificateCheck chk = verify_certificate(parametric_model(5.0, 1.5), cert);
  CHECK(chk.ok);

  json mj = json::parse(read_text_file(dir + "/manifest.json"));
  REQUIRE(mj.at("inputs").size() == 1);
  CHECK(mj.at("inputs")[0].at("fnv1a64") ==
        fnv1a64_hex(read_text_file(kData + "/parametric_ab.json")));
  CHECK(mj.at("outputs") == json::array({"certificate.json"}));
}

TEST_CASE("region certificate round-trips through simulate, doa, and verify") {
  const std::string dir = scratch_dir("local") + "/out";
  RunResult r = run_cli("local", "synth-local " + kData + "/sine_2rule.json --out " + dir);
  REQUIRE(r.code == 0);
  const std::string cert_path = dir + "/certificate.json";
  json cj = json::parse(read_text_file(cert_path));
  CHECK(cj.at("type") == "region");
  CHECK(cj.at("verification").at("ok").get<bool>());
  CHECK(cj.at("verification").at("enlargement_boundary_level").get<double>() <= 1.0 + 1e-6);

  RunResult sim = run_cli("local_sim", "simulate " + kData + "/sine_2rule.json --cert " +
                                           cert_path + " --x0 0.4,-0.8 --t-end 4 --out " +
                                           scratch_dir("local_sim") + "/out");
  CHECK(sim.code == 0);
  const std::string csv = slurp(scratch_dir("local_sim") + "/out/trajectory.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "t,x1,x2,h1,h2,hdot1,hdot2,u1,V");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4002);  // header + 4001 samples

  RunResult doa = run_cli("local_doa", "doa " + kData + "/sine_2rule.json --cert " + cert_path +
                                           " --resolution 101 --starts 2 --t-end 4 --out " +
                                           scratch_dir("local_doa") + "/out");
  CHECK(doa.code == 0);
  json area = json::parse(read_text_file(scratch_dir("local_doa") + "/out/area.json"));
  CHECK(area.at("area").get<double>() > 1.0);
  CHECK(fs::exists(scratch_dir("local_doa") + "/out/mask.csv"));
  CHECK(fs::exists(scratch_dir("local_doa") + "/out/boundary.csv"));
  const std::string svg = slurp(scratch_dir("local_doa") + "/out/overlay.svg");
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("polyline") != std::string::npos);

  RunResult ver = run_cli("local_ver", "verify " + kData + "/sine_2rule.json --cert " +
                                           cert_path + " --out " + scratch_dir("local_ver") +
                                           "/out");
  CHECK(ver.code == 0);
}

TEST_CASE("published replay certificate simulates but cannot be re-verified") {
  RunResult sim = run_cli("replay_sim", "simulate " + kData + "/sine_2rule.json --cert " +
                                            kData + "/reference_certificate.json "
                                            "--x0 0.5,1.0 --t-end 4 --out " +
                                            scratch_dir("replay_sim") + "/out");
  CHECK(sim.code == 0);
  CHECK(sim.out.find("bound monitor: ok") != std::string::npos);

  RunResult ver = run_cli("replay_ver", "verify " + kData + "/sine_2rule.json --cert " + kData +
                                            "/reference_certificate.json --out " +
                                            scratch_dir("replay_ver") + "/out");
  CHECK(ver.code == 2);
  CHECK(ver.err.find("decision values") != std::string::npos);
}

TEST_CASE("sweep reruns are byte-identical apart from wall-clock times") {
  RunResult r1 = run_cli("sweep1", "sweep --grid 3x2 --out " + scratch_dir("sweep1") + "/out");
  RunResult r2 = run_cli("sweep2", "sweep --grid 3x2 --out " + scratch_dir("sweep2") + "/out");
  CHECK(r1.code == 0);
  CHECK(r2.code == 0);
  const std::string csv1 = slurp(scratch_dir("sweep1") + "/out/sweep.csv");
  const std::string csv2 = slurp(scratch_dir("sweep2") + "/out/sweep.csv");
  CHECK(csv1.substr(0, csv1.find('\n')) ==
        "a,b,mode,feasible,solve_seconds,verify_eigenvalue,error");
  CHECK(strip_time_column(csv1) == strip_time_column(csv2));
  CHECK(csv1 != strip_time_column(csv1));  // the stripped copy really lost a column
  CHECK(slurp(scratch_dir("sweep1") + "/out/sweep.svg") ==
        slurp(scratch_dir("sweep2") + "/out/sweep.svg"));
  // 3x2 grid: the benchmark corners (0,1), (5,1), (10,1) are feasible rows
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 19);  // header + 6 cells x 3 modes
}

TEST_CASE("comparison pipeline reports the enlarged area through the cli") {
  RunResult r = run_cli("compare", "doa-compare " + kData + "/sine_2rule.json --resolution 81 "
                                       "--starts 1 --t-end 3 --out " +
                                       scratch_dir("compare") + "/out");
  CHECK(r.code == 0);
  json cmp = json::parse(read_text_file(scratch_dir("compare") + "/out/comparison.json"));
  CHECK(cmp.at("ok").get<bool>());
  CHECK(cmp.at("ratio").get<double>() >= 1.5);
  CHECK(cmp.at("proposed").at("certificate").at("type") == "region");
  CHECK(fs::exists(scratch_dir("compare") + "/out/doa_compare.svg"));
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("err_missing", "synth cli_scratch/does_not_exist.json").code == 2);
  CHECK(run_cli("err_flag", "synth --bogus-flag x.json").code == 2);
  CHECK(run_cli("err_nosub", "").code == 2);
  CHECK(run_cli("err_set", "synth " + kData + "/parametric_ab.json --set nope=1").code == 2);
  CHECK(run_cli("err_x0", "simulate " + kData + "/sine_2rule.json --cert " + kData +
                              "/reference_certificate.json --x0 0.1 --out " +
                              scratch_dir("err_x0") + "/out")
            .code == 2);
  RunResult nox0 = run_cli("err_nox0", "simulate " + kData + "/sine_2rule.json --cert " + kData +
                                           "/reference_certificate.json");
  CHECK(nox0.code == 2);

  // infeasible synthesis is a computation failure, not a usage error
  CHECK(run_cli("err_infeas", "synth " + kData + "/parametric_ab.json --set b=2.0 --out " +
                                  scratch_dir("err_infeas") + "/out")
            .code == 1);
}
