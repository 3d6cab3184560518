#include "tsctl/jsonio.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tsctl {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json matrix_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Mat matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ParseError(what + " must be a non-empty array of rows");
  const std::size_t rows = j.size(), cols = j.front().size();
  Mat M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ParseError(what + " rows have inconsistent lengths");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ParseError(what + " entries must be numbers");
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return M;
}

Vec vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + " entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json polytope_json(const DerivativePolytope& poly) {
  json j;
  j["phi_lower"] = vector_json(poly.phi_lower);
  j["phi_upper"] = vector_json(poly.phi_upper);
  json verts = json::array();
  for (const Vec& v : poly.vertices) verts.push_back(vector_json(v));
  j["vertices"] = verts;
  return j;
}

DerivativePolytope polytope_from_json(const json& j) {
  DerivativePolytope poly;
  poly.phi_lower = vector_from_json(j.at("phi_lower"), "rates.phi_lower");
  poly.phi_upper = vector_from_json(j.at("phi_upper"), "rates.phi_upper");
  if (poly.phi_lower.size() != poly.phi_upper.size())
    throw ParseError("rates bound vectors disagree in length");
  poly.r = static_cast<int>(poly.phi_lower.size());
  if (j.contains("vertices")) {
    for (const json& v : j.at("vertices")) {
      Vec vert = vector_from_json(v, "rates.vertices entry");
      if (vert.size() != poly.r) throw ParseError("rate vertex has the wrong length");
      poly.vertices.push_back(std::move(vert));
    }
  } else {
    poly = enumerate_vertices(poly.phi_lower, poly.phi_upper);
  }
  return poly;
}

namespace {

json matrix_list_json(const std::vector<Mat>& list) {
  json out = json::array();
  for (const Mat& M : list) out.push_back(matrix_json(M));
  return out;
}

std::vector<Mat> matrix_list_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array of matrices");
  std::vector<Mat> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(matrix_from_json(j[i], what + "[" + std::to_string(i) + "]"));
  return out;
}

void fill_global(json& j, const GlobalCertificate& cert) {
  j["mode"] = to_string(cert.mode);
  j["alpha"] = cert.alpha;
  if (cert.rates.r > 0) j["rates"] = polytope_json(cert.rates);
  j["K"] = matrix_list_json(cert.K);
  j["L"] = matrix_list_json(cert.L);
  j["P"] = matrix_list_json(cert.P);
  if (cert.R.size() > 0) {
    j["R"] = matrix_json(cert.R);
    j["T"] = matrix_list_json(cert.T);
    j["S"] = matrix_list_json(cert.S);
    if (!cert.U.empty()) j["U"] = matrix_list_json(cert.U);
    j["cond_R"] = cert.cond_R;
  }
}

void read_global(const json& j, GlobalCertificate& cert) {
  cert.mode = parse_mode(j.at("mode").get<std::string>());
  cert.alpha = j.at("alpha").get<double>();
  if (j.contains("rates")) cert.rates = polytope_from_json(j.at("rates"));
  cert.K = matrix_list_from_json(j.at("K"), "K");
  cert.P = matrix_list_from_json(j.at("P"), "P");
  if (cert.K.empty() || cert.P.empty()) throw ParseError("certificate needs K and P entries");
  if (j.contains("L")) {
    cert.L = matrix_list_from_json(j.at("L"), "L");
  } else {
    for (const Mat& K : cert.K) cert.L.push_back(Mat::Zero(K.rows(), K.cols()));
  }
  if (cert.L.size() != cert.K.size() || cert.P.size() != cert.K.size())
    throw ParseError("certificate gain/Lyapunov lists disagree in rule count");
  if (j.contains("R")) {
    cert.R = matrix_from_json(j.at("R"), "R");
    cert.T = matrix_list_from_json(j.at("T"), "T");
    cert.S = matrix_list_from_json(j.at("S"), "S");
    if (j.contains("U")) cert.U = matrix_list_from_json(j.at("U"), "U");
    cert.cond_R = j.value("cond_R", 0.0);
  }
}

}  // namespace

json certificate_json(const GlobalCertificate& cert) {
  json j;
  j["type"] = "stability";
  fill_global(j, cert);
  return j;
}

json certificate_json(const LocalCertificate& cert) {
  json j;
  j["type"] = "region";
  fill_global(j, cert);
  if (cert.H_enl.size() > 0) j["H_enl"] = matrix_json(cert.H_enl);
  j["mu"] = vector_json(cert.mu);
  j["x_bar"] = vector_json(cert.x_bar);
  j["phi"] = vector_json(cert.phi);
  return j;
}

bool certificate_is_local(const json& j) {
  return j.value("type", std::string()) == "region" || j.contains("x_bar");
}

GlobalCertificate global_certificate_from_json(const json& j) {
  GlobalCertificate cert;
  read_global(j, cert);
  return cert;
}

LocalCertificate local_certificate_from_json(const json& j) {
  LocalCertificate cert;
  read_global(j, cert);
  if (j.contains("H_enl")) cert.H_enl = matrix_from_json(j.at("H_enl"), "H_enl");
  if (j.contains("mu")) cert.mu = vector_from_json(j.at("mu"), "mu");
  if (j.contains("x_bar")) cert.x_bar = vector_from_json(j.at("x_bar"), "x_bar");
  if (j.contains("phi")) cert.phi = vector_from_json(j.at("phi"), "phi");
  return cert;
}

std::string vertices_csv(const DerivativePolytope& poly) {
  std::ostringstream os;
  for (int row = 0; row < poly.r; ++row) {
    for (std::size_t col = 0; col < poly.vertices.size(); ++col) {
      if (col) os << ',';
      os << format_double(poly.vertices[col][row]);
    }
    os << '\n';
  }
  return os.str();
}

namespace {

void csv_vec_header(std::ostringstream& os, const char* stem, Eigen::Index count) {
  for (Eigen::Index k = 0; k < count; ++k) os << ',' << stem << (k + 1);
}

void csv_vec_row(std::ostringstream& os, const Vec& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) os << ',' << format_double(v[k]);
}

// Always-quoted CSV field; embedded quotes double up.
std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  os << 't';
  if (!traj.x.empty()) {
    csv_vec_header(os, "x", traj.x.front().size());
    csv_vec_header(os, "h", traj.h.front().size());
    csv_vec_header(os, "hdot", traj.hdot.front().size());
    csv_vec_header(os, "u", traj.u.front().size());
  }
  os << ",V\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    os << format_double(traj.t[s]);
    csv_vec_row(os, traj.x[s]);
    csv_vec_row(os, traj.h[s]);
    csv_vec_row(os, traj.hdot[s]);
    csv_vec_row(os, traj.u[s]);
    os << ',' << format_double(traj.V[s]) << '\n';
  }
  return os.str();
}

std::string mask_csv(const DoaEstimate& doa) {
  const int res = doa.resolution;
  if (doa.x_bar.size() != 2 || res <= 0)
    throw ValidationError("mask output is defined for two-dimensional estimates");
  std::ostringstream os;
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      if (ix) os << ',';
      os << int(doa.mask[static_cast<std::size_t>(ix) + static_cast<std::size_t>(res) * iy]);
    }
    os << '\n';
  }
  return os.str();
}

std::string boundary_csv(const DoaEstimate& doa) {
  std::ostringstream os;
  os << "loop,point,x1,x2\n";
  for (std::size_t l = 0; l < doa.boundary.size(); ++l)
    for (std::size_t p = 0; p < doa.boundary[l].size(); ++p)
      os << l << ',' << p << ',' << format_double(doa.boundary[l][p][0]) << ','
         << format_double(doa.boundary[l][p][1]) << '\n';
  return os.str();
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "a,b,mode,feasible,solve_seconds,verify_eigenvalue,error\n";
  for (const SweepCell& cell : result.cells)
    os << format_double(cell.a) << ',' << format_double(cell.b) << ',' << to_string(cell.mode)
       << ',' << (cell.feasible ? 1 : 0) << ',' << format_double(cell.solve_seconds) << ','
       << format_double(cell.verify_eigenvalue) << ',' << csv_quote(cell.error) << '\n';
  return os.str();
}

json doa_json(const DoaEstimate& doa) {
  json j;
  j["resolution"] = doa.resolution;
  j["x_bar"] = vector_json(doa.x_bar);
  std::size_t inside = 0;
  for (std::uint8_t m : doa.mask) inside += m;
  j["cells_inside"] = inside;
  j["cells_total"] = doa.mask.size();
  j["area"] = doa.area;
  j["boundary_loops"] = doa.boundary.size();
  return j;
}

json comparison_json(const DoaComparison& cmp) {
  json j;
  j["ok"] = cmp.ok;
  j["ratio"] = cmp.ratio;
  j["notes"] = cmp.notes;
  json p, b;
  p["area"] = cmp.doa_proposed.area;
  b["area"] = cmp.doa_baseline.area;
  p["resolution"] = cmp.doa_proposed.resolution;
  b["resolution"] = cmp.doa_baseline.resolution;
  if (cmp.proposed.certificate) {
    p["logdet_enlargement"] = cmp.proposed.logdet_H;
    p["certificate"] = certificate_json(*cmp.proposed.certificate);
  }
  if (cmp.baseline.certificate) {
    b["logdet_enlargement"] = cmp.baseline.logdet_H;
    b["certificate"] = certificate_json(*cmp.baseline.certificate);
  }
  j["proposed"] = std::move(p);
  j["baseline"] = std::move(b);
  return j;
}

json manifest_json(const std::string& command, const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs,
                   const std::map<std::string, double>& timings_seconds) {
  json j;
  j["command"] = command;
  json ins = json::array();
  for (const std::string& path : inputs) {
    json entry;
    entry["path"] = path;
    entry["fnv1a64"] = fnv1a64_hex(read_text_file(path));
    ins.push_back(std::move(entry));
  }
  j["inputs"] = std::move(ins);
  j["outputs"] = outputs;
  json timings;
  for (const auto& [stage, seconds] : timings_seconds) timings[stage] = seconds;
  j["timings_seconds"] = std::move(timings);
  json versions;
  versions["toolkit"] = kToolkitVersion;
  versions["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  j["versions"] = std::move(versions);
  return j;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
  if (!out) throw ValidationError("short write on file: " + path);
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace tsctl
