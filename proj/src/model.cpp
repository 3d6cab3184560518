#include "tsctl/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace tsctl {

namespace {

std::vector<double> stacked_values(const TsModel& model, const Vec& x) {
  std::vector<double> values(static_cast<std::size_t>(model.n) + model.param_names.size());
  for (int k = 0; k < model.n; ++k) values[k] = x[k];
  for (std::size_t k = 0; k < model.param_names.size(); ++k)
    values[model.n + k] = model.param_values[static_cast<int>(k)];
  return values;
}

}  // namespace

Vec TsModel::eval_membership(const Vec& x) const {
  if (!has_memberships())
    throw ValidationError("model '" + name + "' carries no membership expressions");
  if (x.size() != n) throw DimensionError("eval_membership: state size mismatch");
  auto values = stacked_values(*this, x);
  Vec h(r);
  for (int i = 0; i < r; ++i) h[i] = memberships[i].eval(values);
  return h;
}

Mat TsModel::membership_gradient(const Vec& x) const {
  if (x.size() != n) throw DimensionError("membership_gradient: state size mismatch");
  Mat G(r, n);
  if (has_gradients()) {
    auto values = stacked_values(*this, x);
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < n; ++k) G(i, k) = gradients[i][k].eval(values);
    return G;
  }
  if (!has_memberships())
    throw ValidationError("model '" + name + "' carries no membership expressions");
  const double step = 1e-6;
  Vec xp = x, xm = x;
  for (int k = 0; k < n; ++k) {
    xp[k] = x[k] + step;
    xm[k] = x[k] - step;
    G.col(k) = (eval_membership(xp) - eval_membership(xm)) / (2.0 * step);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return G;
}

void TsModel::blend(const Vec& h, Mat& Ah, Mat& Bh) const {
  if (h.size() != r) throw DimensionError("blend: weight size mismatch");
  Ah = Mat::Zero(n, n);
  Bh = Mat::Zero(n, m);
  for (int i = 0; i < r; ++i) {
    Ah += h[i] * A[i];
    Bh += h[i] * B[i];
  }
}

std::string to_string(SynthesisMode mode) {
  switch (mode) {
    case SynthesisMode::kProposed: return "proposed";
    case SynthesisMode::kTraditionalPdc: return "traditional-pdc";
    case SynthesisMode::kQuadratic: return "quadratic";
  }
  return "proposed";
}

SynthesisMode parse_mode(const std::string& text) {
  std::string t = text;
  std::replace(t.begin(), t.end(), '_', '-');
  if (t == "proposed") return SynthesisMode::kProposed;
  if (t == "traditional-pdc") return SynthesisMode::kTraditionalPdc;
  if (t == "quadratic") return SynthesisMode::kQuadratic;
  throw ParseError("unknown synthesis mode '" + text +
                   "' (expected proposed, traditional-pdc, or quadratic)");
}

namespace {

Vec broadcast(const nlohmann::json& j, int r, const std::string& field) {
  Vec out(r);
  if (j.is_number()) {
    out.setConstant(j.get<double>());
    return out;
  }
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != r)
      throw ValidationError("synthesis." + field + ": expected " + std::to_string(r) +
                            " entries, got " + std::to_string(j.size()));
    for (int i = 0; i < r; ++i) {
      if (!j[i].is_number())
        throw ParseError("synthesis." + field + "[" + std::to_string(i) + "] is not a number");
      out[i] = j[i].get<double>();
    }
    return out;
  }
  throw ParseError("synthesis." + field + " must be a number or an array of numbers");
}

}  // namespace

SynthesisConfig parse_config(const nlohmann::json& j, int r) {
  SynthesisConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw ParseError("synthesis section must be an object");
  if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("phi")) {
    cfg.phi = broadcast(j.at("phi"), r, "phi");
    for (int i = 0; i < r; ++i)
      if (cfg.phi[i] <= 0.0)
        throw ValidationError("synthesis.phi entries must be positive");
    // A magnitude cap also induces symmetric global bounds unless overridden.
    cfg.phi_lower = -cfg.phi;
    cfg.phi_upper = cfg.phi;
  }
  if (j.contains("phi_lower")) cfg.phi_lower = broadcast(j.at("phi_lower"), r, "phi_lower");
  if (j.contains("phi_upper")) cfg.phi_upper = broadcast(j.at("phi_upper"), r, "phi_upper");
  if ((cfg.phi_lower.size() == 0) != (cfg.phi_upper.size() == 0))
    throw ValidationError("synthesis: phi_lower and phi_upper must be given together");
  if (j.contains("mu")) {
    cfg.mu = broadcast(j.at("mu"), r, "mu");
    for (int i = 0; i < r; ++i)
      if (cfg.mu[i] <= 0.0 || cfg.mu[i] > 1.0)
        throw ValidationError("synthesis.mu entries must lie in (0, 1]");
  }
  if (cfg.alpha <= 0.0) throw ValidationError("synthesis.alpha must be positive");
  if (cfg.epsilon <= 0.0) throw ValidationError("synthesis.epsilon must be positive");
  for (int i = 0; i < cfg.phi_lower.size(); ++i) {
    if (cfg.phi_lower[i] > cfg.phi_upper[i])
      throw ValidationError("synthesis: phi_lower[" + std::to_string(i + 1) +
                            "] exceeds phi_upper[" + std::to_string(i + 1) + "]");
    if (cfg.phi_lower[i] > 0.0 || cfg.phi_upper[i] < 0.0)
      std::cerr << "warning: rate bound " << i + 1
                << " excludes zero; weights cannot settle, certificate likely vacuous\n";
  }
  return cfg;
}

namespace {

double entry_value(const nlohmann::json& cell, const std::vector<std::string>& param_names,
                   const std::vector<double>& param_values, const std::string& where) {
  if (cell.is_number()) return cell.get<double>();
  if (cell.is_string()) {
    Expr e = Expr::parse(cell.get<std::string>(), param_names);
    return e.eval(param_values);
  }
  throw ParseError(where + ": matrix entries must be numbers or expression strings");
}

Mat parse_matrix(const nlohmann::json& rows, int want_rows, int want_cols,
                 const std::vector<std::string>& param_names,
                 const std::vector<double>& param_values, const std::string& where) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != want_rows)
    throw ValidationError(where + ": expected " + std::to_string(want_rows) + " rows");
  Mat M(want_rows, want_cols);
  for (int i = 0; i < want_rows; ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || static_cast<int>(row.size()) != want_cols)
      throw ValidationError(where + ": row " + std::to_string(i + 1) + " expected " +
                            std::to_string(want_cols) + " entries");
    for (int k = 0; k < want_cols; ++k)
      M(i, k) = entry_value(row[k], param_names, param_values,
                            where + "(" + std::to_string(i + 1) + "," + std::to_string(k + 1) + ")");
  }
  return M;
}

}  // namespace

TsModel parse_model(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("model description must be a JSON object");
  TsModel model;
  model.name = j.value("name", std::string("model"));

  if (j.contains("params")) {
    const auto& params = j.at("params");
    if (!params.is_object()) throw ParseError("params must be an object of name -> number");
    for (auto it = params.begin(); it != params.end(); ++it) {
      if (!it.value().is_number())
        throw ParseError("params." + it.key() + " is not a number");
      model.param_names.push_back(it.key());
    }
    model.param_values.resize(static_cast<int>(model.param_names.size()));
    for (std::size_t k = 0; k < model.param_names.size(); ++k)
      model.param_values[static_cast<int>(k)] = params.at(model.param_names[k]).get<double>();
  }
  std::vector<double> pvals(model.param_values.data(),
                            model.param_values.data() + model.param_values.size());

  if (!j.contains("A") || !j.at("A").is_array() || j.at("A").empty())
    throw ValidationError("model needs a non-empty array of vertex matrices 'A'");
  if (!j.contains("B") || !j.at("B").is_array())
    throw ValidationError("model needs an array of vertex matrices 'B'");
  model.r = static_cast<int>(j.at("A").size());
  if (static_cast<int>(j.at("B").size()) != model.r)
    throw ValidationError("A and B list different rule counts");

  const auto& A0 = j.at("A")[0];
  if (!A0.is_array() || A0.empty() || !A0[0].is_array())
    throw ValidationError("A[0] must be a matrix (array of rows)");
  model.n = static_cast<int>(A0.size());
  const auto& B0 = j.at("B")[0];
  if (!B0.is_array() || B0.empty() || !B0[0].is_array())
    throw ValidationError("B[0] must be a matrix (array of rows)");
  model.m = static_cast<int>(B0[0].size());

  if (j.contains("n") && j.at("n").get<int>() != model.n)
    throw ValidationError("declared n disagrees with the shape of A");
  if (j.contains("m") && j.at("m").get<int>() != model.m)
    throw ValidationError("declared m disagrees with the shape of B");
  if (j.contains("r") && j.at("r").get<int>() != model.r)
    throw ValidationError("declared r disagrees with the number of vertex matrices");

  for (int i = 0; i < model.r; ++i) {
    model.A.push_back(parse_matrix(j.at("A")[i], model.n, model.n, model.param_names, pvals,
                                   "A[" + std::to_string(i + 1) + "]"));
    model.B.push_back(parse_matrix(j.at("B")[i], model.n, model.m, model.param_names, pvals,
                                   "B[" + std::to_string(i + 1) + "]"));
  }

  for (int k = 0; k < model.n; ++k) model.state_names.push_back("x" + std::to_string(k + 1));
  std::vector<std::string> symbols = model.state_names;
  symbols.insert(symbols.end(), model.param_names.begin(), model.param_names.end());

  if (j.contains("memberships")) {
    const auto& hs = j.at("memberships");
    if (!hs.is_array() || static_cast<int>(hs.size()) != model.r)
      throw ValidationError("memberships must list one expression per rule");
    for (const auto& h : hs) {
      if (!h.is_string()) throw ParseError("membership entries must be expression strings");
      model.memberships.push_back(Expr::parse(h.get<std::string>(), symbols));
    }
  }

  if (j.contains("gradients")) {
    if (!model.has_memberships())
      throw ValidationError("gradients given without membership expressions");
    const auto& gs = j.at("gradients");
    if (!gs.is_array() || static_cast<int>(gs.size()) != model.r)
      throw ValidationError("gradients must list one row per rule");
    for (int i = 0; i < model.r; ++i) {
      const auto& row = gs[i];
      if (!row.is_array() || static_cast<int>(row.size()) != model.n)
        throw ValidationError("gradients[" + std::to_string(i + 1) + "] must have n entries");
      std::vector<Expr> parsed;
      for (const auto& cell : row) {
        if (cell.is_number())
          parsed.push_back(Expr::constant(cell.get<double>()));
        else if (cell.is_string())
          parsed.push_back(Expr::parse(cell.get<std::string>(), symbols));
        else
          throw ParseError("gradient entries must be numbers or expression strings");
      }
      model.gradients.push_back(std::move(parsed));
    }
  }

  if (j.contains("gradient_vertices")) {
    const auto& sec = j.at("gradient_vertices");
    if (!sec.is_array() || static_cast<int>(sec.size()) != model.r)
      throw ValidationError("gradient_vertices must list one vertex set per rule");
    for (int i = 0; i < model.r; ++i) {
      const auto& verts = sec[i];
      if (!verts.is_array() || verts.empty())
        throw ValidationError("gradient_vertices[" + std::to_string(i + 1) + "] is empty");
      GradientSector sector;
      for (const auto& v : verts) {
        if (!v.is_array() || static_cast<int>(v.size()) != model.n)
          throw ValidationError("gradient_vertices[" + std::to_string(i + 1) +
                                "] entries must have n coordinates");
        Vec z(model.n);
        for (int k = 0; k < model.n; ++k) z[k] = v[k].get<double>();
        sector.vertices.push_back(z);
      }
      model.sectors.push_back(std::move(sector));
    }
  }

  if (j.contains("state_bounds")) {
    const auto& xb = j.at("state_bounds");
    if (!xb.is_array() || static_cast<int>(xb.size()) != model.n)
      throw ValidationError("state_bounds must list one positive bound per state");
    model.state_bounds.resize(model.n);
    for (int k = 0; k < model.n; ++k) {
      model.state_bounds[k] = xb[k].get<double>();
      if (model.state_bounds[k] <= 0.0)
        throw ValidationError("state_bounds entries must be positive");
    }
  }

  return model;
}

ValidationReport validate_model(const TsModel& model, int samples) {
  ValidationReport report;
  if (!model.has_memberships()) {
    report.warnings.push_back("model has no membership expressions; sampling checks skipped");
    report.ok = true;
    return report;
  }

  Vec lo(model.n), hi(model.n);
  if (model.has_state_bounds()) {
    lo = -model.state_bounds;
    hi = model.state_bounds;
  } else {
    lo.setConstant(-1.0);
    hi.setConstant(1.0);
    report.warnings.push_back("model has no state_bounds; sampling the unit box");
  }

  std::vector<Mat> hulls;
  if (model.has_sectors()) {
    for (const auto& sector : model.sectors) {
      Mat C(model.n, static_cast<int>(sector.vertices.size()));
      for (std::size_t q = 0; q < sector.vertices.size(); ++q)
        C.col(static_cast<int>(q)) = sector.vertices[q];
      hulls.push_back(C);
    }
  }

  const double step = 1e-5;
  for (int s = 1; s <= samples; ++s) {
    const Vec x = halton_in_box(static_cast<std::uint64_t>(s), lo, hi);
    const Vec h = model.eval_membership(x);
    report.max_partition_defect = std::max(report.max_partition_defect, std::abs(h.sum() - 1.0));
    report.min_membership = std::min(report.min_membership, h.minCoeff());

    const Mat G = model.membership_gradient(x);
    for (int k = 0; k < model.n; ++k)
      report.max_gradient_sum = std::max(report.max_gradient_sum, std::abs(G.col(k).sum()));

    if (model.has_gradients()) {
      // Central-difference cross-check of the declared gradient expressions.
      Vec xp = x, xm = x;
      for (int k = 0; k < model.n; ++k) {
        xp[k] = x[k] + step;
        xm[k] = x[k] - step;
        const Vec dk = (model.eval_membership(xp) - model.eval_membership(xm)) / (2.0 * step);
        for (int i = 0; i < model.r; ++i) {
          const double allow = std::max(1e-6, 1e-4 * std::abs(G(i, k)));
          const double defect = std::abs(dk[i] - G(i, k));
          report.max_gradient_defect = std::max(report.max_gradient_defect, defect);
          if (defect > allow)
            throw ValidationError("gradient expression for rule " + std::to_string(i + 1) +
                                  ", state " + std::to_string(k + 1) +
                                  " disagrees with finite differences at x=" + format_vector(x));
        }
        xp[k] = x[k];
        xm[k] = x[k];
      }
    }

    if (!hulls.empty()) {
      for (int i = 0; i < model.r; ++i) {
        const Vec gi = G.row(i).transpose();
        SimplexFit fit = simplex_least_squares(hulls[i], gi);
        report.max_hull_residual = std::max(report.max_hull_residual, fit.residual);
      }
    }
  }
  report.samples = samples;

  if (report.max_partition_defect > 1e-9)
    throw ValidationError("memberships do not form a partition of unity (defect " +
                          std::to_string(report.max_partition_defect) + ")");
  if (report.min_membership < -1e-12)
    throw ValidationError("membership went negative (min " +
                          std::to_string(report.min_membership) + ")");
  if (report.max_gradient_sum > 1e-8)
    throw ValidationError("membership gradients do not sum to zero (defect " +
                          std::to_string(report.max_gradient_sum) + ")");
  if (!hulls.empty() && report.max_hull_residual > 1e-7)
    throw ValidationError("a sampled membership gradient escapes its declared vertex hull "
                          "(residual " + std::to_string(report.max_hull_residual) + ")");
  report.ok = true;
  return report;
}

}  // namespace tsctl
