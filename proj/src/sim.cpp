#include "tsctl/sim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>

namespace tsctl {

namespace {

void check_gains(const TsModel& model, const GlobalCertificate& cert) {
  if (!model.has_memberships())
    throw ValidationError("closed-loop evaluation needs membership expressions");
  if (static_cast<int>(cert.K.size()) != model.r || static_cast<int>(cert.L.size()) != model.r)
    throw ValidationError("certificate gain count does not match the rule count");
  if (static_cast<int>(cert.P.size()) != model.r)
    throw ValidationError("certificate Lyapunov count does not match the rule count");
}

Mat blend_list(const std::vector<Mat>& Ms, const Vec& h) {
  Mat out = Mat::Zero(Ms[0].rows(), Ms[0].cols());
  for (int i = 0; i < h.size(); ++i) out += h[i] * Ms[static_cast<std::size_t>(i)];
  return out;
}

bool inside_box(const Vec& x, const Vec& x_bar) {
  for (int k = 0; k < x.size(); ++k)
    if (std::abs(x[k]) > x_bar[k]) return false;
  return true;
}

}  // namespace

RateResolution resolve_hdot(const TsModel& model, const GlobalCertificate& cert, const Vec& x) {
  check_gains(model, cert);
  if (x.size() != model.n) throw DimensionError("state vector of wrong length");
  const int r = model.r;

  RateResolution out;
  out.h = model.eval_membership(x);
  const Mat G = model.membership_gradient(x);  // rows are grad h_u
  Mat Ah, Bh;
  model.blend(out.h, Ah, Bh);
  const Mat Kh = blend_list(cert.K, out.h);
  const Vec base = (Ah + Bh * Kh) * x;
  const Vec g = G * base;

  Mat W(r, r);
  for (int w = 0; w < r; ++w)
    W.col(w) = G * (Bh * (cert.L[static_cast<std::size_t>(w)] * x));
  const Mat IW = Mat::Identity(r, r) - W;
  Eigen::JacobiSVD<Mat> svd(IW, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  out.cond = smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                        : std::numeric_limits<double>::infinity();
  if (!(out.cond < 1e10)) {
    std::ostringstream msg;
    msg << "membership-rate relation is numerically singular (condition number " << out.cond
        << ")";
    throw IllPosedError(msg.str());
  }
  out.hdot = svd.solve(g);

  Vec rate_feed = Vec::Zero(model.m);
  for (int w = 0; w < r; ++w)
    rate_feed += out.hdot[w] * (cert.L[static_cast<std::size_t>(w)] * x);
  out.xdot = base + Bh * rate_feed;
  out.u = Kh * x + rate_feed;

  const Vec recheck = G * out.xdot;
  if ((recheck - out.hdot).norm() > 1e-9 * (1.0 + out.hdot.norm()))
    throw SolverError("membership-rate resolution failed its consistency re-check");
  return out;
}

Trajectory integrate(const TsModel& model, const GlobalCertificate& cert, const Vec& x0,
                     double t_end, double dt) {
  check_gains(model, cert);
  if (x0.size() != model.n) throw DimensionError("initial state of wrong length");
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw ValidationError("need dt > 0 and t_end >= 0");

  const long long steps = std::max(1LL, std::llround(t_end / dt));
  Trajectory traj;
  traj.t.reserve(static_cast<std::size_t>(steps) + 1);
  Vec x = x0;
  double t = 0.0;
  try {
    for (long long k = 0;; ++k) {
      RateResolution rr = resolve_hdot(model, cert, x);
      traj.t.push_back(t);
      traj.x.push_back(x);
      traj.h.push_back(rr.h);
      traj.hdot.push_back(rr.hdot);
      traj.u.push_back(rr.u);
      traj.V.push_back(x.dot(blend_list(cert.P, rr.h) * x));
      if (rr.cond > 1e8) traj.ill_conditioned = true;
      traj.stop_time = t;
      if (model.has_state_bounds() && !inside_box(x, model.state_bounds)) {
        traj.left_region = true;
        break;
      }
      if (k == steps) break;

      const Vec k1 = rr.xdot;
      const Vec k2 = resolve_hdot(model, cert, x + 0.5 * dt * k1).xdot;
      const Vec k3 = resolve_hdot(model, cert, x + 0.5 * dt * k2).xdot;
      const Vec k4 = resolve_hdot(model, cert, x + dt * k3).xdot;
      x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = static_cast<double>(k + 1) * dt;
    }
  } catch (const IllPosedError& e) {
    std::ostringstream msg;
    msg << e.what() << " at t=" << t;
    throw IllPosedError(msg.str());
  }
  return traj;
}

double lyapunov_value(const TsModel& model, const GlobalCertificate& cert, const Vec& x) {
  check_gains(model, cert);
  if (x.size() != model.n) throw DimensionError("state vector of wrong length");
  const Vec h = model.eval_membership(x);
  return x.dot(blend_list(cert.P, h) * x);
}

namespace {

// marching squares on the cell-center lattice, level 1
void trace_level_set(const std::vector<double>& vals, int res, const Vec& lo, const Vec& step,
                     std::vector<std::vector<Vec>>& loops) {
  struct Seg {
    Vec a, b;
  };
  std::vector<Seg> segs;
  auto value = [&](int ix, int iy) { return vals[static_cast<std::size_t>(ix + iy * res)]; };
  auto point = [&](int ix, int iy) {
    Vec p(2);
    p << lo[0] + step[0] * ix, lo[1] + step[1] * iy;
    return p;
  };
  auto lerp = [&](int ax, int ay, int bx, int by) {
    const double va = value(ax, ay), vb = value(bx, by);
    const double s = (1.0 - va) / (vb - va);
    return (point(ax, ay) * (1.0 - s) + point(bx, by) * s).eval();
  };

  for (int iy = 0; iy + 1 < res; ++iy)
    for (int ix = 0; ix + 1 < res; ++ix) {
      const bool c00 = value(ix, iy) <= 1.0, c10 = value(ix + 1, iy) <= 1.0;
      const bool c11 = value(ix + 1, iy + 1) <= 1.0, c01 = value(ix, iy + 1) <= 1.0;
      const int code = (c00 ? 1 : 0) | (c10 ? 2 : 0) | (c11 ? 4 : 0) | (c01 ? 8 : 0);
      if (code == 0 || code == 15) continue;
      const Vec bottom = (c00 != c10) ? lerp(ix, iy, ix + 1, iy) : Vec();
      const Vec right = (c10 != c11) ? lerp(ix + 1, iy, ix + 1, iy + 1) : Vec();
      const Vec top = (c01 != c11) ? lerp(ix, iy + 1, ix + 1, iy + 1) : Vec();
      const Vec left = (c00 != c01) ? lerp(ix, iy, ix, iy + 1) : Vec();
      auto add = [&](const Vec& a, const Vec& b) { segs.push_back({a, b}); };
      switch (code) {
        case 1: add(left, bottom); break;
        case 2: add(bottom, right); break;
        case 3: add(left, right); break;
        case 4: add(top, right); break;
        case 6: add(bottom, top); break;
        case 7: add(left, top); break;
        case 8: add(left, top); break;
        case 9: add(bottom, top); break;
        case 11: add(top, right); break;
        case 12: add(left, right); break;
        case 13: add(bottom, right); break;
        case 14: add(left, bottom); break;
        case 5:
        case 10: {
          const double center = 0.25 * (value(ix, iy) + value(ix + 1, iy) +
                                        value(ix, iy + 1) + value(ix + 1, iy + 1));
          const bool center_in = center <= 1.0;
          if ((code == 5) == center_in) {
            add(left, top);
            add(bottom, right);
          } else {
            add(left, bottom);
            add(top, right);
          }
          break;
        }
        default: break;
      }
    }

  // chain segments into polylines by matching quantized endpoints
  const double q = 1e-7 * std::min(step[0], step[1]);
  auto key = [&](const Vec& p) {
    return std::pair<long long, long long>(std::llround(p[0] / q), std::llround(p[1] / q));
  };
  std::multimap<std::pair<long long, long long>, std::size_t> ends;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    ends.insert({key(segs[s].a), s});
    ends.insert({key(segs[s].b), s});
  }
  std::vector<bool> used(segs.size(), false);
  for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
    if (used[s0]) continue;
    used[s0] = true;
    std::vector<Vec> line{segs[s0].a, segs[s0].b};
    for (int dir = 0; dir < 2; ++dir) {
      while (true) {
        const Vec& tip = dir == 0 ? line.back() : line.front();
        auto range = ends.equal_range(key(tip));
        std::size_t next = segs.size();
        for (auto it = range.first; it != range.second; ++it)
          if (!used[it->second]) {
            next = it->second;
            break;
          }
        if (next == segs.size()) break;
        used[next] = true;
        const Vec& grow =
            key(segs[next].a) == key(tip) ? segs[next].b : segs[next].a;
        if (dir == 0)
          line.push_back(grow);
        else
          line.insert(line.begin(), grow);
      }
    }
    loops.push_back(std::move(line));
  }
}

}  // namespace

DoaEstimate estimate_doa(const TsModel& model, const GlobalCertificate& cert, int resolution) {
  check_gains(model, cert);
  if (!model.has_state_bounds())
    throw ValidationError("attraction-domain gridding needs state bounds");
  if (resolution < 2) throw ValidationError("grid resolution must be at least 2");
  const int n = model.n;
  double cells_d = 1.0;
  for (int k = 0; k < n; ++k) cells_d *= resolution;
  if (cells_d > double(1 << 24)) throw ValidationError("grid too large; lower the resolution");
  const std::size_t cells = static_cast<std::size_t>(cells_d);

  DoaEstimate doa;
  doa.resolution = resolution;
  doa.x_bar = model.state_bounds;
  doa.mask.assign(cells, 0);

  Vec step(n), lo(n);
  double cell_vol = 1.0;
  for (int k = 0; k < n; ++k) {
    step[k] = 2.0 * doa.x_bar[k] / resolution;
    lo[k] = -doa.x_bar[k] + 0.5 * step[k];
    cell_vol *= step[k];
  }

  std::vector<double> vals(cells);
  std::vector<int> idx(n, 0);
  Vec x(n);
  std::size_t count = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    for (int k = 0; k < n; ++k) x[k] = lo[k] + step[k] * idx[k];
    const double v = lyapunov_value(model, cert, x);
    vals[c] = v;
    if (v <= 1.0) {
      doa.mask[c] = 1;
      ++count;
    }
    for (int k = 0; k < n; ++k) {
      if (++idx[k] < resolution) break;
      idx[k] = 0;
    }
  }
  doa.area = static_cast<double>(count) * cell_vol;
  if (n == 2) trace_level_set(vals, resolution, lo, step, doa.boundary);
  return doa;
}

std::vector<Vec> boundary_starts(const TsModel& model, const GlobalCertificate& cert,
                                 const DoaEstimate& doa, int count) {
  if (doa.boundary.empty()) throw ValidationError("no traced boundary to start from");
  const std::vector<Vec>* loop = nullptr;
  double best_len = -1.0;
  std::vector<double> arc;
  for (const auto& cand : doa.boundary) {
    double len = 0.0;
    for (std::size_t i = 1; i < cand.size(); ++i) len += (cand[i] - cand[i - 1]).norm();
    if (len > best_len) {
      best_len = len;
      loop = &cand;
    }
  }
  if (loop == nullptr || loop->size() < 2) throw ValidationError("traced boundary is degenerate");
  arc.resize(loop->size(), 0.0);
  for (std::size_t i = 1; i < loop->size(); ++i)
    arc[i] = arc[i - 1] + ((*loop)[i] - (*loop)[i - 1]).norm();

  std::vector<Vec> starts;
  for (int s = 0; s < count; ++s) {
    const double target = best_len * s / count;
    const auto it = std::lower_bound(arc.begin(), arc.end(), target);
    const std::size_t j = std::min<std::size_t>(
        loop->size() - 1, static_cast<std::size_t>(std::distance(arc.begin(), it)));
    Vec p;
    if (j == 0) {
      p = (*loop)[0];
    } else {
      const double span = arc[j] - arc[j - 1];
      const double w = span > 0.0 ? (target - arc[j - 1]) / span : 0.0;
      p = (1.0 - w) * (*loop)[j - 1] + w * (*loop)[j];
    }
    // radial polish to V = 1
    double lo_s = 0.5, hi_s = 1.5;
    auto level = [&](double sc) { return lyapunov_value(model, cert, (sc * p).eval()) - 1.0; };
    if (level(lo_s) < 0.0 && level(hi_s) > 0.0) {
      for (int it2 = 0; it2 < 100; ++it2) {
        const double mid = 0.5 * (lo_s + hi_s);
        (level(mid) <= 0.0 ? lo_s : hi_s) = mid;
      }
      p *= lo_s;
    }
    starts.push_back(p);
  }
  return starts;
}

BoundsReport monitor_bounds(const TsModel& model, const LocalCertificate& cert,
                            const Trajectory& traj) {
  check_gains(model, cert);
  if (cert.phi.size() != model.r || cert.mu.size() != model.r)
    throw ValidationError("region certificate lacks phi/mu entries");
  BoundsReport report;
  report.worst_rate_margin = std::numeric_limits<double>::infinity();
  report.worst_wellposed_margin = std::numeric_limits<double>::infinity();

  for (std::size_t s = 0; s < traj.size(); ++s) {
    if (traj.V[s] > 1.0) continue;
    ++report.samples_inside;
    const Vec& x = traj.x[s];
    const Mat G = model.membership_gradient(x);
    Mat Ah, Bh;
    model.blend(traj.h[s], Ah, Bh);
    for (int u = 0; u < model.r; ++u) {
      const double rate_margin = cert.phi[u] - std::abs(traj.hdot[s][u]);
      report.worst_rate_margin = std::min(report.worst_rate_margin, rate_margin);
      if (rate_margin < -1e-6) {
        std::ostringstream msg;
        msg << "rate cap exceeded at t=" << traj.t[s] << " rule " << u + 1 << " (|hdot|="
            << std::abs(traj.hdot[s][u]) << " > " << cert.phi[u] << ")";
        report.violations.push_back(msg.str());
      }
      const double gap =
          std::abs(1.0 - G.row(u).dot(Bh * (cert.L[static_cast<std::size_t>(u)] * x)));
      const double wp_margin = gap - cert.mu[u];
      report.worst_wellposed_margin = std::min(report.worst_wellposed_margin, wp_margin);
      if (wp_margin < -1e-6) {
        std::ostringstream msg;
        msg << "rate relation too close to singular at t=" << traj.t[s] << " rule " << u + 1
            << " (|1 - grad.B.L.x|=" << gap << " < " << cert.mu[u] << ")";
        report.violations.push_back(msg.str());
      }
    }
  }
  report.ok = report.violations.empty();
  return report;
}

}  // namespace tsctl
