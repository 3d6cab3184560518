#include "tsctl/svg.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace tsctl {

namespace {

// Pixel coordinates: short fixed decimals keep the files small and stable.
std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape_text(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

SvgPlot::SvgPlot(double xmin, double xmax, double ymin, double ymax, int width, int height)
    : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax), width_(width), height_(height) {
  if (!(xmax > xmin) || !(ymax > ymin)) throw ValidationError("plot window is degenerate");
  body_ += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width_) + "\" height=\"" +
           std::to_string(height_) + "\" fill=\"white\"/>\n";
}

double SvgPlot::px(double x) const {
  return margin_ + (x - xmin_) / (xmax_ - xmin_) * (width_ - 2 * margin_);
}

double SvgPlot::py(double y) const {
  return height_ - margin_ - (y - ymin_) / (ymax_ - ymin_) * (height_ - 2 * margin_);
}

void SvgPlot::axes(const std::string& x_label, const std::string& y_label, int ticks) {
  std::ostringstream os;
  os << "<rect x=\"" << fmt_px(margin_) << "\" y=\"" << fmt_px(margin_) << "\" width=\""
     << fmt_px(width_ - 2 * margin_) << "\" height=\"" << fmt_px(height_ - 2 * margin_)
     << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  for (int k = 0; k <= ticks; ++k) {
    const double fx = xmin_ + (xmax_ - xmin_) * k / ticks;
    const double fy = ymin_ + (ymax_ - ymin_) * k / ticks;
    os << "<line x1=\"" << fmt_px(px(fx)) << "\" y1=\"" << fmt_px(height_ - margin_)
       << "\" x2=\"" << fmt_px(px(fx)) << "\" y2=\"" << fmt_px(height_ - margin_ + 5)
       << "\" stroke=\"#444444\"/>\n";
    os << "<text x=\"" << fmt_px(px(fx)) << "\" y=\"" << fmt_px(height_ - margin_ + 18)
       << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333333\">" << fmt_label(fx)
       << "</text>\n";
    os << "<line x1=\"" << fmt_px(margin_ - 5) << "\" y1=\"" << fmt_px(py(fy)) << "\" x2=\""
       << fmt_px(margin_) << "\" y2=\"" << fmt_px(py(fy)) << "\" stroke=\"#444444\"/>\n";
    os << "<text x=\"" << fmt_px(margin_ - 8) << "\" y=\"" << fmt_px(py(fy) + 4)
       << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#333333\">" << fmt_label(fy)
       << "</text>\n";
  }
  os << "<text x=\"" << fmt_px(width_ / 2.0) << "\" y=\"" << fmt_px(height_ - margin_ / 4.0)
     << "\" font-size=\"13\" text-anchor=\"middle\" fill=\"#111111\">" << escape_text(x_label)
     << "</text>\n";
  os << "<text x=\"" << fmt_px(margin_ / 4.0) << "\" y=\"" << fmt_px(height_ / 2.0)
     << "\" font-size=\"13\" text-anchor=\"middle\" fill=\"#111111\" transform=\"rotate(-90 "
     << fmt_px(margin_ / 4.0) << ' ' << fmt_px(height_ / 2.0) << ")\">" << escape_text(y_label)
     << "</text>\n";
  body_ += os.str();
}

void SvgPlot::polyline(const std::vector<Vec>& points, const std::string& color, double width,
                       bool closed) {
  if (points.size() < 2) return;
  std::ostringstream os;
  os << (closed ? "<polygon" : "<polyline") << " points=\"";
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (k) os << ' ';
    os << fmt_px(px(points[k][0])) << ',' << fmt_px(py(points[k][1]));
  }
  os << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << fmt_px(width)
     << "\"/>\n";
  body_ += os.str();
}

void SvgPlot::fill_region(const std::vector<Vec>& points, const std::string& color,
                          double opacity) {
  if (points.size() < 3) return;
  std::ostringstream os;
  os << "<polygon points=\"";
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (k) os << ' ';
    os << fmt_px(px(points[k][0])) << ',' << fmt_px(py(points[k][1]));
  }
  os << "\" fill=\"" << color << "\" fill-opacity=\"" << fmt_px(opacity)
     << "\" stroke=\"none\"/>\n";
  body_ += os.str();
}

void SvgPlot::marker_at_pixel(double cx, double cy, const std::string& shape,
                              const std::string& color, double size) {
  std::ostringstream os;
  if (shape == "square") {
    os << "<rect x=\"" << fmt_px(cx - size) << "\" y=\"" << fmt_px(cy - size) << "\" width=\""
       << fmt_px(2 * size) << "\" height=\"" << fmt_px(2 * size) << "\" fill=\"" << color
       << "\"/>\n";
  } else if (shape == "cross") {
    os << "<line x1=\"" << fmt_px(cx - size) << "\" y1=\"" << fmt_px(cy - size) << "\" x2=\""
       << fmt_px(cx + size) << "\" y2=\"" << fmt_px(cy + size) << "\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
    os << "<line x1=\"" << fmt_px(cx - size) << "\" y1=\"" << fmt_px(cy + size) << "\" x2=\""
       << fmt_px(cx + size) << "\" y2=\"" << fmt_px(cy - size) << "\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
  } else if (shape == "triangle") {
    os << "<polygon points=\"" << fmt_px(cx) << ',' << fmt_px(cy - size) << ' '
       << fmt_px(cx - size) << ',' << fmt_px(cy + size) << ' ' << fmt_px(cx + size) << ','
       << fmt_px(cy + size) << "\" fill=\"" << color << "\"/>\n";
  } else {
    os << "<circle cx=\"" << fmt_px(cx) << "\" cy=\"" << fmt_px(cy) << "\" r=\"" << fmt_px(size)
       << "\" fill=\"" << color << "\"/>\n";
  }
  body_ += os.str();
}

void SvgPlot::marker(double x, double y, const std::string& shape, const std::string& color,
                     double size) {
  marker_at_pixel(px(x), py(y), shape, color, size);
}

void SvgPlot::arrow(double x, double y, double dx, double dy, const std::string& color,
                    double width) {
  const double x0 = px(x), y0 = py(y);
  const double x1 = px(x + dx), y1 = py(y + dy);
  const double ux = x1 - x0, uy = y1 - y0;
  const double len = std::hypot(ux, uy);
  if (len < 1e-9) return;
  // head: two barbs at 30 degrees, a quarter of the shaft long
  const double hx = ux / len, hy = uy / len;
  const double bl = std::max(2.0, 0.25 * len);
  const double c = std::cos(2.61799387799149), s = std::sin(2.61799387799149);  // 150 deg
  std::ostringstream os;
  os << "<line x1=\"" << fmt_px(x0) << "\" y1=\"" << fmt_px(y0) << "\" x2=\"" << fmt_px(x1)
     << "\" y2=\"" << fmt_px(y1) << "\" stroke=\"" << color << "\" stroke-width=\""
     << fmt_px(width) << "\"/>\n";
  os << "<line x1=\"" << fmt_px(x1) << "\" y1=\"" << fmt_px(y1) << "\" x2=\""
     << fmt_px(x1 + bl * (hx * c - hy * s)) << "\" y2=\"" << fmt_px(y1 + bl * (hx * s + hy * c))
     << "\" stroke=\"" << color << "\" stroke-width=\"" << fmt_px(width) << "\"/>\n";
  os << "<line x1=\"" << fmt_px(x1) << "\" y1=\"" << fmt_px(y1) << "\" x2=\""
     << fmt_px(x1 + bl * (hx * c + hy * s)) << "\" y2=\"" << fmt_px(y1 - bl * (hx * s - hy * c))
     << "\" stroke=\"" << color << "\" stroke-width=\"" << fmt_px(width) << "\"/>\n";
  body_ += os.str();
}

void SvgPlot::text(double x, double y, const std::string& s, const std::string& color,
                   int font_size) {
  std::ostringstream os;
  os << "<text x=\"" << fmt_px(px(x)) << "\" y=\"" << fmt_px(py(y)) << "\" font-size=\""
     << font_size << "\" fill=\"" << color << "\">" << escape_text(s) << "</text>\n";
  body_ += os.str();
}

void SvgPlot::legend(int slot, const std::string& shape, const std::string& color,
                     const std::string& label) {
  const double cx = width_ - margin_ - 150.0;
  const double cy = margin_ + 16.0 + 18.0 * slot;
  marker_at_pixel(cx, cy, shape, color, 4.0);
  std::ostringstream os;
  os << "<text x=\"" << fmt_px(cx + 10) << "\" y=\"" << fmt_px(cy + 4)
     << "\" font-size=\"12\" fill=\"#333333\">" << escape_text(label) << "</text>\n";
  body_ += os.str();
}

std::string SvgPlot::str() const {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
     << height_ << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n"
     << "<g font-family=\"sans-serif\">\n"
     << body_ << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace tsctl
