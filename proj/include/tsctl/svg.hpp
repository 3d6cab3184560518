#pragma once

#include <string>
#include <vector>

#include "tsctl/common.hpp"

namespace tsctl {

// Minimal static-figure emitter: a fixed data window mapped onto a pixel
// canvas with margins, y increasing upward. Elements are emitted in call
// order; the output carries no timestamps or randomness, so identical call
// sequences produce identical bytes.
class SvgPlot {
 public:
  SvgPlot(double xmin, double xmax, double ymin, double ymax, int width = 720, int height = 540);

  // Frame, tick marks with numeric labels, and axis titles.
  void axes(const std::string& x_label, const std::string& y_label, int ticks = 5);

  void polyline(const std::vector<Vec>& points, const std::string& color, double width = 1.5,
                bool closed = false);
  void fill_region(const std::vector<Vec>& points, const std::string& color,
                   double opacity = 0.25);
  // shape: circle | square | cross | triangle
  void marker(double x, double y, const std::string& shape, const std::string& color,
              double size = 4.0);
  void arrow(double x, double y, double dx, double dy, const std::string& color,
             double width = 1.0);
  void text(double x, double y, const std::string& s, const std::string& color = "#333333",
            int font_size = 12);
  // Legend entry pinned to canvas coordinates (slot 0 topmost).
  void legend(int slot, const std::string& shape, const std::string& color,
              const std::string& label);

  std::string str() const;  // complete document

 private:
  double px(double x) const;
  double py(double y) const;
  void marker_at_pixel(double cx, double cy, const std::string& shape, const std::string& color,
                       double size);

  double xmin_, xmax_, ymin_, ymax_;
  int width_, height_;
  int margin_ = 60;
  std::string body_;
};

}  // namespace tsctl
