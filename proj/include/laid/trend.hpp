#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace laid {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct TrendFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;

  double at(double x) const { return slope * x + intercept; }
};

// Ordinary least squares. R^2 = 1 - SS_res/SS_tot, defined as 0 when y is
// constant. Throws a fit error for n < 2 or constant x.
TrendFit linear_fit(std::span<const Point> points);

// Data-to-pixel mapping used by emit_scatter_svg.
struct PlotFrame {
  static constexpr double kWidth = 480.0;
  static constexpr double kHeight = 360.0;
  static constexpr double kLeft = 64.0;
  static constexpr double kRight = 24.0;
  static constexpr double kTop = 40.0;
  static constexpr double kBottom = 52.0;

  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    return kTop + (kHeight - kTop - kBottom) * (1.0 - (y - y0) / (y1 - y0));
  }
};

// Data extents padded by 5% on each side (unit span when degenerate).
PlotFrame plot_frame(std::span<const Point> points, const TrendFit& fit);

struct AxisLabels {
  std::string title;
  std::string x;
  std::string y;
};

// Standalone SVG: points, trend line across the data x-range, ticks and an
// R^2 annotation. Equal inputs give identical bytes.
std::string emit_scatter_svg(std::span<const Point> points, const TrendFit& fit,
                             const AxisLabels& labels);

// Reads "x,y" (or whitespace separated) pairs; '#' lines and a non-numeric
// header line are skipped.
std::vector<Point> parse_points(std::string_view text);

// Coordinates plotted in the efficiency-vs-accuracy trend panels: accuracy
// against parameters (M), FLOPs (G) and efficiency score for nine models.
struct ReferencePanel {
  std::string name;
  std::string x_label;
  std::vector<Point> points;
  TrendFit published;  // slope, intercept, R^2 as printed
};

std::vector<ReferencePanel> reference_trend_panels();

}  // namespace laid
