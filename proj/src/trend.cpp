#include "laid/trend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "laid/error.hpp"

namespace laid {

TrendFit linear_fit(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 2) throw Error(ErrorKind::Fit, "linear fit needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
    syy += (p.y - my) * (p.y - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::Fit, "all x values are equal");
  TrendFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 0.0;
    return fit;
  }
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double r = p.y - fit.at(p.x);
    ss_res += r * r;
  }
  fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return fit;
}

PlotFrame plot_frame(std::span<const Point> points, const TrendFit& fit) {
  PlotFrame f;
  if (points.empty()) return f;
  double xmin = points[0].x, xmax = xmin, ymin = points[0].y, ymax = ymin;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  for (double x : {xmin, xmax}) {
    ymin = std::min(ymin, fit.at(x));
    ymax = std::max(ymax, fit.at(x));
  }
  auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    if (span <= 0.0) {
      lo -= 0.5;
      hi += 0.5;
      return;
    }
    lo -= 0.05 * span;
    hi += 0.05 * span;
  };
  pad(xmin, xmax);
  pad(ymin, ymax);
  f.x0 = xmin;
  f.x1 = xmax;
  f.y0 = ymin;
  f.y1 = ymax;
  return f;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string emit_scatter_svg(std::span<const Point> points, const TrendFit& fit,
                             const AxisLabels& labels) {
  using F = PlotFrame;
  const PlotFrame frame = plot_frame(points, fit);
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << F::kWidth << "\" height=\""
    << F::kHeight << "\" viewBox=\"0 0 " << F::kWidth << " " << F::kHeight << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << F::kWidth << "\" height=\"" << F::kHeight
    << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << F::kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(labels.title) << "</text>\n";

  const double left = F::kLeft, right = F::kWidth - F::kRight;
  const double top = F::kTop, bottom = F::kHeight - F::kBottom;
  s << "<g stroke=\"black\" stroke-width=\"1\">\n";
  s << "<line x1=\"" << fmt("%.3f", left) << "\" y1=\"" << fmt("%.3f", bottom) << "\" x2=\""
    << fmt("%.3f", right) << "\" y2=\"" << fmt("%.3f", bottom) << "\"/>\n";
  s << "<line x1=\"" << fmt("%.3f", left) << "\" y1=\"" << fmt("%.3f", top) << "\" x2=\""
    << fmt("%.3f", left) << "\" y2=\"" << fmt("%.3f", bottom) << "\"/>\n";
  s << "</g>\n";

  constexpr int kTicks = 5;
  s << "<g font-size=\"10\" fill=\"black\">\n";
  for (int i = 0; i < kTicks; ++i) {
    const double t = static_cast<double>(i) / (kTicks - 1);
    const double xv = frame.x0 + t * (frame.x1 - frame.x0);
    const double yv = frame.y0 + t * (frame.y1 - frame.y0);
    const double tx = frame.px(xv), ty = frame.py(yv);
    s << "<line x1=\"" << fmt("%.3f", tx) << "\" y1=\"" << fmt("%.3f", bottom) << "\" x2=\""
      << fmt("%.3f", tx) << "\" y2=\"" << fmt("%.3f", bottom + 4) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt("%.3f", tx) << "\" y=\"" << fmt("%.3f", bottom + 16)
      << "\" text-anchor=\"middle\">" << fmt("%.3g", xv) << "</text>\n";
    s << "<line x1=\"" << fmt("%.3f", left - 4) << "\" y1=\"" << fmt("%.3f", ty) << "\" x2=\""
      << fmt("%.3f", left) << "\" y2=\"" << fmt("%.3f", ty) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt("%.3f", left - 6) << "\" y=\"" << fmt("%.3f", ty + 3)
      << "\" text-anchor=\"end\">" << fmt("%.4g", yv) << "</text>\n";
  }
  s << "</g>\n";
  s << "<text x=\"" << fmt("%.3f", (left + right) / 2) << "\" y=\"" << fmt("%.3f", F::kHeight - 12)
    << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(labels.x) << "</text>\n";
  s << "<text x=\"16\" y=\"" << fmt("%.3f", (top + bottom) / 2)
    << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << fmt("%.3f", (top + bottom) / 2) << ")\">" << xml_escape(labels.y) << "</text>\n";

  s << "<g fill=\"steelblue\">\n";
  for (const auto& p : points) {
    s << "<circle cx=\"" << fmt("%.3f", frame.px(p.x)) << "\" cy=\"" << fmt("%.3f", frame.py(p.y))
      << "\" r=\"3.5\"/>\n";
  }
  s << "</g>\n";

  if (!points.empty()) {
    double xmin = points[0].x, xmax = points[0].x;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
    }
    s << "<line id=\"trend\" x1=\"" << fmt("%.3f", frame.px(xmin)) << "\" y1=\""
      << fmt("%.3f", frame.py(fit.at(xmin))) << "\" x2=\"" << fmt("%.3f", frame.px(xmax))
      << "\" y2=\"" << fmt("%.3f", frame.py(fit.at(xmax)))
      << "\" stroke=\"firebrick\" stroke-width=\"2\"/>\n";
  }
  char note[128];
  std::snprintf(note, sizeof note, "y = %.4g x + %.4g, R&#178; = %.2f", fit.slope, fit.intercept,
                fit.r_squared);
  s << "<text x=\"" << fmt("%.3f", right - 4) << "\" y=\"" << fmt("%.3f", top + 14)
    << "\" text-anchor=\"end\" font-size=\"11\">" << note << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::vector<Point> parse_points(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<Point> pts;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c == ',' || c == '\t' || c == ';') c = ' ';
    }
    std::istringstream ls(line);
    Point p;
    if (!(ls >> p.x >> p.y)) {
      if (pts.empty()) continue;  // header
      throw Error(ErrorKind::Data, "malformed point line: " + line);
    }
    pts.push_back(p);
  }
  return pts;
}

std::vector<ReferencePanel> reference_trend_panels() {
  const double acc[9] = {92.40, 95.64, 95.19, 97.17, 97.01, 92.47, 97.86, 98.87, 97.98};
  const double params[9] = {1.4, 1.3, 2.5, 1.3, 1.4, 1.2, 1.4, 3.6, 4.3};
  const double flops[9] = {0.04, 0.26, 0.06, 0.40, 0.50, 0.35, 0.30, 0.70, 0.40};
  const double score[9] = {0.806, 0.671, 0.669, 0.645, 0.631, 0.607, 0.526, 0.524, 0.523};
  auto make = [&](const double* xs) {
    std::vector<Point> p;
    for (int i = 0; i < 9; ++i) p.push_back({xs[i], acc[i]});
    return p;
  };
  return {
      {"a", "# Parameters (M)", make(params), {1.058, 93.902, 0.27, 9}},
      {"b", "FLOPs (G)", make(flops), {5.624, 93.495, 0.33, 9}},
      {"c", "Efficiency score", make(score), {-18.92, 107.84, 0.55, 9}},
  };
}

}  // namespace laid
