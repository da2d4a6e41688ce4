#include "aggrl/svg.hpp"

#include <iomanip>
#include <sstream>

namespace aggrl {
namespace {

constexpr double kViewport = 600.0;

struct Mapper {
  double half;
  double scale() const { return kViewport / (2.0 * half); }
  double x(double wx) const { return (wx + half) * scale(); }
  double y(double wy) const { return (half - wy) * scale(); }  // SVG y grows downward
  double len(double l) const { return l * scale(); }
};

}  // namespace

std::string render_svg(const TrajectoryLog& layout, const std::vector<PlotPath>& paths) {
  const Mapper m{layout.arena_half_extent};
  std::ostringstream s;
  s << std::fixed << std::setprecision(3);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kViewport << "\" height=\"" << kViewport
    << "\" viewBox=\"0 0 " << kViewport << ' ' << kViewport << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << kViewport << "\" height=\"" << kViewport
    << "\" fill=\"white\" stroke=\"black\" stroke-width=\"2\"/>\n";
  for (const auto& o : layout.obstacles) {
    if (const auto* c = std::get_if<CylinderObstacle>(&o)) {
      s << "<circle class=\"obstacle\" cx=\"" << m.x(c->center.x) << "\" cy=\"" << m.y(c->center.y) << "\" r=\""
        << m.len(c->radius) << "\" fill=\"gray\"/>\n";
    } else {
      const auto& w = std::get<WallObstacle>(o);
      s << "<line class=\"obstacle\" x1=\"" << m.x(w.a.x) << "\" y1=\"" << m.y(w.a.y) << "\" x2=\"" << m.x(w.b.x)
        << "\" y2=\"" << m.y(w.b.y) << "\" stroke=\"gray\" stroke-width=\"" << m.len(w.thickness)
        << "\" stroke-linecap=\"round\"/>\n";
    }
  }
  s << "<circle class=\"goal\" cx=\"" << m.x(layout.goal.x) << "\" cy=\"" << m.y(layout.goal.y) << "\" r=\""
    << m.len(layout.goal_threshold) << "\" fill=\"green\"/>\n";
  for (const auto& path : paths) {
    s << "<polyline class=\"payload-path\" fill=\"none\" stroke=\"" << path.color << "\" stroke-width=\"2\"";
    if (!path.label.empty()) s << " data-label=\"" << path.label << '"';
    s << " points=\"";
    for (std::size_t i = 0; i < path.points.size(); ++i) {
      if (i) s << ' ';
      s << m.x(path.points[i].x) << ',' << m.y(path.points[i].y);
    }
    s << "\"/>\n";
  }
  double legend_y = 20.0;
  for (const auto& path : paths) {
    if (path.label.empty()) continue;
    s << "<text x=\"10\" y=\"" << legend_y << "\" fill=\"" << path.color << "\" font-size=\"14\">" << path.label
      << "</text>\n";
    legend_y += 18.0;
  }
  s << "</svg>\n";
  return s.str();
}

std::string render_trajectory_svg(const TrajectoryLog& log) {
  PlotPath path;
  for (const auto& t : log.ticks) path.points.push_back(t.payload.position);
  return render_svg(log, {path});
}

}  // namespace aggrl
