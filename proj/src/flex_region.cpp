#include "ofosim/flex_region.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ofosim/csv.hpp"

namespace ofosim {

namespace geom {

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a == b; }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Eigen::Vector2d>& pts) {
  double a = 0.0;
  const size_t n = pts.size();
  if (n < 3) return 0.0;
  for (size_t i = 0; i < n; ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

// Sutherland-Hodgman against a convex ccw clip polygon.
std::vector<Eigen::Vector2d> clip_convex(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip) {
  std::vector<Eigen::Vector2d> out = subject;
  const size_t m = clip.size();
  if (m < 3) return {};
  for (size_t e = 0; e < m && !out.empty(); ++e) {
    const Eigen::Vector2d a = clip[e];
    const Eigen::Vector2d b = clip[(e + 1) % m];
    auto inside = [&](const Eigen::Vector2d& p) {
      return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x()) >=
             0.0;
    };
    auto intersect = [&](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
      const Eigen::Vector2d d1 = q - p;
      const Eigen::Vector2d d2 = b - a;
      const double denom = d1.x() * d2.y() - d1.y() * d2.x();
      const double t =
          ((a.x() - p.x()) * d2.y() - (a.y() - p.y()) * d2.x()) / denom;
      return Eigen::Vector2d(p + t * d1);
    };
    std::vector<Eigen::Vector2d> in;
    in.swap(out);
    for (size_t i = 0; i < in.size(); ++i) {
      const Eigen::Vector2d& cur = in[i];
      const Eigen::Vector2d& prev = in[(i + in.size() - 1) % in.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(intersect(prev, cur));
      }
    }
  }
  return out;
}

double distance_to_boundary(const std::vector<Eigen::Vector2d>& poly,
                            const Eigen::Vector2d& pt) {
  double best = std::numeric_limits<double>::infinity();
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = poly[i];
    const Eigen::Vector2d& b = poly[(i + 1) % n];
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) {
      best = std::min(best, (pt - a).norm());
      continue;
    }
    const double t = std::clamp((pt - a).dot(ab) / len2, 0.0, 1.0);
    best = std::min(best, (pt - (a + t * ab)).norm());
  }
  return best;
}

bool point_in_polygon(const std::vector<Eigen::Vector2d>& poly,
                      const Eigen::Vector2d& pt) {
  bool in = false;
  const size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > pt.y()) != (b.y() > pt.y())) {
      const double x_cross = a.x() + (pt.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (pt.x() < x_cross) in = !in;
    }
  }
  return in;
}

}  // namespace geom

ForConstructionError::ForConstructionError(double theta, TrajectoryClass cls)
    : std::runtime_error("FOR construction failed at direction " +
                         std::to_string(theta) + " deg: trajectory " +
                         to_string(cls)),
      theta_deg(theta),
      classification(cls) {}

ForPolygon compute_for_polygon(const PlantFn& plant, const Eigen::VectorXd& u0,
                               const OfoConfig& config, int n_vertices) {
  if (n_vertices < 3)
    throw std::invalid_argument("compute_for_polygon: n_vertices must be >= 3");

  ForPolygon f;
  f.resolution_deg = 360.0 / n_vertices;
  for (int i = 0; i < n_vertices; ++i) {
    const double theta_deg = i * f.resolution_deg;
    const double theta = theta_deg * std::numbers::pi / 180.0;
    const Trajectory t = run_directional(plant, u0, config, theta);
    if (t.classification == TrajectoryClass::Oscillatory ||
        t.classification == TrajectoryClass::Divergent)
      throw ForConstructionError(theta_deg, t.classification);
    const Measurement last{t.final_sample().y, true};
    f.vertices.emplace_back(last.p_pcc(), last.q_pcc());
    f.angles_deg.push_back(theta_deg);
  }

  const Measurement y0 = plant(u0);
  const Eigen::Vector2d start(y0.p_pcc(), y0.q_pcc());
  if (!contains(f, start, std::max(1e-9, 0.01 * polygon_diameter(f))))
    throw std::runtime_error(
        "compute_for_polygon: initial operating point outside the polygon");
  return f;
}

bool contains(const ForPolygon& f, const Eigen::Vector2d& point, double tol) {
  if (f.vertices.size() < 3)
    throw std::invalid_argument("contains: degenerate polygon (< 3 vertices)");
  if (geom::distance_to_boundary(f.vertices, point) <= tol) return true;
  return geom::point_in_polygon(f.vertices, point);
}

TrajectorySet trajectory_set_at(const std::vector<Trajectory>& trajectories, int k) {
  if (trajectories.empty())
    throw std::invalid_argument("trajectory_set_at: empty ensemble");
  TrajectorySet e;
  e.k = k;
  for (const Trajectory& t : trajectories) {
    const size_t idx = std::min<size_t>(k, t.samples.size() - 1);
    const Measurement m{t.samples[idx].y, true};
    e.points.emplace_back(m.p_pcc(), m.q_pcc());
  }
  e.hull = geom::convex_hull(e.points);
  return e;
}

std::pair<bool, std::vector<SafetyViolation>> is_safe(const TrajectorySet& e,
                                                      const ForPolygon& f,
                                                      double tol) {
  std::vector<SafetyViolation> violations;
  for (size_t i = 0; i < e.points.size(); ++i)
    if (!contains(f, e.points[i], tol))
      violations.push_back({static_cast<int>(i), e.k, e.points[i]});
  return {violations.empty(), violations};
}

double coverage_fraction(const TrajectorySet& e, const ForPolygon& f) {
  const auto f_hull = geom::convex_hull(f.vertices);
  const double f_area = geom::polygon_area(f_hull);
  if (f_area <= 0.0)
    throw std::invalid_argument("coverage_fraction: zero-area region");
  if (e.hull.size() < 3) return 0.0;
  const auto inter = geom::clip_convex(e.hull, f_hull);
  return geom::polygon_area(inter) / f_area;
}

double polygon_diameter(const ForPolygon& f) {
  double d = 0.0;
  for (size_t i = 0; i < f.vertices.size(); ++i)
    for (size_t j = i + 1; j < f.vertices.size(); ++j)
      d = std::max(d, (f.vertices[i] - f.vertices[j]).norm());
  return d;
}

void write_for_csv(std::ostream& os, const ForPolygon& f) {
  os << "theta_deg,p,q\n";
  for (size_t i = 0; i < f.vertices.size(); ++i)
    os << csv::num(f.angles_deg[i]) << ',' << csv::num(f.vertices[i].x()) << ','
       << csv::num(f.vertices[i].y()) << '\n';
}

ForPolygon read_for_csv(std::istream& is) {
  ForPolygon f;
  std::string line;
  if (!std::getline(is, line) || line.rfind("theta_deg", 0) != 0)
    throw std::runtime_error("FOR csv: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    double vals[3];
    for (double& val : vals) {
      if (!std::getline(ls, cell, ','))
        throw std::runtime_error("FOR csv: short row");
      val = std::stod(cell);
    }
    f.angles_deg.push_back(vals[0]);
    f.vertices.emplace_back(vals[1], vals[2]);
  }
  if (f.vertices.size() < 3) throw std::runtime_error("FOR csv: fewer than 3 vertices");
  if (f.vertices.size() >= 2)
    f.resolution_deg = f.angles_deg[1] - f.angles_deg[0];
  return f;
}

}  // namespace ofosim
