// Feasible operating region in the PQ-plane: directional boundary
// construction, trajectory sets, the safety condition E within F, coverage.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ofosim/controller.hpp"

namespace ofosim {

struct ForPolygon {
  std::vector<Eigen::Vector2d> vertices;  // (p, q), ordered by angle
  std::vector<double> angles_deg;
  double resolution_deg = 0.0;
};

struct ForConstructionError : std::runtime_error {
  ForConstructionError(double theta_deg, TrajectoryClass cls);
  double theta_deg;
  TrajectoryClass classification;
};

// One support-point run per angle theta_i = i * 360 / n_vertices, each with
// the directional objective and the unchanged constraint set. Requires a
// stable tuning: throws ForConstructionError if any run classifies
// oscillatory or divergent, and if the initial operating point ends up
// outside the polygon.
ForPolygon compute_for_polygon(const PlantFn& plant, const Eigen::VectorXd& u0,
                               const OfoConfig& config, int n_vertices = 36);

// Inside or within tol of the boundary. Throws on a degenerate polygon.
bool contains(const ForPolygon& f, const Eigen::Vector2d& point, double tol = 1e-6);

struct TrajectorySet {
  int k = 0;
  std::vector<Eigen::Vector2d> points;  // one per ensemble member
  std::vector<Eigen::Vector2d> hull;
};

// Member states at iteration k; members that already terminated contribute
// their final state. Throws on an empty ensemble.
TrajectorySet trajectory_set_at(const std::vector<Trajectory>& trajectories, int k);

struct SafetyViolation {
  int member = 0;
  int k = 0;
  Eigen::Vector2d point;
};

std::pair<bool, std::vector<SafetyViolation>> is_safe(const TrajectorySet& e,
                                                      const ForPolygon& f,
                                                      double tol);

// area(hull(e) intersect hull(f)) / area(hull(f)).
double coverage_fraction(const TrajectorySet& e, const ForPolygon& f);

double polygon_diameter(const ForPolygon& f);

// CSV cache: header theta_deg,p,q.
void write_for_csv(std::ostream& os, const ForPolygon& f);
ForPolygon read_for_csv(std::istream& is);

namespace geom {
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts);
double polygon_area(const std::vector<Eigen::Vector2d>& pts);  // signed, ccw > 0
std::vector<Eigen::Vector2d> clip_convex(const std::vector<Eigen::Vector2d>& subject,
                                         const std::vector<Eigen::Vector2d>& clip);
double distance_to_boundary(const std::vector<Eigen::Vector2d>& poly,
                            const Eigen::Vector2d& pt);
bool point_in_polygon(const std::vector<Eigen::Vector2d>& poly,
                      const Eigen::Vector2d& pt);
}  // namespace geom

}  // namespace ofosim
