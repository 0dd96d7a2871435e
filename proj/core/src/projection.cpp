#include "rebama/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "rebama/error.hpp"

namespace rebama {

HPolytope::HPolytope(std::vector<HalfSpace> rows, Eigen::VectorXd witness)
    : rows_(std::move(rows)), witness_(std::move(witness)) {
  if (rows_.empty()) throw ValidationError("polytope needs at least one half-space");
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    const auto& row = rows_[j];
    if (row.normal.size() != witness_.size()) {
      throw ValidationError("half-space " + std::to_string(j) + " has the wrong dimension");
    }
    if (row.normal.squaredNorm() == 0.0) {
      throw ValidationError("half-space " + std::to_string(j) + " has a zero normal");
    }
    if (row.normal.dot(witness_) - row.bound > 1e-9) {
      throw ValidationError("witness violates half-space " + std::to_string(j));
    }
  }
}

double HPolytope::max_violation(const Eigen::VectorXd& a) const {
  double worst = 0.0;
  for (const auto& row : rows_) worst = std::max(worst, row.normal.dot(a) - row.bound);
  return worst;
}

int SimplexProduct::dimension() const { return std::accumulate(blocks.begin(), blocks.end(), 0); }

HPolytope SimplexProduct::polytope() const {
  const int d = dimension();
  if (blocks.empty()) throw ValidationError("simplex product needs at least one block");
  std::vector<HalfSpace> rows;
  Eigen::VectorXd witness(d);
  int offset = 0;
  for (int size : blocks) {
    if (size < 1) throw ValidationError("simplex block length must be >= 1");
    for (int k = 0; k < size; ++k) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
      c[offset + k] = -1.0;
      rows.push_back({std::move(c), 0.0});
    }
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    sum.segment(offset, size).setOnes();
    rows.push_back({sum, 1.0});
    rows.push_back({-sum, -1.0});
    witness.segment(offset, size).setConstant(1.0 / size);
    offset += size;
  }
  return HPolytope(std::move(rows), std::move(witness));
}

HPolytope Box::polytope() const {
  const int d = dimension();
  if (upper.size() != d) throw ValidationError("box bounds have different lengths");
  std::vector<HalfSpace> rows;
  for (int k = 0; k < d; ++k) {
    if (lower[k] > upper[k]) throw ValidationError("box lower bound exceeds upper bound");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    c[k] = 1.0;
    rows.push_back({c, upper[k]});
    rows.push_back({-c, -lower[k]});
  }
  return HPolytope(std::move(rows), 0.5 * (lower + upper));
}

Eigen::VectorXd project_halfspace(const Eigen::VectorXd& a, const Eigen::VectorXd& normal,
                                  double bound) {
  const double norm2 = normal.squaredNorm();
  if (norm2 == 0.0) throw ValidationError("half-space normal must be nonzero");
  const double excess = normal.dot(a) - bound;
  if (excess <= 0.0) return a;
  return a - (excess / norm2) * normal;
}

Eigen::VectorXd dykstra_project(const Eigen::VectorXd& a, const HPolytope& polytope,
                                const DykstraOptions& options) {
  if (a.size() != polytope.dimension()) {
    throw ValidationError("point and polytope dimensions differ");
  }
  if (!(options.tol > 0.0)) throw ValidationError("Dykstra tolerance must be > 0");
  const auto& rows = polytope.rows();
  const auto u = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd corrections = Eigen::MatrixXd::Zero(a.size(), u);
  Eigen::VectorXd x = a;
  Eigen::VectorXd previous(a.size());
  Eigen::VectorXd shifted(a.size());
  Eigen::VectorXd correction(a.size());
  double change = 0.0;
  for (int cycle = 1; cycle <= options.max_iter; ++cycle) {
    previous = x;
    // The iterate can sit still for a cycle while the corrections are still
    // moving, so both must settle before stopping.
    double correction_change = 0.0;
    for (Eigen::Index j = 0; j < u; ++j) {
      shifted = x - corrections.col(j);
      x = project_halfspace(shifted, rows[j].normal, rows[j].bound);
      correction = x - shifted;
      correction_change =
          std::max(correction_change, (correction - corrections.col(j)).cwiseAbs().maxCoeff());
      corrections.col(j) = correction;
    }
    change = std::max((x - previous).cwiseAbs().maxCoeff(), correction_change);
    if (change < options.tol) return x;
  }
  throw NonConvergence(x, change, options.max_iter);
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& a) {
  const auto n = a.size();
  if (n < 1) throw ValidationError("cannot project an empty vector onto a simplex");
  std::vector<double> sorted(a.data(), a.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  return (a.array() - theta).cwiseMax(0.0).matrix();
}

Eigen::VectorXd project_box(const Eigen::VectorXd& a, const Box& box) {
  return a.cwiseMax(box.lower).cwiseMin(box.upper);
}

Eigen::VectorXd project(const Eigen::VectorXd& a, const SimplexProduct& domain,
                        ProjectionMethod method, const DykstraOptions& options) {
  if (method == ProjectionMethod::dykstra) return dykstra_project(a, domain.polytope(), options);
  Eigen::VectorXd out(a.size());
  int offset = 0;
  for (int size : domain.blocks) {
    out.segment(offset, size) = project_simplex(a.segment(offset, size));
    offset += size;
  }
  return out;
}

Eigen::VectorXd project(const Eigen::VectorXd& a, const Box& domain, ProjectionMethod method,
                        const DykstraOptions& options) {
  if (method == ProjectionMethod::dykstra) return dykstra_project(a, domain.polytope(), options);
  return project_box(a, domain);
}

Eigen::VectorXd lp_vertex_argmax(const Eigen::VectorXd& g, const SimplexProduct& domain) {
  if (g.size() != domain.dimension()) throw ValidationError("objective and domain sizes differ");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(g.size());
  int offset = 0;
  for (int size : domain.blocks) {
    int best = 0;
    for (int k = 1; k < size; ++k) {
      if (g[offset + k] > g[offset + best]) best = k;
    }
    x[offset + best] = 1.0;
    offset += size;
  }
  return x;
}

Eigen::VectorXd lp_vertex_argmax(const Eigen::VectorXd& g, const Box& domain) {
  if (g.size() != domain.dimension()) throw ValidationError("objective and domain sizes differ");
  Eigen::VectorXd x(g.size());
  for (Eigen::Index k = 0; k < g.size(); ++k) x[k] = g[k] > 0.0 ? domain.upper[k] : domain.lower[k];
  return x;
}

}  // namespace rebama
