#pragma once

#include <vector>

#include <Eigen/Core>

namespace rebama {

// { a : normal . a <= bound }
struct HalfSpace {
  Eigen::VectorXd normal;
  double bound = 0.0;
};

// Intersection of half-spaces, with a feasible witness proving it is nonempty.
class HPolytope {
 public:
  // Throws ValidationError for an empty row set, a zero or mis-sized normal,
  // or a witness that violates some row by more than 1e-9.
  HPolytope(std::vector<HalfSpace> rows, Eigen::VectorXd witness);

  const std::vector<HalfSpace>& rows() const { return rows_; }
  const Eigen::VectorXd& witness() const { return witness_; }
  int dimension() const { return static_cast<int>(witness_.size()); }

  // max_j (c_j . a - e_j), clipped at 0.
  double max_violation(const Eigen::VectorXd& a) const;

 private:
  std::vector<HalfSpace> rows_;
  Eigen::VectorXd witness_;
};

// Product of probability simplices, one per block, laid out back to back.
struct SimplexProduct {
  std::vector<int> blocks;

  int dimension() const;
  // Each block's sum = 1 is written as the pair sum <= 1, -sum <= -1.
  HPolytope polytope() const;
};

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dimension() const { return static_cast<int>(lower.size()); }
  HPolytope polytope() const;
};

struct DykstraOptions {
  double tol = 1e-8;

  bool operator==(const DykstraOptions&) const = default;
  int max_iter = 10000;  // full cycles over all rows
};

enum class ProjectionMethod { dykstra, closed_form };

// Throws ValidationError for a zero normal.
Eigen::VectorXd project_halfspace(const Eigen::VectorXd& a, const Eigen::VectorXd& normal,
                                  double bound);

// Dykstra's alternating projection with correction terms. Stops once a whole
// cycle moves no coordinate by tol or more; throws NonConvergence after max_iter cycles.
Eigen::VectorXd dykstra_project(const Eigen::VectorXd& a, const HPolytope& polytope,
                                const DykstraOptions& options = {});

// Sort-and-threshold projection onto the probability simplex.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& a);
Eigen::VectorXd project_box(const Eigen::VectorXd& a, const Box& box);

Eigen::VectorXd project(const Eigen::VectorXd& a, const SimplexProduct& domain,
                        ProjectionMethod method, const DykstraOptions& options = {});
Eigen::VectorXd project(const Eigen::VectorXd& a, const Box& domain, ProjectionMethod method,
                        const DykstraOptions& options = {});

// Maximizer of g . x over the domain, always a vertex. Simplex blocks pick the
// largest coefficient (ties to the lowest index); box coordinates take upper
// when g_k > 0 and lower otherwise.
Eigen::VectorXd lp_vertex_argmax(const Eigen::VectorXd& g, const SimplexProduct& domain);
Eigen::VectorXd lp_vertex_argmax(const Eigen::VectorXd& g, const Box& domain);

}  // namespace rebama
