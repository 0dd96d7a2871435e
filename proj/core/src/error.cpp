#include "rebama/error.hpp"

#include <sstream>
#include <utility>

namespace rebama {

ConstraintViolation::ConstraintViolation(int region, std::string row, const std::string& what)
    : ValidationError(what), region_(region), row_(std::move(row)) {}

namespace {
std::string non_convergence_message(double residual, int cycles) {
  std::ostringstream os;
  os << "Dykstra projection did not converge after " << cycles << " cycles (last change "
     << residual << ")";
  return os.str();
}
}  // namespace

NonConvergence::NonConvergence(Eigen::VectorXd last_iterate, double residual, int cycles)
    : Error(non_convergence_message(residual, cycles)),
      last_iterate_(std::move(last_iterate)),
      residual_(residual),
      cycles_(cycles) {}

}  // namespace rebama
