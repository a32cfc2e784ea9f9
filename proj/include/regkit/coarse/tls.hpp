#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace regkit {

/// Exact minimiser of the scalar truncated least-squares objective
///
///   f(x) = sum_i w_i * min((x - m_i)^2 / a_i^2, c2)
///
/// by adaptive voting: each measurement is trusted on the closed interval
/// m_i +- sqrt(c2) * a_i, every distinct consensus set met by a sweep over
/// the sorted endpoints is solved in closed form, and the best one wins.
/// Ties on the objective go to the larger weighted cardinality, then the
/// smaller weighted variance.
struct Tls1dResult {
  double estimate = 0.0;
  double objective = 0.0;
  std::vector<std::size_t> consensus;  // ascending measurement indices
  /// At least two measurements and no two trust intervals intersect.
  bool intervals_disjoint = false;
};

/// Requires equal, non-zero lengths, a_i > 0, w_i > 0, c2 > 0 (InvalidArgument).
Tls1dResult solve_tls_1d(std::span<const double> measurements, std::span<const double> bounds,
                         std::span<const double> weights, double c2 = 1.0);

double tls_objective_1d(double x, std::span<const double> measurements, std::span<const double> bounds,
                        std::span<const double> weights, double c2 = 1.0);

/// Lower weighted median.
double weighted_median(std::span<const double> values, std::span<const double> weights);

}  // namespace regkit
