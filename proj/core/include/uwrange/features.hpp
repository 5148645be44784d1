#pragma once

#include <Eigen/Dense>
#include <optional>

#include "uwrange/signal.hpp"

namespace uwrange {

/// Normalized sample covariance matrix plus the received-energy scalar.  The
/// SCM is Hermitian, positive semidefinite and trace-one by construction; the
/// pair (scm, energy) carries the factorization C = E * C_tilde.
struct ScmFeature {
  Eigen::MatrixXcd scm;               // L x L
  double energy = 0.0;                // snapshot-averaged array energy, linear units
  std::optional<double> true_range_m; // present only for labeled (training) data
};

/// r / ||r||_2.  Throws on a zero vector.
Eigen::VectorXcd normalize_snapshot(const Eigen::VectorXcd& snapshot);

/// scm = (1/P) sum_p r_p r_p^H over unit-normalized snapshot columns;
/// energy = (1/P) sum_p ||column p||^2.
ScmFeature compute_scm(const SnapshotMatrix& snapshots);

}  // namespace uwrange
