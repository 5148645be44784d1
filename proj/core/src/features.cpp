#include "uwrange/features.hpp"

#include <stdexcept>

namespace uwrange {

Eigen::VectorXcd normalize_snapshot(const Eigen::VectorXcd& snapshot) {
  const double norm = snapshot.norm();
  if (norm <= 0.0) {
    throw std::invalid_argument("normalize_snapshot: zero snapshot vector");
  }
  return snapshot / norm;
}

ScmFeature compute_scm(const SnapshotMatrix& snapshots) {
  const Eigen::Index num_elements = snapshots.num_elements();
  const Eigen::Index num_snaps = snapshots.num_snapshots();
  if (num_snaps < 1 || num_elements < 1) {
    throw std::invalid_argument("compute_scm: empty snapshot matrix");
  }
  ScmFeature feature;
  feature.scm = Eigen::MatrixXcd::Zero(num_elements, num_elements);
  for (Eigen::Index p = 0; p < num_snaps; ++p) {
    const Eigen::VectorXcd normalized = normalize_snapshot(snapshots.coefficients.col(p));
    feature.scm.noalias() += normalized * normalized.adjoint();
    feature.energy += snapshots.coefficients.col(p).squaredNorm();
  }
  feature.scm /= static_cast<double>(num_snaps);
  feature.energy /= static_cast<double>(num_snaps);
  return feature;
}

}  // namespace uwrange
