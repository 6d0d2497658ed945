#pragma once

#include <Eigen/Dense>

namespace sparse_evo {

/// Neuron-major activation storage: one row per neuron, one column per
/// sample. Rows are contiguous so per-neuron vectors are cheap to walk.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace sparse_evo
