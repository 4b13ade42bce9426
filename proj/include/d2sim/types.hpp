#ifndef D2SIM_TYPES_HPP_
#define D2SIM_TYPES_HPP_

#include <Eigen/Dense>

namespace d2sim {

using Index = Eigen::Index;

template <typename Scalar>
using DynamicMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using DynamicVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = DynamicMatrix<double>;
using Vector = DynamicVector<double>;

}  // namespace d2sim

#endif  // D2SIM_TYPES_HPP_
