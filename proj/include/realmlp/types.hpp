#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace realmlp {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;
using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;
using VectorXi = Eigen::VectorXi;
using IndexList = std::vector<Index>;

enum class Task { classification, regression };

inline std::string to_string(Task t) {
  return t == Task::classification ? "classification" : "regression";
}

inline Task task_from_string(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw std::invalid_argument("unknown task: " + s);
}

/// Error for violated preconditions / malformed inputs surfaced to callers.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace realmlp
