#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fairsep {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VecXd = Vec<double>;
using MatXd = Mat<double>;

/// Row membership. Conjunction of predicates is `&&` over masks.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline Mask all_rows(Eigen::Index n) { return Mask::Constant(n, true); }

/// Sum of `values` over rows selected by `mask`, accumulated in row order so
/// results do not depend on vectorization or evaluation order.
template <typename Derived>
typename Derived::Scalar masked_sum(const Eigen::DenseBase<Derived>& values, const Mask& mask) {
  typename Derived::Scalar acc{0};
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    if (mask[i]) acc += values.derived().coeff(i);
  return acc;
}

/// Sum of `weights * values` over masked rows, in row order.
template <typename DerivedW, typename DerivedV>
typename DerivedV::Scalar masked_dot(const Eigen::DenseBase<DerivedW>& weights,
                                     const Eigen::DenseBase<DerivedV>& values, const Mask& mask) {
  typename DerivedV::Scalar acc{0};
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    if (mask[i]) acc += weights.derived().coeff(i) * values.derived().coeff(i);
  return acc;
}

inline Eigen::Index count(const Mask& mask) { return mask.count(); }

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  return z >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-z)) : exp(z) / (Scalar(1) + exp(z));
}

// Error hierarchy. Every failure mode a caller may want to distinguish gets its
// own type; the CLI maps them onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};
struct SchemaError : Error {
  using Error::Error;
};
struct PredicateError : Error {
  using Error::Error;
};
struct AlignmentError : Error {
  using Error::Error;
};
struct DegenerateError : Error {
  using Error::Error;
};
struct EncodingError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace fairsep
