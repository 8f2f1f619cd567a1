#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace vaedyn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Seeded random source used everywhere a draw is made.
using Rng = std::mt19937_64;

/// Invalid configuration, bad dimensions or out-of-domain arguments.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical run left its valid domain (non-finite values, D crossing zero).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ConfigError(what);
}

inline VectorXd standard_normal(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

inline MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    MatrixXd a(rows, cols);
    // column-major fill so a fixed seed gives the same matrix regardless of storage tricks
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = g(rng);
    return a;
}

}  // namespace vaedyn
