#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace c2bn {

// Row = sample, column = feature/unit.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Labels = std::vector<std::size_t>;
using LabelView = std::span<const std::size_t>;

std::string shape_of(const Matrix& m);

// Throws ShapeError naming both shapes when they differ.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

bool all_finite(const Matrix& m);

// One-hot block of width num_classes; throws LabelError on an out-of-range label.
Matrix one_hot(LabelView labels, std::size_t num_classes);

Matrix concat_cols(const Matrix& left, const Matrix& right);

}  // namespace c2bn
