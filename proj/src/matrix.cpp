#include "c2bn/matrix.hpp"

#include "c2bn/error.hpp"

namespace c2bn {

std::string shape_of(const Matrix& m) {
    return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_of(a) + " vs " +
                         shape_of(b));
    }
}

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

Matrix one_hot(LabelView labels, std::size_t num_classes) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                              static_cast<Eigen::Index>(num_classes));
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= num_classes) {
            throw LabelError("label " + std::to_string(labels[r]) + " at row " +
                             std::to_string(r) + " is out of range for " +
                             std::to_string(num_classes) + " classes");
        }
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(labels[r])) = 1.0;
    }
    return out;
}

Matrix concat_cols(const Matrix& left, const Matrix& right) {
    if (left.rows() != right.rows()) {
        throw ShapeError("concat_cols: row mismatch " + shape_of(left) + " vs " + shape_of(right));
    }
    Matrix out(left.rows(), left.cols() + right.cols());
    out.leftCols(left.cols()) = left;
    out.rightCols(right.cols()) = right;
    return out;
}

}  // namespace c2bn
