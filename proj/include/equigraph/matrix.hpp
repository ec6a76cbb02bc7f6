#pragma once

#include <cstddef>
#include <vector>

namespace eqg {

// Minimal dense row-major matrix. Used for reference transition matrices on
// small graphs; the optimizers work on sparse row structures and never
// materialize powers of the transition matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

} // namespace eqg
