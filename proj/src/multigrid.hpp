#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "veil/refine.hpp"

namespace veil::detail {

// Symmetric operator on a W x H grid of nodes carrying `dofs` unknowns each.
// Unknown (node, a) lives at index node * dofs + a. Each row stores, for every
// neighbour offset (dx, dy) within reach (dy-major), the `dofs` couplings to
// that neighbour's unknowns. Coefficients are held in single precision: the
// hierarchy only preconditions, and the smoothing passes are bandwidth bound.
class BlockStencil {
public:
    using Coef = float;

    BlockStencil(int width, int height, int dofs, int reach);
    // Copy of (a + shift Id) with one unknown per node.
    static BlockStencil from(const StencilMatrix& a, double shift);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int dofs() const noexcept { return dofs_; }
    int reach() const noexcept { return reach_; }
    std::size_t nodes() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    std::size_t dimension() const noexcept { return nodes() * dofs_; }
    std::size_t row_length() const noexcept {
        return static_cast<std::size_t>(side()) * side() * dofs_;
    }

    // Coupling of unknown `row` to unknown b of the node at offset (dx, dy).
    double at(std::size_t row, int dx, int dy, int b) const noexcept {
        return coeffs_[row * row_length() + offset(dx, dy, b)];
    }
    void set(std::size_t row, int dx, int dy, int b, double v) noexcept {
        coeffs_[row * row_length() + offset(dx, dy, b)] = static_cast<Coef>(v);
    }

    // Row `row` (belonging to node (nx, ny)) applied to x.
    double row_product(const double* x, int nx, int ny, std::size_t row) const noexcept;
    void multiply(std::span<const double> x, std::span<double> y) const;

private:
    int side() const noexcept { return 2 * reach_ + 1; }
    std::size_t offset(int dx, int dy, int b) const noexcept {
        return (static_cast<std::size_t>(dy + reach_) * side() + (dx + reach_)) * dofs_ + b;
    }

    int width_;
    int height_;
    int dofs_;
    int reach_;
    std::vector<Coef> coeffs_;
};

// Smoothed-aggregation algebraic multigrid, used as a CG preconditioner.
// Nodes are grouped into square aggregates; each aggregate spans the local
// restriction of the operator's near-null vectors, and the tentative
// prolongator is smoothed by one damped Jacobi step. Pre-smoothing is a
// multicolour Gauss-Seidel sweep and post-smoothing its exact reverse, so one
// V-cycle is a symmetric positive definite operator. The coarsest level is
// solved by dense Cholesky.
class Multigrid {
public:
    Multigrid(const StencilMatrix& fine, double shift);

    // z = one V-cycle applied to r, starting from a zero guess.
    void apply(std::span<const double> r, std::span<double> z) const;

    std::size_t levels() const noexcept { return levels_.size(); }
    std::size_t level_dimension(std::size_t level) const { return levels_.at(level).op.dimension(); }

private:
    struct Level {
        BlockStencil op;
        std::vector<double> inv_diag;
        // Prolongation from the level below: for every unknown of this level,
        // the weights of the k x k nearby aggregates times their dofs.
        std::vector<double> prolong;
        int span = 0;  // aggregates per axis stored per prolongation row
        mutable std::vector<double> rhs;
        mutable std::vector<double> sol;
        mutable std::vector<double> res;
    };

    void cycle(std::size_t level, std::span<const double> b, std::span<double> x) const;
    void coarse_solve(std::span<const double> b, std::span<double> x) const;
    void restrict_residual(std::size_t level) const;
    void prolong_add(std::size_t level, std::span<double> x) const;

    std::vector<Level> levels_;
    std::vector<double> chol_;  // lower-triangular factor of the coarsest operator, row-major
    std::size_t chol_n_ = 0;
    bool exact_coarse_ = true;
};

}  // namespace veil::detail
