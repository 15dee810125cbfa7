#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "veil/image.hpp"

namespace veil {

namespace detail {
class Multigrid;
}

enum class Preconditioner { jacobi, multigrid };

// Soft-matting refinement parameters.
struct MattingConfig {
    int window_side = 3;         // odd, >= 3
    double epsilon = 1e-6;       // covariance regularizer
    double fidelity = 1e-4;      // weight of the data term
    double solver_tol = 1e-5;    // relative residual target, in (0,1)
    int max_iters = 2000;
    std::optional<int> downsample = 800;  // max side of the solve; nullopt solves at full size
    Preconditioner preconditioner = Preconditioner::multigrid;

    void validate() const;
};

// Symmetric matrix over a W x H pixel grid whose row i couples pixel i only
// to pixels within `reach` in x and y. Each row is stored contiguously as a
// dense stencil of (2 * reach + 1)^2 coefficients keyed by the (dx, dy)
// offset from i to j; couplings that would leave the grid are zero.
class StencilMatrix {
public:
    struct Entry {
        std::size_t row;
        std::size_t col;
        double value;
    };

    StencilMatrix(int width, int height, int reach);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int reach() const noexcept { return reach_; }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    int stencil_size() const noexcept { return stencil_side() * stencil_side(); }

    // Coefficient coupling `pixel` to the pixel at offset (dx, dy).
    double& at(std::size_t pixel, int dx, int dy) noexcept {
        return coeffs_[pixel * stencil_size() + slot(dx, dy)];
    }
    double at(std::size_t pixel, int dx, int dy) const noexcept {
        return coeffs_[pixel * stencil_size() + slot(dx, dy)];
    }

    // The (2 * reach + 1)^2 coefficients of one row, dy-major.
    const double* row_coefficients(std::size_t pixel) const noexcept {
        return coeffs_.data() + pixel * stencil_size();
    }

    double coefficient(std::size_t row, std::size_t col) const;
    // Structurally non-zero entries in row-major order.
    std::vector<Entry> entries() const;
    std::vector<double> diagonal() const;

    // Row (px, py) of (A + shift * Id) applied to x.
    double row_product(std::span<const double> x, int px, int py, double shift = 0.0) const;

    // y = (A + shift * Id) x
    void multiply(std::span<const double> x, std::span<double> y, double shift = 0.0) const;

    // Vectors the operator nearly annihilates, interleaved as
    // basis[pixel * count + c]. They only steer the multigrid preconditioner;
    // when none are set the constant vector is assumed.
    void set_near_null_space(std::vector<double> basis, int count);
    int near_null_count() const noexcept { return near_null_count_; }
    std::span<const double> near_null_space() const noexcept { return near_null_; }

private:
    int stencil_side() const noexcept { return 2 * reach_ + 1; }
    int slot(int dx, int dy) const noexcept { return (dy + reach_) * stencil_side() + (dx + reach_); }

    int width_;
    int height_;
    int reach_;
    std::vector<double> coeffs_;
    std::vector<double> near_null_;
    int near_null_count_ = 0;
};

// Matting Laplacian of a colour guide:
//   L(i,j) = sum over windows w containing i and j of
//     delta_ij - (1 + (I_i - mu_w)^T (Sigma_w + eps/|w| Id)^-1 (I_j - mu_w)) / |w|
// using every window that lies fully inside the guide. The result is exactly
// symmetric, positive semidefinite, and every row sums to zero. Its reach is
// twice the window radius.
StencilMatrix build_matting_laplacian(const Image& guide, const MattingConfig& cfg);

struct SolveReport {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = true;
    // Range of the solution before it was clamped to [0,1].
    double raw_min = 0.0;
    double raw_max = 0.0;
    int solve_width = 0;
    int solve_height = 0;
};

struct Refinement {
    ScalarMap map;
    SolveReport report;
};

// Solves (L + fidelity * Id) t = fidelity * rough with preconditioned
// conjugate gradients at L's resolution and clamps the result to [0,1]. If
// max_iters is exhausted the lowest-residual iterate is returned and
// report.converged is false.
Refinement solve_refinement(const StencilMatrix& laplacian, const ScalarMap& rough,
                            const MattingConfig& cfg);

// Preconditioned CG on (A + shift * Id) x = rhs, stopping once the true
// relative residual is <= tol. Returns the lowest-residual iterate; an empty
// initial guess starts from zero.
std::vector<double> conjugate_gradient(const StencilMatrix& matrix, double shift,
                                       std::span<const double> rhs, double tol, int max_iters,
                                       Preconditioner preconditioner, SolveReport& report,
                                       std::span<const double> initial_guess = {});

// Builds the Laplacian (and its preconditioner) once for a guide, downsampled
// per cfg.downsample, and refines any number of rough maps against it.
class MattingRefiner {
public:
    MattingRefiner(const Image& guide, MattingConfig cfg);

    Refinement refine(const ScalarMap& rough) const;
    const StencilMatrix& laplacian() const noexcept { return laplacian_; }
    const MattingConfig& config() const noexcept { return cfg_; }

private:
    MattingConfig cfg_;
    int width_;
    int height_;
    StencilMatrix laplacian_;
    std::shared_ptr<const detail::Multigrid> multigrid_;
};

// Colour-guided filter: per-window linear model q = a^T I + b fitted to the
// rough map, averaged over overlapping windows, clamped to [0,1].
ScalarMap guided_filter_refine(const Image& guide, const ScalarMap& rough, int radius, double eps);

// Mean over the (2r+1)^2 window clipped to the raster.
ScalarMap box_mean(const ScalarMap& map, int radius);

}  // namespace veil
