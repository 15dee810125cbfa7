#include "veil/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "linalg3.hpp"
#include "multigrid.hpp"
#include "stencil_kernels.hpp"
#include "veil/parallel.hpp"

namespace veil {

using detail::Sym3;

void MattingConfig::validate() const {
    if (window_side < 3 || window_side % 2 == 0) {
        throw InvalidArgument("matting window side must be odd and >= 3");
    }
    if (!(epsilon > 0.0)) throw InvalidArgument("matting epsilon must be > 0");
    if (!(fidelity > 0.0)) throw InvalidArgument("matting fidelity must be > 0");
    if (!(solver_tol > 0.0 && solver_tol < 1.0)) {
        throw InvalidArgument("matting solver tolerance must lie in (0,1)");
    }
    if (max_iters < 1) throw InvalidArgument("matting max_iters must be >= 1");
    if (downsample && *downsample < 1) throw InvalidArgument("matting downsample must be >= 1");
}

// ---------------------------------------------------------------------------
// StencilMatrix

StencilMatrix::StencilMatrix(int width, int height, int reach)
    : width_(width), height_(height), reach_(reach) {
    if (width < 1 || height < 1) throw InvalidArgument("stencil matrix dimensions must be >= 1");
    if (reach < 0) throw InvalidArgument("stencil reach must be >= 0");
    coeffs_.assign(static_cast<std::size_t>(stencil_side()) * stencil_side() * dimension(), 0.0);
}

double StencilMatrix::coefficient(std::size_t row, std::size_t col) const {
    if (row >= dimension() || col >= dimension()) return 0.0;
    const int dx = static_cast<int>(col % width_) - static_cast<int>(row % width_);
    const int dy = static_cast<int>(col / width_) - static_cast<int>(row / width_);
    if (std::abs(dx) > reach_ || std::abs(dy) > reach_) return 0.0;
    return at(row, dx, dy);
}

std::vector<StencilMatrix::Entry> StencilMatrix::entries() const {
    std::vector<Entry> out;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
            for (int dy = -reach_; dy <= reach_; ++dy) {
                for (int dx = -reach_; dx <= reach_; ++dx) {
                    const double v = at(i, dx, dy);
                    if (v == 0.0) continue;
                    out.push_back({i, static_cast<std::size_t>(y + dy) * width_ + (x + dx), v});
                }
            }
        }
    }
    return out;
}

std::vector<double> StencilMatrix::diagonal() const {
    std::vector<double> d(dimension());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, 0, 0);
    return d;
}

void StencilMatrix::set_near_null_space(std::vector<double> basis, int count) {
    if (count < 0 || basis.size() != dimension() * static_cast<std::size_t>(count)) {
        throw DimensionMismatch("near-null basis size does not match the matrix");
    }
    near_null_ = std::move(basis);
    near_null_count_ = count;
}

double StencilMatrix::row_product(std::span<const double> x, int px, int py, double shift) const {
    return detail::row_product(*this, x, px, py, shift);
}

void StencilMatrix::multiply(std::span<const double> x, std::span<double> y, double shift) const {
    if (x.size() != dimension() || y.size() != dimension()) {
        throw DimensionMismatch("stencil multiply: vector size");
    }
    parallel_for(static_cast<std::size_t>(height_), [&](std::size_t r0, std::size_t r1) {
        for (std::size_t row = r0; row < r1; ++row) {
            const int py = static_cast<int>(row);
            for (int px = 0; px < width_; ++px) {
                y[row * width_ + px] = detail::row_product(*this, x, px, py, shift);
            }
        }
    });
}

StencilMatrix build_matting_laplacian(const Image& guide, const MattingConfig& cfg) {
    cfg.validate();
    if (guide.empty()) throw InvalidArgument("build_matting_laplacian: empty guide");
    const int r = cfg.window_side / 2;
    const int w = guide.width();
    const int h = guide.height();
    StencilMatrix lap(w, h, 2 * r);

    // Locally affine functions of the guide colour are (nearly) free under L.
    std::vector<double> basis(lap.dimension() * 4);
    for (std::size_t i = 0; i < lap.dimension(); ++i) {
        basis[4 * i] = 1.0;
        for (int c = 0; c < 3; ++c) basis[4 * i + 1 + c] = guide.data()[3 * i + c];
    }
    lap.set_near_null_space(std::move(basis), 4);

    // Window statistics, one slot per window centre (cx, cy) with the whole
    // window inside the guide.
    const int wins_x = w - 2 * r;
    const int wins_y = h - 2 * r;
    if (wins_x <= 0 || wins_y <= 0) return lap;

    const double count = static_cast<double>(cfg.window_side) * cfg.window_side;
    std::vector<std::array<double, 3>> mean(static_cast<std::size_t>(wins_x) * wins_y);
    std::vector<Sym3> inv_cov(mean.size());
    parallel_for(static_cast<std::size_t>(wins_y), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t wy = y0; wy < y1; ++wy) {
            for (int wx = 0; wx < wins_x; ++wx) {
                std::array<double, 3> s{};
                Sym3 ss{};
                for (int dy = 0; dy < cfg.window_side; ++dy) {
                    for (int dx = 0; dx < cfg.window_side; ++dx) {
                        const int px = wx + dx;
                        const int py = static_cast<int>(wy) + dy;
                        const double a = guide.at(px, py, 0);
                        const double b = guide.at(px, py, 1);
                        const double c = guide.at(px, py, 2);
                        s[0] += a; s[1] += b; s[2] += c;
                        ss[0] += a * a; ss[1] += a * b; ss[2] += a * c;
                        ss[3] += b * b; ss[4] += b * c; ss[5] += c * c;
                    }
                }
                const std::array<double, 3> mu{s[0] / count, s[1] / count, s[2] / count};
                const double reg = cfg.epsilon / count;
                Sym3 cov{ss[0] / count - mu[0] * mu[0] + reg, ss[1] / count - mu[0] * mu[1],
                         ss[2] / count - mu[0] * mu[2],       ss[3] / count - mu[1] * mu[1] + reg,
                         ss[4] / count - mu[1] * mu[2],       ss[5] / count - mu[2] * mu[2] + reg};
                const std::size_t k = wy * wins_x + wx;
                mean[k] = mu;
                inv_cov[k] = detail::invert(cov);
            }
        }
    });

    // Row-wise accumulation: for pixel i visit each window containing it in
    // raster order of the window centre. Row j sees the shared windows in the
    // same order with bit-identical terms, so L is exactly symmetric.
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t yy = y0; yy < y1; ++yy) {
            const int y = static_cast<int>(yy);
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const int cy_lo = std::max(r, y - r);
                const int cy_hi = std::min(h - 1 - r, y + r);
                const int cx_lo = std::max(r, x - r);
                const int cx_hi = std::min(w - 1 - r, x + r);
                for (int cy = cy_lo; cy <= cy_hi; ++cy) {
                    for (int cx = cx_lo; cx <= cx_hi; ++cx) {
                        const std::size_t k = static_cast<std::size_t>(cy - r) * wins_x + (cx - r);
                        const auto& mu = mean[k];
                        const Sym3& m = inv_cov[k];
                        const double ui[3] = {guide.at(x, y, 0) - mu[0], guide.at(x, y, 1) - mu[1],
                                              guide.at(x, y, 2) - mu[2]};
                        for (int jy = cy - r; jy <= cy + r; ++jy) {
                            for (int jx = cx - r; jx <= cx + r; ++jx) {
                                const double uj[3] = {guide.at(jx, jy, 0) - mu[0],
                                                      guide.at(jx, jy, 1) - mu[1],
                                                      guide.at(jx, jy, 2) - mu[2]};
                                const double affinity = (1.0 + detail::bilinear(m, ui, uj)) / count;
                                const double delta = (jx == x && jy == y) ? 1.0 : 0.0;
                                lap.at(i, jx - x, jy - y) += delta - affinity;
                            }
                        }
                    }
                }
            }
        }
    });
    return lap;
}

// ---------------------------------------------------------------------------
// Conjugate gradients

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return deterministic_block_sum(a.size(), [&](std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
        return s;
    });
}

// CG with an optional prebuilt multigrid preconditioner; without one the
// diagonal is used.
std::vector<double> pcg(const StencilMatrix& laplacian, double shift, std::span<const double> rhs,
                        double tol, int max_iters, const detail::Multigrid* multigrid,
                        SolveReport& report, std::span<const double> initial_guess) {
    const std::size_t n = laplacian.dimension();
    if (rhs.size() != n) throw DimensionMismatch("conjugate_gradient: rhs size");
    report = SolveReport{};
    report.solve_width = laplacian.width();
    report.solve_height = laplacian.height();

    std::vector<double> x(n, 0.0);
    const double b_norm = std::sqrt(dot(rhs, rhs));
    if (b_norm == 0.0) return x;

    std::vector<double> inv_diag;
    if (!multigrid) {
        inv_diag = laplacian.diagonal();
        for (double& d : inv_diag) d = d + shift > 0.0 ? 1.0 / (d + shift) : 1.0;
    }
    auto precondition = [&](std::span<const double> in, std::span<double> out) {
        if (multigrid) {
            multigrid->apply(in, out);
        } else {
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = inv_diag[i] * in[i];
        }
    };

    std::vector<double> r(rhs.begin(), rhs.end());
    std::vector<double> z(n);
    std::vector<double> p(n);
    std::vector<double> ap(n);
    double best_res = 1.0;
    if (!initial_guess.empty()) {
        if (initial_guess.size() != n) throw DimensionMismatch("conjugate_gradient: guess size");
        x.assign(initial_guess.begin(), initial_guess.end());
        laplacian.multiply(x, ap, shift);
        for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
        best_res = std::sqrt(dot(r, r)) / b_norm;
        if (best_res > 1.0) {
            // Worse than the zero vector; start from zero instead.
            std::fill(x.begin(), x.end(), 0.0);
            r.assign(rhs.begin(), rhs.end());
            best_res = 1.0;
        }
    }
    precondition(r, z);
    p = z;
    double rz = dot(r, z);

    std::vector<double> best = x;
    int it = 0;
    while (it < max_iters && best_res > tol) {
        laplacian.multiply(p, ap, shift);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) break;
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        ++it;
        double res = std::sqrt(dot(r, r)) / b_norm;
        if (res <= tol) {
            // Confirm against the true residual; recurrence drift can lie.
            laplacian.multiply(x, ap, shift);
            for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
            res = std::sqrt(dot(r, r)) / b_norm;
        }
        if (res < best_res) {
            best_res = res;
            best = x;
        }
        if (res <= tol) break;
        precondition(r, z);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    report.iterations = it;
    report.relative_residual = best_res;
    report.converged = best_res <= tol;
    return best;
}

Refinement solve_with(const StencilMatrix& laplacian, const ScalarMap& rough, const MattingConfig& cfg,
                      const detail::Multigrid* multigrid) {
    cfg.validate();
    if (!rough.same_size(laplacian.width(), laplacian.height())) {
        throw DimensionMismatch("solve_refinement: rough map and laplacian differ in size");
    }
    std::vector<double> rhs(rough.data().begin(), rough.data().end());
    for (double& v : rhs) v *= cfg.fidelity;
    Refinement out;
    std::optional<detail::Multigrid> local;
    if (!multigrid && cfg.preconditioner == Preconditioner::multigrid) {
        multigrid = &local.emplace(laplacian, cfg.fidelity);
    }
    std::vector<double> t =
        pcg(laplacian, cfg.fidelity, rhs, cfg.solver_tol, cfg.max_iters, multigrid, out.report, {});
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    out.report.raw_min = *lo;
    out.report.raw_max = *hi;
    for (double& v : t) v = std::clamp(v, 0.0, 1.0);
    out.map = ScalarMap(rough.width(), rough.height(), std::move(t));
    return out;
}

}  // namespace

std::vector<double> conjugate_gradient(const StencilMatrix& laplacian, double shift,
                                       std::span<const double> rhs, double tol, int max_iters,
                                       Preconditioner preconditioner, SolveReport& report,
                                       std::span<const double> initial_guess) {
    std::optional<detail::Multigrid> multigrid;
    if (preconditioner == Preconditioner::multigrid) multigrid.emplace(laplacian, shift);
    return pcg(laplacian, shift, rhs, tol, max_iters, multigrid ? &*multigrid : nullptr, report,
               initial_guess);
}

Refinement solve_refinement(const StencilMatrix& laplacian, const ScalarMap& rough,
                            const MattingConfig& cfg) {
    return solve_with(laplacian, rough, cfg, nullptr);
}

// ---------------------------------------------------------------------------
// MattingRefiner

namespace {

Image solve_guide(const Image& guide, const MattingConfig& cfg) {
    if (cfg.downsample) return resize_max_side(guide, *cfg.downsample);
    return guide;
}

}  // namespace

MattingRefiner::MattingRefiner(const Image& guide, MattingConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      width_(guide.width()),
      height_(guide.height()),
      laplacian_(build_matting_laplacian(solve_guide(guide, cfg_), cfg_)) {
    if (cfg_.preconditioner == Preconditioner::multigrid) {
        multigrid_ = std::make_shared<const detail::Multigrid>(laplacian_, cfg_.fidelity);
    }
}

Refinement MattingRefiner::refine(const ScalarMap& rough) const {
    if (!rough.same_size(width_, height_)) {
        throw DimensionMismatch("MattingRefiner: rough map and guide differ in size");
    }
    if (laplacian_.width() == width_ && laplacian_.height() == height_) {
        return solve_with(laplacian_, rough, cfg_, multigrid_.get());
    }
    const ScalarMap small = resize_bilinear(rough, laplacian_.width(), laplacian_.height());
    Refinement solved = solve_with(laplacian_, small, cfg_, multigrid_.get());
    solved.map = clamp_unit(resize_bilinear(solved.map, width_, height_));
    return solved;
}

// ---------------------------------------------------------------------------
// Guided filter

ScalarMap box_mean(const ScalarMap& map, int radius) {
    if (radius < 0) throw InvalidArgument("box_mean: radius must be >= 0");
    const int w = map.width();
    const int h = map.height();
    ScalarMap horiz(w, h);
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        std::vector<double> prefix(static_cast<std::size_t>(w) + 1);
        for (std::size_t yy = y0; yy < y1; ++yy) {
            const int y = static_cast<int>(yy);
            prefix[0] = 0.0;
            for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + map.at(x, y);
            for (int x = 0; x < w; ++x) {
                const int lo = std::max(0, x - radius);
                const int hi = std::min(w - 1, x + radius);
                horiz.at(x, y) = prefix[hi + 1] - prefix[lo];
            }
        }
    });
    ScalarMap out(w, h);
    parallel_for(static_cast<std::size_t>(w), [&](std::size_t x0, std::size_t x1) {
        std::vector<double> prefix(static_cast<std::size_t>(h) + 1);
        for (std::size_t xx = x0; xx < x1; ++xx) {
            const int x = static_cast<int>(xx);
            const int cols = std::min(w - 1, x + radius) - std::max(0, x - radius) + 1;
            prefix[0] = 0.0;
            for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + horiz.at(x, y);
            for (int y = 0; y < h; ++y) {
                const int lo = std::max(0, y - radius);
                const int hi = std::min(h - 1, y + radius);
                out.at(x, y) = (prefix[hi + 1] - prefix[lo]) / (static_cast<double>(cols) * (hi - lo + 1));
            }
        }
    });
    return out;
}

ScalarMap guided_filter_refine(const Image& guide, const ScalarMap& rough, int radius, double eps) {
    require_same_size(guide, rough, "guided_filter_refine");
    if (radius < 1) throw InvalidArgument("guided filter radius must be >= 1");
    if (!(eps > 0.0)) throw InvalidArgument("guided filter eps must be > 0");
    const int w = guide.width();
    const int h = guide.height();
    const std::size_t n = guide.pixel_count();
    auto g = guide.data();
    auto p = rough.data();

    auto mean_of = [&](auto&& value) {
        ScalarMap m(w, h);
        auto d = m.data();
        for (std::size_t i = 0; i < n; ++i) d[i] = value(i);
        return box_mean(m, radius);
    };

    std::array<ScalarMap, 3> mu;
    std::array<ScalarMap, 3> mu_ip;
    for (int c = 0; c < 3; ++c) {
        mu[c] = mean_of([&](std::size_t i) { return g[3 * i + c]; });
        mu_ip[c] = mean_of([&](std::size_t i) { return g[3 * i + c] * p[i]; });
    }
    const ScalarMap mu_p = mean_of([&](std::size_t i) { return p[i]; });
    constexpr int kPairs[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    std::array<ScalarMap, 6> mu_ii;
    for (int k = 0; k < 6; ++k) {
        const int a = kPairs[k][0];
        const int b = kPairs[k][1];
        mu_ii[k] = mean_of([&](std::size_t i) { return g[3 * i + a] * g[3 * i + b]; });
    }

    std::array<ScalarMap, 3> coef_a{ScalarMap(w, h), ScalarMap(w, h), ScalarMap(w, h)};
    ScalarMap coef_b(w, h);
    for (std::size_t i = 0; i < n; ++i) {
        const std::array<double, 3> m{mu[0].data()[i], mu[1].data()[i], mu[2].data()[i]};
        const double mp = mu_p.data()[i];
        Sym3 cov{};
        for (int k = 0; k < 6; ++k) {
            cov[k] = mu_ii[k].data()[i] - m[kPairs[k][0]] * m[kPairs[k][1]];
        }
        cov[0] += eps;
        cov[3] += eps;
        cov[5] += eps;
        const std::array<double, 3> cov_ip{mu_ip[0].data()[i] - m[0] * mp,
                                           mu_ip[1].data()[i] - m[1] * mp,
                                           mu_ip[2].data()[i] - m[2] * mp};
        const auto a = detail::apply(detail::invert(cov), cov_ip);
        for (int c = 0; c < 3; ++c) coef_a[c].data()[i] = a[c];
        coef_b.data()[i] = mp - (a[0] * m[0] + a[1] * m[1] + a[2] * m[2]);
    }

    std::array<ScalarMap, 3> mean_a;
    for (int c = 0; c < 3; ++c) mean_a[c] = box_mean(coef_a[c], radius);
    const ScalarMap mean_b = box_mean(coef_b, radius);
    ScalarMap q(w, h);
    for (std::size_t i = 0; i < n; ++i) {
        double v = mean_b.data()[i];
        for (int c = 0; c < 3; ++c) v += mean_a[c].data()[i] * g[3 * i + c];
        q.data()[i] = std::clamp(v, 0.0, 1.0);
    }
    return q;
}

}  // namespace veil
