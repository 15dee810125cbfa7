#include "multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "veil/parallel.hpp"

namespace veil::detail {

namespace {

constexpr int kAggregate = 4;             // aggregate side, in nodes
constexpr std::size_t kCoarsest = 1024;   // stop coarsening at this many unknowns
constexpr std::size_t kDenseLimit = 4096; // largest coarsest level factored densely
constexpr double kDeadColumn = 1e-10;     // relative norm below which a candidate is dropped
constexpr int kSpectralIters = 10;
constexpr int kMaxCandidates = 8;

int floordiv(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// First aggregate (per axis) that can touch node x through a row of the given reach.
int first_aggregate(int x, int reach) { return std::max(0, floordiv(x - reach, kAggregate)); }

int aggregates_per_row(int reach) { return (kAggregate - 1 + 2 * reach) / kAggregate + 1; }

}  // namespace

// ---------------------------------------------------------------------------
// BlockStencil

BlockStencil::BlockStencil(int width, int height, int dofs, int reach)
    : width_(width), height_(height), dofs_(dofs), reach_(reach) {
    coeffs_.assign(dimension() * row_length(), Coef{0});
}

BlockStencil BlockStencil::from(const StencilMatrix& a, double shift) {
    BlockStencil out(a.width(), a.height(), 1, a.reach());
    const std::size_t len = out.row_length();
    parallel_for(a.dimension(), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const double* src = a.row_coefficients(i);
            Coef* dst = out.coeffs_.data() + i * len;
            for (std::size_t k = 0; k < len; ++k) dst[k] = static_cast<Coef>(src[k]);
            dst[out.offset(0, 0, 0)] = static_cast<Coef>(src[out.offset(0, 0, 0)] + shift);
        }
    });
    return out;
}

namespace {

// Interior row with one unknown per node and a compile-time stencil side.
template <int R>
double interior_product(const BlockStencil::Coef* c, const double* x, int width) {
    constexpr int side = 2 * R + 1;
    double s = 0.0;
    for (int dy = 0; dy < side; ++dy) {
        const double* xr = x + static_cast<std::ptrdiff_t>(dy) * width;
        const BlockStencil::Coef* cr = c + dy * side;
        for (int dx = 0; dx < side; ++dx) s += cr[dx] * xr[dx];
    }
    return s;
}

}  // namespace

double BlockStencil::row_product(const double* x, int nx, int ny, std::size_t row) const noexcept {
    const int r = reach_;
    const Coef* c = coeffs_.data() + row * row_length();
    if (dofs_ == 1 && r == 2 && nx >= r && nx < width_ - r && ny >= r && ny < height_ - r) {
        return interior_product<2>(c, x + (static_cast<std::ptrdiff_t>(row) - 2 * width_ - 2), width_);
    }
    const int x0 = std::max(0, nx - r);
    const int x1 = std::min(width_ - 1, nx + r);
    const int y0 = std::max(0, ny - r);
    const int y1 = std::min(height_ - 1, ny + r);
    const std::size_t len = static_cast<std::size_t>(x1 - x0 + 1) * dofs_;
    double s = 0.0;
    for (int qy = y0; qy <= y1; ++qy) {
        const Coef* cr = c + offset(x0 - nx, qy - ny, 0);
        const double* xr = x + (static_cast<std::size_t>(qy) * width_ + x0) * dofs_;
        for (std::size_t k = 0; k < len; ++k) s += cr[k] * xr[k];
    }
    return s;
}

void BlockStencil::multiply(std::span<const double> x, std::span<double> y) const {
    parallel_for(static_cast<std::size_t>(height_), [&](std::size_t r0, std::size_t r1) {
        for (std::size_t ny = r0; ny < r1; ++ny) {
            for (int nx = 0; nx < width_; ++nx) {
                const std::size_t node = ny * width_ + nx;
                for (int a = 0; a < dofs_; ++a) {
                    const std::size_t row = node * dofs_ + a;
                    y[row] = row_product(x.data(), nx, static_cast<int>(ny), row);
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Setup

namespace {

double diagonal(const BlockStencil& a, std::size_t row) {
    return a.at(row, 0, 0, static_cast<int>(row % a.dofs()));
}

// Largest eigenvalue of D^-1 A, estimated by power iteration on the
// similar matrix D^-1/2 A D^-1/2 from a fixed pseudo-random start.
double jacobi_spectral_radius(const BlockStencil& a, const std::vector<double>& inv_diag) {
    const std::size_t n = a.dimension();
    std::vector<double> scale(n);
    for (std::size_t i = 0; i < n; ++i) scale[i] = std::sqrt(inv_diag[i]);
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    std::vector<double> v(n);
    for (double& e : v) e = dist(rng);
    std::vector<double> u(n);
    std::vector<double> w(n);
    double lambda = 1.0;
    for (int it = 0; it < kSpectralIters; ++it) {
        double norm = 0.0;
        for (double e : v) norm += e * e;
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] /= norm;
            u[i] = v[i] * scale[i];
        }
        a.multiply(u, w);
        lambda = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= scale[i];
            lambda += w[i] * v[i];
        }
        v.swap(w);
    }
    return lambda;
}

struct Tentative {
    std::vector<double> q;       // per fine unknown, k weights onto its aggregate's dofs
    std::vector<double> coarse;  // candidates on the coarse level, per coarse unknown k values
};

// Orthonormalizes the candidates over each aggregate (modified Gram-Schmidt,
// applied twice). Candidates that are dependent on an aggregate get a zero
// column, which leaves the matching coarse unknown decoupled.
Tentative tentative_prolongator(const BlockStencil& a, const std::vector<double>& cand, int k) {
    const int w = a.width();
    const int h = a.height();
    const int d = a.dofs();
    const int cw = (w + kAggregate - 1) / kAggregate;
    const int ch = (h + kAggregate - 1) / kAggregate;
    Tentative out;
    out.q.assign(a.dimension() * k, 0.0);
    out.coarse.assign(static_cast<std::size_t>(cw) * ch * k * k, 0.0);

    parallel_for(static_cast<std::size_t>(ch), [&](std::size_t a0, std::size_t a1) {
        std::vector<std::size_t> rows;
        std::vector<double> v;
        for (std::size_t iy = a0; iy < a1; ++iy) {
            for (int ix = 0; ix < cw; ++ix) {
                rows.clear();
                for (int y = static_cast<int>(iy) * kAggregate; y < std::min(h, static_cast<int>(iy + 1) * kAggregate); ++y) {
                    for (int x = ix * kAggregate; x < std::min(w, (ix + 1) * kAggregate); ++x) {
                        for (int b = 0; b < d; ++b) {
                            rows.push_back((static_cast<std::size_t>(y) * w + x) * d + b);
                        }
                    }
                }
                const std::size_t agg = iy * cw + ix;
                double* rfac = out.coarse.data() + agg * k * k;
                v.resize(rows.size());
                for (int c = 0; c < k; ++c) {
                    double original = 0.0;
                    for (std::size_t m = 0; m < rows.size(); ++m) {
                        v[m] = cand[rows[m] * k + c];
                        original += v[m] * v[m];
                    }
                    for (int pass = 0; pass < 2; ++pass) {
                        for (int p = 0; p < c; ++p) {
                            double proj = 0.0;
                            for (std::size_t m = 0; m < rows.size(); ++m) proj += out.q[rows[m] * k + p] * v[m];
                            for (std::size_t m = 0; m < rows.size(); ++m) v[m] -= proj * out.q[rows[m] * k + p];
                            rfac[p * k + c] += proj;
                        }
                    }
                    double norm = 0.0;
                    for (double e : v) norm += e * e;
                    norm = std::sqrt(norm);
                    if (norm <= kDeadColumn * std::sqrt(original) || norm == 0.0) continue;
                    rfac[c * k + c] = norm;
                    for (std::size_t m = 0; m < rows.size(); ++m) out.q[rows[m] * k + c] = v[m] / norm;
                }
            }
        }
    });
    return out;
}

// Smoothed prolongator P = (I - omega D^-1 A) P0, stored per fine unknown as
// span x span aggregates (starting at first_aggregate) times k dofs.
std::vector<double> smooth_prolongator(const BlockStencil& a, const std::vector<double>& inv_diag,
                                       const std::vector<double>& q, int k, double omega) {
    const int w = a.width();
    const int h = a.height();
    const int d = a.dofs();
    const int r = a.reach();
    const int span = aggregates_per_row(r);
    const std::size_t width = static_cast<std::size_t>(span) * span * k;
    std::vector<double> p(a.dimension() * width, 0.0);

    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t yy = y0; yy < y1; ++yy) {
            const int ny = static_cast<int>(yy);
            const int by = first_aggregate(ny, r);
            for (int nx = 0; nx < w; ++nx) {
                const int bx = first_aggregate(nx, r);
                const std::size_t node = static_cast<std::size_t>(ny) * w + nx;
                for (int f = 0; f < d; ++f) {
                    const std::size_t row = node * d + f;
                    double* out = p.data() + row * width;
                    for (int dy = -r; dy <= r; ++dy) {
                        const int qy = ny + dy;
                        if (qy < 0 || qy >= h) continue;
                        const int sy = qy / kAggregate - by;
                        for (int dx = -r; dx <= r; ++dx) {
                            const int qx = nx + dx;
                            if (qx < 0 || qx >= w) continue;
                            const int sx = qx / kAggregate - bx;
                            double* slot = out + (static_cast<std::size_t>(sy) * span + sx) * k;
                            const std::size_t qnode = static_cast<std::size_t>(qy) * w + qx;
                            for (int b = 0; b < d; ++b) {
                                const double coef = a.at(row, dx, dy, b);
                                if (coef == 0.0) continue;
                                const double* q0 = q.data() + (qnode * d + b) * k;
                                for (int c = 0; c < k; ++c) slot[c] -= omega * inv_diag[row] * coef * q0[c];
                            }
                        }
                    }
                    const int sy = ny / kAggregate - by;
                    const int sx = nx / kAggregate - bx;
                    double* own = out + (static_cast<std::size_t>(sy) * span + sx) * k;
                    for (int c = 0; c < k; ++c) own[c] += q[row * k + c];
                }
            }
        }
    });
    return p;
}

// Galerkin product P^T A P, gathered one coarse node at a time so the result
// does not depend on the thread count, then averaged with its transpose.
BlockStencil galerkin(const BlockStencil& a, const std::vector<double>& p, int k) {
    const int w = a.width();
    const int h = a.height();
    const int d = a.dofs();
    const int r = a.reach();
    const int span = aggregates_per_row(r);
    const int span2 = aggregates_per_row(2 * r);
    const int cr = (kAggregate - 1 + 3 * r) / kAggregate;
    const int cw = (w + kAggregate - 1) / kAggregate;
    const int ch = (h + kAggregate - 1) / kAggregate;
    const std::size_t pw = static_cast<std::size_t>(span) * span * k;
    BlockStencil coarse(cw, ch, k, cr);
    const int cside = 2 * cr + 1;
    const std::size_t clen = coarse.row_length();
    auto idx = [&](std::size_t row, int dx, int dy, int b) {
        return row * clen + (static_cast<std::size_t>(dy + cr) * cside + (dx + cr)) * k + b;
    };
    std::vector<double> sum(coarse.dimension() * clen, 0.0);

    const std::size_t apw = static_cast<std::size_t>(span2) * span2 * k;
    // Row `row` of A P over the span2 x span2 aggregates starting at
    // (first_aggregate(x, 2r), first_aggregate(y, 2r)).
    auto ap_row = [&](int x, int y, std::size_t row, double* ap) {
        const int bx2 = first_aggregate(x, 2 * r);
        const int by2 = first_aggregate(y, 2 * r);
        for (int dy = -r; dy <= r; ++dy) {
            const int qy = y + dy;
            if (qy < 0 || qy >= h) continue;
            const int qby = first_aggregate(qy, r);
            for (int dx = -r; dx <= r; ++dx) {
                const int qx = x + dx;
                if (qx < 0 || qx >= w) continue;
                const int qbx = first_aggregate(qx, r);
                const std::size_t qnode = static_cast<std::size_t>(qy) * w + qx;
                for (int b = 0; b < d; ++b) {
                    const double coef = a.at(row, dx, dy, b);
                    if (coef == 0.0) continue;
                    const double* pq = p.data() + (qnode * d + b) * pw;
                    for (int ty = 0; ty < span; ++ty) {
                        const int ly = qby + ty - by2;
                        if (qby + ty >= ch || ly < 0 || ly >= span2) continue;
                        for (int tx = 0; tx < span; ++tx) {
                            const int lx = qbx + tx - bx2;
                            if (qbx + tx >= cw || lx < 0 || lx >= span2) continue;
                            const double* src = pq + (static_cast<std::size_t>(ty) * span + tx) * k;
                            double* dst = ap + (static_cast<std::size_t>(ly) * span2 + lx) * k;
                            for (int c = 0; c < k; ++c) dst[c] += coef * src[c];
                        }
                    }
                }
            }
        }
    };

    // One band of coarse rows at a time: A P is formed once for the fine rows
    // the band's prolongation columns touch, then gathered per coarse node.
    parallel_for(static_cast<std::size_t>(ch), [&](std::size_t c0, std::size_t c1) {
        std::vector<double> strip;
        for (std::size_t iyy = c0; iyy < c1; ++iyy) {
            const int iy = static_cast<int>(iyy);
            const int ylo = std::max(0, iy * kAggregate - r);
            const int yhi = std::min(h - 1, iy * kAggregate + kAggregate - 1 + r);
            strip.assign(static_cast<std::size_t>(yhi - ylo + 1) * w * d * apw, 0.0);
            for (int y = ylo; y <= yhi; ++y) {
                for (int x = 0; x < w; ++x) {
                    for (int f = 0; f < d; ++f) {
                        const std::size_t row = (static_cast<std::size_t>(y) * w + x) * d + f;
                        const std::size_t local = (static_cast<std::size_t>(y - ylo) * w + x) * d + f;
                        ap_row(x, y, row, strip.data() + local * apw);
                    }
                }
            }
            for (int ix = 0; ix < cw; ++ix) {
                const std::size_t cnode = static_cast<std::size_t>(iy) * cw + ix;
                for (int y = ylo; y <= yhi; ++y) {
                    const int sy = iy - first_aggregate(y, r);
                    if (sy < 0 || sy >= span) continue;
                    const int by2 = first_aggregate(y, 2 * r);
                    for (int x = std::max(0, ix * kAggregate - r); x <= std::min(w - 1, ix * kAggregate + kAggregate - 1 + r); ++x) {
                        const int sx = ix - first_aggregate(x, r);
                        if (sx < 0 || sx >= span) continue;
                        const int bx2 = first_aggregate(x, 2 * r);
                        for (int f = 0; f < d; ++f) {
                            const std::size_t row = (static_cast<std::size_t>(y) * w + x) * d + f;
                            const double* pi = p.data() + row * pw + (static_cast<std::size_t>(sy) * span + sx) * k;
                            const double* ap =
                                strip.data() + ((static_cast<std::size_t>(y - ylo) * w + x) * d + f) * apw;
                            for (int ly = 0; ly < span2; ++ly) {
                                const int jy = by2 + ly;
                                if (jy >= ch || std::abs(jy - iy) > cr) continue;
                                for (int lx = 0; lx < span2; ++lx) {
                                    const int jx = bx2 + lx;
                                    if (jx >= cw || std::abs(jx - ix) > cr) continue;
                                    const double* src = ap + (static_cast<std::size_t>(ly) * span2 + lx) * k;
                                    for (int ca = 0; ca < k; ++ca) {
                                        if (pi[ca] == 0.0) continue;
                                        for (int c = 0; c < k; ++c) {
                                            sum[idx(cnode * k + ca, jx - ix, jy - iy, c)] += pi[ca] * src[c];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });

    for (int iy = 0; iy < ch; ++iy) {
        for (int ix = 0; ix < cw; ++ix) {
            const std::size_t inode = static_cast<std::size_t>(iy) * cw + ix;
            for (int dy = -cr; dy <= cr; ++dy) {
                for (int dx = -cr; dx <= cr; ++dx) {
                    const int jx = ix + dx;
                    const int jy = iy + dy;
                    if (jx < 0 || jx >= cw || jy < 0 || jy >= ch) continue;
                    const std::size_t jnode = static_cast<std::size_t>(jy) * cw + jx;
                    if (jnode < inode) continue;
                    for (int ca = 0; ca < k; ++ca) {
                        for (int c = 0; c < k; ++c) {
                            if (jnode == inode && c <= ca) continue;
                            const std::size_t lhs = inode * k + ca;
                            const std::size_t rhs = jnode * k + c;
                            const double v = 0.5 * (sum[idx(lhs, dx, dy, c)] + sum[idx(rhs, -dx, -dy, ca)]);
                            coarse.set(lhs, dx, dy, c, v);
                            coarse.set(rhs, -dx, -dy, ca, v);
                        }
                    }
                }
            }
        }
    }
    // Dropped candidates leave empty rows; give them a unit diagonal.
    for (std::size_t row = 0; row < coarse.dimension(); ++row) {
        const int self = static_cast<int>(row % k);
        const double diag = sum[idx(row, 0, 0, self)];
        coarse.set(row, 0, 0, self, diag == 0.0 ? 1.0 : diag);
    }
    return coarse;
}

std::vector<double> inverse_diagonal(const BlockStencil& a) {
    std::vector<double> inv(a.dimension());
    for (std::size_t i = 0; i < inv.size(); ++i) {
        const double d = diagonal(a, i);
        inv[i] = d > 0.0 ? 1.0 / d : 0.0;
    }
    return inv;
}

// One multicolour Gauss-Seidel sweep. Nodes sharing a colour are never
// coupled, so the result does not depend on the thread count. The backward
// sweep visits unknowns in exactly the reverse order of the forward one.
void gauss_seidel(const BlockStencil& a, const std::vector<double>& inv_diag, std::span<const double> b,
                  std::span<double> x, bool forward) {
    const int period = a.reach() + 1;
    const int colours = period * period;
    const int d = a.dofs();
    for (int k = 0; k < colours; ++k) {
        const int colour = forward ? k : colours - 1 - k;
        const int cx = colour % period;
        const int cy = colour / period;
        const int rows = (a.height() - cy + period - 1) / period;
        if (rows <= 0) continue;
        parallel_for(static_cast<std::size_t>(rows), [&](std::size_t r0, std::size_t r1) {
            for (std::size_t rr = r0; rr < r1; ++rr) {
                const int ny = cy + static_cast<int>(rr) * period;
                for (int nx = cx; nx < a.width(); nx += period) {
                    const std::size_t node = static_cast<std::size_t>(ny) * a.width() + nx;
                    for (int s = 0; s < d; ++s) {
                        const std::size_t row = node * d + (forward ? s : d - 1 - s);
                        x[row] += (b[row] - a.row_product(x.data(), nx, ny, row)) * inv_diag[row];
                    }
                }
            }
        });
    }
}

}  // namespace

Multigrid::Multigrid(const StencilMatrix& fine, double shift) {
    std::vector<double> cand;
    int k = std::min(fine.near_null_count(), kMaxCandidates);
    if (k > 0) {
        const auto basis = fine.near_null_space();
        const int stride = fine.near_null_count();
        cand.resize(fine.dimension() * k);
        for (std::size_t i = 0; i < fine.dimension(); ++i) {
            for (int c = 0; c < k; ++c) cand[i * k + c] = basis[i * stride + c];
        }
    } else {
        k = 1;
        cand.assign(fine.dimension(), 1.0);
    }

    {
        Level top{BlockStencil::from(fine, shift), {}, {}, 0, {}, {}, {}};
        top.inv_diag = inverse_diagonal(top.op);
        top.res.resize(top.op.dimension());
        levels_.push_back(std::move(top));
    }
    while (levels_.back().op.dimension() > kCoarsest) {
        Level& f = levels_.back();
        const std::size_t coarse_dim = static_cast<std::size_t>((f.op.width() + kAggregate - 1) / kAggregate) *
                                       ((f.op.height() + kAggregate - 1) / kAggregate) * k;
        // Thin strips barely shrink under square aggregates; stop instead.
        if (2 * coarse_dim > f.op.dimension()) break;

        Tentative tent = tentative_prolongator(f.op, cand, k);
        const double rho = jacobi_spectral_radius(f.op, f.inv_diag);
        const double omega = rho > 0.0 ? (4.0 / 3.0) / rho : 0.0;
        f.prolong = smooth_prolongator(f.op, f.inv_diag, tent.q, k, omega);
        f.span = aggregates_per_row(f.op.reach());

        Level next{galerkin(f.op, f.prolong, k), {}, {}, 0, {}, {}, {}};
        next.inv_diag = inverse_diagonal(next.op);
        const std::size_t n = next.op.dimension();
        next.rhs.resize(n);
        next.sol.resize(n);
        next.res.resize(n);
        cand = std::move(tent.coarse);
        levels_.push_back(std::move(next));
    }

    const BlockStencil& last = levels_.back().op;
    const std::size_t n = last.dimension();
    if (n > kDenseLimit) {
        exact_coarse_ = false;
        return;
    }
    chol_n_ = n;
    chol_.assign(n * n, 0.0);
    const int d = last.dofs();
    const int r = last.reach();
    for (int ny = 0; ny < last.height(); ++ny) {
        for (int nx = 0; nx < last.width(); ++nx) {
            const std::size_t node = static_cast<std::size_t>(ny) * last.width() + nx;
            for (int a = 0; a < d; ++a) {
                const std::size_t i = node * d + a;
                for (int dy = -r; dy <= r; ++dy) {
                    const int qy = ny + dy;
                    if (qy < 0 || qy >= last.height()) continue;
                    for (int dx = -r; dx <= r; ++dx) {
                        const int qx = nx + dx;
                        if (qx < 0 || qx >= last.width()) continue;
                        for (int b = 0; b < d; ++b) {
                            const std::size_t j = (static_cast<std::size_t>(qy) * last.width() + qx) * d + b;
                            if (j <= i) chol_[i * n + j] = last.at(i, dx, dy, b);
                        }
                    }
                }
            }
        }
    }
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, chol_[i * n + i]);
    const double floor = 1e-14 * max_diag;
    for (std::size_t j = 0; j < n; ++j) {
        double dj = chol_[j * n + j];
        for (std::size_t m = 0; m < j; ++m) dj -= chol_[j * n + m] * chol_[j * n + m];
        // Guard against round-off on nearly singular coarse systems.
        dj = std::sqrt(std::max(dj, floor > 0.0 ? floor : 1e-300));
        chol_[j * n + j] = dj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = chol_[i * n + j];
            for (std::size_t m = 0; m < j; ++m) s -= chol_[i * n + m] * chol_[j * n + m];
            chol_[i * n + j] = s / dj;
        }
    }
}

void Multigrid::coarse_solve(std::span<const double> b, std::span<double> x) const {
    if (!exact_coarse_) {
        const Level& last = levels_.back();
        std::fill(x.begin(), x.end(), 0.0);
        gauss_seidel(last.op, last.inv_diag, b, x, true);
        gauss_seidel(last.op, last.inv_diag, b, x, false);
        return;
    }
    const std::size_t n = chol_n_;
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t m = 0; m < i; ++m) s -= chol_[i * n + m] * x[m];
        x[i] = s / chol_[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t m = ii + 1; m < n; ++m) s -= chol_[m * n + ii] * x[m];
        x[ii] = s / chol_[ii * n + ii];
    }
}

// next.rhs = P^T res, gathered per coarse node.
void Multigrid::restrict_residual(std::size_t level) const {
    const Level& f = levels_[level];
    const Level& c = levels_[level + 1];
    const int w = f.op.width();
    const int h = f.op.height();
    const int d = f.op.dofs();
    const int r = f.op.reach();
    const int k = c.op.dofs();
    const int span = f.span;
    const std::size_t pw = static_cast<std::size_t>(span) * span * k;
    parallel_for(static_cast<std::size_t>(c.op.height()), [&](std::size_t c0, std::size_t c1) {
        for (std::size_t iyy = c0; iyy < c1; ++iyy) {
            const int iy = static_cast<int>(iyy);
            for (int ix = 0; ix < c.op.width(); ++ix) {
                double acc[kMaxCandidates] = {};
                for (int y = std::max(0, iy * kAggregate - r); y <= std::min(h - 1, iy * kAggregate + kAggregate - 1 + r); ++y) {
                    const int sy = iy - first_aggregate(y, r);
                    if (sy < 0 || sy >= span) continue;
                    for (int x = std::max(0, ix * kAggregate - r); x <= std::min(w - 1, ix * kAggregate + kAggregate - 1 + r); ++x) {
                        const int sx = ix - first_aggregate(x, r);
                        if (sx < 0 || sx >= span) continue;
                        const std::size_t node = static_cast<std::size_t>(y) * w + x;
                        for (int b = 0; b < d; ++b) {
                            const std::size_t row = node * d + b;
                            const double* pi = f.prolong.data() + row * pw + (static_cast<std::size_t>(sy) * span + sx) * k;
                            const double v = f.res[row];
                            for (int a = 0; a < k; ++a) acc[a] += pi[a] * v;
                        }
                    }
                }
                const std::size_t cnode = static_cast<std::size_t>(iy) * c.op.width() + ix;
                for (int a = 0; a < k; ++a) c.rhs[cnode * k + a] = acc[a];
            }
        }
    });
}

// x += P next.sol
void Multigrid::prolong_add(std::size_t level, std::span<double> x) const {
    const Level& f = levels_[level];
    const Level& c = levels_[level + 1];
    const int w = f.op.width();
    const int d = f.op.dofs();
    const int r = f.op.reach();
    const int k = c.op.dofs();
    const int cw = c.op.width();
    const int ch = c.op.height();
    const int span = f.span;
    const std::size_t pw = static_cast<std::size_t>(span) * span * k;
    parallel_for(static_cast<std::size_t>(f.op.height()), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t yy = y0; yy < y1; ++yy) {
            const int y = static_cast<int>(yy);
            const int by = first_aggregate(y, r);
            for (int xx = 0; xx < w; ++xx) {
                const int bx = first_aggregate(xx, r);
                const std::size_t node = static_cast<std::size_t>(y) * w + xx;
                for (int b = 0; b < d; ++b) {
                    const std::size_t row = node * d + b;
                    const double* pr = f.prolong.data() + row * pw;
                    double s = 0.0;
                    for (int ty = 0; ty < span && by + ty < ch; ++ty) {
                        for (int tx = 0; tx < span && bx + tx < cw; ++tx) {
                            const double* pi = pr + (static_cast<std::size_t>(ty) * span + tx) * k;
                            const double* xc = c.sol.data() + (static_cast<std::size_t>(by + ty) * cw + bx + tx) * k;
                            for (int a = 0; a < k; ++a) s += pi[a] * xc[a];
                        }
                    }
                    x[row] += s;
                }
            }
        }
    });
}

void Multigrid::cycle(std::size_t level, std::span<const double> b, std::span<double> x) const {
    if (level + 1 == levels_.size()) {
        coarse_solve(b, x);
        return;
    }
    const Level& f = levels_[level];
    const Level& next = levels_[level + 1];
    std::fill(x.begin(), x.end(), 0.0);
    gauss_seidel(f.op, f.inv_diag, b, x, true);
    f.op.multiply(x, f.res);
    for (std::size_t i = 0; i < f.res.size(); ++i) f.res[i] = b[i] - f.res[i];
    restrict_residual(level);
    cycle(level + 1, next.rhs, next.sol);
    prolong_add(level, x);
    gauss_seidel(f.op, f.inv_diag, b, x, false);
}

void Multigrid::apply(std::span<const double> r, std::span<double> z) const { cycle(0, r, z); }

}  // namespace veil::detail
