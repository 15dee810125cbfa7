#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "multigrid.hpp"
#include "support.hpp"
#include "veil/parallel.hpp"
#include "veil/refine.hpp"
#include "veil/simulate.hpp"

using namespace veil;
using namespace veil::test;

namespace {

Eigen::MatrixXd dense(const StencilMatrix& a) {
    const auto n = static_cast<Eigen::Index>(a.dimension());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : a.entries()) m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
    return m;
}

// Straight from the definition: accumulate every window's contribution to
// every pair of its pixels.
Eigen::MatrixXd laplacian_oracle(const Image& g, int side, double eps) {
    const int w = g.width();
    const int h = g.height();
    const int r = side / 2;
    const double count = side * side;
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(w * h, w * h);
    for (int cy = r; cy + r < h; ++cy) {
        for (int cx = r; cx + r < w; ++cx) {
            std::vector<int> ids;
            std::vector<Eigen::Vector3d> col;
            for (int y = cy - r; y <= cy + r; ++y) {
                for (int x = cx - r; x <= cx + r; ++x) {
                    ids.push_back(y * w + x);
                    col.emplace_back(g.at(x, y, 0), g.at(x, y, 1), g.at(x, y, 2));
                }
            }
            Eigen::Vector3d mu = Eigen::Vector3d::Zero();
            for (const auto& v : col) mu += v;
            mu /= count;
            Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
            for (const auto& v : col) cov += (v - mu) * (v - mu).transpose();
            cov /= count;
            const Eigen::Matrix3d inv = (cov + eps / count * Eigen::Matrix3d::Identity()).inverse();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                for (std::size_t j = 0; j < ids.size(); ++j) {
                    const double k = (1.0 + (col[i] - mu).dot(inv * (col[j] - mu))) / count;
                    l(ids[i], ids[j]) += (i == j ? 1.0 : 0.0) - k;
                }
            }
        }
    }
    return l;
}

Eigen::VectorXd dense_solve(const StencilMatrix& a, double lambda, const ScalarMap& rough) {
    Eigen::MatrixXd m = dense(a);
    m.diagonal().array() += lambda;
    Eigen::VectorXd b(static_cast<Eigen::Index>(rough.pixel_count()));
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = lambda * rough.data()[static_cast<std::size_t>(i)];
    return m.ldlt().solve(b);
}

MattingConfig exact_config(Preconditioner p) {
    MattingConfig cfg;
    cfg.solver_tol = 1e-10;
    cfg.max_iters = 20000;
    cfg.downsample.reset();
    cfg.preconditioner = p;
    return cfg;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Guided filter evaluated window by window with clipped windows.
ScalarMap guided_oracle(const Image& g, const ScalarMap& p, int r, double eps) {
    const int w = g.width();
    const int h = g.height();
    std::vector<Eigen::Vector3d> a(static_cast<std::size_t>(w) * h);
    std::vector<double> b(a.size());
    for (int ky = 0; ky < h; ++ky) {
        for (int kx = 0; kx < w; ++kx) {
            Eigen::Vector3d mu = Eigen::Vector3d::Zero();
            Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
            Eigen::Vector3d ip = Eigen::Vector3d::Zero();
            double mp = 0.0;
            int n = 0;
            for (int y = std::max(0, ky - r); y <= std::min(h - 1, ky + r); ++y) {
                for (int x = std::max(0, kx - r); x <= std::min(w - 1, kx + r); ++x) {
                    const Eigen::Vector3d v(g.at(x, y, 0), g.at(x, y, 1), g.at(x, y, 2));
                    mu += v;
                    second += v * v.transpose();
                    ip += v * p.at(x, y);
                    mp += p.at(x, y);
                    ++n;
                }
            }
            mu /= n;
            second /= n;
            ip /= n;
            mp /= n;
            const Eigen::Matrix3d cov = second - mu * mu.transpose() + eps * Eigen::Matrix3d::Identity();
            const Eigen::Vector3d ak = cov.inverse() * (ip - mu * mp);
            a[static_cast<std::size_t>(ky) * w + kx] = ak;
            b[static_cast<std::size_t>(ky) * w + kx] = mp - ak.dot(mu);
        }
    }
    ScalarMap q(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Eigen::Vector3d v(g.at(x, y, 0), g.at(x, y, 1), g.at(x, y, 2));
            double sum = 0.0;
            int n = 0;
            for (int ky = std::max(0, y - r); ky <= std::min(h - 1, y + r); ++ky) {
                for (int kx = std::max(0, x - r); kx <= std::min(w - 1, x + r); ++kx) {
                    const std::size_t k = static_cast<std::size_t>(ky) * w + kx;
                    sum += a[k].dot(v) + b[k];
                    ++n;
                }
            }
            q.at(x, y) = std::clamp(sum / n, 0.0, 1.0);
        }
    }
    return q;
}

ScalarMap box_oracle(const ScalarMap& m, int r) {
    ScalarMap out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            double s = 0.0;
            int n = 0;
            for (int yy = std::max(0, y - r); yy <= std::min(m.height() - 1, y + r); ++yy) {
                for (int xx = std::max(0, x - r); xx <= std::min(m.width() - 1, x + r); ++xx) {
                    s += m.at(xx, yy);
                    ++n;
                }
            }
            out.at(x, y) = s / n;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("matting config validation") {
    MattingConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.window_side = 4;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.fidelity = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.solver_tol = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.downsample = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("matting laplacian structure") {
    Rng rng(51);
    for (int trial = 0; trial < 8; ++trial) {
        const Image g = trial % 2 ? random_image(rng, uniform_int(rng, 3, 14), uniform_int(rng, 3, 14))
                                  : quantized_image(rng, uniform_int(rng, 3, 14), uniform_int(rng, 3, 14));
        MattingConfig cfg;
        cfg.window_side = trial % 3 == 2 ? 5 : 3;
        const StencilMatrix l = build_matting_laplacian(g, cfg);
        CHECK(l.reach() == 2 * (cfg.window_side / 2));
        const Eigen::MatrixXd d = dense(l);
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            CHECK(std::abs(d.row(i).sum()) <= 1e-10);
            for (Eigen::Index j = 0; j < i; ++j) CHECK(d(i, j) == d(j, i));
        }
    }
}

TEST_CASE("matting laplacian is positive semidefinite") {
    Rng rng(52);
    const Image g = random_image(rng, 6, 6);
    const StencilMatrix l = build_matting_laplacian(g, MattingConfig{});
    std::vector<double> x(l.dimension());
    std::vector<double> y(l.dimension());
    for (int trial = 0; trial < 100; ++trial) {
        for (double& v : x) v = uniform(rng, -1.0, 1.0);
        l.multiply(x, y);
        CHECK(dot(x, y) >= -1e-12);
    }
}

TEST_CASE("matting laplacian of a constant 4x4 guide") {
    // Four 3x3 windows; every covariance term vanishes, so each window adds
    // delta_ij - 1/9 to every pair of its pixels.
    const Image g(4, 4, 0.5);
    const StencilMatrix l = build_matting_laplacian(g, MattingConfig{});
    const Eigen::MatrixXd d = dense(l);
    for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
            const int ix = i % 4, iy = i / 4, jx = j % 4, jy = j / 4;
            double expect = 0.0;
            for (int cy = 1; cy <= 2; ++cy) {
                for (int cx = 1; cx <= 2; ++cx) {
                    const bool in_i = std::abs(ix - cx) <= 1 && std::abs(iy - cy) <= 1;
                    const bool in_j = std::abs(jx - cx) <= 1 && std::abs(jy - cy) <= 1;
                    if (in_i && in_j) expect += (i == j ? 1.0 : 0.0) - 1.0 / 9.0;
                }
            }
            CHECK(std::abs(d(i, j) - expect) <= 1e-12);
        }
    }
}

TEST_CASE("matting laplacian against the window-by-window definition") {
    Rng rng(53);
    for (int trial = 0; trial < 6; ++trial) {
        const Image g = random_image(rng, uniform_int(rng, 3, 9), uniform_int(rng, 3, 9));
        MattingConfig cfg;
        cfg.epsilon = trial % 2 ? 1e-6 : 1e-2;
        cfg.window_side = trial == 5 ? 5 : 3;
        if (cfg.window_side > std::min(g.width(), g.height())) cfg.window_side = 3;
        const Eigen::MatrixXd expect = laplacian_oracle(g, cfg.window_side, cfg.epsilon);
        const Eigen::MatrixXd got = dense(build_matting_laplacian(g, cfg));
        // The 1e-6 regularizer makes the window inverses ill-conditioned; compare relatively.
        CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("refinement matches a dense direct solve") {
    Rng rng(54);
    for (Preconditioner p : {Preconditioner::jacobi, Preconditioner::multigrid}) {
        for (int side : {4, 6}) {
            const Image g = random_image(rng, side, side);
            const ScalarMap rough = random_map(rng, side, side);
            MattingConfig cfg = exact_config(p);
            cfg.epsilon = 1e-3;
            const StencilMatrix l = build_matting_laplacian(g, cfg);
            const Eigen::VectorXd x = dense_solve(l, cfg.fidelity, rough);
            const Refinement r = solve_refinement(l, rough, cfg);
            CHECK(r.report.converged);
            for (std::size_t i = 0; i < rough.pixel_count(); ++i) {
                CHECK(std::abs(r.map.data()[i] - std::clamp(x(static_cast<Eigen::Index>(i)), 0.0, 1.0)) <= 1e-6);
            }
        }
    }
}

TEST_CASE("strong fidelity reproduces the rough map") {
    Rng rng(55);
    const Image g = random_image(rng, 12, 10);
    const ScalarMap rough = random_map(rng, 12, 10);
    MattingConfig cfg = exact_config(Preconditioner::multigrid);
    cfg.fidelity = 1e6;
    const Refinement r = solve_refinement(build_matting_laplacian(g, cfg), rough, cfg);
    CHECK(max_abs_diff(r.map, rough) <= 1e-4);
}

TEST_CASE("constant rough maps are preserved") {
    Rng rng(56);
    for (Preconditioner p : {Preconditioner::jacobi, Preconditioner::multigrid}) {
        const Image g = random_image(rng, 40, 37);
        const ScalarMap rough(40, 37, 0.37);
        MattingConfig cfg = exact_config(p);
        cfg.solver_tol = 1e-10;
        const Refinement r = solve_refinement(build_matting_laplacian(g, cfg), rough, cfg);
        CHECK(max_abs_diff(r.map, rough) <= 1e-6);
    }
}

TEST_CASE("conjugate gradient reports a true residual") {
    Rng rng(57);
    const Image g = synthetic_scene(48, 40, rng());
    const StencilMatrix l = build_matting_laplacian(g, MattingConfig{});
    std::vector<double> b(l.dimension());
    for (double& v : b) v = 1e-4 * uniform(rng, 0.0, 1.0);
    for (Preconditioner p : {Preconditioner::jacobi, Preconditioner::multigrid}) {
        SolveReport report;
        const std::vector<double> x = conjugate_gradient(l, 1e-4, b, 1e-6, 5000, p, report);
        CHECK(report.converged);
        std::vector<double> ax(b.size());
        l.multiply(x, ax, 1e-4);
        double rr = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) rr += (b[i] - ax[i]) * (b[i] - ax[i]);
        const double rel = std::sqrt(rr / dot(b, b));
        CHECK(rel <= 1e-6);
        CHECK(report.relative_residual == doctest::Approx(rel).epsilon(1e-6));
    }
}

TEST_CASE("hitting max_iters is reported") {
    Rng rng(58);
    const Image g = random_image(rng, 30, 30);
    const ScalarMap rough = random_map(rng, 30, 30);
    MattingConfig cfg = exact_config(Preconditioner::jacobi);
    cfg.max_iters = 3;
    const Refinement r = solve_refinement(build_matting_laplacian(g, cfg), rough, cfg);
    CHECK_FALSE(r.report.converged);
    CHECK(r.report.iterations == 3);
    for (double v : r.map.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("refinement spreads a sparse estimate beyond the stencil") {
    // Uniform guide: the smoothing couples every pixel, so a single non-zero
    // prior value reaches pixels far outside the Laplacian's reach.
    const Image g(21, 21, 0.4);
    ScalarMap rough(21, 21, 0.0);
    rough.at(10, 10) = 1.0;
    MattingConfig cfg = exact_config(Preconditioner::multigrid);
    cfg.fidelity = 1e-2;
    const Refinement r = solve_refinement(build_matting_laplacian(g, cfg), rough, cfg);
    CHECK(r.map.at(10, 10) < 1.0);
    CHECK(r.map.at(0, 0) > 0.0);
    CHECK(r.map.at(10, 10) > r.map.at(15, 10));
    CHECK(r.map.at(15, 10) > r.map.at(20, 10));
}

TEST_CASE("multigrid V-cycle is symmetric positive definite") {
    Rng rng(59);
    const Image g = synthetic_scene(70, 64, rng());
    const StencilMatrix l = build_matting_laplacian(g, MattingConfig{});
    const detail::Multigrid mg(l, 1e-4);
    CHECK(mg.levels() >= 2);
    for (std::size_t k = 1; k < mg.levels(); ++k) CHECK(mg.level_dimension(k) < mg.level_dimension(k - 1));
    const std::size_t n = l.dimension();
    std::vector<double> r1(n), r2(n), z1(n), z2(n);
    for (int trial = 0; trial < 10; ++trial) {
        for (std::size_t i = 0; i < n; ++i) {
            r1[i] = uniform(rng, -1.0, 1.0);
            r2[i] = uniform(rng, -1.0, 1.0);
        }
        mg.apply(r1, z1);
        mg.apply(r2, z2);
        const double a = dot(z1, r2);
        const double b = dot(r1, z2);
        CHECK(std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)));
        CHECK(dot(z1, r1) > 0.0);
    }
}

TEST_CASE("refinement is independent of the thread count") {
    Rng rng(60);
    const Image g = synthetic_scene(96, 80, rng());
    const ScalarMap rough = random_map(rng, 96, 80);
    MattingConfig cfg;
    cfg.downsample.reset();
    const unsigned before = thread_count();
    set_thread_count(1);
    const Refinement one = MattingRefiner(g, cfg).refine(rough);
    set_thread_count(4);
    const Refinement four = MattingRefiner(g, cfg).refine(rough);
    set_thread_count(before);
    CHECK(one.map == four.map);
    CHECK(one.report.iterations == four.report.iterations);
}

TEST_CASE("refiner solves on a downsampled grid") {
    Rng rng(61);
    const Image g = synthetic_scene(64, 48, rng());
    const ScalarMap rough = random_map(rng, 64, 48);
    MattingConfig cfg;
    cfg.downsample = 32;
    const MattingRefiner refiner(g, cfg);
    CHECK(refiner.laplacian().width() == 32);
    CHECK(refiner.laplacian().height() == 24);
    const Refinement r = refiner.refine(rough);
    CHECK(r.map.width() == 64);
    CHECK(r.map.height() == 48);
    CHECK(r.report.solve_width == 32);
    CHECK(r.report.solve_height == 24);

    const StencilMatrix small = build_matting_laplacian(resize_max_side(g, 32), cfg);
    const Refinement direct = solve_refinement(small, resize_bilinear(rough, 32, 24), cfg);
    CHECK(max_abs_diff(r.map, clamp_unit(resize_bilinear(direct.map, 64, 48))) <= 1e-12);

    CHECK_THROWS_AS(refiner.refine(ScalarMap(10, 10)), DimensionMismatch);
}

TEST_CASE("box mean") {
    Rng rng(62);
    for (int trial = 0; trial < 20; ++trial) {
        const ScalarMap m = random_map(rng, uniform_int(rng, 1, 17), uniform_int(rng, 1, 17));
        const int r = uniform_int(rng, 0, 6);
        CHECK(max_abs_diff(box_mean(m, r), box_oracle(m, r)) <= 1e-13);
    }
    CHECK_THROWS_AS(box_mean(ScalarMap(2, 2), -1), InvalidArgument);
}

TEST_CASE("guided filter") {
    Rng rng(63);
    SUBCASE("constant input is reproduced") {
        const Image g = random_image(rng, 20, 15);
        const ScalarMap q = guided_filter_refine(g, ScalarMap(20, 15, 0.6), 4, 1e-3);
        for (double v : q.data()) CHECK(v == doctest::Approx(0.6).epsilon(1e-10));
    }
    SUBCASE("huge eps degenerates to a double box mean") {
        const Image g = random_image(rng, 18, 13);
        const ScalarMap p = random_map(rng, 18, 13);
        const int r = 3;
        const ScalarMap q = guided_filter_refine(g, p, r, 1e12);
        CHECK(max_abs_diff(q, box_oracle(box_oracle(p, r), r)) <= 1e-9);
    }
    SUBCASE("8x8 against the window-by-window oracle") {
        for (int trial = 0; trial < 4; ++trial) {
            const Image g = random_image(rng, 8, 8);
            const ScalarMap p = random_map(rng, 8, 8);
            const int r = 1 + trial % 3;
            const double eps = trial % 2 ? 1e-3 : 1e-1;
            CHECK(max_abs_diff(guided_filter_refine(g, p, r, eps), guided_oracle(g, p, r, eps)) <= 1e-10);
        }
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(guided_filter_refine(Image(4, 4), ScalarMap(4, 3), 1, 1e-3), DimensionMismatch);
        CHECK_THROWS_AS(guided_filter_refine(Image(4, 4), ScalarMap(4, 4), 0, 1e-3), InvalidArgument);
        CHECK_THROWS_AS(guided_filter_refine(Image(4, 4), ScalarMap(4, 4), 1, 0.0), InvalidArgument);
    }
}
