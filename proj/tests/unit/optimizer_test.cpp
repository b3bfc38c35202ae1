#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixpoint/optimizer.hpp"
#include "synthetic.hpp"

using namespace fixpoint;

namespace {

double rosenbrock(std::span<const double> x, std::span<double> g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
}

// Damped Newton with the analytic Hessian, used as the reference minimizer.
std::array<double, 2> newton_rosenbrock(double x, double y) {
    for (int it = 0; it < 200; ++it) {
        double g[2];
        const double xv[2] = {x, y};
        const double f = rosenbrock(xv, g);
        const double h11 = 2 - 400 * (y - x * x) + 800 * x * x, h12 = -400 * x, h22 = 200;
        const double det = h11 * h22 - h12 * h12;
        double dx = -(h22 * g[0] - h12 * g[1]) / det, dy = -(-h12 * g[0] + h11 * g[1]) / det;
        if (g[0] * dx + g[1] * dy >= 0) dx = -g[0], dy = -g[1];
        double t = 1;
        double gn[2];
        while (t > 1e-12) {
            const double xn[2] = {x + t * dx, y + t * dy};
            if (rosenbrock(xn, gn) <= f + 1e-4 * t * (g[0] * dx + g[1] * dy)) break;
            t *= 0.5;
        }
        x += t * dx;
        y += t * dy;
        if (std::hypot(g[0], g[1]) < 1e-14) break;
    }
    return {x, y};
}

/// f(x) = 0.5 (x - a)^T A (x - a) with A = Q diag(eig) Q^T built from random reflections.
struct Quadratic {
    std::vector<std::vector<double>> A;
    std::vector<double> a;

    double operator()(std::span<const double> x, std::span<double> g) const {
        const std::size_t n = a.size();
        double f = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0;
            for (std::size_t j = 0; j < n; ++j) r += A[i][j] * (x[j] - a[j]);
            g[i] = r;
            f += 0.5 * (x[i] - a[i]) * r;
        }
        return f;
    }
};

Quadratic random_quadratic(fixtest::Rng& rng, std::size_t n, double max_eig) {
    Quadratic q;
    q.a.resize(n);
    for (double& v : q.a) v = fixtest::uniform(rng, -3, 3);
    std::vector<double> eig(n);
    for (double& e : eig) e = fixtest::uniform(rng, 1.0, max_eig);
    q.A.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) q.A[i][i] = eig[i];
    for (int r = 0; r < 3; ++r) {  // A <- H A H with Householder H = I - 2vv^T
        std::vector<double> v(n);
        double norm = 0;
        for (double& x : v) x = fixtest::uniform(rng, -1, 1), norm += x * x;
        for (double& x : v) x /= std::sqrt(norm);
        auto H = [&](std::size_t i, std::size_t j) { return (i == j ? 1.0 : 0.0) - 2 * v[i] * v[j]; };
        std::vector<std::vector<double>> tmp(n, std::vector<double>(n, 0.0)), out = tmp;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t j = 0; j < n; ++j) tmp[i][j] += H(i, k) * q.A[k][j];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t j = 0; j < n; ++j) out[i][j] += tmp[i][k] * H(k, j);
        q.A = out;
    }
    return q;
}

/// Sum of B quadratics, each a batch.
class BatchedQuadratic : public Objective {
public:
    explicit BatchedQuadratic(std::vector<Quadratic> parts) : parts_(std::move(parts)) {}
    std::size_t batch_count() const override { return parts_.size(); }
    CostBreakdown evaluate(std::span<const double> x) const override {
        CostBreakdown c;
        c.gradient.assign(x.size(), 0.0);
        for (std::size_t b = 0; b < parts_.size(); ++b) {
            const auto cb = evaluate_batch(b, x);
            c.total += cb.total;
            for (std::size_t i = 0; i < x.size(); ++i) c.gradient[i] += cb.gradient[i];
        }
        c.nll = c.total;
        return c;
    }
    CostBreakdown evaluate_batch(std::size_t b, std::span<const double> x) const override {
        CostBreakdown c;
        c.gradient.assign(x.size(), 0.0);
        c.total = parts_[b](x, c.gradient);
        c.nll = c.total;
        return c;
    }

private:
    std::vector<Quadratic> parts_;
};

}  // namespace

TEST(Optimizer, QuadraticBowl) {
    const FunctionObjective f([](std::span<const double> x, std::span<double> g) {
        const double a[3] = {1, 2, 3};
        double v = 0;
        for (int i = 0; i < 3; ++i) g[i] = x[i] - a[i], v += 0.5 * g[i] * g[i];
        return v;
    });
    OptimizerConfig cfg;
    cfg.gradient_tolerance = 1e-10;
    const auto r = minimize(f, {0, 0, 0}, cfg);
    EXPECT_TRUE(r.trace.converged);
    EXPECT_LT(r.trace.iterations, 50);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.params[i], i + 1.0, 1e-8);
}

TEST(Optimizer, AlreadyOptimalStartIsUnchanged) {
    const FunctionObjective f([](std::span<const double> x, std::span<double> g) {
        g[0] = x[0] - 2;
        return 0.5 * g[0] * g[0];
    });
    const auto r = minimize(f, {2.0}, {});
    EXPECT_EQ(r.params, std::vector<double>{2.0});
    EXPECT_EQ(r.trace.iterations, 0);
    EXPECT_TRUE(r.trace.converged);
    EXPECT_EQ(r.trace.rows.size(), 1u);
}

TEST(Optimizer, RosenbrockMatchesNewtonReference) {
    const FunctionObjective f(rosenbrock);
    OptimizerConfig cfg;
    cfg.gradient_tolerance = 1e-9;
    cfg.max_iterations = 1000;
    const auto r = minimize(f, {-1.2, 1.0}, cfg);
    const auto ref = newton_rosenbrock(-1.2, 1.0);
    EXPECT_LT(r.cost.total, 1e-6);
    EXPECT_NEAR(r.params[0], ref[0], 1e-5);
    EXPECT_NEAR(r.params[1], ref[1], 1e-5);
    EXPECT_NEAR(ref[0], 1.0, 1e-10);
}

TEST(Optimizer, ConvexQuadraticsConvergeWithinThreeTimesDimension) {
    fixtest::Rng rng(51);
    for (std::size_t n : {2u, 5u, 10u, 20u, 35u, 50u}) {
        const auto q = random_quadratic(rng, n, 10.0);
        const FunctionObjective f(q);
        OptimizerConfig cfg;
        cfg.gradient_tolerance = 1e-10;
        cfg.max_iterations = static_cast<int>(3 * n);
        const auto r = minimize(f, std::vector<double>(n, 0.0), cfg);
        double err = 0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(r.params[i] - q.a[i]));
        EXPECT_LT(err, 1e-8) << "dim " << n;
        EXPECT_LE(r.trace.iterations, static_cast<int>(3 * n));
    }
}

TEST(Optimizer, FullBatchTraceIsMonotone) {
    const FunctionObjective f(rosenbrock);
    OptimizerConfig cfg;
    cfg.max_iterations = 300;
    const auto r = minimize(f, {-1.5, 2.0}, cfg);
    for (std::size_t i = 1; i < r.trace.rows.size(); ++i) {
        EXPECT_LE(r.trace.rows[i].total, r.trace.rows[i - 1].total);
        EXPECT_GT(r.trace.rows[i].step, 0.0);
        EXPECT_EQ(r.trace.rows[i].iteration, static_cast<int>(i));
    }
}

TEST(Optimizer, DeterministicTraces) {
    fixtest::Rng rng(52);
    auto inst = fixtest::random_gradient_instance(rng, 3, 6, 6, 30, 0.01, 4);
    const TrainingObjective obj(inst.images, 0.01, 2);
    struct Wrap : Objective {
        const TrainingObjective& o;
        explicit Wrap(const TrainingObjective& o) : o(o) {}
        std::size_t batch_count() const override { return o.batch_count(); }
        CostBreakdown evaluate(std::span<const double> x) const override { return o.evaluate(x); }
        CostBreakdown evaluate_batch(std::size_t b, std::span<const double> x) const override {
            return o.evaluate_batch(b, x);
        }
    } wrap(obj);
    for (int batches : {1, 2}) {
        OptimizerConfig cfg;
        cfg.minibatch_count = batches;
        cfg.max_iterations = 30;
        cfg.seed = 9;
        const auto a = minimize(wrap, inst.params, cfg), b = minimize(wrap, inst.params, cfg);
        ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
        for (std::size_t i = 0; i < a.trace.rows.size(); ++i) EXPECT_EQ(a.trace.rows[i].total, b.trace.rows[i].total);
        EXPECT_EQ(a.params, b.params);
    }
}

TEST(Optimizer, MinibatchModeReachesOptimumOfSum) {
    fixtest::Rng rng(53);
    std::vector<Quadratic> parts;
    for (int b = 0; b < 4; ++b) parts.push_back(random_quadratic(rng, 6, 4.0));
    const BatchedQuadratic obj(parts);
    OptimizerConfig full;
    full.gradient_tolerance = 1e-10;
    const auto ref = minimize(obj, std::vector<double>(6, 0.0), full);
    OptimizerConfig mb = full;
    mb.minibatch_count = 4;
    mb.max_iterations = 200;
    mb.gradient_tolerance = 1e-7;
    const auto r = minimize(obj, std::vector<double>(6, 0.0), mb);
    EXPECT_NEAR(r.cost.total, ref.cost.total, 1e-8);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.params[i], ref.params[i], 1e-4);
    // The returned iterate is the best one evaluated.
    for (const auto& row : r.trace.rows) EXPECT_GE(row.total, r.cost.total);
}

TEST(Optimizer, Errors) {
    const FunctionObjective nan_start([](std::span<const double>, std::span<double> g) {
        g[0] = 0;
        return std::nan("");
    });
    EXPECT_THROW(minimize(nan_start, {0.0}, {}), Error);
    OptimizerConfig bad;
    bad.gradient_tolerance = 0;
    EXPECT_THROW(bad.validate(), Error);
    bad = {};
    bad.history_size = 0;
    EXPECT_THROW(bad.validate(), Error);
    bad = {};
    bad.minibatch_count = 0;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Optimizer, LineSearchFailureKeepsBestIterate) {
    // Gradient points the wrong way: no step can satisfy Armijo.
    const FunctionObjective liar([](std::span<const double> x, std::span<double> g) {
        g[0] = -1.0;
        return x[0] * x[0] + x[0];
    });
    const auto r = minimize(liar, {0.0}, {});
    EXPECT_TRUE(r.trace.line_search_failed);
    EXPECT_FALSE(r.trace.converged);
    EXPECT_EQ(r.params[0], 0.0);
}

TEST(Optimizer, TraceCsv) {
    OptTrace t;
    t.rows.push_back({0, 2.0, 1.5, 0.5, 0.1, 0.0});
    const auto path = std::filesystem::temp_directory_path() / "fixpoint_trace.csv";
    write_trace_csv(t, path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    EXPECT_EQ(header, "iteration,total,nll,reg,grad_norm,step");
    EXPECT_EQ(line, "0,2,1.5,0.5,0.10000000000000001,0");
    std::filesystem::remove(path);
}
