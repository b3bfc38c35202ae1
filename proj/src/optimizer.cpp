#include "fixpoint/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>

#include "fixpoint/error.hpp"

namespace fixpoint {

void OptimizerConfig::validate() const {
    if (!(gradient_tolerance > 0.0)) throw Error("optimizer: gradient tolerance must be > 0");
    if (history_size < 1) throw Error("optimizer: history size must be >= 1");
    if (minibatch_count < 1) throw Error("optimizer: minibatch count must be >= 1");
    if (max_iterations < 0) throw Error("optimizer: max iterations must be >= 0");
    if (!(line_search.armijo_c1 > 0.0 && line_search.armijo_c1 < 1.0)) throw Error("optimizer: c1 must be in (0, 1)");
    if (!(line_search.shrink > 0.0 && line_search.shrink < 1.0)) throw Error("optimizer: shrink must be in (0, 1)");
    if (line_search.max_halvings < 1) throw Error("optimizer: max halvings must be >= 1");
}

void write_trace_csv(const OptTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "iteration,total,nll,reg,grad_norm,step\n";
    for (const auto& r : trace.rows) {
        out << r.iteration << ',' << r.total << ',' << r.nll << ',' << r.reg << ',' << r.grad_norm << ',' << r.step
            << '\n';
    }
}

CostBreakdown Objective::evaluate_batch(std::size_t, std::span<const double> x) const { return evaluate(x); }

CostBreakdown FunctionObjective::evaluate(std::span<const double> x) const {
    CostBreakdown c;
    c.gradient.assign(x.size(), 0.0);
    c.total = fn_(x, c.gradient);
    c.nll = c.total;
    return c;
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sup_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

bool finite(const CostBreakdown& c) {
    if (!std::isfinite(c.total)) return false;
    return std::all_of(c.gradient.begin(), c.gradient.end(), [](double g) { return std::isfinite(g); });
}

/// Curvature pairs and the two-loop recursion.
class Memory {
public:
    explicit Memory(std::size_t capacity) : capacity_(capacity) {}

    bool push(Vec s, Vec y) {
        const double sy = dot(s, y);
        const double yy = dot(y, y);
        if (!(sy > 1e-12 * std::sqrt(dot(s, s) * yy)) || !(yy > 0.0)) return false;
        if (pairs_.size() == capacity_) pairs_.pop_front();
        pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
        return true;
    }
    void clear() { pairs_.clear(); }
    bool empty() const { return pairs_.empty(); }

    /// Returns H^{-1} g.
    Vec apply_inverse(const Vec& g) const {
        Vec q = g;
        std::vector<double> a(pairs_.size());
        for (std::size_t i = pairs_.size(); i-- > 0;) {
            const auto& p = pairs_[i];
            a[i] = p.rho * dot(p.s, q);
            for (std::size_t j = 0; j < q.size(); ++j) q[j] -= a[i] * p.y[j];
        }
        double gamma = 1.0;
        if (!pairs_.empty()) {
            const auto& last = pairs_.back();
            gamma = 1.0 / (last.rho * dot(last.y, last.y));
        }
        for (double& v : q) v *= gamma;
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            const auto& p = pairs_[i];
            const double b = p.rho * dot(p.y, q);
            for (std::size_t j = 0; j < q.size(); ++j) q[j] += (a[i] - b) * p.s[j];
        }
        return q;
    }

private:
    struct Pair {
        Vec s, y;
        double rho;
    };
    std::size_t capacity_;
    std::deque<Pair> pairs_;
};

TraceRow row(int iteration, const CostBreakdown& c, double step) {
    return {iteration, c.total, c.nll, c.reg, sup_norm(c.gradient), step};
}

struct LineSearchOutcome {
    bool accepted = false;
    Vec x;
    CostBreakdown cost;
    double step = 0.0;
};

/// Armijo backtracking from step 1 along d.
LineSearchOutcome backtrack(const Objective& objective, const Vec& x, const CostBreakdown& c, const Vec& d,
                            const LineSearchConfig& ls) {
    const double gd = dot(c.gradient, d);
    double t = 1.0;
    for (int k = 0; k <= ls.max_halvings; ++k, t *= ls.shrink) {
        Vec xn(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) xn[i] = x[i] + t * d[i];
        CostBreakdown cn = objective.evaluate(xn);
        if (finite(cn) && cn.total <= c.total + ls.armijo_c1 * t * gd) {
            return {true, std::move(xn), std::move(cn), t};
        }
    }
    return {};
}

/// One quasi-Newton step with fallback to steepest descent when d is not a descent direction.
Vec descent_direction(Memory& memory, const Vec& g) {
    Vec d = memory.apply_inverse(g);
    for (double& v : d) v = -v;
    if (!(dot(g, d) < 0.0)) {
        memory.clear();
        d = g;
        for (double& v : d) v = -v;
    }
    return d;
}

OptResult minimize_full(const Objective& objective, Vec x, CostBreakdown c, const OptimizerConfig& config) {
    OptResult result;
    result.trace.rows.push_back(row(0, c, 0.0));
    Memory memory(static_cast<std::size_t>(config.history_size));

    int it = 0;
    for (; it < config.max_iterations; ++it) {
        if (sup_norm(c.gradient) < config.gradient_tolerance) {
            result.trace.converged = true;
            break;
        }
        Vec d = descent_direction(memory, c.gradient);
        auto step = backtrack(objective, x, c, d, config.line_search);
        if (!step.accepted && !memory.empty()) {
            memory.clear();
            d = descent_direction(memory, c.gradient);
            step = backtrack(objective, x, c, d, config.line_search);
        }
        if (!step.accepted) {
            result.trace.line_search_failed = true;
            break;
        }
        Vec s(x.size()), y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            s[i] = step.x[i] - x[i];
            y[i] = step.cost.gradient[i] - c.gradient[i];
        }
        memory.push(std::move(s), std::move(y));
        x = std::move(step.x);
        c = std::move(step.cost);
        result.trace.rows.push_back(row(it + 1, c, step.step));
    }
    if (!result.trace.converged && sup_norm(c.gradient) < config.gradient_tolerance) result.trace.converged = true;
    result.trace.iterations = static_cast<int>(result.trace.rows.size()) - 1;
    result.params = std::move(x);
    result.cost = std::move(c);
    return result;
}

// Sum-of-functions variant: each batch keeps the point and gradient of its last
// evaluation; the next iterate minimizes the sum of the batches' quadratic models
// sharing one L-BFGS curvature estimate of the full objective.
OptResult minimize_batched(const Objective& objective, Vec x, CostBreakdown c, const OptimizerConfig& config) {
    const std::size_t B = objective.batch_count();
    const std::size_t n = x.size();
    OptResult result;
    result.trace.rows.push_back(row(0, c, 0.0));
    Memory memory(static_cast<std::size_t>(config.history_size));

    Vec best_x = x;
    CostBreakdown best = c;
    auto finish = [&]() {
        result.trace.iterations = static_cast<int>(result.trace.rows.size()) - 1;
        result.params = std::move(best_x);
        result.cost = std::move(best);
        return std::move(result);
    };
    if (sup_norm(c.gradient) < config.gradient_tolerance || config.max_iterations == 0) {
        result.trace.converged = sup_norm(c.gradient) < config.gradient_tolerance;
        return finish();
    }

    // Seed the curvature memory with one full-batch step.
    {
        const Vec d = descent_direction(memory, c.gradient);
        auto step = backtrack(objective, x, c, d, config.line_search);
        if (!step.accepted) {
            result.trace.line_search_failed = true;
            return finish();
        }
        Vec s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = step.x[i] - x[i];
            y[i] = step.cost.gradient[i] - c.gradient[i];
        }
        memory.push(std::move(s), std::move(y));
        x = std::move(step.x);
        c = std::move(step.cost);
        best_x = x;
        best = c;
        result.trace.rows.push_back(row(1, c, step.step));
    }

    std::vector<Vec> points(B, x);
    std::vector<Vec> grads(B);
    for (std::size_t b = 0; b < B; ++b) {
        auto cb = objective.evaluate_batch(b, x);
        if (!finite(cb)) throw Error("optimizer: non-finite batch cost");
        grads[b] = std::move(cb.gradient);
    }

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(B);
    std::iota(order.begin(), order.end(), 0);

    for (int pass = 1; pass < config.max_iterations; ++pass) {
        for (std::size_t i = B; i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
        for (std::size_t b : order) {
            Vec total(n, 0.0), mean(n, 0.0);
            for (std::size_t j = 0; j < B; ++j) {
                for (std::size_t i = 0; i < n; ++i) {
                    total[i] += grads[j][i];
                    mean[i] += points[j][i] / static_cast<double>(B);
                }
            }
            const Vec step = memory.apply_inverse(total);
            Vec proposal(n);
            for (std::size_t i = 0; i < n; ++i) proposal[i] = mean[i] - step[i];

            CostBreakdown cb = objective.evaluate_batch(b, proposal);
            for (int k = 0; !finite(cb) && k < config.line_search.max_halvings; ++k) {
                for (std::size_t i = 0; i < n; ++i) proposal[i] = x[i] + config.line_search.shrink * (proposal[i] - x[i]);
                cb = objective.evaluate_batch(b, proposal);
            }
            if (!finite(cb)) {
                result.trace.line_search_failed = true;
                return finish();
            }
            Vec s(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = proposal[i] - points[b][i];
                y[i] = static_cast<double>(B) * (cb.gradient[i] - grads[b][i]);
            }
            memory.push(std::move(s), std::move(y));
            points[b] = proposal;
            grads[b] = std::move(cb.gradient);
            x = std::move(proposal);
        }
        c = objective.evaluate(x);
        if (!finite(c)) continue;
        result.trace.rows.push_back(row(pass + 1, c, 1.0));
        if (c.total < best.total) {
            best_x = x;
            best = c;
        }
        if (sup_norm(c.gradient) < config.gradient_tolerance) {
            result.trace.converged = true;
            break;
        }
    }
    return finish();
}

}  // namespace

OptResult minimize(const Objective& objective, std::vector<double> initial, const OptimizerConfig& config) {
    config.validate();
    CostBreakdown c = objective.evaluate(initial);
    if (c.gradient.size() != initial.size()) throw Error("optimizer: gradient length != parameter count");
    if (!finite(c)) throw Error("optimizer: non-finite cost or gradient at the initial point");
    if (config.minibatch_count > 1 && objective.batch_count() > 1) {
        return minimize_batched(objective, std::move(initial), std::move(c), config);
    }
    return minimize_full(objective, std::move(initial), std::move(c), config);
}

}  // namespace fixpoint
