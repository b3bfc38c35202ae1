#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "fixpoint/cost.hpp"

namespace fixpoint {

struct LineSearchConfig {
    double armijo_c1 = 1e-4;
    double shrink = 0.5;
    int max_halvings = 60;
};

struct OptimizerConfig {
    int max_iterations = 500;
    /// Stop once the gradient sup-norm drops below this.
    double gradient_tolerance = 1e-6;
    int history_size = 20;
    /// 1 = full batch L-BFGS; >1 = sum-of-functions quasi-Newton over image batches.
    int minibatch_count = 1;
    std::uint64_t seed = 0;
    LineSearchConfig line_search;

    void validate() const;
};

struct TraceRow {
    int iteration = 0;
    double total = 0.0;
    double nll = 0.0;
    double reg = 0.0;
    double grad_norm = 0.0;
    double step = 0.0;
};

struct OptTrace {
    std::vector<TraceRow> rows;
    bool converged = false;
    /// Set when the line search gave up; the best iterate is still returned.
    bool line_search_failed = false;
    int iterations = 0;
};

void write_trace_csv(const OptTrace& trace, const std::filesystem::path& path);

/// Objective with optional decomposition into batches whose values sum to the total.
class Objective {
public:
    virtual ~Objective() = default;
    virtual std::size_t batch_count() const { return 1; }
    virtual CostBreakdown evaluate(std::span<const double> x) const = 0;
    virtual CostBreakdown evaluate_batch(std::size_t batch, std::span<const double> x) const;
};

/// Adapts a plain function to Objective.
class FunctionObjective : public Objective {
public:
    using Fn = std::function<double(std::span<const double>, std::span<double>)>;
    explicit FunctionObjective(Fn fn) : fn_(std::move(fn)) {}
    CostBreakdown evaluate(std::span<const double> x) const override;

private:
    Fn fn_;
};

struct OptResult {
    std::vector<double> params;
    CostBreakdown cost;
    OptTrace trace;
};

/// Limited-memory BFGS with Armijo backtracking (full batch), or the batched
/// sum-of-functions variant when config.minibatch_count > 1 and the objective has batches.
OptResult minimize(const Objective& objective, std::vector<double> initial, const OptimizerConfig& config);

}  // namespace fixpoint
