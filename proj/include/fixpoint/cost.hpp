#pragma once

#include <vector>

namespace fixpoint {

/// Value of a training objective and its gradient. total = nll + lambda * reg.
struct CostBreakdown {
    double nll = 0.0;
    double reg = 0.0;
    double total = 0.0;
    std::vector<double> gradient;
};

}  // namespace fixpoint
