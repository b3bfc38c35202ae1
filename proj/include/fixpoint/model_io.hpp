#pragma once

#include <filesystem>

#include "fixpoint/model.hpp"

namespace fixpoint {

/// JSON document with weights, sigma, alpha, lambda, epsilon, feature names and
/// groups, normalization stats with fingerprint, and the training split description.
void write_model(const SaliencyModel& model, const std::filesystem::path& path);
SaliencyModel read_model(const std::filesystem::path& path);

}  // namespace fixpoint
