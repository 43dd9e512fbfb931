#pragma once

#include "saifdl/types.hpp"

#include <cstdint>
#include <filesystem>

namespace saifdl::data {

struct Dataset {
    Matrix features;  // B x d
    Vector labels;    // class index (classification) or target (regression)
    Task task = Task::Classification;

    Index size() const { return features.rows(); }
    Index feature_dim() const { return features.cols(); }
};

/// Two uniform features in [0, 1); label 1 iff x1 + x2 > 1. Draw order per
/// row: x1 then x2, from the pinned generator.
Dataset generate_classification(std::int64_t n, std::uint64_t seed);

/// Mean target of the regression demo at a given x1.
double regression_demo_mean(double x1);

/// Two uniform features; target = 3.0 + 1.5 x1 + Normal(0, 0.05) noise, so
/// roughly a fifth of the targets exceed the 4.2 bound. Draw order per row:
/// x1, x2, then one Box-Muller normal.
Dataset generate_regression_demo(std::int64_t n, std::uint64_t seed);

// CSV interchange: header "x1,...,xd,label" or "x1,...,xd,target", one row
// per sample, UNIX newlines. Finite values round-trip exactly.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

}  // namespace saifdl::data
