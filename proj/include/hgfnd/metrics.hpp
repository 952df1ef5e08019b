#pragma once

#include <cstddef>
#include <vector>

namespace hgfnd {

/// Binary classification metrics. The confusion counts treat fake (label 0)
/// as the positive class; per-class F1 is reported for both classes.
struct Metrics {
    std::size_t tp = 0; // fake predicted fake
    std::size_t fp = 0; // true predicted fake
    std::size_t tn = 0; // true predicted true
    std::size_t fn = 0; // fake predicted true
    double accuracy = 0.0;
    double f1_fake = 0.0;
    double f1_true = 0.0;
    double f1_macro = 0.0;

    std::size_t total() const { return tp + fp + tn + fn; }

    static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
    /// `predicted` and `actual` hold labels 0/1 and have equal length.
    static Metrics from_predictions(const std::vector<int>& predicted, const std::vector<int>& actual);
};

} // namespace hgfnd
