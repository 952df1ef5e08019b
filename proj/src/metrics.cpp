#include "hgfnd/metrics.hpp"

#include "hgfnd/error.hpp"

#include <string>

namespace hgfnd {

namespace {

double f1(std::size_t hits, std::size_t false_pos, std::size_t false_neg) {
    const std::size_t denom = 2 * hits + false_pos + false_neg;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(hits) / static_cast<double>(denom);
}

} // namespace

Metrics Metrics::from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.tn = tn;
    m.fn = fn;
    const std::size_t total = m.total();
    m.accuracy = total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
    m.f1_fake = f1(tp, fp, fn);
    m.f1_true = f1(tn, fn, fp);
    m.f1_macro = 0.5 * (m.f1_fake + m.f1_true);
    return m;
}

Metrics Metrics::from_predictions(const std::vector<int>& predicted, const std::vector<int>& actual) {
    if (predicted.size() != actual.size()) {
        throw ValidationError("prediction count " + std::to_string(predicted.size()) + " differs from label count " +
                              std::to_string(actual.size()));
    }
    if (predicted.empty()) throw ValidationError("no predictions to score");
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        const bool pred_fake = predicted[k] == 0;
        const bool is_fake = actual[k] == 0;
        if (pred_fake && is_fake) ++tp;
        else if (pred_fake) ++fp;
        else if (is_fake) ++fn;
        else ++tn;
    }
    return from_counts(tp, fp, tn, fn);
}

} // namespace hgfnd
