#include "attribroi/metrics.hpp"

#include <cmath>

#include "json.hpp"

namespace attribroi {

namespace {
double pct(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double Metrics::accuracy() const { return pct(tp + tn, total()); }
double Metrics::precision() const { return pct(tp, tp + fp); }
double Metrics::recall() const { return pct(tp, tp + fn); }
double Metrics::specificity() const { return pct(tn, tn + fp); }

double Metrics::fpr() const { return 100.0 - specificity(); }

double Metrics::f1() const { return f1_from_percentages(precision(), recall()); }

double f1_from_percentages(double precision_pct, double recall_pct) {
    const double denom = precision_pct + recall_pct;
    if (denom <= 0.0) return 0.0;
    return 2.0 * precision_pct * recall_pct / denom;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string metrics_to_json(const Metrics& m) {
    nlohmann::json j = {{"schema_version", 1},
                        {"accuracy", round2(m.accuracy())},
                        {"precision", round2(m.precision())},
                        {"recall_tpr", round2(m.recall())},
                        {"specificity_tnr", round2(m.specificity())},
                        {"fpr", round2(m.fpr())},
                        {"f1_score", round2(m.f1())},
                        {"counts", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
    return j.dump(2) + "\n";
}

}  // namespace attribroi
