#pragma once

// Binary-classification confusion counts and the derived percentage metrics
// (accuracy, precision, recall/TPR, specificity/TNR, FPR, F1).

#include <cstddef>
#include <string>

namespace attribroi {

struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    double accuracy() const;     // %
    double precision() const;    // %
    double recall() const;       // % (TPR)
    double specificity() const;  // % (TNR)
    double fpr() const;          // % == 100 - specificity
    double f1() const;           // % harmonic mean of precision and recall
};

// F1 recomputed from already-percentaged precision/recall (e.g. published
// table rows); 0 when both are 0.
double f1_from_percentages(double precision_pct, double recall_pct);

double round2(double v);  // reporting precision: two decimals

// JSON document with the metric column names (plus raw counts).
std::string metrics_to_json(const Metrics& m);

}  // namespace attribroi
