#pragma once

#include <map>
#include <string>
#include <vector>

#include "mijudge/corpus.hpp"
#include "mijudge/judge.hpp"
#include "mijudge/label.hpp"

namespace mijudge {

struct ConfusionMatrix {
    std::vector<Label> labels;            // row/column order
    std::vector<std::vector<long>> counts;  // rows = gold, cols = predicted

    long total() const;
};

// Strict scoring keeps the three labels; lenient scoring first folds
// "To some extent" into "Yes" on both sides and scores over {Yes, No}.
Label lenient_map(Label l);

ConfusionMatrix confusion(const std::vector<Label>& gold, const std::vector<Label>& pred,
                          const std::vector<Label>& label_set);

// Per-class F1 = 2PR/(P+R); a class with no precision/recall mass
// contributes 0 (never skipped). Macro is the unweighted mean.
double macro_f1(const ConfusionMatrix& m);
double accuracy(const ConfusionMatrix& m);
std::map<Label, double> per_class_f1(const ConfusionMatrix& m);

struct MetricsSide {
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::map<Label, double> per_class_f1;
};

struct MetricsReport {
    MetricsSide strict;
    MetricsSide lenient;
    long n_items = 0;
    long n_failures = 0;
};

// Joins predictions to gold records on (conversation_id, tutor_id) and
// scores both settings. A prediction without a gold partner, or a matched
// record without a gold label, is a validation error naming the keys.
MetricsReport evaluate(const std::vector<DatasetRecord>& gold,
                       const std::vector<PredictionRecord>& predictions);

enum class ReportFormat { Table, Json };

// Table: header plus one row "<strict f1> <strict acc> <lenient f1>
// <lenient acc>" at 3 decimals. Json round-trips via metrics_from_json.
std::string render_report(const MetricsReport& r, ReportFormat format);

MetricsReport metrics_from_json(const std::string& text);

}  // namespace mijudge
