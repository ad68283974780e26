#include "mijudge/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "mijudge/error.hpp"

namespace mijudge {

long ConfusionMatrix::total() const {
    long n = 0;
    for (const auto& row : counts) {
        for (long c : row) n += c;
    }
    return n;
}

Label lenient_map(Label l) {
    return l == Label::ToSomeExtent ? Label::Yes : l;
}

ConfusionMatrix confusion(const std::vector<Label>& gold, const std::vector<Label>& pred,
                          const std::vector<Label>& label_set) {
    if (gold.size() != pred.size()) {
        throw Error(ErrorKind::Validation, "gold has " + std::to_string(gold.size()) +
                                               " labels but predictions have " +
                                               std::to_string(pred.size()));
    }
    if (gold.empty()) throw Error(ErrorKind::Validation, "nothing to score");

    std::map<Label, size_t> index;
    for (size_t i = 0; i < label_set.size(); ++i) index[label_set[i]] = i;

    ConfusionMatrix m;
    m.labels = label_set;
    m.counts.assign(label_set.size(), std::vector<long>(label_set.size(), 0));
    for (size_t t = 0; t < gold.size(); ++t) {
        auto gi = index.find(gold[t]);
        auto pi = index.find(pred[t]);
        if (gi == index.end() || pi == index.end()) {
            throw Error(ErrorKind::Validation, "label outside the scored label set");
        }
        m.counts[gi->second][pi->second] += 1;
    }
    return m;
}

std::map<Label, double> per_class_f1(const ConfusionMatrix& m) {
    if (m.labels.empty() || m.total() == 0) {
        throw Error(ErrorKind::Domain, "empty confusion matrix");
    }
    std::map<Label, double> out;
    for (size_t i = 0; i < m.labels.size(); ++i) {
        long tp = m.counts[i][i];
        long fp = 0;
        long fn = 0;
        for (size_t j = 0; j < m.labels.size(); ++j) {
            if (j == i) continue;
            fp += m.counts[j][i];
            fn += m.counts[i][j];
        }
        double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        double f1 =
            precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        out[m.labels[i]] = f1;
    }
    return out;
}

double macro_f1(const ConfusionMatrix& m) {
    auto per_class = per_class_f1(m);
    double sum = 0.0;
    for (const auto& [label, f1] : per_class) sum += f1;
    return sum / static_cast<double>(per_class.size());
}

double accuracy(const ConfusionMatrix& m) {
    long total = m.total();
    if (total == 0) throw Error(ErrorKind::Domain, "empty confusion matrix");
    long hits = 0;
    for (size_t i = 0; i < m.labels.size(); ++i) hits += m.counts[i][i];
    return static_cast<double>(hits) / static_cast<double>(total);
}

MetricsReport evaluate(const std::vector<DatasetRecord>& gold,
                       const std::vector<PredictionRecord>& predictions) {
    std::map<std::pair<std::string, std::string>, const TutorResponse*> gold_by_key;
    for (const auto& record : gold) {
        for (const auto& r : record.responses) {
            gold_by_key[{record.dialogue.conversation_id, r.tutor_id}] = &r;
        }
    }

    std::vector<Label> gold_labels;
    std::vector<Label> pred_labels;
    long failures = 0;
    std::string unmatched;
    for (const auto& p : predictions) {
        auto it = gold_by_key.find({p.conversation_id, p.tutor_id});
        if (it == gold_by_key.end() || !it->second->gold_label) {
            if (!unmatched.empty()) unmatched += ", ";
            unmatched += example_key(p.conversation_id, p.tutor_id);
            continue;
        }
        gold_labels.push_back(*it->second->gold_label);
        pred_labels.push_back(p.judgment.label);
        if (p.judgment.failed) ++failures;
    }
    if (!unmatched.empty()) {
        throw Error(ErrorKind::Validation, "predictions without gold labels: " + unmatched);
    }
    if (gold_labels.empty()) throw Error(ErrorKind::Validation, "nothing to score");

    MetricsReport report;
    report.n_items = static_cast<long>(gold_labels.size());
    report.n_failures = failures;

    const std::vector<Label> strict_set = {Label::No, Label::Yes, Label::ToSomeExtent};
    auto strict = confusion(gold_labels, pred_labels, strict_set);
    report.strict.macro_f1 = macro_f1(strict);
    report.strict.accuracy = accuracy(strict);
    report.strict.per_class_f1 = per_class_f1(strict);

    std::vector<Label> lenient_gold;
    std::vector<Label> lenient_pred;
    lenient_gold.reserve(gold_labels.size());
    lenient_pred.reserve(pred_labels.size());
    for (Label l : gold_labels) lenient_gold.push_back(lenient_map(l));
    for (Label l : pred_labels) lenient_pred.push_back(lenient_map(l));

    const std::vector<Label> lenient_set = {Label::No, Label::Yes};
    auto lenient = confusion(lenient_gold, lenient_pred, lenient_set);
    report.lenient.macro_f1 = macro_f1(lenient);
    report.lenient.accuracy = accuracy(lenient);
    report.lenient.per_class_f1 = per_class_f1(lenient);
    return report;
}

namespace {

std::string three_decimals(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", x);
    return buf;
}

nlohmann::json side_to_json(const MetricsSide& side) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [label, f1] : side.per_class_f1) {
        per_class[std::string(canonical_label(label))] = f1;
    }
    return {{"macro_f1", side.macro_f1},
            {"accuracy", side.accuracy},
            {"per_class_f1", per_class}};
}

MetricsSide side_from_json(const nlohmann::json& doc) {
    MetricsSide side;
    side.macro_f1 = doc.at("macro_f1").get<double>();
    side.accuracy = doc.at("accuracy").get<double>();
    for (const auto& [key, value] : doc.at("per_class_f1").items()) {
        auto label = match_label(key);
        if (!label) throw Error(ErrorKind::Parse, "unknown label in report: " + key);
        side.per_class_f1[*label] = value.get<double>();
    }
    return side;
}

}  // namespace

std::string render_report(const MetricsReport& r, ReportFormat format) {
    if (format == ReportFormat::Json) {
        nlohmann::json doc{{"strict", side_to_json(r.strict)},
                           {"lenient", side_to_json(r.lenient)},
                           {"n_items", r.n_items},
                           {"n_failures", r.n_failures}};
        return doc.dump(2);
    }
    std::string out = "Strict F1 Strict Acc Lenient F1 Lenient Acc\n";
    out += three_decimals(r.strict.macro_f1) + " " + three_decimals(r.strict.accuracy) + " " +
           three_decimals(r.lenient.macro_f1) + " " + three_decimals(r.lenient.accuracy) + "\n";
    return out;
}

MetricsReport metrics_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("bad metrics JSON: ") + e.what());
    }
    MetricsReport report;
    try {
        report.strict = side_from_json(doc.at("strict"));
        report.lenient = side_from_json(doc.at("lenient"));
        report.n_items = doc.at("n_items").get<long>();
        report.n_failures = doc.at("n_failures").get<long>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("bad metrics JSON: ") + e.what());
    }
    return report;
}

}  // namespace mijudge
