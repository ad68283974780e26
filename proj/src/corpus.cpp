#include "mijudge/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mijudge/error.hpp"
#include "mijudge/judge.hpp"

namespace mijudge {

using ordered_json = nlohmann::ordered_json;

std::string_view speaker_prefix(Speaker s) {
    return s == Speaker::Tutor ? "Tutor" : "Student";
}

Dialogue make_dialogue(std::string conversation_id,
                       std::vector<std::pair<Speaker, std::string>> turns) {
    Dialogue d;
    d.conversation_id = std::move(conversation_id);
    d.turns.reserve(turns.size());
    int idx = 0;
    for (auto& [speaker, text] : turns) {
        d.turns.push_back(Turn{speaker, std::move(text), idx++});
    }
    d.source_turn_count = idx;
    return d;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Splits a flat history string (or one list element) into turns on the
// "Tutor:"/"Student:" line prefixes; continuation lines extend the current
// turn.
void append_history_text(const std::string& text, std::vector<Turn>& turns) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        Speaker speaker;
        std::string rest;
        if (t.rfind("Tutor:", 0) == 0) {
            speaker = Speaker::Tutor;
            rest = trim(t.substr(6));
        } else if (t.rfind("Student:", 0) == 0) {
            speaker = Speaker::Student;
            rest = trim(t.substr(8));
        } else {
            if (turns.empty()) {
                throw Error(ErrorKind::Parse,
                            "history line has no Tutor:/Student: prefix: \"" + t + "\"");
            }
            turns.back().text += " " + t;
            continue;
        }
        turns.push_back(Turn{speaker, rest, 0});
    }
}

std::vector<Turn> parse_history(const ordered_json& value) {
    std::vector<Turn> turns;
    if (value.is_string()) {
        append_history_text(value.get<std::string>(), turns);
    } else if (value.is_array()) {
        for (const auto& item : value) {
            if (!item.is_string()) {
                throw Error(ErrorKind::Parse, "history list items must be strings");
            }
            append_history_text(item.get<std::string>(), turns);
        }
    } else {
        throw Error(ErrorKind::Parse, "history must be a string or a list of strings");
    }
    for (size_t i = 0; i < turns.size(); ++i) {
        turns[i].source_index = static_cast<int>(i);
        if (trim(turns[i].text).empty()) {
            throw Error(ErrorKind::Parse, "turn " + std::to_string(i) + " has empty text");
        }
    }
    return turns;
}

Label parse_gold_label(const ordered_json& annotation, const FieldMap& fields,
                       const std::string& conversation_id) {
    if (!annotation.contains(fields.label)) {
        throw Error(ErrorKind::Label, "conversation \"" + conversation_id +
                                          "\": annotation is missing \"" + fields.label + "\"");
    }
    const auto& raw = annotation.at(fields.label);
    if (!raw.is_string()) {
        throw Error(ErrorKind::Label,
                    "conversation \"" + conversation_id + "\": label must be a string");
    }
    auto matched = match_label(raw.get<std::string>());
    if (!matched) {
        throw Error(ErrorKind::Label, "conversation \"" + conversation_id +
                                          "\": unknown label \"" + raw.get<std::string>() + "\"");
    }
    return *matched;
}

TutorResponse parse_response(const std::string& tutor_id, const ordered_json& body,
                             bool expect_labels, const FieldMap& fields,
                             const std::string& conversation_id) {
    TutorResponse r;
    r.tutor_id = tutor_id;
    if (body.is_string()) {
        r.text = body.get<std::string>();
        if (expect_labels) {
            throw Error(ErrorKind::Label, "conversation \"" + conversation_id +
                                              "\": response \"" + tutor_id +
                                              "\" has no annotation");
        }
    } else if (body.is_object()) {
        if (!body.contains(fields.response_text) || !body.at(fields.response_text).is_string()) {
            throw Error(ErrorKind::Parse, "conversation \"" + conversation_id + "\": response \"" +
                                              tutor_id + "\" has no \"" + fields.response_text +
                                              "\" string");
        }
        r.text = body.at(fields.response_text).get<std::string>();
        if (expect_labels) {
            if (!body.contains(fields.annotation) || !body.at(fields.annotation).is_object()) {
                throw Error(ErrorKind::Label, "conversation \"" + conversation_id +
                                                  "\": response \"" + tutor_id +
                                                  "\" has no annotation");
            }
            r.gold_label = parse_gold_label(body.at(fields.annotation), fields, conversation_id);
        }
        if (body.contains(fields.prediction_failed) &&
            body.at(fields.prediction_failed).is_boolean()) {
            r.prediction_failed = body.at(fields.prediction_failed).get<bool>();
        }
    } else {
        throw Error(ErrorKind::Parse, "conversation \"" + conversation_id + "\": response \"" +
                                          tutor_id + "\" must be a string or object");
    }
    if (trim(r.text).empty()) {
        throw Error(ErrorKind::Parse, "conversation \"" + conversation_id + "\": response \"" +
                                          tutor_id + "\" is empty");
    }
    return r;
}

}  // namespace

std::vector<DatasetRecord> parse_dataset(const std::string& raw, bool expect_labels,
                                         const FieldMap& fields) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse,
                    "malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw Error(ErrorKind::Parse, "top level must be an array of conversations");
    }

    std::vector<DatasetRecord> records;
    records.reserve(doc.size());
    std::set<std::string> seen_ids;

    for (const auto& conv : doc) {
        if (!conv.is_object()) {
            throw Error(ErrorKind::Parse, "conversation entries must be objects");
        }
        if (!conv.contains(fields.conversation_id)) {
            throw Error(ErrorKind::Parse, "conversation is missing \"" + fields.conversation_id +
                                              "\"");
        }
        DatasetRecord record;
        const auto& id_value = conv.at(fields.conversation_id);
        record.dialogue.conversation_id =
            id_value.is_string() ? id_value.get<std::string>() : id_value.dump();
        const std::string& cid = record.dialogue.conversation_id;

        if (!seen_ids.insert(cid).second) {
            throw Error(ErrorKind::Validation, "duplicate conversation_id \"" + cid + "\"");
        }
        if (!conv.contains(fields.history)) {
            throw Error(ErrorKind::Parse,
                        "conversation \"" + cid + "\" is missing \"" + fields.history + "\"");
        }
        record.dialogue.turns = parse_history(conv.at(fields.history));
        record.dialogue.source_turn_count = static_cast<int>(record.dialogue.turns.size());
        if (record.dialogue.turns.empty()) {
            throw Error(ErrorKind::Parse, "conversation \"" + cid + "\" has no turns");
        }

        if (!conv.contains(fields.responses)) {
            throw Error(ErrorKind::Parse,
                        "conversation \"" + cid + "\" is missing \"" + fields.responses + "\"");
        }
        const auto& responses = conv.at(fields.responses);
        std::set<std::string> seen_tutors;
        auto add_response = [&](const std::string& tutor_id, const ordered_json& body) {
            if (!seen_tutors.insert(tutor_id).second) {
                throw Error(ErrorKind::Validation, "conversation \"" + cid +
                                                       "\": duplicate tutor_id \"" + tutor_id +
                                                       "\"");
            }
            record.responses.push_back(
                parse_response(tutor_id, body, expect_labels, fields, cid));
        };
        if (responses.is_object()) {
            for (const auto& [tutor_id, body] : responses.items()) add_response(tutor_id, body);
        } else if (responses.is_array()) {
            for (const auto& body : responses) {
                if (!body.is_object() || !body.contains(fields.tutor_id) ||
                    !body.at(fields.tutor_id).is_string()) {
                    throw Error(ErrorKind::Parse, "conversation \"" + cid +
                                                      "\": list responses need a \"" +
                                                      fields.tutor_id + "\" string");
                }
                add_response(body.at(fields.tutor_id).get<std::string>(), body);
            }
        } else {
            throw Error(ErrorKind::Parse,
                        "conversation \"" + cid + "\": responses must be a map or a list");
        }
        if (record.responses.empty()) {
            throw Error(ErrorKind::Parse, "conversation \"" + cid + "\" has no responses");
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<DatasetRecord> parse_dataset_file(const std::string& path, bool expect_labels,
                                              const FieldMap& fields) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open dataset file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), expect_labels, fields);
}

FieldMap load_field_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open field map: " + path);
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("bad field map: ") + e.what());
    }
    FieldMap fields;
    auto get = [&](const char* key, std::string& into) {
        if (doc.contains(key)) into = doc.at(key).get<std::string>();
    };
    get("conversation_id", fields.conversation_id);
    get("history", fields.history);
    get("responses", fields.responses);
    get("response_text", fields.response_text);
    get("annotation", fields.annotation);
    get("label", fields.label);
    get("tutor_id", fields.tutor_id);
    get("prediction_failed", fields.prediction_failed);
    return fields;
}

std::string render_dialogue(const Dialogue& d) {
    std::string out;
    for (size_t i = 0; i < d.turns.size(); ++i) {
        if (i > 0) out += "\n";
        out += std::string(speaker_prefix(d.turns[i].speaker)) + ": " + d.turns[i].text;
    }
    return out;
}

namespace {

ordered_json dataset_to_json(const std::vector<DatasetRecord>& records, const FieldMap& fields) {
    ordered_json doc = ordered_json::array();
    for (const auto& record : records) {
        ordered_json conv;
        conv[fields.conversation_id] = record.dialogue.conversation_id;
        conv[fields.history] = render_dialogue(record.dialogue);
        ordered_json responses = ordered_json::object();
        for (const auto& r : record.responses) {
            ordered_json body;
            body[fields.response_text] = r.text;
            if (r.gold_label) {
                body[fields.annotation] =
                    ordered_json{{fields.label, std::string(canonical_label(*r.gold_label))}};
            }
            if (r.prediction_failed) body[fields.prediction_failed] = true;
            responses[r.tutor_id] = std::move(body);
        }
        conv[fields.responses] = std::move(responses);
        doc.push_back(std::move(conv));
    }
    return doc;
}

void write_json(const ordered_json& doc, std::ostream& out) {
    out << doc.dump(2) << "\n";
    if (!out) throw Error(ErrorKind::Io, "write failed");
}

}  // namespace

void write_dataset(const std::vector<DatasetRecord>& records, std::ostream& out,
                   const FieldMap& fields) {
    write_json(dataset_to_json(records, fields), out);
}

void serialize_predictions(const std::vector<DatasetRecord>& base,
                           const std::vector<PredictionRecord>& records, std::ostream& out,
                           const FieldMap& fields) {
    // (conversation, tutor) -> prediction
    std::map<std::pair<std::string, std::string>, const PredictionRecord*> by_key;
    for (const auto& record : records) {
        by_key[{record.conversation_id, record.tutor_id}] = &record;
    }
    std::set<std::pair<std::string, std::string>> known;

    std::vector<DatasetRecord> predicted;
    for (const auto& record : base) {
        DatasetRecord out_record;
        out_record.dialogue = record.dialogue;
        for (const auto& r : record.responses) {
            known.insert({record.dialogue.conversation_id, r.tutor_id});
            auto it = by_key.find({record.dialogue.conversation_id, r.tutor_id});
            if (it == by_key.end()) continue;
            TutorResponse annotated = r;
            annotated.gold_label = it->second->judgment.label;
            annotated.prediction_failed = it->second->judgment.failed;
            out_record.responses.push_back(std::move(annotated));
        }
        if (!out_record.responses.empty()) predicted.push_back(std::move(out_record));
    }

    for (const auto& record : records) {
        if (!known.count({record.conversation_id, record.tutor_id})) {
            throw Error(ErrorKind::Validation,
                        "prediction references unknown item " +
                            example_key(record.conversation_id, record.tutor_id));
        }
    }
    write_json(dataset_to_json(predicted, fields), out);
}

}  // namespace mijudge
