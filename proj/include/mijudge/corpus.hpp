#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mijudge/label.hpp"

namespace mijudge {

enum class Speaker { Tutor, Student };

std::string_view speaker_prefix(Speaker s);  // "Tutor" / "Student"

struct Turn {
    Speaker speaker = Speaker::Tutor;
    std::string text;
    // Position of this turn in the dialogue as originally parsed. Preserved
    // through preprocessing so reports and override files always refer to
    // the raw file, not to whatever an earlier pass left behind.
    int source_index = 0;
};

struct Dialogue {
    std::string conversation_id;
    std::vector<Turn> turns;
    // Turn count at parse time; source indices are valid in [0, this).
    int source_turn_count = 0;
};

// Builds a dialogue from scratch, assigning source indices 0..n-1.
Dialogue make_dialogue(std::string conversation_id,
                       std::vector<std::pair<Speaker, std::string>> turns);

struct TutorResponse {
    std::string tutor_id;
    std::string text;
    std::optional<Label> gold_label;
    // Carried through prediction files so scoring can refuse or count
    // items whose judgment never succeeded.
    bool prediction_failed = false;
};

struct DatasetRecord {
    Dialogue dialogue;
    std::vector<TutorResponse> responses;
};

// Maps the artifact's record model onto whatever field names the dataset
// release uses. Defaults match the public MRBench-style files.
struct FieldMap {
    std::string conversation_id = "conversation_id";
    std::string history = "conversation_history";
    std::string responses = "tutor_responses";
    std::string response_text = "response";
    std::string annotation = "annotation";
    std::string label = "Mistake_Identification";
    std::string tutor_id = "tutor_id";  // only for list-shaped responses
    std::string prediction_failed = "prediction_failed";
};

FieldMap load_field_map(const std::string& path);  // JSON descriptor file

// Parses a development/test file. The top level must be an array of
// conversation objects. With expect_labels=true a missing annotation is an
// error; with false annotations are ignored even when present.
std::vector<DatasetRecord> parse_dataset(const std::string& raw, bool expect_labels,
                                         const FieldMap& fields = {});

std::vector<DatasetRecord> parse_dataset_file(const std::string& path, bool expect_labels,
                                              const FieldMap& fields = {});

// One turn per line: "Tutor: ...\nStudent: ...".
std::string render_dialogue(const Dialogue& d);

// Writes records back in the original JSON shape (history as a flat
// prefixed string). Responses with a gold label get an annotation object.
void write_dataset(const std::vector<DatasetRecord>& records, std::ostream& out,
                   const FieldMap& fields = {});

struct PredictionRecord;  // judge.hpp

// Serializes predictions as a dataset-shaped JSON array so the output can
// be re-parsed by parse_dataset. `base` supplies dialogue text and response
// order; a prediction whose key is absent from `base` is a validation
// error. Conversations without any prediction are omitted.
void serialize_predictions(const std::vector<DatasetRecord>& base,
                           const std::vector<PredictionRecord>& records, std::ostream& out,
                           const FieldMap& fields = {});

}  // namespace mijudge
