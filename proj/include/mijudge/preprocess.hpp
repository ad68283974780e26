#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mijudge/corpus.hpp"

namespace mijudge {

enum class ActionKind {
    MergedTutorTurns,
    RemovedGreeting,
    RemovedSelfReply,
    ExcludedByOverride,
};

std::string_view to_string(ActionKind k);

struct PreprocessAction {
    ActionKind kind;
    // Source indices of every turn touched; for merges the first listed
    // index is the surviving turn.
    std::vector<int> turn_indices;
};

struct PreprocessReport {
    std::string dialogue_id;
    std::vector<PreprocessAction> actions;
    std::vector<std::string> warnings;
};

// (conversation_id, source turn index) pairs removed unconditionally.
// Loaded from a JSON array of {"conversation_id", "turn_index"}.
using OverrideList = std::multimap<std::string, int>;

OverrideList load_overrides(const std::string& path);

using Lexicon = std::set<std::string>;

// {"hi","hello","okey","ok","okay","thanks","thank you","bye","goodbye"}
Lexicon default_greeting_lexicon();
Lexicon load_lexicon(const std::string& path);  // one phrase per line

// Joins runs of consecutive tutor turns into one turn (fragments joined
// with a single space). Student turns are never merged.
std::pair<Dialogue, PreprocessReport> merge_fragmented_tutor_turns(const Dialogue& d);

// Removes leading/trailing turns whose text, lowercased and stripped of
// punctuation, is in the lexicon. Interior turns stay. If stripping would
// remove everything, nothing is removed and a warning is recorded.
std::pair<Dialogue, PreprocessReport> strip_nonreasoning_turns(const Dialogue& d,
                                                               const Lexicon& lexicon);

// Heuristic: a final tutor turn directly after another tutor turn is
// dropped. Overrides remove their turns unconditionally. An override index
// outside [0, source_turn_count) is a validation error.
std::pair<Dialogue, PreprocessReport> drop_self_reply_segments(const Dialogue& d,
                                                               const OverrideList& overrides);

struct NormalizeOptions {
    bool lowercase = true;
    bool strip_punct = true;
    bool strip_emoji = true;
    bool strip_urls = true;
    bool strip_html = true;
    bool expand_contractions = true;
    bool remove_stopwords = true;
};

struct TextTables {
    std::set<std::string> stopwords;
    std::map<std::string, std::string> contractions;
};

TextTables load_text_tables(const std::string& stopwords_path,
                            const std::string& contractions_path);

// Applies the enabled transformations in NormalizeOptions field order and
// collapses whitespace. Punctuation stripping keeps apostrophes that sit
// between letters so contraction expansion still sees them.
std::string normalize_text(const std::string& text, const NormalizeOptions& options,
                           const TextTables& tables);

int label_to_code(Label l);
Label code_to_label(int code);

struct PreprocessConfig {
    Lexicon lexicon = default_greeting_lexicon();
    OverrideList overrides;
};

// strip_nonreasoning -> drop_self_reply -> merge_fragmented, with the
// per-step reports concatenated.
std::pair<Dialogue, PreprocessReport> preprocess_pipeline(const Dialogue& d,
                                                          const PreprocessConfig& config);

}  // namespace mijudge
