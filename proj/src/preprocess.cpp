#include "mijudge/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mijudge/error.hpp"

namespace mijudge {

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::MergedTutorTurns: return "merged_tutor_turns";
        case ActionKind::RemovedGreeting: return "removed_greeting";
        case ActionKind::RemovedSelfReply: return "removed_self_reply";
        case ActionKind::ExcludedByOverride: return "excluded_by_override";
    }
    return "unknown";
}

Lexicon default_greeting_lexicon() {
    return {"hi", "hello", "okey", "ok", "okay", "thanks", "thank you", "bye", "goodbye"};
}

Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open lexicon: " + path);
    Lexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) lex.insert(line);
    }
    return lex;
}

OverrideList load_overrides(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open overrides: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("bad override file: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorKind::Parse, "override file must be a JSON array");
    OverrideList overrides;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("conversation_id") ||
            !entry.contains("turn_index")) {
            throw Error(ErrorKind::Parse,
                        "override entries need conversation_id and turn_index");
        }
        overrides.emplace(entry.at("conversation_id").get<std::string>(),
                          entry.at("turn_index").get<int>());
    }
    return overrides;
}

// --- turn-structure passes ---

std::pair<Dialogue, PreprocessReport> merge_fragmented_tutor_turns(const Dialogue& d) {
    Dialogue out;
    out.conversation_id = d.conversation_id;
    out.source_turn_count = d.source_turn_count;
    PreprocessReport report{d.conversation_id, {}, {}};

    size_t i = 0;
    while (i < d.turns.size()) {
        if (d.turns[i].speaker != Speaker::Tutor) {
            out.turns.push_back(d.turns[i]);
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < d.turns.size() && d.turns[j + 1].speaker == Speaker::Tutor) ++j;
        Turn merged = d.turns[i];
        if (j > i) {
            PreprocessAction action{ActionKind::MergedTutorTurns, {}};
            for (size_t t = i; t <= j; ++t) {
                action.turn_indices.push_back(d.turns[t].source_index);
                if (t > i) merged.text += " " + d.turns[t].text;
            }
            report.actions.push_back(std::move(action));
        }
        out.turns.push_back(std::move(merged));
        i = j + 1;
    }
    return {std::move(out), std::move(report)};
}

namespace {

// Lowercase + strip punctuation, for lexicon matching only.
std::string lexicon_key(const std::string& text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (std::ispunct(c)) continue;
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

}  // namespace

std::pair<Dialogue, PreprocessReport> strip_nonreasoning_turns(const Dialogue& d,
                                                               const Lexicon& lexicon) {
    if (lexicon.empty()) throw Error(ErrorKind::Validation, "greeting lexicon is empty");

    Lexicon keys;
    for (const auto& phrase : lexicon) keys.insert(lexicon_key(phrase));

    auto matches = [&](const Turn& t) { return keys.count(lexicon_key(t.text)) > 0; };

    size_t begin = 0;
    size_t end = d.turns.size();
    while (begin < end && matches(d.turns[begin])) ++begin;
    while (end > begin && matches(d.turns[end - 1])) --end;

    PreprocessReport report{d.conversation_id, {}, {}};
    if (begin >= end) {
        report.warnings.push_back(
            "every turn matches the greeting lexicon; leaving dialogue unchanged");
        return {d, std::move(report)};
    }

    Dialogue out;
    out.conversation_id = d.conversation_id;
    out.source_turn_count = d.source_turn_count;
    out.turns.assign(d.turns.begin() + begin, d.turns.begin() + end);
    for (size_t i = 0; i < d.turns.size(); ++i) {
        if (i >= begin && i < end) continue;
        report.actions.push_back(
            PreprocessAction{ActionKind::RemovedGreeting, {d.turns[i].source_index}});
    }
    return {std::move(out), std::move(report)};
}

std::pair<Dialogue, PreprocessReport> drop_self_reply_segments(const Dialogue& d,
                                                               const OverrideList& overrides) {
    PreprocessReport report{d.conversation_id, {}, {}};

    std::set<int> drop_sources;
    auto range = overrides.equal_range(d.conversation_id);
    for (auto it = range.first; it != range.second; ++it) {
        if (it->second < 0 || it->second >= d.source_turn_count) {
            throw Error(ErrorKind::Validation,
                        "override turn_index " + std::to_string(it->second) +
                            " out of range for conversation \"" + d.conversation_id + "\" (" +
                            std::to_string(d.source_turn_count) + " turns)");
        }
        drop_sources.insert(it->second);
    }

    // Trailing tutor turn directly after another tutor turn.
    int heuristic_source = -1;
    if (d.turns.size() >= 2 && d.turns.back().speaker == Speaker::Tutor &&
        d.turns[d.turns.size() - 2].speaker == Speaker::Tutor) {
        heuristic_source = d.turns.back().source_index;
    }

    Dialogue out;
    out.conversation_id = d.conversation_id;
    out.source_turn_count = d.source_turn_count;
    for (const Turn& t : d.turns) {
        if (drop_sources.count(t.source_index)) {
            report.actions.push_back(
                PreprocessAction{ActionKind::ExcludedByOverride, {t.source_index}});
            continue;
        }
        if (t.source_index == heuristic_source) {
            report.actions.push_back(
                PreprocessAction{ActionKind::RemovedSelfReply, {t.source_index}});
            continue;
        }
        out.turns.push_back(t);
    }
    return {std::move(out), std::move(report)};
}

// --- text normalization ---

namespace {

// Minimal UTF-8 decode; invalid bytes come back as their raw value so they
// pass through untouched.
std::vector<char32_t> decode_utf8(const std::string& s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        char32_t cp = c;
        int extra = 0;
        if ((c & 0x80) == 0) {
            extra = 0;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        }
        if (i + extra >= s.size()) {
            extra = 0;
            cp = c;
        }
        bool valid = true;
        for (int k = 1; k <= extra; ++k) {
            unsigned char cc = s[i + k];
            if ((cc & 0xC0) != 0x80) {
                valid = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!valid) {
            cp = c;
            extra = 0;
        }
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_emoji(char32_t cp) {
    return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // pictographs, emoticons, symbols
           (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols, dingbats
           (cp >= 0x2B00 && cp <= 0x2BFF) ||    // arrows/stars block
           (cp >= 0xFE00 && cp <= 0xFE0F) ||    // variation selectors
           cp == 0x200D;                        // zero-width joiner
}

bool is_letter_or_digit(char32_t cp) {
    if (cp < 0x80) return std::isalnum(static_cast<unsigned char>(cp)) != 0;
    return !is_emoji(cp);  // non-ASCII text counts as word material
}

bool is_unicode_punct(char32_t cp) {
    if (cp < 0x80) return std::ispunct(static_cast<unsigned char>(cp)) != 0;
    return cp >= 0x2000 && cp <= 0x206F;  // general punctuation block
}

std::string strip_html_tags(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '<') {
            size_t close = s.find('>', i + 1);
            if (close != std::string::npos) {
                out.push_back(' ');
                i = close + 1;
                continue;
            }
        }
        out.push_back(s[i++]);
    }
    return out;
}

std::string strip_url_spans(const std::string& s) {
    static const char* kPrefixes[] = {"http://", "https://", "www."};
    std::string out;
    size_t i = 0;
    while (i < s.size()) {
        bool at_token_start = i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1]));
        size_t url_len = 0;
        if (at_token_start) {
            for (const char* prefix : kPrefixes) {
                size_t n = std::strlen(prefix);
                if (s.compare(i, n, prefix) == 0) {
                    size_t end = i;
                    while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end])))
                        ++end;
                    url_len = end - i;
                    break;
                }
            }
        }
        if (url_len > 0) {
            out.push_back(' ');
            i += url_len;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

std::string collapse_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            if (!out.empty()) pending = true;
            continue;
        }
        if (pending) {
            out.push_back(' ');
            pending = false;
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

}  // namespace

TextTables load_text_tables(const std::string& stopwords_path,
                            const std::string& contractions_path) {
    TextTables tables;
    std::ifstream stop(stopwords_path);
    if (!stop) throw Error(ErrorKind::Io, "cannot open stopword list: " + stopwords_path);
    std::string line;
    while (std::getline(stop, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) tables.stopwords.insert(line);
    }

    std::ifstream contr(contractions_path);
    if (!contr) throw Error(ErrorKind::Io, "cannot open contractions: " + contractions_path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(contr);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("bad contraction table: ") + e.what());
    }
    for (const auto& [key, value] : doc.items()) {
        tables.contractions[key] = value.get<std::string>();
    }
    return tables;
}

std::string normalize_text(const std::string& text, const NormalizeOptions& options,
                           const TextTables& tables) {
    std::string s = text;

    if (options.lowercase) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }

    if (options.strip_punct) {
        // Straighten curly quotes first so apostrophe handling sees them.
        std::string straightened;
        for (char32_t cp : decode_utf8(s)) {
            if (cp == 0x2018 || cp == 0x2019) cp = '\'';
            else if (cp == 0x201C || cp == 0x201D) cp = '"';
            encode_utf8(cp, straightened);
        }
        std::vector<char32_t> cps = decode_utf8(straightened);
        std::string out;
        for (size_t i = 0; i < cps.size(); ++i) {
            char32_t cp = cps[i];
            if (cp == '\'') {
                bool intra_word = i > 0 && i + 1 < cps.size() && is_letter_or_digit(cps[i - 1]) &&
                                  !is_unicode_punct(cps[i - 1]) && is_letter_or_digit(cps[i + 1]) &&
                                  !is_unicode_punct(cps[i + 1]);
                if (intra_word) encode_utf8(cp, out);
                continue;
            }
            if (is_unicode_punct(cp)) continue;
            encode_utf8(cp, out);
        }
        s = std::move(out);
    }

    if (options.strip_emoji) {
        std::string out;
        for (char32_t cp : decode_utf8(s)) {
            if (!is_emoji(cp)) encode_utf8(cp, out);
        }
        s = std::move(out);
    }

    if (options.strip_urls) s = strip_url_spans(s);
    if (options.strip_html) s = strip_html_tags(s);

    if (options.expand_contractions) {
        std::istringstream words(s);
        std::string word;
        std::string out;
        while (words >> word) {
            std::string lowered = word;
            for (char& c : lowered)
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            auto it = tables.contractions.find(lowered);
            if (!out.empty()) out += " ";
            out += it != tables.contractions.end() ? it->second : word;
        }
        s = std::move(out);
    }

    if (options.remove_stopwords) {
        std::istringstream words(s);
        std::string word;
        std::string out;
        while (words >> word) {
            std::string lowered = word;
            for (char& c : lowered)
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            if (tables.stopwords.count(lowered)) continue;
            if (!out.empty()) out += " ";
            out += word;
        }
        s = std::move(out);
    }

    return collapse_whitespace(s);
}

int label_to_code(Label l) {
    return static_cast<int>(l);
}

Label code_to_label(int code) {
    if (code < 0 || code > 2) {
        throw Error(ErrorKind::Domain, "label code out of range: " + std::to_string(code));
    }
    return static_cast<Label>(code);
}

std::pair<Dialogue, PreprocessReport> preprocess_pipeline(const Dialogue& d,
                                                          const PreprocessConfig& config) {
    auto [stripped, strip_report] = strip_nonreasoning_turns(d, config.lexicon);
    auto [dropped, drop_report] = drop_self_reply_segments(stripped, config.overrides);
    auto [merged, merge_report] = merge_fragmented_tutor_turns(dropped);

    PreprocessReport report{d.conversation_id, {}, {}};
    for (auto* sub : {&strip_report, &drop_report, &merge_report}) {
        report.actions.insert(report.actions.end(), sub->actions.begin(), sub->actions.end());
        report.warnings.insert(report.warnings.end(), sub->warnings.begin(),
                               sub->warnings.end());
    }
    return {std::move(merged), std::move(report)};
}

}  // namespace mijudge
