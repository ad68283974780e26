#include "mijudge/prompt.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "mijudge/error.hpp"

namespace mijudge {

std::string format_instructions() {
    std::string out = "Respond with a JSON object of exactly this form: {\"label\": \"<label>\"}, "
                      "where <label> is one of ";
    out += "\"Yes\", \"To some extent\", or \"No\". ";
    out += "Output the JSON object and nothing else.";
    return out;
}

std::string render_example(const FewShotExample& ex, int ordinal) {
    std::string out = "#### Example " + std::to_string(ordinal) + "\n";
    out += "##### Conversation\n" + ex.conversation_text + "\n";
    out += "##### Response\n" + ex.response_text + "\n";
    out += "##### Label\n" + std::string(canonical_label(ex.label));
    return out;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open prompt template: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

PromptTemplate PromptTemplate::from_text(std::string text) {
    PromptTemplate t;
    t.text_ = std::move(text);
    return t;
}

namespace {

constexpr std::array<const char*, 4> kPlaceholders = {"{format_instructions}", "{examples}",
                                                      "{conversation}", "{response}"};

// Single pass over the template: substituted values are never rescanned,
// so braces inside dialogue or response text stay literal.
std::string substitute(const std::string& tmpl,
                       const std::array<const std::string*, 4>& values) {
    std::string out;
    out.reserve(tmpl.size());
    size_t at = 0;
    while (at < tmpl.size()) {
        size_t brace = tmpl.find('{', at);
        if (brace == std::string::npos) {
            out.append(tmpl, at, std::string::npos);
            break;
        }
        out.append(tmpl, at, brace - at);
        bool matched = false;
        for (size_t i = 0; i < kPlaceholders.size(); ++i) {
            std::string_view token = kPlaceholders[i];
            if (tmpl.compare(brace, token.size(), token) == 0) {
                out += *values[i];
                at = brace + token.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            out.push_back('{');
            at = brace + 1;
        }
    }
    return out;
}

// Slice of the template between two markers, used to expose the fixed
// sections; empty when a custom template lays things out differently.
std::string section_between(const std::string& text, std::string_view from, std::string_view to) {
    size_t a = from.empty() ? 0 : text.find(from);
    if (a == std::string::npos) return "";
    size_t b = text.find(to, a);
    if (b == std::string::npos) return "";
    return text.substr(a, b - a);
}

}  // namespace

PromptBundle PromptTemplate::build_prompt(const Dialogue& conversation,
                                          const TutorResponse& response,
                                          const std::vector<RetrievedExample>& examples,
                                          int char_budget) const {
    if (conversation.turns.empty()) {
        throw Error(ErrorKind::Validation,
                    "cannot build a prompt for an empty conversation (\"" +
                        conversation.conversation_id + "\")");
    }

    PromptBundle bundle;
    bundle.sections.instructions = section_between(text_, "", "### Labels");
    bundle.sections.label_definitions = section_between(text_, "### Labels", "### Format");
    bundle.sections.format_instructions = format_instructions();
    bundle.sections.conversation_block = render_dialogue(conversation);
    bundle.sections.response_block = response.text;

    size_t include = examples.size();
    while (true) {
        std::string examples_block;
        std::vector<std::string> ids;
        for (size_t i = 0; i < include; ++i) {
            if (i > 0) examples_block += "\n\n";
            examples_block += render_example(examples[i].example, static_cast<int>(i) + 1);
            ids.push_back(examples[i].example.example_id);
        }
        if (include == 0) examples_block = "(no examples)";

        std::string full =
            substitute(text_, {&bundle.sections.format_instructions, &examples_block,
                               &bundle.sections.conversation_block,
                               &bundle.sections.response_block});

        if (char_budget > 0 && full.size() > static_cast<size_t>(char_budget) && include > 0) {
            --include;  // drop the least similar example and retry
            continue;
        }

        bundle.sections.examples_block = std::move(examples_block);
        bundle.full_text = std::move(full);
        bundle.example_ids = std::move(ids);
        bundle.dropped_examples = static_cast<int>(examples.size() - include);
        return bundle;
    }
}

}  // namespace mijudge
