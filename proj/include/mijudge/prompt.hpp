#pragma once

#include <string>
#include <vector>

#include "mijudge/corpus.hpp"
#include "mijudge/vectorstore.hpp"

namespace mijudge {

struct PromptSections {
    std::string instructions;
    std::string label_definitions;
    std::string format_instructions;
    std::string examples_block;
    std::string conversation_block;
    std::string response_block;
};

struct PromptBundle {
    std::string full_text;
    PromptSections sections;
    std::vector<std::string> example_ids;  // included, most similar first
    int dropped_examples = 0;              // trimmed to fit the char budget
};

// Tells the model to answer {"label": "..."} and nothing else; the output
// parser accepts exactly what this promises.
std::string format_instructions();

// "#### Example N" block with conversation, response and canonical label.
std::string render_example(const FewShotExample& ex, int ordinal);

// The judge prompt template, loaded from a data file with {placeholder}
// markers for format_instructions, examples, conversation and response.
class PromptTemplate {
  public:
    static PromptTemplate load(const std::string& path);
    static PromptTemplate from_text(std::string text);

    const std::string& text() const { return text_; }

    // Substitutes all placeholders. Examples render most-similar-first; if
    // `char_budget` > 0, least-similar examples are dropped until the
    // rendered prompt fits. Empty conversation is a validation error.
    PromptBundle build_prompt(const Dialogue& conversation, const TutorResponse& response,
                              const std::vector<RetrievedExample>& examples,
                              int char_budget = 0) const;

  private:
    std::string text_;
};

}  // namespace mijudge
