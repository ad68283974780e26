#include "mijudge/label.hpp"

#include <cctype>

namespace mijudge {

std::string_view canonical_label(Label l) {
    switch (l) {
        case Label::No: return "No";
        case Label::Yes: return "Yes";
        case Label::ToSomeExtent: return "To some extent";
    }
    return "No";
}

std::string fold_for_match(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::optional<Label> match_label(std::string_view text) {
    const std::string folded = fold_for_match(text);
    for (Label l : kAllLabels) {
        if (folded == fold_for_match(canonical_label(l))) return l;
    }
    return std::nullopt;
}

}  // namespace mijudge
