#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace mijudge {

// The three-way mistake-identification judgment. Enum values double as the
// numeric codes used on the classifier path (No=0, Yes=1, ToSomeExtent=2).
enum class Label : int {
    No = 0,
    Yes = 1,
    ToSomeExtent = 2,
};

inline constexpr std::array<Label, 3> kAllLabels = {Label::No, Label::Yes,
                                                    Label::ToSomeExtent};

// Canonical serialized forms; every label written anywhere is byte-exact
// one of these.
std::string_view canonical_label(Label l);

// Case-insensitive, whitespace-collapsed match against the canonical forms
// ("to  some EXTENT" matches). Returns nullopt for anything else.
std::optional<Label> match_label(std::string_view text);

// Lowercase, trim, collapse runs of whitespace to single spaces. Shared by
// label matching and the output parser.
std::string fold_for_match(std::string_view text);

}  // namespace mijudge
