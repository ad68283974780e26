#pragma once

#include <stdexcept>
#include <string>

namespace mijudge {

// One exception type for the whole pipeline; the kind tells callers whether
// a failure is worth retrying, a config problem, or bad data.
enum class ErrorKind {
    Parse,       // malformed input document
    Label,       // unknown label string
    Validation,  // structural constraint violated (duplicate ids, bad index, join mismatch)
    Io,          // read/write failure
    Format,      // on-disk artifact corrupt or wrong version
    Dimension,   // vector dimension mismatch
    State,       // operation invalid in current state (e.g. empty store)
    Domain,      // argument outside mathematical domain
    Config,      // bad configuration or credentials; never retried
    Protocol,    // provider answered with the wrong shape; never retried
    Transport,   // network-level failure; retryable
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }
    bool retryable() const { return kind_ == ErrorKind::Transport; }

  private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Label: return "label";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Io: return "io";
        case ErrorKind::Format: return "format";
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::State: return "state";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Config: return "config";
        case ErrorKind::Protocol: return "protocol";
        case ErrorKind::Transport: return "transport";
    }
    return "unknown";
}

}  // namespace mijudge
