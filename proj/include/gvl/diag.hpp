#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace gvl {

// Half-open byte range into a source buffer, plus 1-based line/col of its start.
struct Span {
    int line = 0;
    int col = 0;
    int32_t node = -1;  // AST node id, assigned by the parser

    std::string str() const {
        std::ostringstream os;
        os << line << ":" << col;
        return os.str();
    }
};

struct Diag {
    Span span;
    std::string message;

    std::string str() const {
        std::ostringstream os;
        if (span.line > 0) os << span.line << ":" << span.col << ": ";
        os << message;
        return os.str();
    }
};

class DiagList {
public:
    void error(Span s, std::string msg) { diags_.push_back({s, std::move(msg)}); }
    bool ok() const { return diags_.empty(); }
    const std::vector<Diag>& all() const { return diags_; }

    std::string str() const {
        std::string out;
        for (const auto& d : diags_) {
            out += d.str();
            out += '\n';
        }
        return out;
    }

private:
    std::vector<Diag> diags_;
};

// Internal invariant violation; not a user-facing diagnostic.
struct InternalError : std::exception {
    std::string msg;
    explicit InternalError(std::string m) : msg(std::move(m)) {}
    const char* what() const noexcept override { return msg.c_str(); }
};

}  // namespace gvl
