#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gvl/engine.hpp"

namespace gvl {

// Line-oriented check report, versioned by a header line. Stable across runs
// for identical input programs.
std::string serializeChecks(const Program& p, const VerifyResult& res);

// Parsed form of a serialized report; locations are resolved back to AST
// nodes of the given program (which must be the same source text).
struct ParsedCheck {
    int id = -1;
    int32_t locationNode = -1;
    Span locationSpan;
    std::string originKind;  // none|call|fold|unfold|loop:<phase>
    int32_t originNode = -1;
    bool needsSeparation = false;
    std::string formulaText;
    struct Bc {
        int32_t node = -1;
        Span locationSpan;
        bool negated = false;
        std::string condText;
        std::string originKind;
        int32_t originNode = -1;
    };
    std::vector<Bc> bcs;
};

struct ParsedChecks {
    std::vector<std::string> declVerdicts;  // "name ok|fail"
    std::vector<ParsedCheck> checks;
};

std::optional<ParsedChecks> parseChecks(const std::string& text, std::string& error);

// Rebuilds RuntimeCheck values against the AST of `p` (node ids must match the
// serialized report, i.e. `p` was parsed from identical source).
std::vector<RuntimeCheck> resolveChecks(const Program& p, const ParsedChecks& parsed,
                                        std::string& error);

std::string originKindString(const OriginInfo& o);

}  // namespace gvl
