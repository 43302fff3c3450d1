#pragma once

#include <memory>
#include <optional>

#include "gvl/ast.hpp"

namespace gvl {

struct ParseOptions {
    // Accept identifiers with reserved prefixes ($t..., _cond_..., _ownedFields,
    // _id). Used when re-reading instrumenter output.
    bool allowReserved = false;
};

// Parses a whole source file. On error, diags is non-empty and the result is
// null. The returned program contains the builtin runtime declarations
// (OwnedFields and the intrinsic methods).
std::unique_ptr<Program> parse(const std::string& source, DiagList& diags,
                               const ParseOptions& opts = {},
                               const std::string& sourceName = "<input>");

// Registers the builtin record and intrinsic methods; idempotent.
void registerBuiltins(Program& p);

// Parses a single gradual formula (used by tests).
std::optional<GradualFormula> parseFormula(const std::string& text, Program& p, DiagList& diags);

// Parses a single expression (used by tests).
ExprPtr parseExprText(const std::string& text, Program& p, DiagList& diags);

}  // namespace gvl
