#pragma once

#include "gvl/ast.hpp"

namespace gvl {

// Annotates every expression with its type, resolves names, and reports
// errors. Returns true on success. Local variable names must be unique within
// a method (including parameters); this keeps the loop-havoc analysis sound.
bool typeCheck(Program& p, DiagList& diags);

}  // namespace gvl
