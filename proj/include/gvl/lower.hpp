#pragma once

#include "gvl/ast.hpp"

namespace gvl {

// Adds $box_* record declarations for value-type pointers referenced by the
// program. Runs between parse and typeCheck.
void addBoxRecords(Program& p);

// Rewrites a typed program into the core statement grammar: for loops become
// while loops, calls/allocs/ternaries are hoisted to statement position with
// $t temporaries, nested field writes are expanded, derefs of value boxes
// become field accesses, and tail returns become assignments to \result.
// Total on typed programs except for misplaced returns, which are reported.
bool lowerProgram(Program& p, DiagList& diags);

// True when the statement tree uses only core constructs.
bool isCoreStmt(const StmtPtr& s);

}  // namespace gvl
