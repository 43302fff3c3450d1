#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gvl/ast.hpp"
#include "gvl/solver.hpp"
#include "gvl/state.hpp"

namespace gvl {

struct EngineOptions {
    // dump the symbolic state after every statement of this method
    std::string traceMethod;
    // external SMT-LIB solver command; empty selects the builtin backend
    std::string solverCommand;
};

struct TracePoint {
    std::string label;  // "entry", "stmt", "branch-then", "branch-else"
    int line = 0;
    StateDump dump;
};

struct DeclVerdict {
    std::string name;
    bool isPredicate = false;
    bool ok = false;
};

struct VerifyResult {
    bool ok = false;
    std::vector<DeclVerdict> decls;
    std::vector<RuntimeCheck> checks;  // the accumulated global check set
    std::vector<Diag> diagnostics;
    std::vector<TracePoint> trace;
    std::vector<std::string> solverWarnings;
    long obligationsTotal = 0;
    long obligationsStatic = 0;
    long solverQueries = 0;
};

// Verifies every predicate and method of a lowered program, accumulating the
// global run-time check set. The result's checks reference AST nodes of `p`,
// which must outlive it.
VerifyResult verifyProgram(const Program& p, const EngineOptions& opts = {});

// True iff the formula exposes `?` under full predicate unrolling.
bool equiRecursivelyImprecise(const Program& p, const GradualFormula& f);
bool equiRecursivelyImprecise(const Program& p, const FormulaPtr& f);

// ---------------------------------------------------------------------------
// Variable resolution: maps symbolic values back to source expressions using
// the store (or the origin's captured store), alias information from the path
// condition, heap snapshots, and the fresh-field-value origin map.

using FieldOriginMap = std::map<TermId, std::pair<TermId, std::string>>;

ExprPtr translateTerm(TermArena& arena, const SymbolicState& state, const FieldOriginMap& fields,
                      TermId t);

// Rewrites embedded symbolic values inside an expression to source form.
ExprPtr translateExpr(TermArena& arena, const SymbolicState& state, const FieldOriginMap& fields,
                      const ExprPtr& e);

}  // namespace gvl
