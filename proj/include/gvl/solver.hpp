#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gvl/state.hpp"
#include "gvl/term.hpp"

namespace gvl {

enum class SolverVerdict : uint8_t { Valid, Satisfiable, Unsatisfiable, Unknown };

// Satisfiability backend for conjunctions of boolean terms.
class SolverBackend {
public:
    virtual ~SolverBackend() = default;
    virtual SolverVerdict checkSat(const TermArena& arena,
                                   const std::vector<TermId>& assertions) = 0;
    virtual std::string name() const = 0;
};

// Self-contained default backend: DPLL-style case splitting over congruence
// closure (references, snapshots, booleans) and linear integer arithmetic
// (Gaussian elimination + Fourier-Motzkin with integer tightening). Falls back
// to exhaustive assignment enumeration when every integer variable carries
// explicit finite bounds, which makes small bounded queries exact.
std::unique_ptr<SolverBackend> makeBuiltinBackend();

// External solver speaking SMT-LIB 2 over stdin/stdout (logic QF_UFLIA, one
// check-sat per query, reset between queries). `command` is run via /bin/sh.
std::unique_ptr<SolverBackend> makeSmtLibBackend(const std::string& command);

struct GradualResult {
    bool ok = false;
    std::vector<TermId> residuals;  // unproven conjuncts; {true} when fully proven
};

// Engine-facing query interface with memoization. Sound: isValid never
// returns true unless the backend proved entailment; backend Unknown is
// treated as "not proven" (and as "possibly satisfiable" for isSat).
class Solver {
public:
    explicit Solver(TermArena& arena, std::unique_ptr<SolverBackend> backend = nullptr);

    bool isValid(const std::vector<TermId>& constraints, TermId goal);
    bool isSat(const std::vector<TermId>& constraints);
    bool provedUnsat(const std::vector<TermId>& constraints);

    // check(pi, t) from the check/assert definitions: pc-all(pi) => t
    bool check(const PathCondition& pc, TermId t);

    GradualResult checkGradual(bool isImprecise, const PathCondition& pc, TermId t);
    GradualResult assertGradual(bool isImprecise, const PathCondition& pc, TermId t);

    // Minimal-check computation: CNF conjuncts of t not individually entailed
    // by the constraints. Empty result means t is fully entailed.
    std::vector<TermId> diff(const std::vector<TermId>& constraints, TermId t);

    // CNF with structural distribution bounded at 64 clauses; beyond the
    // bound the whole formula is one conjunct.
    std::vector<TermId> cnfConjuncts(TermId t);

    TermArena& arena() { return arena_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    long queryCount() const { return queries_; }

private:
    TermArena& arena_;
    std::unique_ptr<SolverBackend> backend_;
    std::unordered_map<std::string, SolverVerdict> memo_;
    std::vector<std::string> warnings_;
    long queries_ = 0;

    SolverVerdict checkSatMemo(const std::vector<TermId>& assertions);
};

// Negation-normal form with comparisons flipped instead of negated
// (!(a<b) -> b<=a). Exposed for tests.
TermId toNnf(TermArena& arena, TermId t, bool negate);

}  // namespace gvl
