#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gvl/ast.hpp"
#include "gvl/term.hpp"

namespace gvl {

// ---------------------------------------------------------------------------
// Heap chunks

struct HeapChunk {
    bool isPred = false;
    std::string name;            // field or predicate name
    std::vector<TermId> args;    // receiver (fields) or arguments (predicates)
    TermId snapshot = kNoTerm;

    TermId receiver() const { return args[0]; }
};

using Heap = std::vector<HeapChunk>;

// ---------------------------------------------------------------------------
// Path condition: stack of (id, branch condition, constraints) layers

struct PcLayer {
    TermId id = kNoTerm;
    TermId bc = kNoTerm;
    std::vector<TermId> pcs;
};

struct PathCondition {
    std::vector<PcLayer> layers;  // bottom first; never empty after init

    void init(TermArena& arena) {
        layers.clear();
        layers.push_back({kNoTerm, arena.mkTrue(), {}});
    }
};

void pcPush(PathCondition& pc, TermId id, TermId bc);
void pcAdd(PathCondition& pc, TermId t);
std::vector<TermId> pcAll(const PathCondition& pc);

// ---------------------------------------------------------------------------
// Store: insertion-ordered variable -> symbolic value map

struct Store {
    std::vector<std::pair<std::string, TermId>> entries;

    TermId lookup(const std::string& name) const {
        for (auto& [n, t] : entries)
            if (n == name) return t;
        return kNoTerm;
    }
    void set(const std::string& name, TermId t) {
        for (auto& [n, v] : entries)
            if (n == name) {
                v = t;
                return;
            }
        entries.emplace_back(name, t);
    }
};

// Assigns a fresh atom to each named variable (adding bindings as needed).
void havoc(Store& store, const std::vector<std::pair<std::string, Sort>>& vars, TermArena& arena);

// ---------------------------------------------------------------------------
// Run-time checks

enum class OriginKind : uint8_t { None, Call, Fold, Unfold, Loop };
enum class LoopPhase : uint8_t { Before, Beginning, End, After };

struct SymbolicState;

struct OriginInfo {
    OriginKind kind = OriginKind::None;
    const Stmt* stmt = nullptr;  // the call/fold/unfold/while statement
    std::shared_ptr<const SymbolicState> captured;  // state when origin was set
    std::vector<TermId> args;    // evaluated argument values
    LoopPhase loopPhase = LoopPhase::Before;
    bool postSide = false;  // call origin: condition belongs to the postcondition

    bool none() const { return kind == OriginKind::None; }
};

struct BranchCond {
    OriginInfo origin;       // where the branch point lives (None = program if)
    int32_t locationNode = -1;
    Span locationSpan;
    ExprPtr cond;            // source-level condition, positive polarity
    bool negated = false;
};

struct RuntimeCheck {
    int id = -1;  // assigned when added to the global set
    std::vector<BranchCond> bcs;
    OriginInfo origin;
    int32_t locationNode = -1;
    Span locationSpan;
    FormulaPtr check;  // source-level, symbol-free
    bool needsSeparation = false;

    // Condensation key: placement point + branch conditions + formula text.
    std::string dedupKey() const;
};

// Per-path check collection (the paper's script-R triple).
struct CheckCollection {
    std::vector<BranchCond> bcs;
    OriginInfo origin;
    std::vector<RuntimeCheck> rcs;
};

// Appends a check unless it is trivially true or a duplicate. Returns a
// pointer to the stored check, or null if dropped.
const RuntimeCheck* addCheck(CheckCollection& col, Span locationSpan, int32_t locationNode,
                             FormulaPtr check, bool needsSeparation = false);

void addBranchCond(CheckCollection& col, Span locationSpan, int32_t locationNode, ExprPtr cond,
                   bool negated);

// Global accumulated check set with set semantics and stable order.
struct GlobalChecks {
    std::vector<RuntimeCheck> checks;

    // Adds a copy unless an identical check is present; returns stored id.
    int add(const RuntimeCheck& rc);
};

// ---------------------------------------------------------------------------
// Symbolic state

struct SymbolicState {
    bool isImprecise = false;
    Heap optHeap;  // h?
    Heap heap;     // h
    Store store;
    PathCondition pc;
    CheckCollection checks;

    static SymbolicState empty(TermArena& arena) {
        SymbolicState s;
        s.pc.init(arena);
        return s;
    }
};

// Heap helpers. Chunk identity for disjoint union is (kind, name, args).
bool heapHasChunk(const Heap& h, const HeapChunk& c);
std::string chunkStr(const TermArena& arena, const HeapChunk& c,
                     const std::function<std::string(TermId)>* namer = nullptr);

// ---------------------------------------------------------------------------
// Debug dump in the 6-column layout (imprecise, h?, h, store, pc, checks).
// The path-condition column lists only constraint sets (not branch-condition
// layer terms) and omits snapshot-sort equations, matching the trace-table
// presentation used by the golden tests.

struct StateDump {
    bool imprecise = false;
    std::vector<std::string> optHeap, heap, store, pcs, checks;

    bool operator==(const StateDump&) const = default;
    std::string str() const;
};

// Canonical dump: atoms renamed v1, v2, ... by first appearance.
StateDump dumpState(const TermArena& arena, const SymbolicState& s, bool canonical = true);

std::string describeCheck(const RuntimeCheck& rc);

}  // namespace gvl
