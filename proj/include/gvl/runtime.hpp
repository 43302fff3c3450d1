#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "gvl/ast.hpp"

namespace gvl {

// ---------------------------------------------------------------------------
// Values and the run-time heap

struct Value {
    enum class Kind : uint8_t { Int, Bool, Char, Null, Ref, Table } kind = Kind::Null;
    int64_t i = 0;    // Int/Char payload, Ref/Table index
    bool b = false;

    static Value intV(int64_t v) { return {Kind::Int, v, false}; }
    static Value boolV(bool v) { return {Kind::Bool, 0, v}; }
    static Value charV(int64_t v) { return {Kind::Char, v, false}; }
    static Value nullV() { return {}; }
    static Value refV(int64_t idx) { return {Kind::Ref, idx, false}; }
    static Value tableV(int64_t idx) { return {Kind::Table, idx, false}; }

    bool isNull() const { return kind == Kind::Null; }
};

struct RuntimeObject {
    std::string record;
    std::vector<Value> fields;
};

struct RuntimeHeap {
    std::vector<RuntimeObject> objects;
    int64_t instCntr = 0;  // shared instance counter

    int64_t allocate(const RecordDecl& r);
    RuntimeObject& obj(int64_t idx) { return objects.at((size_t)idx); }
    const RuntimeObject& obj(int64_t idx) const { return objects.at((size_t)idx); }
};

// ---------------------------------------------------------------------------
// Owned-fields table: hash set of (object id, field index) cells

struct OwnedFieldsTable {
    std::unordered_set<int64_t> cells;  // key = id * 64 + fieldIdx

    static int64_t key(int64_t id, int fieldIdx) { return id * 64 + fieldIdx; }
    bool owned(int64_t id, int fieldIdx) const { return cells.count(key(id, fieldIdx)) > 0; }
    bool insert(int64_t id, int fieldIdx) { return cells.insert(key(id, fieldIdx)).second; }
    bool remove(int64_t id, int fieldIdx) { return cells.erase(key(id, fieldIdx)) > 0; }
    size_t size() const { return cells.size(); }
};

// ---------------------------------------------------------------------------
// Run reports

struct RunMetrics {
    long ownedAsserts = 0;    // ownership assertions executed
    long formulaAsserts = 0;  // inserted formula assertions executed
    long predCalls = 0;       // predicate-function calls
    long sepInserts = 0;      // separation-cell insertions
    long fpOps = 0;           // footprint-transfer cell operations
    long allocations = 0;

    long checksExecuted() const {
        return ownedAsserts + formulaAsserts + predCalls + sepInserts;
    }
    bool allZero() const {
        return ownedAsserts == 0 && formulaAsserts == 0 && predCalls == 0 && sepInserts == 0 &&
               fpOps == 0;
    }
};

enum class RunOutcome : uint8_t { Completed, VerificationFailure, RuntimeError };

struct RunReport {
    RunOutcome outcome = RunOutcome::Completed;
    int failingCheckId = -1;
    std::string message;
    Span location;
    RunMetrics metrics;
    int64_t mainResult = 0;

    std::string str() const;
};

struct RunOptions {
    uint64_t seed = 0;
    int64_t workload = 0;
    long maxSteps = 200000000;
    int maxCallDepth = 100000;
};

// Interprets a (possibly instrumented) core program starting from main.
RunReport run(const Program& p, const RunOptions& opts = {});

// ---------------------------------------------------------------------------
// Footprint transfer over a contract formula, used at method boundaries and
// exposed directly for tests: walks the formula's accessibility structure
// equi-recursively against concrete values and moves each named cell (plus
// the receiver's _id cell, once) between tables. Either table pointer may be
// null for remove-only/add-only walks. Returns the number of cells moved;
// throws VerificationError when the contract names a non-owned cell.
struct VerificationError {
    std::string message;
    int checkId = -1;
    Span location;
};
struct RuntimeError {
    std::string message;
    Span location;
};

long transferFootprint(const Program& p, RuntimeHeap& heap, const FormulaPtr& contract,
                       const std::map<std::string, Value>& env, OwnedFieldsTable* from,
                       OwnedFieldsTable* to);

}  // namespace gvl
