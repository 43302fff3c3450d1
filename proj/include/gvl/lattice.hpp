#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gvl/ast.hpp"
#include "gvl/instrument.hpp"

namespace gvl {

enum class ElementKind : uint8_t {
    AccessibilityPredicate,
    PredicateInstance,
    BooleanExpression,
    ImprecisionRemoval,
};

enum class HostKind : uint8_t { Pre, Post, LoopInvariant, StaticAssert, PredicateBody };

// A specification host: one gradual formula of the complete program.
struct SpecHost {
    HostKind kind;
    std::string owner;   // method or predicate name
    int32_t node = -1;   // While/Assert statement node for in-body hosts
    std::vector<int> contentElements;  // indices into the element list
    int removalElement = -1;
};

struct SpecElement {
    ElementKind kind;
    int host = -1;           // index into hosts
    int conjunctIndex = -1;  // position within the host formula, -1 for removal
    std::string label;

    bool isRemoval() const { return kind == ElementKind::ImprecisionRemoval; }
};

struct SpecLattice {
    std::vector<SpecHost> hosts;
    std::vector<SpecElement> elements;
};

// Enumerates the atomic conjuncts (excluding boolean primitives) of every
// contract, loop invariant, static assertion, and predicate body, plus one
// imprecision-removal element per host.
SpecLattice enumerateElements(const Program& p);

// Builds the partial program for a subset of elements: omitted conjuncts are
// dropped and incomplete formulas are joined with `?`; a complete formula
// loses its `?` only when its removal element is included.
std::unique_ptr<Program> materialize(const Program& p, const SpecLattice& lattice,
                                     const std::vector<bool>& included);

// n distinct element orders under the seed; every removal element is placed
// after the last content element of its host. Throws InternalError when n
// exceeds the number of distinct constrained permutations reachable.
std::vector<std::vector<int>> samplePaths(const SpecLattice& lattice, int nPaths,
                                          uint64_t seed);

struct ModeCount {
    InstrumentMode mode;
    int64_t workload;
    long executedChecks = 0;
    long fpOps = 0;
};

struct TrendRow {
    int path = 0;
    int step = 0;
    double pctSpecified = 0;
    long vcTotal = 0;
    long vcStatic = 0;
    long checkSetSize = 0;  // |R| from the verifier
    std::vector<ModeCount> counts;
    bool verified = false;
};

struct LatticeOptions {
    int paths = 16;
    uint64_t seed = 7;
    std::vector<int64_t> workloads = {8, 16, 32};
    std::vector<InstrumentMode> modes = {InstrumentMode::Gradual, InstrumentMode::Dynamic,
                                         InstrumentMode::Framing};
    int jobs = 1;
    uint64_t runSeed = 1;
};

struct LatticeResult {
    SpecLattice lattice;
    std::vector<TrendRow> rows;  // ordered by (path, step)
    std::vector<std::string> violations;  // gradual-guarantee failures, if any

    std::string table() const;    // one line per row, stable keys
    std::string summary() const;  // modes compared at 0%, 50%, 100%
};

LatticeResult runLattice(const Program& p, const LatticeOptions& opts);

}  // namespace gvl
