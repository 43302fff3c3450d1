#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gvl/diag.hpp"

namespace gvl {

using TermId = int32_t;
constexpr TermId kNoTerm = -1;

enum class Sort : uint8_t { Int, Bool, Ref, Snap };

enum class TermKind : uint8_t { Atom, IntConst, BoolConst, NullConst, Unit, App };

enum class TermOp : uint8_t {
    Add, Sub, Mul, Div, Neg,
    Eq, Lt, Le,
    And, Or, Not,
    Pair, First, Second,
    // sort wrappers between values and snapshots; injective, mutual inverses
    SnapOf, IntOfSnap, BoolOfSnap, RefOfSnap,
};

struct TermNode {
    TermKind kind;
    Sort sort;
    TermOp op = TermOp::Add;
    int64_t intValue = 0;   // IntConst value
    bool boolValue = false; // BoolConst value
    std::string name;       // Atom name hint
    std::vector<TermId> args;
};

// Interned, immutable term DAG. Fresh atoms are globally unique within one
// arena (one arena per verification task). All non-atom terms are hash-consed,
// so structural equality is id equality.
class TermArena {
public:
    TermArena();

    TermId fresh(Sort s, const std::string& hint);
    TermId intConst(int64_t v);
    TermId boolConst(bool b);
    TermId nullConst();
    TermId unit();

    TermId mkTrue() { return trueId_; }
    TermId mkFalse() { return falseId_; }

    // Smart constructors with constant folding and light normalization.
    TermId add(TermId a, TermId b) { return app(TermOp::Add, {a, b}); }
    TermId sub(TermId a, TermId b) { return app(TermOp::Sub, {a, b}); }
    TermId mul(TermId a, TermId b) { return app(TermOp::Mul, {a, b}); }
    TermId div(TermId a, TermId b) { return app(TermOp::Div, {a, b}); }
    TermId neg(TermId a) { return app(TermOp::Neg, {a}); }
    TermId eq(TermId a, TermId b) { return app(TermOp::Eq, {a, b}); }
    TermId ne(TermId a, TermId b) { return app(TermOp::Not, {eq(a, b)}); }
    TermId lt(TermId a, TermId b) { return app(TermOp::Lt, {a, b}); }
    TermId le(TermId a, TermId b) { return app(TermOp::Le, {a, b}); }
    TermId gt(TermId a, TermId b) { return app(TermOp::Lt, {b, a}); }
    TermId ge(TermId a, TermId b) { return app(TermOp::Le, {b, a}); }
    TermId logicalAnd(TermId a, TermId b) { return app(TermOp::And, {a, b}); }
    TermId logicalOr(TermId a, TermId b) { return app(TermOp::Or, {a, b}); }
    TermId logicalNot(TermId a) { return app(TermOp::Not, {a}); }
    TermId pair(TermId a, TermId b) { return app(TermOp::Pair, {a, b}); }
    TermId first(TermId a) { return app(TermOp::First, {a}); }
    TermId second(TermId a) { return app(TermOp::Second, {a}); }

    TermId app(TermOp op, std::vector<TermId> args);

    // Coerce a value term to the snapshot sort and back.
    TermId toSnap(TermId v);
    TermId fromSnap(TermId snap, Sort want);

    const TermNode& node(TermId id) const { return nodes_[id]; }
    Sort sortOf(TermId id) const { return nodes_[id].sort; }
    size_t size() const { return nodes_.size(); }

    bool isTrue(TermId id) const {
        return node(id).kind == TermKind::BoolConst && node(id).boolValue;
    }
    bool isFalse(TermId id) const {
        return node(id).kind == TermKind::BoolConst && !node(id).boolValue;
    }
    bool isAtom(TermId id) const { return node(id).kind == TermKind::Atom; }

    // Pretty printer. The namer maps atom ids to display names; pass nullptr
    // to use raw names.
    std::string str(TermId id, const std::function<std::string(TermId)>* namer = nullptr) const;

    // All atoms appearing in a term, in first-visit order.
    void collectAtoms(TermId id, std::vector<TermId>& out) const;

private:
    std::vector<TermNode> nodes_;
    std::unordered_map<std::string, TermId> interned_;
    std::unordered_map<int64_t, TermId> intConsts_;
    TermId trueId_, falseId_, nullId_, unitId_;

    TermId push(TermNode n);
    TermId internApp(TermOp op, Sort sort, std::vector<TermId> args);
};

}  // namespace gvl
