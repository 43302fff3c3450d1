#include <algorithm>
#include <set>

#include "gvl/engine.hpp"
#include "gvl/printer.hpp"

namespace gvl {

namespace {

// union-find over equality facts in the path condition
struct AliasClasses {
    std::map<TermId, TermId> parent;

    TermId find(TermId x) {
        auto it = parent.find(x);
        if (it == parent.end() || it->second == x) return x;
        TermId r = find(it->second);
        parent[x] = r;
        return r;
    }
    void merge(TermId a, TermId b) {
        TermId ra = find(a), rb = find(b);
        if (ra == rb) return;
        if (ra > rb) std::swap(ra, rb);
        parent[rb] = ra;
    }
};

AliasClasses buildAliases(const TermArena& arena, const SymbolicState& state) {
    AliasClasses ac;
    for (TermId fact : pcAll(state.pc)) {
        const TermNode& n = arena.node(fact);
        if (n.kind == TermKind::App && n.op == TermOp::Eq) ac.merge(n.args[0], n.args[1]);
    }
    return ac;
}

int tokenCount(const ExprPtr& e) {
    if (!e) return 0;
    int n = 1;
    for (auto& a : e->args) n += tokenCount(a);
    return n;
}

struct Resolver {
    TermArena& arena;
    const SymbolicState& state;
    const FieldOriginMap& fields;
    AliasClasses aliases;
    const Store& store;

    Resolver(TermArena& a, const SymbolicState& s, const FieldOriginMap& f)
        : arena(a), state(s), fields(f), aliases(buildAliases(a, s)),
          store(s.checks.origin.captured ? s.checks.origin.captured->store : s.store) {}

    bool sameClass(TermId a, TermId b) { return aliases.find(a) == aliases.find(b); }

    // Resolution of a leaf (an atom or an opaque application such as a
    // snapshot destructor) to candidate source expressions.
    ExprPtr resolveLeaf(TermId v, int depth) {
        std::vector<ExprPtr> candidates;
        auto addCandidate = [&](ExprPtr e) {
            if (!e) return;
            for (auto& c : candidates)
                if (structuralEqual(c, e)) return;
            candidates.push_back(std::move(e));
        };

        TermId rep = aliases.find(v);
        std::vector<TermId> classMembers;
        classMembers.push_back(v);
        for (auto& [t, _] : aliases.parent)
            if (aliases.find(t) == rep && t != v) classMembers.push_back(t);
        std::sort(classMembers.begin(), classMembers.end());

        for (TermId a : classMembers) {
            const TermNode& n = arena.node(a);
            if (n.kind == TermKind::IntConst) addCandidate(mkIntLit(n.intValue));
            if (n.kind == TermKind::BoolConst) addCandidate(mkBoolLit(n.boolValue));
            if (n.kind == TermKind::NullConst) addCandidate(mkNullLit());
            for (const auto& [name, t] : store.entries)
                if (t == a && name.rfind("$t", 0) != 0) addCandidate(mkVar(name));
        }

        if (depth > 0) {
            // heap snapshots: v is the value of some field chunk; resolve the
            // receiver and emit receiver->field
            auto scanHeap = [&](const Heap& h) {
                for (const auto& c : h) {
                    if (c.isPred) continue;
                    bool hit = c.snapshot == v || sameClass(c.snapshot, v);
                    if (!hit) continue;
                    ExprPtr recv = resolveLeaf(c.receiver(), depth - 1);
                    if (recv) addCandidate(mkField(recv, c.name));
                }
            };
            scanHeap(state.heap);
            scanHeap(state.optHeap);
            // fresh field values recorded by optimistic reads
            for (TermId a : classMembers) {
                auto it = fields.find(a);
                if (it != fields.end()) {
                    ExprPtr recv = resolveLeaf(it->second.first, depth - 1);
                    if (recv) addCandidate(mkField(recv, it->second.second));
                }
            }
        }

        if (candidates.empty()) return nullptr;
        // selectLongest: most tokens, ties by lexicographically smallest text
        ExprPtr best = candidates[0];
        int bestTokens = tokenCount(best);
        std::string bestText = printExpr(best);
        for (size_t i = 1; i < candidates.size(); ++i) {
            int tk = tokenCount(candidates[i]);
            std::string txt = printExpr(candidates[i]);
            if (tk > bestTokens || (tk == bestTokens && txt < bestText)) {
                best = candidates[i];
                bestTokens = tk;
                bestText = txt;
            }
        }
        return best;
    }

    ExprPtr resolveTerm(TermId t, int depth) {
        const TermNode& n = arena.node(t);
        switch (n.kind) {
            case TermKind::IntConst: return mkIntLit(n.intValue);
            case TermKind::BoolConst: return mkBoolLit(n.boolValue);
            case TermKind::NullConst: return mkNullLit();
            case TermKind::Unit: return nullptr;
            case TermKind::Atom: return resolveLeaf(t, depth);
            case TermKind::App: {
                switch (n.op) {
                    case TermOp::Add: return bin(BinOp::Add, n, depth);
                    case TermOp::Sub: return bin(BinOp::Sub, n, depth);
                    case TermOp::Mul: return bin(BinOp::Mul, n, depth);
                    case TermOp::Div: return bin(BinOp::Div, n, depth);
                    case TermOp::Eq: return bin(BinOp::Eq, n, depth);
                    case TermOp::Lt:
                    case TermOp::Le: {
                        // prefer `x >= c` over `c <= x`
                        bool flip = arena.node(n.args[0]).kind == TermKind::IntConst &&
                                    arena.node(n.args[1]).kind != TermKind::IntConst;
                        ExprPtr a = resolveTerm(n.args[0], depth);
                        ExprPtr b = resolveTerm(n.args[1], depth);
                        if (!a || !b) return nullptr;
                        if (flip)
                            return mkBin(n.op == TermOp::Le ? BinOp::Ge : BinOp::Gt, b, a);
                        return mkBin(n.op == TermOp::Le ? BinOp::Le : BinOp::Lt, a, b);
                    }
                    case TermOp::And: return bin(BinOp::And, n, depth);
                    case TermOp::Or: return bin(BinOp::Or, n, depth);
                    case TermOp::Not: {
                        ExprPtr a = resolveTerm(n.args[0], depth);
                        if (!a) return nullptr;
                        // prefer != over !(==)
                        if (a->kind == ExprKind::Binary && a->binOp == BinOp::Eq)
                            return mkBin(BinOp::Ne, a->args[0], a->args[1]);
                        return mkUn(UnOp::Not, a);
                    }
                    case TermOp::Neg: {
                        ExprPtr a = resolveTerm(n.args[0], depth);
                        return a ? mkUn(UnOp::Neg, a) : nullptr;
                    }
                    default:
                        // snapshot machinery: resolve as an opaque leaf
                        return resolveLeaf(t, depth);
                }
            }
        }
        return nullptr;
    }

    ExprPtr bin(BinOp op, const TermNode& n, int depth) {
        ExprPtr a = resolveTerm(n.args[0], depth);
        ExprPtr b = resolveTerm(n.args[1], depth);
        if (!a || !b) return nullptr;
        return mkBin(op, a, b);
    }
};

}  // namespace

ExprPtr translateTerm(TermArena& arena, const SymbolicState& state, const FieldOriginMap& fields,
                      TermId t) {
    Resolver r(arena, state, fields);
    ExprPtr e = r.resolveTerm(t, 6);
    if (!e) throw InternalError("translate: unresolvable symbolic value " + arena.str(t));
    return e;
}

ExprPtr translateExpr(TermArena& arena, const SymbolicState& state, const FieldOriginMap& fields,
                      const ExprPtr& e) {
    if (!e) return e;
    if (e->kind == ExprKind::SymRef) {
        ExprPtr r = translateTerm(arena, state, fields, (TermId)e->intValue);
        auto c = cloneExpr(r);
        c->span = e->span;
        if (c->type.kind == TypeKind::Error) c->type = e->type;
        return c;
    }
    bool changed = false;
    std::vector<ExprPtr> args;
    args.reserve(e->args.size());
    for (auto& a : e->args) {
        ExprPtr t = translateExpr(arena, state, fields, a);
        changed |= (t != a);
        args.push_back(std::move(t));
    }
    if (!changed) return e;
    auto c = std::make_shared<Expr>(*e);
    c->args = std::move(args);
    return c;
}

}  // namespace gvl
