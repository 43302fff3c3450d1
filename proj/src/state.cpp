#include "gvl/state.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "gvl/printer.hpp"

namespace gvl {

void pcPush(PathCondition& pc, TermId id, TermId bc) { pc.layers.push_back({id, bc, {}}); }

void pcAdd(PathCondition& pc, TermId t) {
    if (pc.layers.empty()) throw InternalError("pcAdd on empty path condition");
    auto& pcs = pc.layers.back().pcs;
    if (std::find(pcs.begin(), pcs.end(), t) == pcs.end()) pcs.push_back(t);
}

std::vector<TermId> pcAll(const PathCondition& pc) {
    std::vector<TermId> out;
    auto push = [&out](TermId t) {
        if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    };
    for (const auto& layer : pc.layers) {
        if (layer.bc != kNoTerm) push(layer.bc);
        for (TermId t : layer.pcs) push(t);
    }
    return out;
}

void havoc(Store& store, const std::vector<std::pair<std::string, Sort>>& vars,
           TermArena& arena) {
    for (const auto& [name, sort] : vars) store.set(name, arena.fresh(sort, name));
}

bool heapHasChunk(const Heap& h, const HeapChunk& c) {
    for (const auto& x : h)
        if (x.isPred == c.isPred && x.name == c.name && x.args == c.args) return true;
    return false;
}

std::string chunkStr(const TermArena& arena, const HeapChunk& c,
                     const std::function<std::string(TermId)>* namer) {
    std::ostringstream os;
    if (c.isPred) {
        os << c.name << "(";
        for (size_t i = 0; i < c.args.size(); ++i) {
            if (i) os << ",";
            os << arena.str(c.args[i], namer);
        }
        os << ")";
    } else {
        os << "acc(" << arena.str(c.args[0], namer) << "," << c.name << ","
           << arena.str(c.snapshot, namer) << ")";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Checks

static std::string bcKey(const BranchCond& bc) {
    std::ostringstream os;
    os << bc.locationNode << (bc.negated ? "!" : "+");
    if (!bc.origin.none()) {
        os << "o" << static_cast<int>(bc.origin.kind);
        if (bc.origin.stmt) os << ":" << bc.origin.stmt->span.node;
        if (bc.origin.kind == OriginKind::Loop)
            os << "p" << static_cast<int>(bc.origin.loopPhase);
        if (bc.origin.postSide) os << "post";
    }
    return os.str();
}

std::string RuntimeCheck::dedupKey() const {
    std::ostringstream os;
    // placement point: the origin statement when present, else the location
    if (!origin.none() && origin.stmt) {
        os << "o" << static_cast<int>(origin.kind) << ":" << origin.stmt->span.node;
        if (origin.kind == OriginKind::Loop) os << "p" << static_cast<int>(origin.loopPhase);
        if (origin.postSide) os << "post";
    } else {
        os << "l" << locationNode;
    }
    os << "|" << printFormula(check) << "|" << (needsSeparation ? "S" : "-") << "|";
    for (const auto& bc : bcs) os << bcKey(bc) << ";";
    return os.str();
}

static bool formulaTriviallyTrue(const FormulaPtr& f) {
    return f && f->kind == FormulaKind::Expr && f->expr &&
           f->expr->kind == ExprKind::BoolLit && f->expr->boolValue;
}

const RuntimeCheck* addCheck(CheckCollection& col, Span locationSpan, int32_t locationNode,
                             FormulaPtr check, bool needsSeparation) {
    if (formulaTriviallyTrue(check)) return nullptr;
    RuntimeCheck rc;
    rc.bcs = col.bcs;
    rc.origin = col.origin;
    rc.locationNode = locationNode;
    rc.locationSpan = locationSpan;
    rc.check = std::move(check);
    rc.needsSeparation = needsSeparation;
    std::string key = rc.dedupKey();
    for (const auto& existing : col.rcs)
        if (existing.dedupKey() == key) return &existing;
    col.rcs.push_back(std::move(rc));
    return &col.rcs.back();
}

void addBranchCond(CheckCollection& col, Span locationSpan, int32_t locationNode, ExprPtr cond,
                   bool negated) {
    BranchCond bc;
    bc.origin = col.origin;
    bc.locationNode = locationNode;
    bc.locationSpan = locationSpan;
    bc.cond = std::move(cond);
    bc.negated = negated;
    col.bcs.push_back(std::move(bc));
}

int GlobalChecks::add(const RuntimeCheck& rc) {
    std::string key = rc.dedupKey();
    for (const auto& existing : checks)
        if (existing.dedupKey() == key) return existing.id;
    RuntimeCheck copy = rc;
    copy.id = static_cast<int>(checks.size()) + 1;
    checks.push_back(std::move(copy));
    return checks.back().id;
}

// ---------------------------------------------------------------------------
// Dump

std::string describeCheck(const RuntimeCheck& rc) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < rc.bcs.size(); ++i) {
        if (i) os << " && ";
        const auto& bc = rc.bcs[i];
        if (bc.negated) os << "!(" << printExpr(bc.cond) << ")";
        else os << printExpr(bc.cond);
        os << "@" << bc.locationSpan.line;
    }
    os << "] ";
    switch (rc.origin.kind) {
        case OriginKind::None: os << "at:" << rc.locationSpan.line; break;
        case OriginKind::Call: os << "call@" << rc.origin.stmt->span.line; break;
        case OriginKind::Fold: os << "fold@" << rc.origin.stmt->span.line; break;
        case OriginKind::Unfold: os << "unfold@" << rc.origin.stmt->span.line; break;
        case OriginKind::Loop:
            os << "loop@" << rc.origin.stmt->span.line << "/";
            switch (rc.origin.loopPhase) {
                case LoopPhase::Before: os << "before"; break;
                case LoopPhase::Beginning: os << "beginning"; break;
                case LoopPhase::End: os << "end"; break;
                case LoopPhase::After: os << "after"; break;
            }
            break;
    }
    os << " " << printFormula(rc.check);
    if (rc.needsSeparation) os << " [sep]";
    return os.str();
}

StateDump dumpState(const TermArena& arena, const SymbolicState& s, bool canonical) {
    // collect atoms in presentation order for canonical naming
    std::map<TermId, std::string> names;
    int counter = 0;
    std::function<void(TermId)> visit = [&](TermId t) {
        if (t == kNoTerm) return;
        const TermNode& n = arena.node(t);
        if (n.kind == TermKind::Atom) {
            if (!names.count(t)) names[t] = "v" + std::to_string(++counter);
            return;
        }
        for (TermId a : n.args) visit(a);
    };

    auto isSnapEquation = [&](TermId t) {
        const TermNode& n = arena.node(t);
        if (n.kind == TermKind::App && n.op == TermOp::Eq)
            return arena.sortOf(n.args[0]) == Sort::Snap || arena.sortOf(n.args[1]) == Sort::Snap;
        return false;
    };

    if (canonical) {
        for (const auto& c : s.optHeap) {
            for (TermId a : c.args) visit(a);
            if (!c.isPred) visit(c.snapshot);
        }
        for (const auto& c : s.heap) {
            for (TermId a : c.args) visit(a);
            if (!c.isPred) visit(c.snapshot);
        }
        for (const auto& [n, t] : s.store.entries) visit(t);
        for (const auto& layer : s.pc.layers)
            for (TermId t : layer.pcs)
                if (!isSnapEquation(t) && !arena.isTrue(t)) visit(t);
    }

    std::function<std::string(TermId)> namer = [&](TermId t) {
        auto it = names.find(t);
        if (it != names.end()) return it->second;
        const TermNode& n = arena.node(t);
        if (canonical) {
            std::string nm = "v" + std::to_string(++counter);
            names[t] = nm;
            return nm;
        }
        return n.name.empty() ? ("a" + std::to_string(t)) : (n.name + "#" + std::to_string(t));
    };

    StateDump d;
    d.imprecise = s.isImprecise;
    for (const auto& c : s.optHeap) d.optHeap.push_back(chunkStr(arena, c, &namer));
    for (const auto& c : s.heap) d.heap.push_back(chunkStr(arena, c, &namer));
    for (const auto& [n, t] : s.store.entries) {
        if (n.rfind("$t", 0) == 0) continue;  // lowering temporaries stay out of dumps
        d.store.push_back(n + "->" + arena.str(t, &namer));
    }
    std::set<TermId> seen;
    for (const auto& layer : s.pc.layers) {
        for (TermId t : layer.pcs) {
            if (isSnapEquation(t) || arena.isTrue(t)) continue;
            if (!seen.insert(t).second) continue;
            d.pcs.push_back(arena.str(t, &namer));
        }
    }
    for (const auto& rc : s.checks.rcs) d.checks.push_back(describeCheck(rc));
    return d;
}

std::string StateDump::str() const {
    std::ostringstream os;
    auto row = [&os](const char* label, const std::vector<std::string>& xs) {
        os << label << ": ";
        if (xs.empty()) {
            os << "(empty)";
        } else {
            for (size_t i = 0; i < xs.size(); ++i) {
                if (i) os << " ; ";
                os << xs[i];
            }
        }
        os << "\n";
    };
    os << "imprecise: " << (imprecise ? "yes" : "no") << "\n";
    row("optheap", optHeap);
    row("heap", heap);
    row("store", store);
    row("pc", pcs);
    row("checks", checks);
    return os.str();
}

}  // namespace gvl
