#include "gvl/term.hpp"

#include <sstream>

namespace gvl {

namespace {

bool isCmp(TermOp op) { return op == TermOp::Eq || op == TermOp::Lt || op == TermOp::Le; }

const char* opSym(TermOp op) {
    switch (op) {
        case TermOp::Add: return "+";
        case TermOp::Sub: return "-";
        case TermOp::Mul: return "*";
        case TermOp::Div: return "/";
        case TermOp::Neg: return "-";
        case TermOp::Eq: return "==";
        case TermOp::Lt: return "<";
        case TermOp::Le: return "<=";
        case TermOp::And: return "&&";
        case TermOp::Or: return "||";
        case TermOp::Not: return "!";
        case TermOp::Pair: return "pair";
        case TermOp::First: return "first";
        case TermOp::Second: return "second";
        case TermOp::SnapOf: return "snap";
        case TermOp::IntOfSnap: return "ival";
        case TermOp::BoolOfSnap: return "bval";
        case TermOp::RefOfSnap: return "rval";
    }
    return "?";
}

}  // namespace

TermArena::TermArena() {
    trueId_ = push({TermKind::BoolConst, Sort::Bool, TermOp::Add, 0, true, {}, {}});
    falseId_ = push({TermKind::BoolConst, Sort::Bool, TermOp::Add, 0, false, {}, {}});
    nullId_ = push({TermKind::NullConst, Sort::Ref, TermOp::Add, 0, false, {}, {}});
    unitId_ = push({TermKind::Unit, Sort::Snap, TermOp::Add, 0, false, {}, {}});
}

TermId TermArena::push(TermNode n) {
    nodes_.push_back(std::move(n));
    return static_cast<TermId>(nodes_.size() - 1);
}

TermId TermArena::fresh(Sort s, const std::string& hint) {
    TermNode n;
    n.kind = TermKind::Atom;
    n.sort = s;
    n.name = hint;
    return push(std::move(n));
}

TermId TermArena::intConst(int64_t v) {
    auto it = intConsts_.find(v);
    if (it != intConsts_.end()) return it->second;
    TermNode n;
    n.kind = TermKind::IntConst;
    n.sort = Sort::Int;
    n.intValue = v;
    TermId id = push(std::move(n));
    intConsts_[v] = id;
    return id;
}

TermId TermArena::boolConst(bool b) { return b ? trueId_ : falseId_; }
TermId TermArena::nullConst() { return nullId_; }
TermId TermArena::unit() { return unitId_; }

TermId TermArena::toSnap(TermId v) {
    if (sortOf(v) == Sort::Snap) return v;
    return app(TermOp::SnapOf, {v});
}

TermId TermArena::fromSnap(TermId snap, Sort want) {
    if (sortOf(snap) == want) return snap;
    if (sortOf(snap) != Sort::Snap) throw InternalError("fromSnap: not a snapshot term");
    switch (want) {
        case Sort::Int: return app(TermOp::IntOfSnap, {snap});
        case Sort::Bool: return app(TermOp::BoolOfSnap, {snap});
        case Sort::Ref: return app(TermOp::RefOfSnap, {snap});
        case Sort::Snap: return snap;
    }
    return snap;
}

TermId TermArena::internApp(TermOp op, Sort sort, std::vector<TermId> args) {
    std::string key;
    key.reserve(8 + args.size() * 6);
    key += std::to_string(static_cast<int>(op));
    for (TermId a : args) {
        key += ',';
        key += std::to_string(a);
    }
    auto it = interned_.find(key);
    if (it != interned_.end()) return it->second;
    TermNode n;
    n.kind = TermKind::App;
    n.sort = sort;
    n.op = op;
    n.args = std::move(args);
    TermId id = push(std::move(n));
    interned_[key] = id;
    return id;
}

TermId TermArena::app(TermOp op, std::vector<TermId> args) {
    // constant folding
    auto isInt = [&](TermId t, int64_t& v) {
        if (node(t).kind == TermKind::IntConst) {
            v = node(t).intValue;
            return true;
        }
        return false;
    };
    switch (op) {
        case TermOp::Add:
        case TermOp::Sub:
        case TermOp::Mul: {
            int64_t a, b;
            if (isInt(args[0], a) && isInt(args[1], b)) {
                switch (op) {
                    case TermOp::Add: return intConst(a + b);
                    case TermOp::Sub: return intConst(a - b);
                    default: return intConst(a * b);
                }
            }
            break;
        }
        case TermOp::Div: {
            int64_t a, b;
            if (isInt(args[0], a) && isInt(args[1], b) && b != 0) return intConst(a / b);
            break;
        }
        case TermOp::Neg: {
            int64_t a;
            if (isInt(args[0], a)) return intConst(-a);
            // -x as 0 - x keeps the linear solver simple
            return app(TermOp::Sub, {intConst(0), args[0]});
        }
        case TermOp::Eq: {
            if (args[0] == args[1]) return trueId_;
            const TermNode& x = node(args[0]);
            const TermNode& y = node(args[1]);
            if (x.kind == TermKind::IntConst && y.kind == TermKind::IntConst)
                return boolConst(x.intValue == y.intValue);
            if (x.kind == TermKind::BoolConst && y.kind == TermKind::BoolConst)
                return boolConst(x.boolValue == y.boolValue);
            if (x.kind == TermKind::NullConst && y.kind == TermKind::NullConst) return trueId_;
            // canonical argument order for the hash-cons key
            if (args[0] > args[1]) std::swap(args[0], args[1]);
            break;
        }
        case TermOp::Lt: {
            int64_t a, b;
            if (isInt(args[0], a) && isInt(args[1], b)) return boolConst(a < b);
            break;
        }
        case TermOp::Le: {
            int64_t a, b;
            if (isInt(args[0], a) && isInt(args[1], b)) return boolConst(a <= b);
            break;
        }
        case TermOp::And: {
            if (isTrue(args[0])) return args[1];
            if (isTrue(args[1])) return args[0];
            if (isFalse(args[0]) || isFalse(args[1])) return falseId_;
            break;
        }
        case TermOp::Or: {
            if (isFalse(args[0])) return args[1];
            if (isFalse(args[1])) return args[0];
            if (isTrue(args[0]) || isTrue(args[1])) return trueId_;
            break;
        }
        case TermOp::Not: {
            if (isTrue(args[0])) return falseId_;
            if (isFalse(args[0])) return trueId_;
            const TermNode& x = node(args[0]);
            if (x.kind == TermKind::App && x.op == TermOp::Not) return x.args[0];
            break;
        }
        case TermOp::First: {
            const TermNode& x = node(args[0]);
            if (x.kind == TermKind::App && x.op == TermOp::Pair) return x.args[0];
            break;
        }
        case TermOp::Second: {
            const TermNode& x = node(args[0]);
            if (x.kind == TermKind::App && x.op == TermOp::Pair) return x.args[1];
            break;
        }
        case TermOp::SnapOf: {
            const TermNode& x = node(args[0]);
            // SnapOf(XOfSnap(s)) == s
            if (x.kind == TermKind::App &&
                (x.op == TermOp::IntOfSnap || x.op == TermOp::BoolOfSnap ||
                 x.op == TermOp::RefOfSnap))
                return x.args[0];
            break;
        }
        case TermOp::IntOfSnap:
        case TermOp::BoolOfSnap:
        case TermOp::RefOfSnap: {
            const TermNode& x = node(args[0]);
            if (x.kind == TermKind::App && x.op == TermOp::SnapOf) {
                Sort vs = sortOf(x.args[0]);
                if ((op == TermOp::IntOfSnap && vs == Sort::Int) ||
                    (op == TermOp::BoolOfSnap && vs == Sort::Bool) ||
                    (op == TermOp::RefOfSnap && vs == Sort::Ref))
                    return x.args[0];
            }
            break;
        }
        case TermOp::Pair:
            break;
    }
    Sort sort;
    if (isCmp(op) || op == TermOp::And || op == TermOp::Or || op == TermOp::Not ||
        op == TermOp::BoolOfSnap)
        sort = Sort::Bool;
    else if (op == TermOp::Pair || op == TermOp::First || op == TermOp::Second ||
             op == TermOp::SnapOf)
        sort = Sort::Snap;
    else if (op == TermOp::RefOfSnap)
        sort = Sort::Ref;
    else
        sort = Sort::Int;
    return internApp(op, sort, std::move(args));
}

std::string TermArena::str(TermId id, const std::function<std::string(TermId)>* namer) const {
    const TermNode& n = node(id);
    switch (n.kind) {
        case TermKind::Atom:
            if (namer) return (*namer)(id);
            return n.name.empty() ? ("a" + std::to_string(id))
                                  : (n.name + "#" + std::to_string(id));
        case TermKind::IntConst: return std::to_string(n.intValue);
        case TermKind::BoolConst: return n.boolValue ? "true" : "false";
        case TermKind::NullConst: return "null";
        case TermKind::Unit: return "unit";
        case TermKind::App: {
            std::ostringstream os;
            // for display, put the non-constant side of an equality first
            auto eqSides = [this](const TermNode& x, TermId& a, TermId& b) {
                a = x.args[0];
                b = x.args[1];
                auto isConst = [this](TermId t) {
                    TermKind k = node(t).kind;
                    return k == TermKind::IntConst || k == TermKind::BoolConst ||
                           k == TermKind::NullConst || k == TermKind::Unit;
                };
                if (isConst(a) && !isConst(b)) std::swap(a, b);
            };
            if (n.op == TermOp::Not) {
                // print `a != b` for !(a == b)
                const TermNode& x = node(n.args[0]);
                if (x.kind == TermKind::App && x.op == TermOp::Eq) {
                    TermId a, b;
                    eqSides(x, a, b);
                    os << str(a, namer) << " != " << str(b, namer);
                    return os.str();
                }
                os << "!(" << str(n.args[0], namer) << ")";
                return os.str();
            }
            if (n.op == TermOp::Eq) {
                TermId a, b;
                eqSides(n, a, b);
                auto part = [&](TermId t) {
                    const TermNode& c = node(t);
                    bool paren = c.kind == TermKind::App && c.op != TermOp::First &&
                                 c.op != TermOp::Second && c.op != TermOp::Pair;
                    return paren ? "(" + str(t, namer) + ")" : str(t, namer);
                };
                os << part(a) << " == " << part(b);
                return os.str();
            }
            if (n.op == TermOp::Pair || n.op == TermOp::First || n.op == TermOp::Second ||
                n.op == TermOp::SnapOf || n.op == TermOp::IntOfSnap ||
                n.op == TermOp::BoolOfSnap || n.op == TermOp::RefOfSnap) {
                os << opSym(n.op) << "(";
                for (size_t i = 0; i < n.args.size(); ++i) {
                    if (i) os << ", ";
                    os << str(n.args[i], namer);
                }
                os << ")";
                return os.str();
            }
            auto part = [&](TermId t) {
                const TermNode& c = node(t);
                bool paren = c.kind == TermKind::App && c.op != TermOp::First &&
                             c.op != TermOp::Second && c.op != TermOp::Pair;
                return paren ? "(" + str(t, namer) + ")" : str(t, namer);
            };
            if (n.args.size() == 2) {
                // display `c <= x` as `x >= c` (and `c < x` as `x > c`)
                if ((n.op == TermOp::Le || n.op == TermOp::Lt) &&
                    node(n.args[0]).kind == TermKind::IntConst &&
                    node(n.args[1]).kind != TermKind::IntConst) {
                    os << part(n.args[1]) << (n.op == TermOp::Le ? " >= " : " > ")
                       << part(n.args[0]);
                    return os.str();
                }
                os << part(n.args[0]) << " " << opSym(n.op) << " " << part(n.args[1]);
            } else {
                os << opSym(n.op) << part(n.args[0]);
            }
            return os.str();
        }
    }
    return "?";
}

void TermArena::collectAtoms(TermId id, std::vector<TermId>& out) const {
    const TermNode& n = node(id);
    if (n.kind == TermKind::Atom) {
        for (TermId t : out)
            if (t == id) return;
        out.push_back(id);
        return;
    }
    for (TermId a : n.args) collectAtoms(a, out);
}

}  // namespace gvl
