#include "gvl/runtime.hpp"

#include <functional>
#include <sstream>

#include "gvl/printer.hpp"

namespace gvl {

namespace {

// splitmix64: deterministic benchmark value generator
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ULL) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

struct Frame {
    std::map<std::string, Value> vars;
};

class Interp {
public:
    Interp(const Program& p, const RunOptions& opts) : prog_(p), opts_(opts), rng_(opts.seed) {}

    RunReport run() {
        RunReport rep;
        const MethodDecl* mainM = prog_.method("main");
        if (!mainM || mainM->intrinsic || !mainM->body) {
            rep.outcome = RunOutcome::RuntimeError;
            rep.message = "program has no runnable main method";
            return rep;
        }
        if (!mainM->params.empty()) {
            rep.outcome = RunOutcome::RuntimeError;
            rep.message = "main must take no parameters";
            return rep;
        }
        try {
            Value res = call(*mainM, {});
            rep.mainResult = res.kind == Value::Kind::Int ? res.i : 0;
            rep.outcome = RunOutcome::Completed;
        } catch (const VerificationError& e) {
            rep.outcome = RunOutcome::VerificationFailure;
            rep.message = e.message;
            rep.failingCheckId = e.checkId;
            rep.location = e.location;
        } catch (const RuntimeError& e) {
            rep.outcome = RunOutcome::RuntimeError;
            rep.message = e.message;
            rep.location = e.location;
        }
        rep.metrics = metrics_;
        return rep;
    }

    RuntimeHeap& heap() { return heap_; }
    RunMetrics& metrics() { return metrics_; }

private:
    const Program& prog_;
    RunOptions opts_;
    Rng rng_;
    RuntimeHeap heap_;
    std::vector<OwnedFieldsTable> tables_;
    RunMetrics metrics_;
    long steps_ = 0;
    int depth_ = 0;

    void step(Span sp) {
        if (++steps_ > opts_.maxSteps) throw RuntimeError{"step budget exceeded", sp};
    }

    OwnedFieldsTable& table(const Value& v, Span sp) {
        if (v.kind != Value::Kind::Table)
            throw RuntimeError{"expected an owned-fields table", sp};
        return tables_.at((size_t)v.i);
    }

    int64_t objId(const Value& ref, Span sp) {
        const RuntimeObject& o = heap_.obj(ref.i);
        const RecordDecl* r = prog_.record(o.record);
        if (!r) throw RuntimeError{"unknown record " + o.record, sp};
        int idx = r->fieldIndex("_id");
        if (idx < 0) throw RuntimeError{"record " + o.record + " carries no _id field", sp};
        Value v = o.fields[(size_t)idx];
        return v.i;
    }

    std::string cellName(const StmtPtr& call, int fieldIdx) {
        // acc(<receiver source text>-><field name>) reconstructed from the call
        const ExprPtr& recv = call->args[1];
        std::string fieldName = "#" + std::to_string(fieldIdx);
        if (recv->type.kind == TypeKind::Ref) {
            const RecordDecl* r = prog_.record(recv->type.record);
            if (r && fieldIdx >= 0 && fieldIdx < (int)r->fields.size())
                fieldName = r->fields[(size_t)fieldIdx].name;
        }
        return "acc(" + printExpr(recv) + "->" + fieldName + ")";
    }

    // ---- expressions -----------------------------------------------------------

    Value eval(const ExprPtr& e, Frame& f) {
        step(e->span);
        switch (e->kind) {
            case ExprKind::IntLit: return Value::intV(e->intValue);
            case ExprKind::CharLit: return Value::charV(e->intValue);
            case ExprKind::BoolLit: return Value::boolV(e->boolValue);
            case ExprKind::NullLit: return Value::nullV();
            case ExprKind::Var: {
                auto it = f.vars.find(e->name);
                if (it == f.vars.end())
                    throw RuntimeError{"unbound variable " + e->name, e->span};
                return it->second;
            }
            case ExprKind::Unary: {
                Value a = eval(e->args[0], f);
                if (e->unOp == UnOp::Neg) return Value::intV(-a.i);
                return Value::boolV(!a.b);
            }
            case ExprKind::Binary: {
                if (e->binOp == BinOp::And) {
                    Value a = eval(e->args[0], f);
                    if (!a.b) return Value::boolV(false);
                    return eval(e->args[1], f);
                }
                if (e->binOp == BinOp::Or) {
                    Value a = eval(e->args[0], f);
                    if (a.b) return Value::boolV(true);
                    return eval(e->args[1], f);
                }
                Value a = eval(e->args[0], f);
                Value b = eval(e->args[1], f);
                switch (e->binOp) {
                    case BinOp::Add: return Value::intV(a.i + b.i);
                    case BinOp::Sub: return Value::intV(a.i - b.i);
                    case BinOp::Mul: return Value::intV(a.i * b.i);
                    case BinOp::Div:
                        if (b.i == 0) throw RuntimeError{"division by zero", e->span};
                        return Value::intV(a.i / b.i);
                    case BinOp::Lt: return Value::boolV(a.i < b.i);
                    case BinOp::Le: return Value::boolV(a.i <= b.i);
                    case BinOp::Gt: return Value::boolV(a.i > b.i);
                    case BinOp::Ge: return Value::boolV(a.i >= b.i);
                    case BinOp::Eq: return Value::boolV(sameValue(a, b));
                    case BinOp::Ne: return Value::boolV(!sameValue(a, b));
                    default: throw RuntimeError{"bad operator", e->span};
                }
            }
            case ExprKind::Field: {
                Value recv = eval(e->args[0], f);
                if (recv.kind == Value::Kind::Table) {
                    if (e->name == "instCntr") return Value::intV(heap_.instCntr);
                    throw RuntimeError{"unknown table field " + e->name, e->span};
                }
                if (recv.isNull())
                    throw RuntimeError{"null dereference at " + printExpr(e), e->span};
                const RuntimeObject& o = heap_.obj(recv.i);
                const RecordDecl* r = prog_.record(o.record);
                int idx = r ? r->fieldIndex(e->name) : -1;
                if (idx < 0)
                    throw RuntimeError{"no field " + e->name + " on " + o.record, e->span};
                return o.fields[(size_t)idx];
            }
            default:
                throw RuntimeError{"non-core expression at run time", e->span};
        }
    }

    static bool sameValue(const Value& a, const Value& b) {
        if (a.kind == Value::Kind::Null || b.kind == Value::Kind::Null)
            return a.kind == b.kind;
        if ((a.kind == Value::Kind::Ref) != (b.kind == Value::Kind::Ref)) return false;
        if (a.kind == Value::Kind::Bool) return a.b == b.b;
        return a.i == b.i;
    }

    // ---- statements --------------------------------------------------------------

    // returns false when a tail assignment to \result ended the body
    void exec(const StmtPtr& s, Frame& f) {
        step(s->span);
        switch (s->kind) {
            case StmtKind::Block:
                for (auto& b : s->body) exec(b, f);
                return;
            case StmtKind::VarDecl:
                f.vars[s->varName] = defaultValue(s->varType);
                return;
            case StmtKind::Assign:
                f.vars[s->targetVar] = eval(s->rhs, f);
                return;
            case StmtKind::FieldAssign: {
                Value recv = lookup(f, s->targetVar, s->span);
                if (recv.isNull())
                    throw RuntimeError{"null dereference writing " + s->targetVar + "->" +
                                           s->fieldName,
                                       s->span};
                Value v = eval(s->rhs, f);
                RuntimeObject& o = heap_.obj(recv.i);
                const RecordDecl* r = prog_.record(o.record);
                int idx = r ? r->fieldIndex(s->fieldName) : -1;
                if (idx < 0)
                    throw RuntimeError{"no field " + s->fieldName + " on " + o.record, s->span};
                o.fields[(size_t)idx] = v;
                return;
            }
            case StmtKind::AllocAssign: {
                const RecordDecl* r = prog_.record(s->calleeOrType);
                if (!r) throw RuntimeError{"unknown record " + s->calleeOrType, s->span};
                int64_t idx = heap_.allocate(*r);
                ++metrics_.allocations;
                f.vars[s->targetVar] = Value::refV(idx);
                return;
            }
            case StmtKind::Call: {
                Value res = callStmt(s, f);
                if (s->hasTarget) f.vars[s->targetVar] = res;
                return;
            }
            case StmtKind::AssertDyn: {
                Value v = eval(s->rhs, f);
                if (!v.b)
                    throw VerificationError{
                        "assertion failed: " + printExpr(s->rhs), -1, s->span};
                return;
            }
            case StmtKind::AssertStatic:
            case StmtKind::Fold:
            case StmtKind::Unfold:
                return;  // specification statements are inert at run time
            case StmtKind::If: {
                Value c = eval(s->rhs, f);
                if (c.b)
                    for (auto& b : s->body) exec(b, f);
                else
                    for (auto& b : s->orelse) exec(b, f);
                return;
            }
            case StmtKind::While: {
                while (true) {
                    Value c = eval(s->rhs, f);
                    if (!c.b) break;
                    for (auto& b : s->body) exec(b, f);
                }
                return;
            }
            default:
                throw RuntimeError{"non-core statement at run time", s->span};
        }
    }

    Value lookup(Frame& f, const std::string& n, Span sp) {
        auto it = f.vars.find(n);
        if (it == f.vars.end()) throw RuntimeError{"unbound variable " + n, sp};
        return it->second;
    }

    Value defaultValue(const TypeRef& t) {
        switch (t.kind) {
            case TypeKind::Int: return Value::intV(0);
            case TypeKind::Char: return Value::charV(0);
            case TypeKind::Bool: return Value::boolV(false);
            default: return Value::nullV();
        }
    }

    Value call(const MethodDecl& m, std::vector<Value> args) {
        if (++depth_ > opts_.maxCallDepth) {
            --depth_;
            throw RuntimeError{"call depth exceeded in " + m.name, m.span};
        }
        Frame f;
        for (size_t i = 0; i < m.params.size(); ++i) f.vars[m.params[i].name] = args[i];
        if (!m.returns.empty()) f.vars[kResultVar] = defaultValue(m.returns[0].type);
        if (m.name.rfind("$pred_", 0) == 0) ++metrics_.predCalls;
        for (auto& s : m.body->body) exec(s, f);
        --depth_;
        if (!m.returns.empty()) return f.vars[kResultVar];
        return Value::nullV();
    }

    Value callStmt(const StmtPtr& s, Frame& f) {
        const MethodDecl* callee = prog_.method(s->calleeOrType);
        if (!callee) throw RuntimeError{"unknown method " + s->calleeOrType, s->span};
        std::vector<Value> args;
        for (auto& a : s->args) args.push_back(eval(a, f));
        if (callee->intrinsic) return intrinsic(*callee, s, args);
        if (!callee->body) throw RuntimeError{"method without body " + callee->name, s->span};
        return call(*callee, std::move(args));
    }

    // ---- intrinsics ------------------------------------------------------------------

    Value intrinsic(const MethodDecl& m, const StmtPtr& call, std::vector<Value>& args) {
        Span sp = call->span;
        const std::string& n = m.name;
        if (n == "initOwnedFields") {
            if (args[0].i > heap_.instCntr) heap_.instCntr = args[0].i;
            tables_.push_back({});
            return Value::tableV((int64_t)tables_.size() - 1);
        }
        if (n == "addStructAcc") {
            OwnedFieldsTable& t = table(args[0], sp);
            int64_t id = heap_.instCntr++;
            for (int64_t i = 0; i < args[1].i; ++i) t.insert(id, (int)i);
            return Value::intV(id);
        }
        if (n == "freshId") return Value::intV(heap_.instCntr++);
        if (n == "assertAcc") {
            ++metrics_.ownedAsserts;
            int checkId = (int)args[3].i;
            if (args[1].isNull())
                throw VerificationError{cellName(call, (int)args[2].i) +
                                            " does not hold: receiver is NULL",
                                        checkId, sp};
            OwnedFieldsTable& t = table(args[0], sp);
            int64_t id = objId(args[1], sp);
            if (!t.owned(id, (int)args[2].i))
                throw VerificationError{cellName(call, (int)args[2].i) +
                                            " does not hold: cell is not owned",
                                        checkId, sp};
            return Value::nullV();
        }
        if (n == "sepAdd") {
            ++metrics_.sepInserts;
            int checkId = (int)args[3].i;
            if (args[1].isNull())
                throw VerificationError{cellName(call, (int)args[2].i) +
                                            " does not hold: receiver is NULL",
                                        checkId, sp};
            OwnedFieldsTable& t = table(args[0], sp);
            int64_t id = objId(args[1], sp);
            if (!t.insert(id, (int)args[2].i))
                throw VerificationError{"separation violated: " +
                                            cellName(call, (int)args[2].i) +
                                            " appears twice",
                                        checkId, sp};
            return Value::nullV();
        }
        if (n == "assertFormula") {
            ++metrics_.formulaAsserts;
            if (!args[0].b)
                throw VerificationError{"check failed: " + printExpr(call->args[0]),
                                        (int)args[1].i, sp};
            return Value::nullV();
        }
        if (n == "fpMove") {
            OwnedFieldsTable* from =
                args[0].kind == Value::Kind::Table ? &table(args[0], sp) : nullptr;
            OwnedFieldsTable* to =
                args[1].kind == Value::Kind::Table ? &table(args[1], sp) : nullptr;
            if (args[2].isNull())
                throw VerificationError{"footprint transfer names a NULL receiver", -1, sp};
            int64_t id = objId(args[2], sp);
            int idx = (int)args[3].i;
            moveCell(from, to, id, idx, sp);
            // the receiver's _id cell travels with its first named cell
            const RuntimeObject& o = heap_.obj(args[2].i);
            const RecordDecl* r = prog_.record(o.record);
            int idIdx = r ? r->fieldIndex("_id") : -1;
            if (idIdx >= 0 && idIdx != idx) {
                bool present = from ? from->owned(id, idIdx) : !to->owned(id, idIdx);
                if (from ? from->owned(id, idIdx) : (to && !to->owned(id, idIdx)))
                    moveCell(from, to, id, idIdx, sp);
                (void)present;
            }
            return Value::nullV();
        }
        if (n == "ofMergeInto") {
            OwnedFieldsTable& from = table(args[0], sp);
            OwnedFieldsTable& to = table(args[1], sp);
            metrics_.fpOps += (long)from.cells.size();
            for (int64_t c : from.cells) to.cells.insert(c);
            from.cells.clear();
            return Value::nullV();
        }
        if (n == "ofClear") {
            OwnedFieldsTable& t = table(args[0], sp);
            metrics_.fpOps += (long)t.cells.size();
            t.cells.clear();
            return Value::nullV();
        }
        if (n == "workload") return Value::intV(opts_.workload);
        if (n == "randomInt") {
            if (args[0].i <= 0)
                throw RuntimeError{"randomInt bound must be positive", sp};
            return Value::intV((int64_t)(rng_.next() % (uint64_t)args[0].i));
        }
        throw RuntimeError{"unknown intrinsic " + n, sp};
    }

    void moveCell(OwnedFieldsTable* from, OwnedFieldsTable* to, int64_t id, int idx, Span sp) {
        if (from) {
            if (!from->remove(id, idx))
                throw VerificationError{
                    "contract names a cell that is not owned at the boundary", -1, sp};
        }
        if (to) to->insert(id, idx);
        ++metrics_.fpOps;
    }
};

}  // namespace

int64_t RuntimeHeap::allocate(const RecordDecl& r) {
    RuntimeObject o;
    o.record = r.name;
    for (const auto& f : r.fields) {
        switch (f.type.kind) {
            case TypeKind::Int: o.fields.push_back(Value::intV(0)); break;
            case TypeKind::Char: o.fields.push_back(Value::charV(0)); break;
            case TypeKind::Bool: o.fields.push_back(Value::boolV(false)); break;
            default: o.fields.push_back(Value::nullV());
        }
    }
    objects.push_back(std::move(o));
    return (int64_t)objects.size() - 1;
}

RunReport run(const Program& p, const RunOptions& opts) {
    Interp interp(p, opts);
    return interp.run();
}

std::string RunReport::str() const {
    std::ostringstream os;
    os << "gvl-run 1\n";
    os << "outcome ";
    switch (outcome) {
        case RunOutcome::Completed: os << "completed"; break;
        case RunOutcome::VerificationFailure: os << "verification-failure"; break;
        case RunOutcome::RuntimeError: os << "runtime-error"; break;
    }
    os << "\n";
    if (outcome != RunOutcome::Completed) {
        os << "check " << failingCheckId << "\n";
        os << "message " << message << "\n";
        os << "location " << location.line << ":" << location.col << "\n";
    } else {
        os << "result " << mainResult << "\n";
    }
    os << "metric owned_asserts " << metrics.ownedAsserts << "\n";
    os << "metric formula_asserts " << metrics.formulaAsserts << "\n";
    os << "metric pred_calls " << metrics.predCalls << "\n";
    os << "metric sep_inserts " << metrics.sepInserts << "\n";
    os << "metric fp_ops " << metrics.fpOps << "\n";
    os << "metric allocations " << metrics.allocations << "\n";
    return os.str();
}

long transferFootprint(const Program& p, RuntimeHeap& heap, const FormulaPtr& contract,
                       const std::map<std::string, Value>& env, OwnedFieldsTable* from,
                       OwnedFieldsTable* to) {
    long moved = 0;
    // tiny evaluator over the concrete environment
    std::function<Value(const ExprPtr&)> eval = [&](const ExprPtr& e) -> Value {
        switch (e->kind) {
            case ExprKind::IntLit: return Value::intV(e->intValue);
            case ExprKind::CharLit: return Value::charV(e->intValue);
            case ExprKind::BoolLit: return Value::boolV(e->boolValue);
            case ExprKind::NullLit: return Value::nullV();
            case ExprKind::Var: {
                auto it = env.find(e->name);
                if (it == env.end())
                    throw RuntimeError{"transfer: unbound variable " + e->name, e->span};
                return it->second;
            }
            case ExprKind::Unary: {
                Value a = eval(e->args[0]);
                return e->unOp == UnOp::Neg ? Value::intV(-a.i) : Value::boolV(!a.b);
            }
            case ExprKind::Binary: {
                Value a = eval(e->args[0]);
                Value b = eval(e->args[1]);
                switch (e->binOp) {
                    case BinOp::Add: return Value::intV(a.i + b.i);
                    case BinOp::Sub: return Value::intV(a.i - b.i);
                    case BinOp::Mul: return Value::intV(a.i * b.i);
                    case BinOp::Div:
                        if (b.i == 0) throw RuntimeError{"division by zero", e->span};
                        return Value::intV(a.i / b.i);
                    case BinOp::Lt: return Value::boolV(a.i < b.i);
                    case BinOp::Le: return Value::boolV(a.i <= b.i);
                    case BinOp::Gt: return Value::boolV(a.i > b.i);
                    case BinOp::Ge: return Value::boolV(a.i >= b.i);
                    case BinOp::Eq:
                        return Value::boolV(a.kind == Value::Kind::Null ||
                                                    b.kind == Value::Kind::Null
                                                ? a.kind == b.kind
                                                : (a.kind == Value::Kind::Bool ? a.b == b.b
                                                                               : a.i == b.i));
                    case BinOp::Ne: {
                        bool eq = a.kind == Value::Kind::Null || b.kind == Value::Kind::Null
                                      ? a.kind == b.kind
                                      : (a.kind == Value::Kind::Bool ? a.b == b.b
                                                                     : a.i == b.i);
                        return Value::boolV(!eq);
                    }
                    case BinOp::And: return Value::boolV(a.b && b.b);
                    case BinOp::Or: return Value::boolV(a.b || b.b);
                }
                return Value::nullV();
            }
            case ExprKind::Field: {
                Value recv = eval(e->args[0]);
                if (recv.isNull())
                    throw RuntimeError{"transfer: null dereference", e->span};
                const RuntimeObject& o = heap.obj(recv.i);
                const RecordDecl* r = p.record(o.record);
                int idx = r ? r->fieldIndex(e->name) : -1;
                if (idx < 0) throw RuntimeError{"transfer: unknown field", e->span};
                return o.fields[(size_t)idx];
            }
            default:
                throw RuntimeError{"transfer: unsupported expression", e->span};
        }
    };

    auto moveCell = [&](int64_t id, int idx, Span sp) {
        if (from) {
            if (!from->remove(id, idx))
                throw VerificationError{
                    "contract names a cell that is not owned at the boundary", -1, sp};
        }
        if (to) to->insert(id, idx);
        ++moved;
    };

    std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& f) {
        if (!f) return;
        switch (f->kind) {
            case FormulaKind::AccField: {
                Value recv = eval(f->expr->args[0]);
                if (recv.isNull())
                    throw VerificationError{"footprint transfer names a NULL receiver", -1,
                                            f->span};
                const RuntimeObject& o = heap.obj(recv.i);
                const RecordDecl* r = p.record(o.record);
                if (!r) throw RuntimeError{"transfer: unknown record", f->span};
                int idx = r->fieldIndex(f->expr->name);
                int idIdx = r->fieldIndex("_id");
                Value idv = o.fields[(size_t)(idIdx >= 0 ? idIdx : 0)];
                if (idIdx < 0) throw RuntimeError{"transfer: record has no _id", f->span};
                moveCell(idv.i, idx, f->span);
                if (idIdx != idx) {
                    bool movable = from ? from->owned(idv.i, idIdx)
                                        : (to && !to->owned(idv.i, idIdx));
                    if (movable) moveCell(idv.i, idIdx, f->span);
                }
                return;
            }
            case FormulaKind::Pred: {
                const PredicateDecl* d = p.predicate(f->pred);
                if (!d) throw RuntimeError{"transfer: unknown predicate " + f->pred, f->span};
                // equi-recursive unrolling against concrete argument values
                std::map<std::string, Value> inner;
                for (size_t i = 0; i < d->params.size(); ++i)
                    inner[d->params[i].name] = eval(f->args[i]);
                moved += transferFootprint(p, heap, d->body.staticPart, inner, from, to);
                return;
            }
            case FormulaKind::Cond: {
                Value c = eval(f->expr);
                walk(c.b ? f->lhs : f->rhs);
                return;
            }
            case FormulaKind::Sep:
                walk(f->lhs);
                walk(f->rhs);
                return;
            default:
                return;
        }
    };
    walk(contract);
    return moved;
}

}  // namespace gvl
