#include "gvl/lower.hpp"

#include <functional>
#include <set>

namespace gvl {

namespace {

void collectBoxTypes(const TypeRef& t, std::set<std::string>& out) {
    if (t.kind == TypeKind::Ref && t.record.rfind("$box_", 0) == 0) out.insert(t.record);
}

void walkExprTypes(const ExprPtr& e, std::set<std::string>& out) {
    if (!e) return;
    if (e->kind == ExprKind::Alloc && e->name.rfind("$box_", 0) == 0) out.insert(e->name);
    for (auto& a : e->args) walkExprTypes(a, out);
}

void walkStmtTypes(const StmtPtr& s, std::set<std::string>& out) {
    if (!s) return;
    collectBoxTypes(s->varType, out);
    walkExprTypes(s->lhs, out);
    walkExprTypes(s->rhs, out);
    for (auto& a : s->args) walkExprTypes(a, out);
    for (auto& b : s->body) walkStmtTypes(b, out);
    for (auto& b : s->orelse) walkStmtTypes(b, out);
    walkStmtTypes(s->forInit, out);
    walkStmtTypes(s->forStep, out);
}

class Lowerer {
public:
    Lowerer(Program& p, DiagList& diags) : p_(p), diags_(diags) {}

    bool run() {
        for (auto& m : p_.methods) {
            if (m.intrinsic || !m.body) continue;
            lowerMethod(m);
        }
        return diags_.ok();
    }

private:
    Program& p_;
    DiagList& diags_;
    int tempCounter_ = 0;
    bool hasResult_ = false;

    void lowerMethod(MethodDecl& m) {
        tempCounter_ = nextTempIndex(m.body);
        hasResult_ = !m.returns.empty();
        std::vector<StmtPtr> out;
        lowerStmts(m.body->body, out, /*tail=*/true);
        m.body->body = std::move(out);
        rewriteDerefFormula(m.pre.staticPart);
        rewriteDerefFormula(m.post.staticPart);
    }

    // Continue $t numbering above any temporaries already present (keeps
    // lowering idempotent on its own output).
    int nextTempIndex(const StmtPtr& s) {
        int maxIdx = -1;
        std::function<void(const ExprPtr&)> visitE = [&](const ExprPtr& e) {
            if (!e) return;
            if (e->kind == ExprKind::Var && e->name.rfind("$t", 0) == 0) {
                try {
                    maxIdx = std::max(maxIdx, std::stoi(e->name.substr(2)));
                } catch (...) {
                }
            }
            for (auto& a : e->args) visitE(a);
        };
        std::function<void(const StmtPtr&)> visitS = [&](const StmtPtr& st) {
            if (!st) return;
            if (st->kind == StmtKind::VarDecl && st->varName.rfind("$t", 0) == 0) {
                try {
                    maxIdx = std::max(maxIdx, std::stoi(st->varName.substr(2)));
                } catch (...) {
                }
            }
            visitE(st->lhs);
            visitE(st->rhs);
            for (auto& a : st->args) visitE(a);
            for (auto& b : st->body) visitS(b);
            for (auto& b : st->orelse) visitS(b);
            visitS(st->forInit);
            visitS(st->forStep);
        };
        visitS(s);
        return maxIdx + 1;
    }

    std::string freshTemp() { return "$t" + std::to_string(tempCounter_++); }

    Span freshSpan(Span base) {
        base.node = p_.freshNodeId();
        return base;
    }

    StmtPtr mkDecl(const std::string& name, TypeRef t, Span sp) {
        auto d = std::make_shared<Stmt>();
        d->kind = StmtKind::VarDecl;
        d->span = freshSpan(sp);
        d->varName = name;
        d->varType = std::move(t);
        return d;
    }

    StmtPtr mkAssignVar(const std::string& name, ExprPtr rhs, Span sp) {
        auto a = std::make_shared<Stmt>();
        a->kind = StmtKind::Assign;
        a->span = freshSpan(sp);
        a->targetVar = name;
        a->rhs = std::move(rhs);
        return a;
    }

    ExprPtr mkTypedVar(const std::string& name, TypeRef t, Span sp) {
        auto v = mkVar(name, freshSpan(sp));
        v->type = std::move(t);
        return v;
    }

    // ---- deref rewriting (value boxes) -------------------------------------

    void rewriteDeref(ExprPtr& e) {
        if (!e) return;
        for (auto& a : e->args) rewriteDeref(a);
        if (e->kind == ExprKind::Deref) {
            ExprPtr recv = e->args[0];
            auto f = mkField(recv, "value", e->span);
            f->type = e->type;
            e = f;
        }
    }

    void rewriteDerefFormula(const FormulaPtr& f) {
        if (!f) return;
        if (f->expr) rewriteDeref(const_cast<ExprPtr&>(f->expr));
        for (auto& a : const_cast<std::vector<ExprPtr>&>(f->args)) rewriteDeref(a);
        rewriteDerefFormula(f->lhs);
        rewriteDerefFormula(f->rhs);
    }

    // ---- expression hoisting ------------------------------------------------

    bool isPure(const ExprPtr& e) {
        if (!e) return true;
        if (e->kind == ExprKind::Call || e->kind == ExprKind::Alloc ||
            e->kind == ExprKind::Ternary)
            return false;
        for (auto& a : e->args)
            if (!isPure(a)) return false;
        return true;
    }

    // Hoists calls/allocs/ternaries out of e, emitting statements into out.
    // Returns the residual core expression.
    ExprPtr hoist(ExprPtr e, std::vector<StmtPtr>& out) {
        if (!e) return e;
        rewriteDeref(e);
        return hoistInner(e, out);
    }

    ExprPtr hoistInner(ExprPtr e, std::vector<StmtPtr>& out) {
        for (auto& a : e->args) a = hoistInner(a, out);
        switch (e->kind) {
            case ExprKind::Call: {
                std::string t = freshTemp();
                out.push_back(mkDecl(t, e->type, e->span));
                auto call = std::make_shared<Stmt>();
                call->kind = StmtKind::Call;
                call->span = freshSpan(e->span);
                call->calleeOrType = e->name;
                call->args = e->args;
                call->hasTarget = true;
                call->targetVar = t;
                out.push_back(call);
                return mkTypedVar(t, e->type, e->span);
            }
            case ExprKind::Alloc: {
                std::string t = freshTemp();
                out.push_back(mkDecl(t, e->type, e->span));
                auto al = std::make_shared<Stmt>();
                al->kind = StmtKind::AllocAssign;
                al->span = freshSpan(e->span);
                al->targetVar = t;
                al->calleeOrType = e->name;
                out.push_back(al);
                return mkTypedVar(t, e->type, e->span);
            }
            case ExprKind::Ternary: {
                std::string t = freshTemp();
                out.push_back(mkDecl(t, e->type, e->span));
                auto iff = std::make_shared<Stmt>();
                iff->kind = StmtKind::If;
                iff->span = freshSpan(e->span);
                iff->rhs = e->args[0];
                std::vector<StmtPtr> thenS, elseS;
                ExprPtr a = hoistInner(e->args[1], thenS);
                thenS.push_back(mkAssignVar(t, a, e->span));
                ExprPtr b = hoistInner(e->args[2], elseS);
                elseS.push_back(mkAssignVar(t, b, e->span));
                iff->body = std::move(thenS);
                iff->orelse = std::move(elseS);
                out.push_back(iff);
                return mkTypedVar(t, e->type, e->span);
            }
            default:
                return e;
        }
    }

    // Ensures the expression is a plain variable, hoisting through a temp.
    ExprPtr asVar(ExprPtr e, std::vector<StmtPtr>& out) {
        if (e->kind == ExprKind::Var) return e;
        std::string t = freshTemp();
        out.push_back(mkDecl(t, e->type, e->span));
        out.push_back(mkAssignVar(t, e, e->span));
        return mkTypedVar(t, e->type, e->span);
    }

    // ---- statements ---------------------------------------------------------

    void lowerStmts(const std::vector<StmtPtr>& in, std::vector<StmtPtr>& out, bool tail) {
        for (size_t i = 0; i < in.size(); ++i) {
            bool last = (i + 1 == in.size());
            lowerStmt(in[i], out, tail && last);
        }
    }

    void lowerStmt(const StmtPtr& s, std::vector<StmtPtr>& out, bool tail) {
        switch (s->kind) {
            case StmtKind::Block: {
                auto blk = std::make_shared<Stmt>(*s);
                blk->body.clear();
                lowerStmts(s->body, blk->body, tail);
                out.push_back(blk);
                return;
            }
            case StmtKind::VarDecl:
                out.push_back(s);
                return;
            case StmtKind::Assign: {
                if (!s->targetVar.empty() && !s->lhs) {
                    // already core
                    auto c = std::make_shared<Stmt>(*s);
                    c->rhs = hoist(c->rhs, out);
                    out.push_back(c);
                    return;
                }
                lowerAssign(s, out);
                return;
            }
            case StmtKind::FieldAssign: {
                auto c = std::make_shared<Stmt>(*s);
                c->rhs = hoist(c->rhs, out);
                out.push_back(c);
                return;
            }
            case StmtKind::AllocAssign:
                out.push_back(s);
                return;
            case StmtKind::Call: {
                auto c = std::make_shared<Stmt>(*s);
                for (auto& a : c->args) a = hoist(a, out);
                out.push_back(c);
                return;
            }
            case StmtKind::AssertDyn: {
                auto c = std::make_shared<Stmt>(*s);
                c->rhs = hoist(c->rhs, out);
                out.push_back(c);
                return;
            }
            case StmtKind::AssertStatic:
            case StmtKind::Fold:
            case StmtKind::Unfold: {
                auto c = std::make_shared<Stmt>(*s);
                rewriteDerefFormula(c->formula.staticPart);
                for (auto& a : c->args) rewriteDeref(a);
                out.push_back(c);
                return;
            }
            case StmtKind::If: {
                auto c = std::make_shared<Stmt>(*s);
                c->rhs = hoist(c->rhs, out);
                c->body.clear();
                c->orelse.clear();
                lowerStmts(s->body, c->body, tail);
                lowerStmts(s->orelse, c->orelse, tail);
                out.push_back(c);
                return;
            }
            case StmtKind::While: {
                lowerWhile(s, out);
                return;
            }
            case StmtKind::Return: {
                if (!tail) {
                    diags_.error(s->span, "return must be the last statement on its path");
                    return;
                }
                if (s->rhs) {
                    if (!hasResult_) {
                        diags_.error(s->span, "void method cannot return a value");
                        return;
                    }
                    std::vector<StmtPtr> pre;
                    ExprPtr v = hoist(s->rhs, pre);
                    for (auto& st : pre) out.push_back(st);
                    out.push_back(mkAssignVar(kResultVar, v, s->span));
                }
                return;
            }
            case StmtKind::For: {
                // for (init; c; step) inv { body }  =>  init; while (c) inv { body; step }
                if (s->forInit) lowerStmts(s->forInit->body, out, false);
                auto w = std::make_shared<Stmt>();
                w->kind = StmtKind::While;
                w->span = s->span;
                w->rhs = s->rhs;
                w->formula = s->formula;
                w->body = s->body;
                if (s->forStep)
                    for (auto& st : s->forStep->body) w->body.push_back(st);
                lowerWhile(w, out);
                return;
            }
        }
    }

    void lowerAssign(const StmtPtr& s, std::vector<StmtPtr>& out) {
        ExprPtr lhs = s->lhs;
        rewriteDeref(lhs);
        ExprPtr rhs = s->rhs;
        rewriteDeref(rhs);

        if (lhs->kind == ExprKind::Var) {
            const std::string& x = lhs->name;
            // keep calls/allocs in statement position when directly assigned
            if (rhs->kind == ExprKind::Call) {
                auto call = std::make_shared<Stmt>();
                call->kind = StmtKind::Call;
                call->span = s->span;
                call->calleeOrType = rhs->name;
                call->args = rhs->args;
                for (auto& a : call->args) a = hoist(a, out);
                call->hasTarget = true;
                call->targetVar = x;
                out.push_back(call);
                return;
            }
            if (rhs->kind == ExprKind::Alloc) {
                auto al = std::make_shared<Stmt>();
                al->kind = StmtKind::AllocAssign;
                al->span = s->span;
                al->targetVar = x;
                al->calleeOrType = rhs->name;
                out.push_back(al);
                return;
            }
            if (rhs->kind == ExprKind::Ternary) {
                auto iff = std::make_shared<Stmt>();
                iff->kind = StmtKind::If;
                iff->span = s->span;
                iff->rhs = hoist(rhs->args[0], out);
                std::vector<StmtPtr> thenS, elseS;
                ExprPtr a = hoist(rhs->args[1], thenS);
                thenS.push_back(mkAssignVar(x, a, s->span));
                ExprPtr b = hoist(rhs->args[2], elseS);
                elseS.push_back(mkAssignVar(x, b, s->span));
                iff->body = std::move(thenS);
                iff->orelse = std::move(elseS);
                out.push_back(iff);
                return;
            }
            out.push_back(mkAssignVar(x, hoist(rhs, out), s->span));
            return;
        }

        if (lhs->kind == ExprKind::Field) {
            ExprPtr rv = hoist(rhs, out);
            ExprPtr recv = hoist(lhs->args[0], out);
            recv = asVar(recv, out);
            auto fa = std::make_shared<Stmt>();
            fa->kind = StmtKind::FieldAssign;
            fa->span = s->span;
            fa->targetVar = recv->name;
            fa->fieldName = lhs->name;
            fa->rhs = rv;
            out.push_back(fa);
            return;
        }
        diags_.error(s->span, "invalid assignment target");
    }

    void lowerWhile(const StmtPtr& s, std::vector<StmtPtr>& out) {
        auto c = std::make_shared<Stmt>(*s);
        rewriteDerefFormula(c->formula.staticPart);
        ExprPtr cond = s->rhs;
        rewriteDeref(cond);
        c->body.clear();
        if (isPure(cond)) {
            c->rhs = cond;
            lowerStmts(s->body, c->body, false);
            out.push_back(c);
            return;
        }
        // impure condition: evaluate into a temp before the loop and at the
        // end of each iteration
        std::vector<StmtPtr> prefix;
        ExprPtr v0 = hoist(cloneExpr(cond), prefix);
        std::string t = freshTemp();
        prefix.push_back(mkDecl(t, TypeRef::boolTy(), cond->span));
        prefix.push_back(mkAssignVar(t, v0, cond->span));
        for (auto& st : prefix) out.push_back(st);
        c->rhs = mkTypedVar(t, TypeRef::boolTy(), cond->span);
        lowerStmts(s->body, c->body, false);
        std::vector<StmtPtr> recompute;
        ExprPtr v1 = hoist(cloneExpr(cond), recompute);
        recompute.push_back(mkAssignVar(t, v1, cond->span));
        for (auto& st : recompute) c->body.push_back(st);
        out.push_back(c);
    }
};

}  // namespace

void addBoxRecords(Program& p) {
    std::set<std::string> boxes;
    for (auto& r : p.records)
        for (auto& f : r.fields) collectBoxTypes(f.type, boxes);
    for (auto& d : p.predicates)
        for (auto& prm : d.params) collectBoxTypes(prm.type, boxes);
    for (auto& m : p.methods) {
        for (auto& prm : m.params) collectBoxTypes(prm.type, boxes);
        for (auto& r : m.returns) collectBoxTypes(r.type, boxes);
        walkStmtTypes(m.body, boxes);
    }
    for (auto& name : boxes) {
        if (p.record(name)) continue;
        RecordDecl r;
        r.name = name;
        std::string base = name.substr(5);
        TypeRef t = base == "int"    ? TypeRef::intTy()
                    : base == "bool" ? TypeRef::boolTy()
                                     : TypeRef::charTy();
        r.fields.push_back({"value", t, {}});
        p.records.push_back(std::move(r));
    }
}

bool lowerProgram(Program& p, DiagList& diags) {
    Lowerer l(p, diags);
    return l.run();
}

bool isCoreStmt(const StmtPtr& s) {
    if (!s) return true;
    switch (s->kind) {
        case StmtKind::Return:
        case StmtKind::For:
            return false;
        case StmtKind::Assign:
            if (s->lhs) return false;
            break;
        default:
            break;
    }
    std::function<bool(const ExprPtr&)> pure = [&](const ExprPtr& e) {
        if (!e) return true;
        if (e->kind == ExprKind::Call || e->kind == ExprKind::Alloc ||
            e->kind == ExprKind::Ternary || e->kind == ExprKind::Deref)
            return false;
        for (auto& a : e->args)
            if (!pure(a)) return false;
        return true;
    };
    if (!pure(s->rhs)) return false;
    for (auto& a : s->args)
        if (!pure(a)) return false;
    for (auto& b : s->body)
        if (!isCoreStmt(b)) return false;
    for (auto& b : s->orelse)
        if (!isCoreStmt(b)) return false;
    return true;
}

}  // namespace gvl
