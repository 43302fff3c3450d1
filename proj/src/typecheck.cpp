#include "gvl/typecheck.hpp"

#include <map>
#include <set>

namespace gvl {

namespace {

class Checker {
public:
    Checker(Program& p, DiagList& diags) : p_(p), diags_(diags) {}

    bool run() {
        for (auto& r : p_.records) checkRecord(r);
        for (auto& d : p_.predicates) checkPredicate(d);
        for (auto& m : p_.methods) checkMethod(m);
        return diags_.ok();
    }

private:
    Program& p_;
    DiagList& diags_;
    std::map<std::string, TypeRef> vars_;
    std::set<std::string> declared_;  // all locals seen in the current method
    bool inPost_ = false;
    bool inPre_ = false;

    void err(Span sp, std::string msg) { diags_.error(sp, std::move(msg)); }

    void checkType(const TypeRef& t, Span sp) {
        if (t.kind == TypeKind::Ref && !t.record.empty() && !p_.record(t.record))
            err(sp, "unknown record type '" + t.record + "'");
    }

    void checkRecord(const RecordDecl& r) {
        for (auto& f : r.fields) {
            checkType(f.type, f.span);
            if (f.type.kind == TypeKind::Void) err(f.span, "field cannot have void type");
        }
    }

    void checkPredicate(PredicateDecl& d) {
        vars_.clear();
        declared_.clear();
        inPost_ = false;
        for (auto& prm : d.params) {
            checkType(prm.type, prm.span);
            if (!vars_.emplace(prm.name, prm.type).second)
                err(prm.span, "duplicate parameter '" + prm.name + "'");
        }
        checkFormula(d.body);
    }

    void checkMethod(MethodDecl& m) {
        if (m.intrinsic) return;
        vars_.clear();
        declared_.clear();
        for (auto& prm : m.params) {
            checkType(prm.type, prm.span);
            if (!vars_.emplace(prm.name, prm.type).second)
                err(prm.span, "duplicate parameter '" + prm.name + "'");
            declared_.insert(prm.name);
        }
        for (auto& r : m.returns) checkType(r.type, m.span);

        inPre_ = true;
        checkFormula(m.pre);
        inPre_ = false;
        // \result is visible in the postcondition and (as the lowered return
        // variable) in the body
        if (!m.returns.empty()) vars_[kResultVar] = m.returns[0].type;
        inPost_ = true;
        checkFormula(m.post);
        inPost_ = false;

        if (m.body) {
            curMethod_ = &m;
            checkStmts(m.body->body);
            curMethod_ = nullptr;
        }
        vars_.erase(kResultVar);
        // drop locals
        std::map<std::string, TypeRef> params;
        for (auto& prm : m.params) params.emplace(prm.name, prm.type);
        vars_ = std::move(params);
    }

    MethodDecl* curMethod_ = nullptr;

    void checkStmts(const std::vector<StmtPtr>& body) {
        std::vector<std::string> scoped;
        for (auto& s : body) checkStmt(s, scoped);
        for (auto& n : scoped) vars_.erase(n);
    }

    void checkStmt(const StmtPtr& s, std::vector<std::string>& scoped) {
        switch (s->kind) {
            case StmtKind::Block:
                checkStmts(s->body);
                return;
            case StmtKind::VarDecl: {
                checkType(s->varType, s->span);
                if (s->varType.kind == TypeKind::Void)
                    err(s->span, "variable cannot have void type");
                if (!declared_.insert(s->varName).second)
                    err(s->span, "redeclaration of '" + s->varName +
                                     "' (local names must be unique within a method)");
                vars_[s->varName] = s->varType;
                scoped.push_back(s->varName);
                return;
            }
            case StmtKind::Assign: {
                TypeRef lt;
                if (s->lhs) {
                    lt = checkExpr(s->lhs);
                    if (s->lhs->kind != ExprKind::Var && s->lhs->kind != ExprKind::Field &&
                        s->lhs->kind != ExprKind::Deref)
                        err(s->lhs->span, "invalid assignment target");
                } else {
                    lt = varType(s->targetVar, s->span);
                }
                TypeRef rt = checkExpr(s->rhs);
                requireAssignable(lt, rt, s->span);
                return;
            }
            case StmtKind::FieldAssign: {
                TypeRef rt = checkExpr(s->rhs);
                TypeRef vt = varType(s->targetVar, s->span);
                TypeRef ft = fieldType(vt, s->fieldName, s->span);
                requireAssignable(ft, rt, s->span);
                return;
            }
            case StmtKind::AllocAssign: {
                if (!p_.record(s->calleeOrType))
                    err(s->span, "unknown record type '" + s->calleeOrType + "'");
                TypeRef vt = varType(s->targetVar, s->span);
                requireAssignable(vt, TypeRef::refTy(s->calleeOrType), s->span);
                return;
            }
            case StmtKind::Call: {
                checkCall(s);
                return;
            }
            case StmtKind::AssertDyn: {
                TypeRef t = checkExpr(s->rhs);
                requireBool(t, s->rhs->span);
                return;
            }
            case StmtKind::AssertStatic:
                checkFormula(s->formula);
                return;
            case StmtKind::Fold:
            case StmtKind::Unfold: {
                const PredicateDecl* d = p_.predicate(s->predName);
                if (!d) {
                    err(s->span, "unknown predicate '" + s->predName + "'");
                    return;
                }
                checkArgs(s->args, d->params, s->span, "predicate '" + s->predName + "'");
                return;
            }
            case StmtKind::If: {
                TypeRef t = checkExpr(s->rhs);
                requireBool(t, s->rhs->span);
                checkStmts(s->body);
                checkStmts(s->orelse);
                return;
            }
            case StmtKind::While: {
                TypeRef t = checkExpr(s->rhs);
                requireBool(t, s->rhs->span);
                checkFormula(s->formula);
                checkStmts(s->body);
                return;
            }
            case StmtKind::Return: {
                if (!curMethod_) return;
                if (curMethod_->returns.empty()) {
                    if (s->rhs) err(s->span, "void method cannot return a value");
                } else {
                    if (!s->rhs) {
                        err(s->span, "missing return value");
                    } else {
                        TypeRef t = checkExpr(s->rhs);
                        requireAssignable(curMethod_->returns[0].type, t, s->span);
                    }
                }
                return;
            }
            case StmtKind::For: {
                // init declarations stay in scope for the condition, body, and step
                std::vector<std::string> forScope;
                if (s->forInit)
                    for (auto& st : s->forInit->body) checkStmt(st, forScope);
                TypeRef t = checkExpr(s->rhs);
                requireBool(t, s->rhs->span);
                checkFormula(s->formula);
                checkStmts(s->body);
                if (s->forStep) checkStmts(s->forStep->body);
                for (auto& n : forScope) vars_.erase(n);
                return;
            }
        }
    }

    void checkCall(const StmtPtr& s) {
        const MethodDecl* m = p_.method(s->calleeOrType);
        if (!m) {
            err(s->span, "unknown method '" + s->calleeOrType + "'");
            return;
        }
        checkArgs(s->args, m->params, s->span, "method '" + m->name + "'");
        if (s->hasTarget) {
            if (m->returns.empty()) {
                err(s->span, "method '" + m->name + "' returns void");
            } else {
                TypeRef vt = varType(s->targetVar, s->span);
                requireAssignable(vt, m->returns[0].type, s->span);
            }
        }
    }

    void checkArgs(const std::vector<ExprPtr>& args, const std::vector<Param>& params, Span sp,
                   const std::string& what) {
        if (args.size() != params.size()) {
            err(sp, what + " expects " + std::to_string(params.size()) + " argument(s), got " +
                        std::to_string(args.size()));
            return;
        }
        for (size_t i = 0; i < args.size(); ++i) {
            TypeRef at = checkExpr(args[i]);
            const TypeRef& pt = params[i].type;
            if (pt.kind == TypeKind::Ref && pt.record.empty()) {
                // intrinsic wildcard: any reference
                if (!at.isRef()) err(args[i]->span, "expected a reference argument");
                continue;
            }
            requireAssignable(pt, at, args[i]->span);
        }
    }

    TypeRef varType(const std::string& n, Span sp) {
        auto it = vars_.find(n);
        if (it == vars_.end()) {
            err(sp, "unknown identifier '" + n + "'");
            return TypeRef::errorTy();
        }
        return it->second;
    }

    TypeRef fieldType(const TypeRef& recv, const std::string& f, Span sp) {
        if (recv.kind == TypeKind::Error) return TypeRef::errorTy();
        if (recv.kind != TypeKind::Ref) {
            err(sp, "field access on non-record value");
            return TypeRef::errorTy();
        }
        const RecordDecl* r = p_.record(recv.record);
        if (!r) {
            err(sp, "unknown record type '" + recv.record + "'");
            return TypeRef::errorTy();
        }
        int idx = r->fieldIndex(f);
        if (idx < 0) {
            err(sp, "record '" + r->name + "' has no field '" + f + "'");
            return TypeRef::errorTy();
        }
        return r->fields[idx].type;
    }

    void requireBool(const TypeRef& t, Span sp) {
        if (t.kind != TypeKind::Bool && t.kind != TypeKind::Error)
            err(sp, "expected a boolean expression, got " + t.str());
    }

    void requireAssignable(const TypeRef& to, const TypeRef& from, Span sp) {
        if (to.kind == TypeKind::Error || from.kind == TypeKind::Error) return;
        if (to == from) return;
        if (to.kind == TypeKind::Ref && from.kind == TypeKind::Null) return;
        err(sp, "type mismatch: cannot use " + from.str() + " where " + to.str() + " is expected");
    }

    TypeRef checkExpr(const ExprPtr& e) {
        if (!e) return TypeRef::errorTy();
        TypeRef t = checkExprInner(e);
        e->type = t;
        return t;
    }

    TypeRef checkExprInner(const ExprPtr& e) {
        switch (e->kind) {
            case ExprKind::IntLit: return TypeRef::intTy();
            case ExprKind::BoolLit: return TypeRef::boolTy();
            case ExprKind::CharLit: return TypeRef::charTy();
            case ExprKind::NullLit: return TypeRef::nullTy();
            case ExprKind::Var: {
                if (e->name == kResultVar && inPre_) {
                    err(e->span, "\\result may not appear in preconditions");
                    return TypeRef::errorTy();
                }
                return varType(e->name, e->span);
            }
            case ExprKind::Unary: {
                TypeRef a = checkExpr(e->args[0]);
                if (e->unOp == UnOp::Neg) {
                    if (a.kind != TypeKind::Int && a.kind != TypeKind::Error)
                        err(e->span, "unary '-' expects int");
                    return TypeRef::intTy();
                }
                requireBool(a, e->span);
                return TypeRef::boolTy();
            }
            case ExprKind::Binary: {
                TypeRef a = checkExpr(e->args[0]);
                TypeRef b = checkExpr(e->args[1]);
                switch (e->binOp) {
                    case BinOp::Add:
                    case BinOp::Sub:
                    case BinOp::Mul:
                    case BinOp::Div:
                        if ((a.kind != TypeKind::Int && a.kind != TypeKind::Error) ||
                            (b.kind != TypeKind::Int && b.kind != TypeKind::Error))
                            err(e->span, std::string("operator '") + binOpStr(e->binOp) +
                                             "' expects int operands");
                        return TypeRef::intTy();
                    case BinOp::Lt:
                    case BinOp::Le:
                    case BinOp::Gt:
                    case BinOp::Ge:
                        if ((a.kind != TypeKind::Int && a.kind != TypeKind::Error) ||
                            (b.kind != TypeKind::Int && b.kind != TypeKind::Error))
                            err(e->span, std::string("operator '") + binOpStr(e->binOp) +
                                             "' expects int operands");
                        return TypeRef::boolTy();
                    case BinOp::Eq:
                    case BinOp::Ne: {
                        bool ok = (a == b) || (a.isRef() && b.isRef());
                        if (!ok && a.kind != TypeKind::Error && b.kind != TypeKind::Error)
                            err(e->span, "cannot compare " + a.str() + " with " + b.str());
                        return TypeRef::boolTy();
                    }
                    case BinOp::And:
                    case BinOp::Or:
                        requireBool(a, e->args[0]->span);
                        requireBool(b, e->args[1]->span);
                        return TypeRef::boolTy();
                }
                return TypeRef::errorTy();
            }
            case ExprKind::Field: {
                TypeRef rt = checkExpr(e->args[0]);
                return fieldType(rt, e->name, e->span);
            }
            case ExprKind::Call: {
                const MethodDecl* m = p_.method(e->name);
                if (!m) {
                    err(e->span, "unknown method '" + e->name + "'");
                    return TypeRef::errorTy();
                }
                checkArgs(e->args, m->params, e->span, "method '" + m->name + "'");
                if (m->returns.empty()) {
                    err(e->span, "void method call cannot be used as a value");
                    return TypeRef::errorTy();
                }
                return m->returns[0].type;
            }
            case ExprKind::Alloc: {
                if (!p_.record(e->name)) {
                    err(e->span, "unknown record type '" + e->name + "'");
                    return TypeRef::errorTy();
                }
                return TypeRef::refTy(e->name);
            }
            case ExprKind::Ternary: {
                TypeRef c = checkExpr(e->args[0]);
                requireBool(c, e->args[0]->span);
                TypeRef a = checkExpr(e->args[1]);
                TypeRef b = checkExpr(e->args[2]);
                if (a == b) return a;
                if (a.isRef() && b.isRef())
                    return a.kind == TypeKind::Ref ? a : b;
                err(e->span, "ternary branches have different types");
                return TypeRef::errorTy();
            }
            case ExprKind::Deref: {
                TypeRef t = checkExpr(e->args[0]);
                if (t.kind == TypeKind::Ref && t.record.rfind("$box_", 0) == 0) {
                    std::string base = t.record.substr(5);
                    if (base == "int") return TypeRef::intTy();
                    if (base == "bool") return TypeRef::boolTy();
                    if (base == "char") return TypeRef::charTy();
                }
                if (t.kind != TypeKind::Error)
                    err(e->span, "'*' applies only to value-type pointers");
                return TypeRef::errorTy();
            }
            case ExprKind::SymRef:
                err(e->span, "internal expression node in source program");
                return TypeRef::errorTy();
        }
        return TypeRef::errorTy();
    }

    void checkFormula(const GradualFormula& g) {
        if (g.staticPart) checkFormula(g.staticPart);
    }

    // formulas are never lowered, so constructs that lowering would hoist are
    // rejected outright
    void requireSpecExpr(const ExprPtr& e) {
        if (!e) return;
        if (e->kind == ExprKind::Call || e->kind == ExprKind::Alloc ||
            e->kind == ExprKind::Ternary)
            err(e->span,
                "calls, allocations, and expression ternaries are not allowed in "
                "specification formulas (use a formula conditional `e ? f1 : f2`)");
        for (auto& a : e->args) requireSpecExpr(a);
    }

    void checkFormula(const FormulaPtr& f) {
        if (!f) return;
        switch (f->kind) {
            case FormulaKind::Expr: {
                requireSpecExpr(f->expr);
                TypeRef t = checkExpr(f->expr);
                requireBool(t, f->expr ? f->expr->span : f->span);
                return;
            }
            case FormulaKind::AccField: {
                if (!f->expr || f->expr->kind != ExprKind::Field) {
                    err(f->span, "acc(...) requires a field access or a predicate instance");
                    if (f->expr) checkExpr(f->expr);
                    return;
                }
                requireSpecExpr(f->expr);
                checkExpr(f->expr);
                return;
            }
            case FormulaKind::Pred: {
                const PredicateDecl* d = p_.predicate(f->pred);
                if (!d) {
                    err(f->span, "unknown predicate '" + f->pred + "'");
                    for (auto& a : f->args) checkExpr(a);
                    return;
                }
                for (auto& a : f->args) requireSpecExpr(a);
                checkArgs(f->args, d->params, f->span, "predicate '" + f->pred + "'");
                return;
            }
            case FormulaKind::Cond: {
                requireSpecExpr(f->expr);
                TypeRef t = checkExpr(f->expr);
                requireBool(t, f->span);
                checkFormula(f->lhs);
                checkFormula(f->rhs);
                return;
            }
            case FormulaKind::Sep:
                checkFormula(f->lhs);
                checkFormula(f->rhs);
                return;
        }
    }
};

}  // namespace

bool typeCheck(Program& p, DiagList& diags) {
    Checker c(p, diags);
    return c.run();
}

}  // namespace gvl
