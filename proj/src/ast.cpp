#include "gvl/ast.hpp"

namespace gvl {

const char* binOpStr(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return "&&";
        case BinOp::Or: return "||";
    }
    return "?";
}

int binOpPrec(BinOp op) {
    switch (op) {
        case BinOp::Mul:
        case BinOp::Div: return 6;
        case BinOp::Add:
        case BinOp::Sub: return 5;
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge: return 4;
        case BinOp::Eq:
        case BinOp::Ne: return 3;
        case BinOp::And: return 2;
        case BinOp::Or: return 1;
    }
    return 0;
}

bool isReservedName(const std::string& n) {
    if (n.rfind("$t", 0) == 0) return true;
    if (n.rfind("_cond_", 0) == 0) return true;
    if (n.rfind("_tempFields", 0) == 0) return true;
    if (n == "_ownedFields" || n == "_id") return true;
    if (n.rfind("$", 0) == 0) return true;
    return false;
}

ExprPtr cloneExpr(const ExprPtr& e) {
    if (!e) return nullptr;
    auto c = std::make_shared<Expr>(*e);
    for (auto& a : c->args) a = cloneExpr(a);
    return c;
}

FormulaPtr cloneFormula(const FormulaPtr& f) {
    if (!f) return nullptr;
    auto c = std::make_shared<Formula>(*f);
    c->expr = cloneExpr(c->expr);
    for (auto& a : c->args) a = cloneExpr(a);
    c->lhs = cloneFormula(c->lhs);
    c->rhs = cloneFormula(c->rhs);
    return c;
}

GradualFormula cloneGradual(const GradualFormula& g) {
    GradualFormula c = g;
    c.staticPart = cloneFormula(g.staticPart);
    return c;
}

StmtPtr cloneStmt(const StmtPtr& s) {
    if (!s) return nullptr;
    auto c = std::make_shared<Stmt>(*s);
    c->lhs = cloneExpr(c->lhs);
    c->rhs = cloneExpr(c->rhs);
    for (auto& a : c->args) a = cloneExpr(a);
    c->formula = cloneGradual(c->formula);
    for (auto& b : c->body) b = cloneStmt(b);
    for (auto& b : c->orelse) b = cloneStmt(b);
    c->forInit = cloneStmt(c->forInit);
    c->forStep = cloneStmt(c->forStep);
    return c;
}

bool structuralEqual(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    if (a->intValue != b->intValue || a->boolValue != b->boolValue) return false;
    if (a->name != b->name) return false;
    if (a->kind == ExprKind::Binary && a->binOp != b->binOp) return false;
    if (a->kind == ExprKind::Unary && a->unOp != b->unOp) return false;
    if (a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!structuralEqual(a->args[i], b->args[i])) return false;
    return true;
}

bool structuralEqual(const FormulaPtr& a, const FormulaPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    if (a->pred != b->pred) return false;
    if (!structuralEqual(a->expr, b->expr)) return false;
    if (a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!structuralEqual(a->args[i], b->args[i])) return false;
    return structuralEqual(a->lhs, b->lhs) && structuralEqual(a->rhs, b->rhs);
}

bool structuralEqual(const GradualFormula& a, const GradualFormula& b) {
    return a.imprecise == b.imprecise && structuralEqual(a.staticPart, b.staticPart);
}

bool structuralEqual(const StmtPtr& a, const StmtPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    if (a->varName != b->varName || a->varType != b->varType) return false;
    if (a->targetVar != b->targetVar || a->fieldName != b->fieldName) return false;
    if (a->calleeOrType != b->calleeOrType || a->predName != b->predName) return false;
    if (a->hasTarget != b->hasTarget) return false;
    if (!structuralEqual(a->lhs, b->lhs) || !structuralEqual(a->rhs, b->rhs)) return false;
    if (a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!structuralEqual(a->args[i], b->args[i])) return false;
    if (!structuralEqual(a->formula, b->formula)) return false;
    auto eqVec = [](const std::vector<StmtPtr>& x, const std::vector<StmtPtr>& y) {
        if (x.size() != y.size()) return false;
        for (size_t i = 0; i < x.size(); ++i)
            if (!structuralEqual(x[i], y[i])) return false;
        return true;
    };
    if (!eqVec(a->body, b->body) || !eqVec(a->orelse, b->orelse)) return false;
    return structuralEqual(a->forInit, b->forInit) && structuralEqual(a->forStep, b->forStep);
}

bool structuralEqual(const Program& a, const Program& b) {
    if (a.records.size() != b.records.size()) return false;
    for (size_t i = 0; i < a.records.size(); ++i) {
        if (a.records[i].name != b.records[i].name) return false;
        if (a.records[i].fields.size() != b.records[i].fields.size()) return false;
        for (size_t j = 0; j < a.records[i].fields.size(); ++j) {
            if (a.records[i].fields[j].name != b.records[i].fields[j].name) return false;
            if (a.records[i].fields[j].type != b.records[i].fields[j].type) return false;
        }
    }
    if (a.predicates.size() != b.predicates.size()) return false;
    for (size_t i = 0; i < a.predicates.size(); ++i) {
        if (a.predicates[i].name != b.predicates[i].name) return false;
        if (!structuralEqual(a.predicates[i].body, b.predicates[i].body)) return false;
    }
    if (a.methods.size() != b.methods.size()) return false;
    for (size_t i = 0; i < a.methods.size(); ++i) {
        const auto& x = a.methods[i];
        const auto& y = b.methods[i];
        if (x.name != y.name || x.params.size() != y.params.size() ||
            x.returns.size() != y.returns.size())
            return false;
        for (size_t j = 0; j < x.params.size(); ++j)
            if (x.params[j].name != y.params[j].name || x.params[j].type != y.params[j].type)
                return false;
        for (size_t j = 0; j < x.returns.size(); ++j)
            if (x.returns[j].name != y.returns[j].name || x.returns[j].type != y.returns[j].type)
                return false;
        if (!structuralEqual(x.pre, y.pre) || !structuralEqual(x.post, y.post)) return false;
        if (!structuralEqual(x.body, y.body)) return false;
    }
    return true;
}

ExprPtr mkIntLit(int64_t v, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::IntLit;
    e->intValue = v;
    e->span = sp;
    e->type = TypeRef::intTy();
    return e;
}

ExprPtr mkBoolLit(bool v, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::BoolLit;
    e->boolValue = v;
    e->span = sp;
    e->type = TypeRef::boolTy();
    return e;
}

ExprPtr mkNullLit(Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::NullLit;
    e->span = sp;
    e->type = TypeRef::nullTy();
    return e;
}

ExprPtr mkVar(std::string name, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Var;
    e->name = std::move(name);
    e->span = sp;
    return e;
}

ExprPtr mkBin(BinOp op, ExprPtr a, ExprPtr b, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Binary;
    e->binOp = op;
    e->args = {std::move(a), std::move(b)};
    e->span = sp;
    return e;
}

ExprPtr mkUn(UnOp op, ExprPtr a, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Unary;
    e->unOp = op;
    e->args = {std::move(a)};
    e->span = sp;
    return e;
}

ExprPtr mkField(ExprPtr recv, std::string field, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Field;
    e->name = std::move(field);
    e->args = {std::move(recv)};
    e->span = sp;
    return e;
}

ExprPtr mkSymRef(int64_t term, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::SymRef;
    e->intValue = term;
    e->span = sp;
    return e;
}

FormulaPtr mkFExpr(ExprPtr e) {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::Expr;
    f->span = e ? e->span : Span{};
    f->expr = std::move(e);
    return f;
}

FormulaPtr mkFAcc(ExprPtr fieldAccess) {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::AccField;
    f->span = fieldAccess ? fieldAccess->span : Span{};
    f->expr = std::move(fieldAccess);
    return f;
}

FormulaPtr mkFPred(std::string name, std::vector<ExprPtr> args, Span sp) {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::Pred;
    f->pred = std::move(name);
    f->args = std::move(args);
    f->span = sp;
    return f;
}

FormulaPtr mkFCond(ExprPtr guard, FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::Cond;
    f->span = guard ? guard->span : Span{};
    f->expr = std::move(guard);
    f->lhs = std::move(a);
    f->rhs = std::move(b);
    return f;
}

FormulaPtr mkFSep(FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::Sep;
    f->span = a ? a->span : Span{};
    f->lhs = std::move(a);
    f->rhs = std::move(b);
    return f;
}

}  // namespace gvl
