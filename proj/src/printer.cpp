#include "gvl/printer.hpp"

#include <sstream>

namespace gvl {

namespace {

void emitExpr(std::ostream& os, const ExprPtr& e, int parentPrec);

// parentPrec: precedence of the enclosing operator; parenthesize when needed.
void emitExpr(std::ostream& os, const ExprPtr& e, int parentPrec) {
    if (!e) {
        os << "<null>";
        return;
    }
    switch (e->kind) {
        case ExprKind::IntLit: os << e->intValue; return;
        case ExprKind::BoolLit: os << (e->boolValue ? "true" : "false"); return;
        case ExprKind::CharLit: {
            char c = (char)e->intValue;
            os << '\'';
            if (c == '\n') os << "\\n";
            else if (c == '\t') os << "\\t";
            else if (c == '\0') os << "\\0";
            else if (c == '\\') os << "\\\\";
            else if (c == '\'') os << "\\'";
            else os << c;
            os << '\'';
            return;
        }
        case ExprKind::NullLit: os << "NULL"; return;
        case ExprKind::Var: os << e->name; return;
        case ExprKind::SymRef: os << "%" << e->intValue; return;
        case ExprKind::Unary: {
            os << (e->unOp == UnOp::Neg ? "-" : "!");
            emitExpr(os, e->args[0], 100);
            return;
        }
        case ExprKind::Binary: {
            int prec = binOpPrec(e->binOp);
            bool paren = prec < parentPrec;
            if (paren) os << "(";
            emitExpr(os, e->args[0], prec);
            os << " " << binOpStr(e->binOp) << " ";
            emitExpr(os, e->args[1], prec + 1);
            if (paren) os << ")";
            return;
        }
        case ExprKind::Field: {
            emitExpr(os, e->args[0], 100);
            os << "->" << e->name;
            return;
        }
        case ExprKind::Call: {
            os << e->name << "(";
            for (size_t i = 0; i < e->args.size(); ++i) {
                if (i) os << ", ";
                emitExpr(os, e->args[i], 0);
            }
            os << ")";
            return;
        }
        case ExprKind::Alloc: os << "alloc(struct " << e->name << ")"; return;
        case ExprKind::Ternary: {
            bool paren = parentPrec > 0;
            if (paren) os << "(";
            emitExpr(os, e->args[0], 1);
            os << " ? ";
            emitExpr(os, e->args[1], 0);
            os << " : ";
            emitExpr(os, e->args[2], 0);
            if (paren) os << ")";
            return;
        }
        case ExprKind::Deref: {
            os << "*";
            emitExpr(os, e->args[0], 100);
            return;
        }
    }
}

void emitFormula(std::ostream& os, const FormulaPtr& f) {
    if (!f) {
        os << "<null>";
        return;
    }
    switch (f->kind) {
        case FormulaKind::Expr:
            // keep conjuncts below '&&' precedence: parenthesize && / || exprs
            if (f->expr && f->expr->kind == ExprKind::Binary &&
                (f->expr->binOp == BinOp::And || f->expr->binOp == BinOp::Or)) {
                os << "(";
                emitExpr(os, f->expr, 0);
                os << ")";
            } else {
                emitExpr(os, f->expr, 3);
            }
            return;
        case FormulaKind::AccField:
            os << "acc(";
            emitExpr(os, f->expr, 0);
            os << ")";
            return;
        case FormulaKind::Pred:
            os << f->pred << "(";
            for (size_t i = 0; i < f->args.size(); ++i) {
                if (i) os << ", ";
                emitExpr(os, f->args[i], 0);
            }
            os << ")";
            return;
        case FormulaKind::Cond:
            // expression-only conditionals print parenthesized so they can sit
            // in the middle of a conjunction; formula conditionals are greedy
            // and therefore always last
            if (f->lhs && f->rhs && f->lhs->kind == FormulaKind::Expr &&
                f->rhs->kind == FormulaKind::Expr) {
                os << "(";
                emitExpr(os, f->expr, 1);
                os << " ? ";
                emitExpr(os, f->lhs->expr, 0);
                os << " : ";
                emitExpr(os, f->rhs->expr, 0);
                os << ")";
                return;
            }
            emitExpr(os, f->expr, 3);
            os << " ? ";
            emitFormula(os, f->lhs);
            os << " : ";
            emitFormula(os, f->rhs);
            return;
        case FormulaKind::Sep:
            emitFormula(os, f->lhs);
            os << " && ";
            emitFormula(os, f->rhs);
            return;
    }
}

std::string typeStr(const TypeRef& t) {
    switch (t.kind) {
        case TypeKind::Int: return "int";
        case TypeKind::Bool: return "bool";
        case TypeKind::Char: return "char";
        case TypeKind::Void: return "void";
        case TypeKind::Ref: return t.record + "*";
        default: return "<error>";
    }
}

void indentTo(std::ostream& os, int n) {
    for (int i = 0; i < n; ++i) os << "  ";
}

void emitStmt(std::ostream& os, const StmtPtr& s, int indent);

void emitBody(std::ostream& os, const std::vector<StmtPtr>& body, int indent) {
    os << "{\n";
    for (auto& st : body) emitStmt(os, st, indent + 1);
    indentTo(os, indent);
    os << "}";
}

void emitStmt(std::ostream& os, const StmtPtr& s, int indent) {
    if (!s) return;
    indentTo(os, indent);
    switch (s->kind) {
        case StmtKind::Block:
            emitBody(os, s->body, indent);
            os << "\n";
            return;
        case StmtKind::VarDecl:
            os << typeStr(s->varType) << " " << s->varName << ";\n";
            return;
        case StmtKind::Assign:
            if (s->lhs) emitExpr(os, s->lhs, 0);
            else os << s->targetVar;
            os << " = ";
            emitExpr(os, s->rhs, 0);
            os << ";\n";
            return;
        case StmtKind::FieldAssign:
            os << s->targetVar << "->" << s->fieldName << " = ";
            emitExpr(os, s->rhs, 0);
            os << ";\n";
            return;
        case StmtKind::AllocAssign:
            os << s->targetVar << " = alloc(struct " << s->calleeOrType << ");\n";
            return;
        case StmtKind::Call:
            if (s->hasTarget) os << s->targetVar << " = ";
            os << s->calleeOrType << "(";
            for (size_t i = 0; i < s->args.size(); ++i) {
                if (i) os << ", ";
                emitExpr(os, s->args[i], 0);
            }
            os << ");\n";
            return;
        case StmtKind::AssertDyn:
            os << "assert(";
            emitExpr(os, s->rhs, 0);
            os << ");\n";
            return;
        case StmtKind::AssertStatic:
            os << "//@assert ";
            os << printGradual(s->formula);
            os << ";\n";
            return;
        case StmtKind::Fold:
        case StmtKind::Unfold:
            os << "//@" << (s->kind == StmtKind::Fold ? "fold " : "unfold ") << s->predName << "(";
            for (size_t i = 0; i < s->args.size(); ++i) {
                if (i) os << ", ";
                emitExpr(os, s->args[i], 0);
            }
            os << ");\n";
            return;
        case StmtKind::If:
            os << "if (";
            emitExpr(os, s->rhs, 0);
            os << ") ";
            emitBody(os, s->body, indent);
            if (!s->orelse.empty()) {
                os << " else ";
                if (s->orelse.size() == 1 && s->orelse[0]->kind == StmtKind::If) {
                    std::ostringstream sub;
                    emitStmt(sub, s->orelse[0], indent);
                    std::string t = sub.str();
                    // strip leading indentation so `else if` stays on one line
                    size_t i = 0;
                    while (i < t.size() && t[i] == ' ') ++i;
                    os << t.substr(i);
                    return;
                }
                emitBody(os, s->orelse, indent);
            }
            os << "\n";
            return;
        case StmtKind::While:
            os << "while (";
            emitExpr(os, s->rhs, 0);
            os << ")\n";
            indentTo(os, indent);
            os << "//@loop_invariant " << printGradual(s->formula) << ";\n";
            indentTo(os, indent);
            emitBody(os, s->body, indent);
            os << "\n";
            return;
        case StmtKind::Return:
            os << "return";
            if (s->rhs) {
                os << " ";
                emitExpr(os, s->rhs, 0);
            }
            os << ";\n";
            return;
        case StmtKind::For:
            os << "for (";
            // init/step printed inline without trailing newline
            if (s->forInit && !s->forInit->body.empty()) {
                std::ostringstream sub;
                emitStmt(sub, s->forInit->body[0], 0);
                std::string t = sub.str();
                if (!t.empty() && t.back() == '\n') t.pop_back();
                if (!t.empty() && t.back() == ';') t.pop_back();
                os << t;
            }
            os << "; ";
            emitExpr(os, s->rhs, 0);
            os << "; ";
            if (s->forStep && !s->forStep->body.empty()) {
                std::ostringstream sub;
                emitStmt(sub, s->forStep->body[0], 0);
                std::string t = sub.str();
                if (!t.empty() && t.back() == '\n') t.pop_back();
                if (!t.empty() && t.back() == ';') t.pop_back();
                os << t;
            }
            os << ")\n";
            indentTo(os, indent);
            os << "//@loop_invariant " << printGradual(s->formula) << ";\n";
            indentTo(os, indent);
            emitBody(os, s->body, indent);
            os << "\n";
            return;
    }
}

}  // namespace

std::string printExpr(const ExprPtr& e) {
    std::ostringstream os;
    emitExpr(os, e, 0);
    return os.str();
}

std::string printFormula(const FormulaPtr& f) {
    std::ostringstream os;
    emitFormula(os, f);
    return os.str();
}

std::string printGradual(const GradualFormula& g) {
    std::ostringstream os;
    if (g.imprecise) {
        bool trivial = g.staticPart && g.staticPart->kind == FormulaKind::Expr &&
                       g.staticPart->expr && g.staticPart->expr->kind == ExprKind::BoolLit &&
                       g.staticPart->expr->boolValue;
        os << "?";
        if (!trivial) {
            os << " && ";
            emitFormula(os, g.staticPart);
        }
    } else {
        emitFormula(os, g.staticPart);
    }
    return os.str();
}

std::string printStmt(const StmtPtr& s, int indent) {
    std::ostringstream os;
    emitStmt(os, s, indent);
    return os.str();
}

std::string printProgram(const Program& p) {
    std::ostringstream os;
    for (const auto& r : p.records) {
        if (r.builtin) continue;
        os << "struct " << r.name << " {";
        for (auto& f : r.fields) os << " " << typeStr(f.type) << " " << f.name << ";";
        os << " };\n";
    }
    if (!p.records.empty()) os << "\n";
    for (const auto& d : p.predicates) {
        os << "/*@ predicate " << d.name << "(";
        for (size_t i = 0; i < d.params.size(); ++i) {
            if (i) os << ", ";
            os << typeStr(d.params[i].type) << " " << d.params[i].name;
        }
        os << ") =\n      " << printGradual(d.body) << "; @*/\n";
    }
    if (!p.predicates.empty()) os << "\n";
    for (const auto& m : p.methods) {
        if (m.intrinsic) continue;
        TypeRef ret = m.returns.empty() ? TypeRef::voidTy() : m.returns[0].type;
        os << typeStr(ret) << " " << m.name << "(";
        for (size_t i = 0; i < m.params.size(); ++i) {
            if (i) os << ", ";
            os << typeStr(m.params[i].type) << " " << m.params[i].name;
        }
        os << ")\n";
        os << "  //@requires " << printGradual(m.pre) << ";\n";
        os << "  //@ensures " << printGradual(m.post) << ";\n";
        if (m.body) {
            emitStmt(os, m.body, 0);
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace gvl
