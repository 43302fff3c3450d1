#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gvl/diag.hpp"

namespace gvl {

// ---------------------------------------------------------------------------
// Types

enum class TypeKind : uint8_t { Int, Bool, Char, Void, Ref, Null, Error };

struct TypeRef {
    TypeKind kind = TypeKind::Error;
    std::string record;  // for Ref

    static TypeRef intTy() { return {TypeKind::Int, {}}; }
    static TypeRef boolTy() { return {TypeKind::Bool, {}}; }
    static TypeRef charTy() { return {TypeKind::Char, {}}; }
    static TypeRef voidTy() { return {TypeKind::Void, {}}; }
    static TypeRef nullTy() { return {TypeKind::Null, {}}; }
    static TypeRef refTy(std::string r) { return {TypeKind::Ref, std::move(r)}; }
    static TypeRef errorTy() { return {TypeKind::Error, {}}; }

    bool isRef() const { return kind == TypeKind::Ref || kind == TypeKind::Null; }
    bool operator==(const TypeRef& o) const { return kind == o.kind && record == o.record; }
    bool operator!=(const TypeRef& o) const { return !(*this == o); }

    std::string str() const {
        switch (kind) {
            case TypeKind::Int: return "int";
            case TypeKind::Bool: return "bool";
            case TypeKind::Char: return "char";
            case TypeKind::Void: return "void";
            case TypeKind::Ref: return record + "*";
            case TypeKind::Null: return "null-type";
            case TypeKind::Error: return "<error>";
        }
        return "<?>";
    }
};

// ---------------------------------------------------------------------------
// Expressions

enum class BinOp : uint8_t { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp : uint8_t { Neg, Not };

const char* binOpStr(BinOp op);
int binOpPrec(BinOp op);

enum class ExprKind : uint8_t {
    IntLit,
    BoolLit,
    CharLit,
    NullLit,
    Var,      // includes `\result`
    Unary,
    Binary,
    Field,    // recv->name
    Call,     // statement position after lowering
    Alloc,    // statement position after lowering
    Ternary,  // statement position after lowering
    Deref,    // *e, removed by lowering (value boxes)
    SymRef,   // engine-internal: an embedded symbolic value
};

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

struct Expr {
    ExprKind kind;
    Span span;
    TypeRef type;  // filled by the type checker

    int64_t intValue = 0;  // IntLit; CharLit code; SymRef term id
    bool boolValue = false;
    std::string name;  // Var/Field/Call/Alloc name
    BinOp binOp = BinOp::Add;
    UnOp unOp = UnOp::Neg;
    std::vector<ExprPtr> args;  // operands / call args / field receiver

    const ExprPtr& recv() const { return args[0]; }
};

ExprPtr cloneExpr(const ExprPtr& e);

// ---------------------------------------------------------------------------
// Formulas

enum class FormulaKind : uint8_t {
    Expr,  // boolean expression conjunct
    AccField,  // acc(e->f): expr holds the field access
    Pred,      // p(args)
    Cond,      // e ? f1 : f2
    Sep,       // f1 && f2 (separating conjunction)
};

struct Formula;
using FormulaPtr = std::shared_ptr<Formula>;

struct Formula {
    FormulaKind kind;
    Span span;
    ExprPtr expr;  // Expr / AccField access / Cond guard
    std::string pred;
    std::vector<ExprPtr> args;  // Pred args
    FormulaPtr lhs, rhs;        // Sep operands; Cond branches
};

FormulaPtr cloneFormula(const FormulaPtr& f);

// Gradual formula: optional leading `?` joined to a static part.
// A bare `?` has imprecise=true and staticPart = the literal true.
struct GradualFormula {
    bool imprecise = false;
    FormulaPtr staticPart;
    Span span;
};

GradualFormula cloneGradual(const GradualFormula& g);

// ---------------------------------------------------------------------------
// Statements

enum class StmtKind : uint8_t {
    Block,
    VarDecl,      // T x;  (init folded into a following Assign by the parser)
    Assign,       // lhs = e;   core form: lhs is Var
    FieldAssign,  // x->f = e;  core form produced by lowering
    AllocAssign,  // x = alloc(S);
    Call,         // [x =] m(args);
    AssertDyn,    // assert(e);
    AssertStatic, // //@assert f;
    Fold,
    Unfold,
    If,
    While,
    Return,       // removed by lowering
    For,          // removed by lowering
};

struct Stmt;
using StmtPtr = std::shared_ptr<Stmt>;

struct Stmt {
    StmtKind kind;
    Span span;

    // VarDecl
    std::string varName;
    TypeRef varType;

    // Assign / FieldAssign / AllocAssign / Call / Return
    ExprPtr lhs;               // assignment target (general lvalue pre-lowering)
    ExprPtr rhs;               // assigned expression / returned expression / condition
    std::string targetVar;     // core: assignment target variable
    std::string fieldName;     // core FieldAssign
    std::string calleeOrType;  // Call method name / AllocAssign record name
    std::vector<ExprPtr> args;

    // Fold/Unfold
    std::string predName;

    // AssertStatic formula / While invariant
    GradualFormula formula;

    // structured statements
    std::vector<StmtPtr> body;   // Block stmts / If then / While body / For body
    std::vector<StmtPtr> orelse; // If else
    StmtPtr forInit, forStep;    // For

    bool hasTarget = false;  // Call with result binding
};

StmtPtr cloneStmt(const StmtPtr& s);

// ---------------------------------------------------------------------------
// Declarations

struct Param {
    std::string name;
    TypeRef type;
    Span span;
};

struct RecordDecl {
    std::string name;
    std::vector<Param> fields;  // declaration order = runtime field index
    Span span;
    bool builtin = false;

    int fieldIndex(const std::string& f) const {
        for (size_t i = 0; i < fields.size(); ++i)
            if (fields[i].name == f) return static_cast<int>(i);
        return -1;
    }
};

struct PredicateDecl {
    std::string name;
    std::vector<Param> params;
    GradualFormula body;
    Span span;
};

struct MethodDecl {
    std::string name;
    std::vector<Param> params;
    std::vector<Param> returns;  // 0 or 1 entries
    GradualFormula pre, post;
    StmtPtr body;  // Block; null for intrinsics
    Span span;
    bool intrinsic = false;
};

struct Program {
    std::vector<RecordDecl> records;
    std::vector<PredicateDecl> predicates;
    std::vector<MethodDecl> methods;
    std::string sourceName = "<input>";
    int32_t nextNodeId = 0;

    int32_t freshNodeId() { return nextNodeId++; }

    const RecordDecl* record(const std::string& n) const {
        for (auto& r : records)
            if (r.name == n) return &r;
        return nullptr;
    }
    const PredicateDecl* predicate(const std::string& n) const {
        for (auto& p : predicates)
            if (p.name == n) return &p;
        return nullptr;
    }
    const MethodDecl* method(const std::string& n) const {
        for (auto& m : methods)
            if (m.name == n) return &m;
        return nullptr;
    }
    MethodDecl* method(const std::string& n) {
        for (auto& m : methods)
            if (m.name == n) return &m;
        return nullptr;
    }
};

// The name bound to a method's return value inside postconditions.
inline const std::string kResultVar = "\\result";

// Reserved name prefixes (rejected in user source, used by lowering and the
// instrumenter).
bool isReservedName(const std::string& name);

// Structural equality ignoring spans and node ids.
bool structuralEqual(const ExprPtr& a, const ExprPtr& b);
bool structuralEqual(const FormulaPtr& a, const FormulaPtr& b);
bool structuralEqual(const GradualFormula& a, const GradualFormula& b);
bool structuralEqual(const StmtPtr& a, const StmtPtr& b);
bool structuralEqual(const Program& a, const Program& b);

// Convenience constructors (fresh node ids are the caller's concern; span may
// be defaulted for synthesized nodes).
ExprPtr mkIntLit(int64_t v, Span sp = {});
ExprPtr mkBoolLit(bool v, Span sp = {});
ExprPtr mkNullLit(Span sp = {});
ExprPtr mkVar(std::string name, Span sp = {});
ExprPtr mkBin(BinOp op, ExprPtr a, ExprPtr b, Span sp = {});
ExprPtr mkUn(UnOp op, ExprPtr a, Span sp = {});
ExprPtr mkField(ExprPtr recv, std::string field, Span sp = {});
ExprPtr mkSymRef(int64_t term, Span sp = {});

FormulaPtr mkFExpr(ExprPtr e);
FormulaPtr mkFAcc(ExprPtr fieldAccess);
FormulaPtr mkFPred(std::string name, std::vector<ExprPtr> args, Span sp = {});
FormulaPtr mkFCond(ExprPtr guard, FormulaPtr a, FormulaPtr b);
FormulaPtr mkFSep(FormulaPtr a, FormulaPtr b);

}  // namespace gvl
