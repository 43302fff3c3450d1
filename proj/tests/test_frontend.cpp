#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gvl/frontend.hpp"
#include "gvl/lower.hpp"
#include "gvl/printer.hpp"
#include "gvl/typecheck.hpp"

using namespace gvl;

static std::string dataFile(const char* name) {
    return std::string(GVL_TEST_DATA) + "/" + name;
}

static std::unique_ptr<Program> mustLoad(const std::string& src) {
    DiagList diags;
    auto p = loadProgram(src, diags);
    INFO(diags.str());
    REQUIRE(p);
    return p;
}

TEST_CASE("withdraw parses: 1 record, 2 predicates, 1 method") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    INFO(diags.str());
    REQUIRE(p);
    int userRecords = 0;
    for (auto& r : p->records)
        if (!r.builtin) ++userRecords;
    CHECK(userRecords == 1);
    CHECK(p->predicates.size() == 2);
    int userMethods = 0;
    for (auto& m : p->methods)
        if (!m.intrinsic) ++userMethods;
    CHECK(userMethods == 1);
    const MethodDecl* w = p->method("withdraw");
    REQUIRE(w);
    CHECK(w->params.size() == 2);
    CHECK(w->returns.size() == 1);
    CHECK_FALSE(w->pre.imprecise);
    CHECK(w->post.imprecise);
}

TEST_CASE("empty file gives empty program") {
    DiagList diags;
    auto p = loadProgram("", diags);
    REQUIRE(p);
    for (auto& r : p->records) CHECK(r.builtin);
    CHECK(p->predicates.empty());
    for (auto& m : p->methods) CHECK(m.intrinsic);
}

TEST_CASE("two top-level ? is a parse error") {
    DiagList diags;
    auto p = loadProgram("int f()\n//@requires ? && ?;\n{ return 1; }\n", diags);
    CHECK(!p);
    CHECK(!diags.ok());
}

TEST_CASE("? must be leftmost") {
    DiagList diags;
    auto p = loadProgram("struct A { int x; };\nint f(A* a)\n//@requires acc(a->x) && ?;\n{ return 1; }\n", diags);
    CHECK(!p);
}

TEST_CASE("duplicate declaration is a parse error") {
    DiagList diags;
    auto p = loadProgram("int f() { return 1; }\nint f() { return 2; }\n", diags);
    CHECK(!p);
}

TEST_CASE("reserved identifiers rejected in user source") {
    DiagList diags;
    auto p = loadProgram("int f() { int $t1; $t1 = 2; return $t1; }", diags);
    CHECK(!p);
    DiagList diags2;
    auto p2 = loadProgram("int f(int _id) { return _id; }", diags2);
    CHECK(!p2);
}

TEST_CASE("type checking: withdraw passes") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    INFO(diags.str());
    CHECK(p);
}

TEST_CASE("type mismatch: true + 1") {
    DiagList diags;
    auto p = loadProgram("int f() { int x; x = true + 1; return x; }", diags);
    CHECK(!p);
}

TEST_CASE("acc on a local int is an error") {
    DiagList diags;
    auto p = loadProgram("int f(int x)\n//@requires acc(x);\n{ return x; }", diags);
    CHECK(!p);
    CHECK(diags.str().find("acc") != std::string::npos);
}

TEST_CASE("\\result rejected in preconditions") {
    DiagList diags;
    auto p = loadProgram("int f()\n//@requires \\result > 0;\n{ return 1; }", diags);
    CHECK(!p);
}

TEST_CASE("lowering: nested field write expands via a temporary") {
    auto p = mustLoad(
        "struct N { int v; N* n; };\n"
        "void f(N* x, int a)\n//@requires ?;\n//@ensures ?;\n"
        "{ x->n->v = a; }\n");
    const MethodDecl* m = p->method("f");
    REQUIRE(m);
    // expect: $t0 = x->n; $t0->v = a;
    REQUIRE(m->body->body.size() >= 2);
    bool sawTempDecl = false, sawFieldAssign = false;
    for (auto& s : m->body->body) {
        if (s->kind == StmtKind::VarDecl && s->varName.rfind("$t", 0) == 0) sawTempDecl = true;
        if (s->kind == StmtKind::FieldAssign && s->targetVar.rfind("$t", 0) == 0 &&
            s->fieldName == "v")
            sawFieldAssign = true;
    }
    CHECK(sawTempDecl);
    CHECK(sawFieldAssign);
}

TEST_CASE("lowering: call argument hoisted") {
    auto p = mustLoad(
        "int g(int a)\n//@requires true;\n//@ensures true;\n{ return a; }\n"
        "int f(int y)\n//@requires true;\n//@ensures true;\n"
        "{ int r; r = g(g(y)); return r; }\n");
    const MethodDecl* m = p->method("f");
    REQUIRE(m);
    int calls = 0;
    std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
        if (!s) return;
        if (s->kind == StmtKind::Call) {
            ++calls;
            for (auto& a : s->args) CHECK(a->kind != ExprKind::Call);
        }
        for (auto& b : s->body) walk(b);
        for (auto& b : s->orelse) walk(b);
    };
    for (auto& s : m->body->body) walk(s);
    CHECK(calls == 2);
}

TEST_CASE("lowering is idempotent") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    REQUIRE(p);
    // lower again; structure must not change
    DiagList diags2;
    auto before = printProgram(*p);
    REQUIRE(lowerProgram(*p, diags2));
    auto after = printProgram(*p);
    CHECK(before == after);
}

TEST_CASE("print/reparse round trip is structurally equal") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    REQUIRE(p);
    std::string text = printProgram(*p);
    DiagList diags2;
    auto q = loadProgram(text, diags2);
    INFO(text);
    INFO(diags2.str());
    REQUIRE(q);
    CHECK(structuralEqual(*p, *q));
}

TEST_CASE("for loops become while loops") {
    auto p = mustLoad(
        "int f(int n)\n//@requires n >= 0;\n//@ensures true;\n"
        "{ int s; s = 0;\n"
        "  for (int i = 0; i < n; i = i + 1)\n"
        "  //@loop_invariant true;\n"
        "  { s = s + 1; }\n"
        "  return s; }\n");
    const MethodDecl* m = p->method("f");
    bool sawWhile = false, sawFor = false;
    std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
        if (!s) return;
        if (s->kind == StmtKind::While) sawWhile = true;
        if (s->kind == StmtKind::For) sawFor = true;
        for (auto& b : s->body) walk(b);
        for (auto& b : s->orelse) walk(b);
    };
    for (auto& s : m->body->body) walk(s);
    CHECK(sawWhile);
    CHECK(!sawFor);
}

TEST_CASE("value-type pointers become box records") {
    auto p = mustLoad(
        "int f()\n//@requires true;\n//@ensures true;\n"
        "{ int* p; p = alloc(int); *p = 3; int y; y = *p; return y; }\n");
    CHECK(p->record("$box_int") != nullptr);
    const MethodDecl* m = p->method("f");
    bool sawBoxAssign = false;
    for (auto& s : m->body->body)
        if (s->kind == StmtKind::FieldAssign && s->fieldName == "value") sawBoxAssign = true;
    CHECK(sawBoxAssign);
}

TEST_CASE("return must be in tail position") {
    DiagList diags;
    auto p = loadProgram(
        "int f(int x)\n//@requires true;\n//@ensures true;\n"
        "{ return x; int y; y = 1; return y; }\n",
        diags);
    CHECK(!p);
}

TEST_CASE("ternary expressions are hoisted to statements") {
    auto p = mustLoad(
        "int f(int x)\n//@requires true;\n//@ensures true;\n"
        "{ int y; y = x > 0 ? 1 : 2; return y; }\n");
    const MethodDecl* m = p->method("f");
    bool sawIf = false;
    for (auto& s : m->body->body)
        if (s->kind == StmtKind::If) sawIf = true;
    CHECK(sawIf);
    for (auto& s : m->body->body) CHECK(isCoreStmt(s));
}
