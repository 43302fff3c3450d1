#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gvl/checks_io.hpp"
#include "gvl/engine.hpp"
#include "gvl/frontend.hpp"
#include "gvl/printer.hpp"

using namespace gvl;

static std::string dataFile(const char* name) {
    return std::string(GVL_TEST_DATA) + "/" + name;
}

static std::unique_ptr<Program> load(const std::string& src) {
    DiagList diags;
    auto p = loadProgram(src, diags);
    INFO(diags.str());
    REQUIRE(p);
    return p;
}

static std::string diagText(const VerifyResult& res) {
    std::string s;
    for (auto& d : res.diagnostics) s += d.str() + "\n";
    return s;
}

static std::string checkText(const RuntimeCheck& rc) { return printFormula(rc.check); }

TEST_CASE("withdraw golden check set") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    REQUIRE(p);
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    REQUIRE(res.checks.size() == 3);

    const RuntimeCheck& c1 = res.checks[0];
    CHECK(checkText(c1) == "acc(a2->balance)");
    CHECK(c1.origin.kind == OriginKind::Fold);
    REQUIRE(c1.origin.stmt);
    CHECK(c1.origin.stmt->span.line == 19);  // fold positive(a2)
    CHECK_FALSE(c1.needsSeparation);
    REQUIRE(c1.bcs.size() == 1);
    CHECK(printExpr(c1.bcs[0].cond) == "a1 == NULL || a2 == NULL");
    CHECK(c1.bcs[0].negated);
    CHECK(c1.bcs[0].locationSpan.line == 13);
    CHECK(c1.bcs[0].origin.kind == OriginKind::None);

    const RuntimeCheck& c2 = res.checks[1];
    CHECK(checkText(c2) == "a2->balance >= 0");
    CHECK(c2.origin.kind == OriginKind::Fold);
    CHECK(c2.origin.stmt->span.line == 19);
    CHECK_FALSE(c2.needsSeparation);
    REQUIRE(c2.bcs.size() == 1);
    CHECK(c2.bcs[0].negated);

    const RuntimeCheck& c3 = res.checks[2];
    CHECK(checkText(c3) == "positive(\\result)");
    CHECK(c3.origin.kind == OriginKind::None);
    CHECK(c3.needsSeparation);
    CHECK(c3.locationSpan.line == 10);  // postcondition conjunct
    REQUIRE(c3.bcs.size() == 1);
    CHECK(c3.bcs[0].negated);
}

TEST_CASE("withdraw intermediate states match the paper trace up to renaming") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    REQUIRE(p);
    EngineOptions opts;
    opts.traceMethod = "withdraw";
    auto res = verifyProgram(*p, opts);
    REQUIRE(res.ok);
    REQUIRE(res.trace.size() == 8);

    auto row = [&](size_t i) -> const StateDump& { return res.trace[i].dump; };

    // rows 14-15: precondition produced
    CHECK(res.trace[0].label == "entry");
    CHECK_FALSE(row(0).imprecise);
    CHECK(row(0).optHeap.empty());
    CHECK(row(0).heap == std::vector<std::string>{"geqTo(v1,v2)"});
    CHECK(row(0).store ==
          std::vector<std::string>{"a1->v1", "a2->v2", "\\result->v3"});
    CHECK(row(0).pcs.empty());
    CHECK(row(0).checks.empty());

    // rows 15-16: after the unfold
    CHECK(res.trace[1].line == 12);
    CHECK(row(1).imprecise);
    CHECK(row(1).optHeap ==
          std::vector<std::string>{"acc(v1,balance,v2)", "acc(v3,balance,v4)"});
    CHECK(row(1).heap.empty());
    CHECK(row(1).pcs ==
          std::vector<std::string>{"v1 != null", "v3 != null", "v4 <= v2", "v4 >= 0"});
    CHECK(row(1).checks.empty());

    // rows 18-19: else branch entered, no state change
    CHECK(res.trace[2].label == "branch-else");
    CHECK(row(2).optHeap == row(1).optHeap);
    CHECK(row(2).pcs == row(1).pcs);

    // rows 19-20: newB bound with its defining equation
    CHECK(res.trace[3].line == 16);
    CHECK(row(3).store == std::vector<std::string>{"a1->v1", "a2->v3", "\\result->v5",
                                                   "newB->v6"});
    CHECK(row(3).pcs == std::vector<std::string>{"v1 != null", "v3 != null", "v4 <= v2",
                                                 "v4 >= 0", "(v2 - v4) == v6"});

    // rows 20-21: field assignment consumed both optimistic chunks and
    // produced a fresh one in the regular heap
    CHECK(res.trace[4].line == 17);
    CHECK(row(4).optHeap.empty());
    CHECK(row(4).heap == std::vector<std::string>{"acc(v1,balance,v2)"});
    CHECK(row(4).pcs == std::vector<std::string>{"v1 != null", "v3 != null", "v6 <= v7",
                                                 "v6 >= 0", "(v7 - v6) == v5", "v5 == v2"});
    CHECK(row(4).checks.empty());

    // rows 21-22: fold positive(a1), no checks required
    CHECK(res.trace[5].line == 18);
    CHECK(row(5).heap == std::vector<std::string>{"positive(v1)"});
    CHECK(row(5).optHeap.empty());
    CHECK(row(5).checks.empty());

    // rows 22-23: fold positive(a2) emits the two fold-site checks
    CHECK(res.trace[6].line == 19);
    CHECK(row(6).heap == std::vector<std::string>{"positive(v1)"});
    REQUIRE(row(6).checks.size() == 2);
    CHECK(row(6).checks[0] ==
          "[!(a1 == NULL || a2 == NULL)@13] fold@19 acc(a2->balance)");
    CHECK(row(6).checks[1] ==
          "[!(a1 == NULL || a2 == NULL)@13] fold@19 a2->balance >= 0");

    // rows 23-24: return value assignment adds the aliasing equation
    CHECK(res.trace[7].line == 20);
    CHECK(row(7).pcs == std::vector<std::string>{"v2 != null", "v1 != null", "v5 <= v6",
                                                 "v5 >= 0", "(v6 - v5) == v4", "v4 == v7",
                                                 "v2 == v3"});
    CHECK(row(7).checks.size() == 2);

    // the pruned then-branch contributes no rows
    for (auto& t : res.trace) CHECK(t.label != "branch-then");
}

TEST_CASE("verification is deterministic") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    REQUIRE(p);
    auto r1 = verifyProgram(*p);
    auto r2 = verifyProgram(*p);
    CHECK(serializeChecks(*p, r1) == serializeChecks(*p, r2));
}

TEST_CASE("fully precise program verifies with an empty check set") {
    auto p = load(
        "struct Cell { int v; };\n"
        "/*@ predicate pos(Cell* c) = acc(c->v) && c->v > 0; @*/\n"
        "int bump(Cell* c)\n"
        "  //@requires pos(c);\n"
        "  //@ensures pos(c) && \\result > 0;\n"
        "{\n"
        "  //@unfold pos(c);\n"
        "  int x = c->v;\n"
        "  c->v = x + 1;\n"
        "  //@fold pos(c);\n"
        "  return x;\n"
        "}\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    CHECK(res.checks.empty());
}

TEST_CASE("precise program with unprovable postcondition fails with a diagnostic") {
    auto p = load(
        "int id(int x)\n"
        "  //@requires x > 0;\n"
        "  //@ensures \\result > 1;\n"
        "{ return x; }\n");
    auto res = verifyProgram(*p);
    CHECK_FALSE(res.ok);
    REQUIRE_FALSE(res.diagnostics.empty());
    bool mentions = false;
    for (auto& d : res.diagnostics)
        if (d.message.find("establish") != std::string::npos ||
            d.message.find("\\result") != std::string::npos)
            mentions = true;
    CHECK(mentions);
}

TEST_CASE("eval: imprecise field miss adds a framing check and an optimistic chunk") {
    auto p = load(
        "struct N { int f; };\n"
        "int get(N* x)\n//@requires ?;\n//@ensures true;\n"
        "{ int a; a = x->f; int b; b = x->f; return a; }\n");
    auto res = verifyProgram(*p);
    CHECK(res.ok);
    // one check for the first read; the second read is framed by the
    // optimistic chunk
    REQUIRE(res.checks.size() == 1);
    CHECK(checkText(res.checks[0]) == "acc(x->f)");
    CHECK(res.checks[0].origin.kind == OriginKind::None);
}

TEST_CASE("precise field miss is a verification failure") {
    auto p = load(
        "struct N { int f; };\n"
        "int get(N* x)\n//@requires true;\n//@ensures true;\n"
        "{ int a; a = x->f; return a; }\n");
    auto res = verifyProgram(*p);
    CHECK_FALSE(res.ok);
}

TEST_CASE("produce: duplicate acc in a contract is rejected by well-formedness") {
    auto p = load(
        "struct N { int f; };\n"
        "void m(N* x)\n//@requires acc(x->f) && acc(x->f);\n//@ensures true;\n"
        "{ }\n");
    auto res = verifyProgram(*p);
    CHECK_FALSE(res.ok);
}

TEST_CASE("well-formedness: precise formula must be self-framed") {
    auto p = load(
        "struct N { int f; };\n"
        "void m(N* x)\n//@requires x->f == 2;\n//@ensures true;\n"
        "{ }\n");
    auto res = verifyProgram(*p);
    CHECK_FALSE(res.ok);

    auto q = load(
        "struct N { int f; };\n"
        "void m2(N* x)\n//@requires ? && x->f == 2;\n//@ensures true;\n"
        "{ }\n");
    auto res2 = verifyProgram(*q);
    INFO(diagText(res2));
    CHECK(res2.ok);  // ? frames the access
}

TEST_CASE("branch: imprecise one-sided success records a path check") {
    auto p = load(
        "void m(bool b)\n//@requires ?;\n//@ensures true;\n"
        "{ if (b) { //@assert 1 == 2;\n } else { } }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    REQUIRE(res.checks.size() == 1);
    CHECK(checkText(res.checks[0]) == "!b");
}

TEST_CASE("branch: precise states need both sides to verify") {
    auto p = load(
        "void m(bool b)\n//@requires true;\n//@ensures true;\n"
        "{ if (b) { //@assert 1 == 2;\n } else { } }\n");
    auto res = verifyProgram(*p);
    CHECK_FALSE(res.ok);
}

TEST_CASE("heap removal honors provable aliasing") {
    // consuming acc(y->f) must find x's chunk when x == y is known
    auto p = load(
        "struct N { int f; };\n"
        "void m(N* x, N* y)\n//@requires acc(x->f) && x == y;\n//@ensures acc(y->f);\n"
        "{ y->f = 1; }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    CHECK(res.checks.empty());
}

TEST_CASE("call: precondition checks resolve formals to caller arguments") {
    auto p = load(
        "struct N { int f; };\n"
        "void callee(N* arg)\n//@requires ? && arg->f > 0;\n//@ensures true;\n"
        "{ }\n"
        "void caller(N* y)\n//@requires ?;\n//@ensures true;\n"
        "{ callee(y); }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    bool sawAcc = false, sawBound = false;
    for (auto& rc : res.checks) {
        if (rc.origin.kind != OriginKind::Call) continue;
        if (checkText(rc) == "acc(y->f)") sawAcc = true;
        if (checkText(rc) == "y->f > 0") sawBound = true;
    }
    CHECK(sawAcc);
    CHECK(sawBound);
}

TEST_CASE("call with equi-recursively imprecise precondition empties the heaps") {
    auto p = load(
        "struct N { int f; };\n"
        "void callee(N* a)\n//@requires ?;\n//@ensures true;\n{ }\n"
        "void caller(N* x)\n//@requires acc(x->f);\n//@ensures acc(x->f);\n"
        "{ callee(x); }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    // the heap was wiped by the imprecise call, so the postcondition's acc
    // can only be justified by imprecision -> a run-time check appears
    CHECK(res.ok);
    bool sawAcc = false;
    for (auto& rc : res.checks)
        if (checkText(rc) == "acc(x->f)") sawAcc = true;
    CHECK(sawAcc);
}

TEST_CASE("unfold special case: field reads in branch guards of the body get checks") {
    auto p = load(
        "struct N { int f; };\n"
        "/*@ predicate P(N* x) = ? && x->f > 0 ? true : true; @*/\n"
        "int m(N* x)\n//@requires P(x);\n//@ensures true;\n"
        "{ //@unfold P(x);\n  return 1; }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    bool sawGuardAcc = false;
    for (auto& rc : res.checks)
        if (checkText(rc) == "acc(x->f)" && rc.origin.kind == OriginKind::Unfold)
            sawGuardAcc = true;
    CHECK(sawGuardAcc);
}

TEST_CASE("equi-recursive imprecision detection") {
    auto p = load(
        "struct A { int balance; };\n"
        "/*@ predicate geqTo(A* a1, A* a2) = ? && a1->balance >= a2->balance; @*/\n"
        "/*@ predicate positive(A* a) = acc(a->balance) && a->balance >= 0; @*/\n"
        "/*@ predicate viaGeq(A* x) = geqTo(x, x); @*/\n"
        "void m()\n//@requires true;\n//@ensures true;\n{ }\n");
    DiagList d;
    GradualFormula imp;
    imp.imprecise = true;
    imp.staticPart = mkFExpr(mkBoolLit(true));
    CHECK(equiRecursivelyImprecise(*p, imp));

    auto f1 = parseFormula("positive(a)", *p, d);
    REQUIRE(f1);
    CHECK_FALSE(equiRecursivelyImprecise(*p, *f1));

    auto f2 = parseFormula("geqTo(a1, a2)", *p, d);
    REQUIRE(f2);
    CHECK(equiRecursivelyImprecise(*p, *f2));

    auto f3 = parseFormula("viaGeq(x)", *p, d);
    REQUIRE(f3);
    CHECK(equiRecursivelyImprecise(*p, *f3));
}

TEST_CASE("equi-imp terminates on self-recursive predicates") {
    auto p = load(
        "struct N { int v; N* nx; };\n"
        "/*@ predicate list(N* n) = n == NULL ? true : acc(n->v) && acc(n->nx) && "
        "list(n->nx); @*/\n"
        "void m()\n//@requires true;\n//@ensures true;\n{ }\n");
    DiagList d;
    auto f = parseFormula("list(n)", *p, d);
    REQUIRE(f);
    CHECK_FALSE(equiRecursivelyImprecise(*p, *f));
}

TEST_CASE("static assert keeps heap shape but learns facts") {
    auto p = load(
        "struct N { int f; };\n"
        "int m(N* x)\n//@requires acc(x->f) && x->f > 3;\n//@ensures acc(x->f);\n"
        "{ //@assert x->f > 1;\n  int y; y = x->f; return y; }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    CHECK(res.checks.empty());
}

TEST_CASE("loop: invariant-based reasoning") {
    auto p = load(
        "int count(int n)\n//@requires n >= 0;\n//@ensures \\result >= 0;\n"
        "{ int i; i = 0;\n"
        "  while (i < n)\n  //@loop_invariant i >= 0;\n"
        "  { i = i + 1; }\n"
        "  return i; }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    CHECK(res.checks.empty());
}

TEST_CASE("loop: imprecise invariant produces checks instead of failures") {
    auto p = load(
        "struct N { int v; N* nx; };\n"
        "N* last(N* l)\n//@requires ?;\n//@ensures true;\n"
        "{ N* y; y = l;\n"
        "  while (y->nx != NULL)\n  //@loop_invariant ?;\n"
        "  { y = y->nx; }\n"
        "  return y; }\n");
    auto res = verifyProgram(*p);
    INFO(diagText(res));
    CHECK(res.ok);
    // access to y->nx is checked before the loop and at the end of the body
    bool before = false, end = false;
    for (auto& rc : res.checks) {
        if (rc.origin.kind != OriginKind::Loop) continue;
        if (checkText(rc) == "acc(y->nx)") {
            if (rc.origin.loopPhase == LoopPhase::Before) before = true;
            if (rc.origin.loopPhase == LoopPhase::End) end = true;
        }
    }
    CHECK(before);
    CHECK(end);
}

TEST_CASE("check report round-trips through serialize/parse/resolve") {
    DiagList diags;
    auto p = loadProgramFile(dataFile("withdraw.gvl"), diags);
    REQUIRE(p);
    auto res = verifyProgram(*p);
    std::string text = serializeChecks(*p, res);
    std::string err;
    auto parsed = parseChecks(text, err);
    INFO(err);
    REQUIRE(parsed);
    REQUIRE(parsed->checks.size() == res.checks.size());
    auto resolved = resolveChecks(*p, *parsed, err);
    INFO(err);
    REQUIRE(resolved.size() == res.checks.size());
    for (size_t i = 0; i < resolved.size(); ++i) {
        CHECK(printFormula(resolved[i].check) == printFormula(res.checks[i].check));
        CHECK(resolved[i].origin.kind == res.checks[i].origin.kind);
        CHECK(resolved[i].needsSeparation == res.checks[i].needsSeparation);
        CHECK(resolved[i].bcs.size() == res.checks[i].bcs.size());
    }
}
