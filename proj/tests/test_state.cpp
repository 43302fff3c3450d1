#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "gvl/state.hpp"

using namespace gvl;

TEST_CASE("pc push/add/all") {
    TermArena arena;
    PathCondition pc;
    pc.init(arena);

    TermId a = arena.fresh(Sort::Bool, "a");
    TermId b = arena.fresh(Sort::Bool, "b");
    TermId t = arena.fresh(Sort::Bool, "t");

    SUBCASE("push creates a new layer with the branch condition") {
        pcAdd(pc, b);
        TermId id = arena.fresh(Sort::Bool, "layer");
        pcPush(pc, id, t);
        CHECK(pc.layers.size() == 2);
        CHECK(pc.layers.back().bc == t);
        CHECK(pc.layers.back().pcs.empty());
        pcAdd(pc, a);
        CHECK(pc.layers.back().pcs == std::vector<TermId>{a});

        // pc-all folds bcs and pcs of every layer
        auto all = pcAll(pc);
        CHECK(std::find(all.begin(), all.end(), arena.mkTrue()) != all.end());
        CHECK(std::find(all.begin(), all.end(), b) != all.end());
        CHECK(std::find(all.begin(), all.end(), t) != all.end());
        CHECK(std::find(all.begin(), all.end(), a) != all.end());
        CHECK(all.size() == 4);
    }

    SUBCASE("two pushes increase depth by two") {
        pcPush(pc, arena.fresh(Sort::Bool, "i1"), t);
        pcPush(pc, arena.fresh(Sort::Bool, "i2"), a);
        CHECK(pc.layers.size() == 3);
    }

    SUBCASE("pc-add has set semantics") {
        pcAdd(pc, t);
        pcAdd(pc, t);
        CHECK(pc.layers.back().pcs.size() == 1);
        auto all = pcAll(pc);
        CHECK(std::count(all.begin(), all.end(), t) == 1);
    }

    SUBCASE("pc_all(pc_add(pi,t)) == pc_all(pi) + {t}") {
        auto before = pcAll(pc);
        pcAdd(pc, t);
        auto after = pcAll(pc);
        CHECK(after.size() == before.size() + 1);
        CHECK(std::find(after.begin(), after.end(), t) != after.end());
    }
}

TEST_CASE("havoc") {
    TermArena arena;
    Store s;

    SUBCASE("maps each var to a fresh atom") {
        havoc(s, {{"x", Sort::Int}}, arena);
        TermId x = s.lookup("x");
        CHECK(x != kNoTerm);
        CHECK(arena.isAtom(x));
    }

    SUBCASE("leaves other bindings unchanged") {
        havoc(s, {{"x", Sort::Int}, {"y", Sort::Int}}, arena);
        TermId y = s.lookup("y");
        havoc(s, {{"x", Sort::Int}}, arena);
        CHECK(s.lookup("y") == y);
    }

    SUBCASE("two havocs of x give distinct atoms") {
        havoc(s, {{"x", Sort::Int}}, arena);
        TermId x1 = s.lookup("x");
        havoc(s, {{"x", Sort::Int}}, arena);
        TermId x2 = s.lookup("x");
        CHECK(x1 != x2);
    }
}

TEST_CASE("snapshot pair laws hold definitionally") {
    TermArena arena;
    TermId a = arena.fresh(Sort::Snap, "a");
    TermId b = arena.fresh(Sort::Snap, "b");
    CHECK(arena.first(arena.pair(a, b)) == a);
    CHECK(arena.second(arena.pair(a, b)) == b);

    // destructors on non-pairs are plain terms, not errors
    TermId c = arena.fresh(Sort::Snap, "c");
    TermId f = arena.first(c);
    CHECK(arena.node(f).kind == TermKind::App);

    // random snapshot trees
    std::mt19937_64 rng(42);
    std::vector<TermId> pool = {arena.unit(), a, b, c};
    for (int i = 0; i < 200; ++i) {
        TermId x = pool[rng() % pool.size()];
        TermId y = pool[rng() % pool.size()];
        TermId p = arena.pair(x, y);
        CHECK(arena.first(p) == x);
        CHECK(arena.second(p) == y);
        pool.push_back(p);
        if (rng() % 2) pool.push_back(arena.first(pool[rng() % pool.size()]));
    }
}

TEST_CASE("interning gives stable structural identity") {
    TermArena arena;
    TermId x = arena.fresh(Sort::Int, "x");
    TermId y = arena.fresh(Sort::Int, "y");
    CHECK(arena.add(x, y) == arena.add(x, y));
    CHECK(arena.intConst(7) == arena.intConst(7));
    // eq argument order is canonicalized
    CHECK(arena.eq(x, y) == arena.eq(y, x));
}

TEST_CASE("addCheck condenses duplicates and drops trivial checks") {
    TermArena arena;
    CheckCollection col;

    auto acc = mkFAcc(mkField(mkVar("a2"), "balance"));
    Span loc{21, 3, 77};

    const RuntimeCheck* c1 = addCheck(col, loc, 77, acc);
    REQUIRE(c1);
    CHECK(col.rcs.size() == 1);
    // same location/formula/bcs: condensed into the first
    addCheck(col, loc, 77, cloneFormula(acc));
    CHECK(col.rcs.size() == 1);

    // trivially-true checks are dropped
    addCheck(col, loc, 78, mkFExpr(mkBoolLit(true)));
    CHECK(col.rcs.size() == 1);

    // a different location still under origin-none is a separate check
    addCheck(col, Span{22, 3, 90}, 90, cloneFormula(acc));
    CHECK(col.rcs.size() == 2);
}

TEST_CASE("branch conditions extend subsequent checks") {
    TermArena arena;
    CheckCollection col;
    auto cond = mkBin(BinOp::Eq, mkVar("x"), mkNullLit());
    addBranchCond(col, Span{16, 7, 5}, 5, cond, /*negated=*/true);
    CHECK(col.bcs.size() == 1);
    CHECK(col.bcs[0].negated);

    auto acc = mkFAcc(mkField(mkVar("a2"), "balance"));
    const RuntimeCheck* rc = addCheck(col, Span{21, 3, 77}, 77, acc);
    REQUIRE(rc);
    CHECK(rc->bcs.size() == 1);
    CHECK(rc->bcs[0].locationNode == 5);

    // nested branch: both conditions recorded
    addBranchCond(col, Span{17, 7, 6}, 6, mkVar("b"), false);
    const RuntimeCheck* rc2 = addCheck(col, Span{23, 3, 80}, 80, cloneFormula(acc));
    REQUIRE(rc2);
    CHECK(rc2->bcs.size() == 2);
}

TEST_CASE("global check set has set semantics and stable ids") {
    GlobalChecks g;
    CheckCollection col;
    auto acc = mkFAcc(mkField(mkVar("a2"), "balance"));
    const RuntimeCheck* rc = addCheck(col, Span{21, 3, 77}, 77, acc);
    int id1 = g.add(*rc);
    int id2 = g.add(*rc);
    CHECK(id1 == id2);
    CHECK(g.checks.size() == 1);
    CHECK(g.checks[0].id == 1);
}

TEST_CASE("state dump uses the six-column layout with canonical atom names") {
    TermArena arena;
    SymbolicState s = SymbolicState::empty(arena);
    s.isImprecise = true;
    TermId t1 = arena.fresh(Sort::Ref, "t1");
    TermId p1 = arena.fresh(Sort::Int, "p1");
    s.optHeap.push_back({false, "balance", {t1}, p1});
    s.store.set("a1", t1);
    pcAdd(s.pc, arena.ne(t1, arena.nullConst()));
    // snapshot-sort equations are not displayed
    pcAdd(s.pc, arena.eq(arena.fresh(Sort::Snap, "d"), arena.unit()));

    StateDump d = dumpState(arena, s);
    CHECK(d.imprecise);
    REQUIRE(d.optHeap.size() == 1);
    CHECK(d.optHeap[0] == "acc(v1,balance,v2)");
    REQUIRE(d.store.size() == 1);
    CHECK(d.store[0] == "a1->v1");
    REQUIRE(d.pcs.size() == 1);
    CHECK(d.pcs[0] == "v1 != null");
}
