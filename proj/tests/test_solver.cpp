#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "solver_props.hpp"

using namespace gvl;

namespace {

struct Fix {
    TermArena arena;
    Solver solver{arena};

    TermId iv(const char* n) { return arena.fresh(Sort::Int, n); }
    TermId rv(const char* n) { return arena.fresh(Sort::Ref, n); }
};

}  // namespace

TEST_CASE("is_valid: the withdraw fold query") {
    Fix f;
    TermId p1 = f.iv("p1"), p2 = f.iv("p2"), p3 = f.iv("p3"), t4 = f.iv("t4");
    std::vector<TermId> pi = {
        f.arena.ge(p1, p2),
        f.arena.ge(p2, f.arena.intConst(0)),
        f.arena.eq(t4, f.arena.sub(p1, p2)),
        f.arena.eq(p3, t4),
    };
    CHECK(f.solver.isValid(pi, f.arena.ge(p3, f.arena.intConst(0))));
}

TEST_CASE("is_valid: trivial cases") {
    Fix f;
    CHECK(f.solver.isValid({}, f.arena.mkTrue()));
    TermId x = f.iv("x");
    std::vector<TermId> pi = {f.arena.eq(x, f.arena.intConst(1))};
    CHECK_FALSE(f.solver.isValid(pi, f.arena.eq(x, f.arena.intConst(2))));
}

TEST_CASE("is_sat basics") {
    Fix f;
    TermId x = f.iv("x"), y = f.iv("y");
    CHECK(f.solver.isSat({f.arena.eq(x, f.arena.intConst(1)), f.arena.eq(y, f.arena.intConst(2))}));
    CHECK_FALSE(
        f.solver.isSat({f.arena.eq(x, f.arena.intConst(1)), f.arena.eq(x, f.arena.intConst(2))}));
}

TEST_CASE("is_sat: withdraw's optimistic assumption") {
    Fix f;
    TermId t1 = f.rv("t1"), t2 = f.rv("t2");
    TermId p1 = f.iv("p1"), p2 = f.iv("p2"), p4 = f.iv("p4");
    std::vector<TermId> pi = {
        f.arena.ne(t1, f.arena.nullConst()),
        f.arena.ne(t2, f.arena.nullConst()),
        f.arena.ge(p1, p2),
        f.arena.ge(p2, f.arena.intConst(0)),
        f.arena.ge(p4, f.arena.intConst(0)),
    };
    CHECK(f.solver.isSat(pi));
}

TEST_CASE("reference and boolean reasoning") {
    Fix f;
    TermId t1 = f.rv("t1"), t3 = f.rv("t3");

    SUBCASE("equality propagates to null facts") {
        std::vector<TermId> pi = {f.arena.ne(t1, f.arena.nullConst()), f.arena.eq(t3, t1)};
        CHECK(f.solver.isValid(pi, f.arena.ne(t3, f.arena.nullConst())));
    }

    SUBCASE("disjunction refuted by both facts") {
        std::vector<TermId> pi = {f.arena.ne(t1, f.arena.nullConst()),
                                  f.arena.ne(t3, f.arena.nullConst())};
        TermId disj = f.arena.logicalOr(f.arena.eq(t1, f.arena.nullConst()),
                                        f.arena.eq(t3, f.arena.nullConst()));
        CHECK(f.solver.isValid(pi, f.arena.logicalNot(disj)));
        CHECK_FALSE(f.solver.isSat({pi[0], pi[1], disj}));
    }
}

TEST_CASE("check_gradual") {
    Fix f;
    TermId x = f.iv("x"), y = f.iv("y");
    PathCondition pc;
    pc.init(f.arena);
    pcAdd(pc, f.arena.eq(x, f.arena.intConst(1)));

    SUBCASE("precise, provable: trivial residual") {
        auto r = f.solver.checkGradual(false, pc, f.arena.eq(x, f.arena.intConst(1)));
        CHECK(r.ok);
        REQUIRE(r.residuals.size() == 1);
        CHECK(f.arena.isTrue(r.residuals[0]));
    }

    SUBCASE("imprecise: residual is the unproven conjunct") {
        TermId t = f.arena.logicalAnd(f.arena.eq(x, f.arena.intConst(1)),
                                      f.arena.eq(y, f.arena.intConst(2)));
        auto r = f.solver.checkGradual(true, pc, t);
        CHECK(r.ok);
        REQUIRE(r.residuals.size() == 1);
        CHECK(r.residuals[0] == f.arena.eq(y, f.arena.intConst(2)));
    }

    SUBCASE("imprecise but contradictory: failure") {
        auto r = f.solver.checkGradual(true, pc, f.arena.eq(x, f.arena.intConst(2)));
        CHECK_FALSE(r.ok);
        CHECK(r.residuals.empty());
    }

    SUBCASE("precise, unprovable: failure") {
        auto r = f.solver.checkGradual(false, pc, f.arena.ge(y, f.arena.intConst(0)));
        CHECK_FALSE(r.ok);
    }

    SUBCASE("imprecise, unconstrained: residual is the whole atom") {
        TermId p4 = f.iv("p4");
        auto r = f.solver.assertGradual(true, pc, f.arena.ge(p4, f.arena.intConst(0)));
        CHECK(r.ok);
        REQUIRE(r.residuals.size() == 1);
        CHECK(r.residuals[0] == f.arena.ge(p4, f.arena.intConst(0)));
    }
}

TEST_CASE("diff") {
    Fix f;
    TermId x = f.iv("x"), y = f.iv("y");
    std::vector<TermId> pi = {f.arena.gt(x, f.arena.intConst(0))};

    SUBCASE("provable conjunct dropped") {
        TermId t = f.arena.logicalAnd(f.arena.gt(x, f.arena.intConst(0)),
                                      f.arena.gt(y, f.arena.intConst(0)));
        auto d = f.solver.diff(pi, t);
        REQUIRE(d.size() == 1);
        CHECK(d[0] == f.arena.gt(y, f.arena.intConst(0)));
    }

    SUBCASE("fully provable formula yields empty set") {
        auto d = f.solver.diff(pi, f.arena.ge(x, f.arena.intConst(1)));
        CHECK(d.empty());
    }

    SUBCASE("single unprovable atom returned whole") {
        TermId t = f.arena.gt(y, f.arena.intConst(3));
        auto d = f.solver.diff(pi, t);
        REQUIRE(d.size() == 1);
        CHECK(d[0] == t);
    }
}

TEST_CASE("cnf conversion is structural and bounded") {
    Fix f;
    TermId a = f.arena.fresh(Sort::Bool, "a"), b = f.arena.fresh(Sort::Bool, "b"),
           c = f.arena.fresh(Sort::Bool, "c");
    // a && (b || c) -> two conjuncts
    auto cs = f.solver.cnfConjuncts(f.arena.logicalAnd(a, f.arena.logicalOr(b, c)));
    CHECK(cs.size() == 2);
    // (a && b) || c -> (a || c) && (b || c)
    cs = f.solver.cnfConjuncts(f.arena.logicalOr(f.arena.logicalAnd(a, b), c));
    CHECK(cs.size() == 2);

    // distribution blowup beyond 64 clauses: whole formula as one conjunct
    TermId big = f.arena.logicalAnd(a, b);
    std::vector<TermId> atoms;
    for (int i = 0; i < 8; ++i) {
        TermId x = f.arena.fresh(Sort::Bool, "p");
        TermId y = f.arena.fresh(Sort::Bool, "q");
        atoms.push_back(f.arena.logicalAnd(x, y));
    }
    TermId disj = atoms[0];
    for (size_t i = 1; i < atoms.size(); ++i) disj = f.arena.logicalOr(disj, atoms[i]);
    cs = f.solver.cnfConjuncts(disj);  // 2^8 = 256 clauses if distributed
    CHECK(cs.size() == 1);
    (void)big;
}

TEST_CASE("integer tightening catches rational-only feasibility") {
    Fix f;
    TermId x = f.iv("x");
    // 2x >= 1 and 2x <= 1 has the rational solution x=1/2 but no integer one
    std::vector<TermId> pi = {
        f.arena.ge(f.arena.mul(f.arena.intConst(2), x), f.arena.intConst(1)),
        f.arena.le(f.arena.mul(f.arena.intConst(2), x), f.arena.intConst(1)),
    };
    CHECK_FALSE(f.solver.isSat(pi));
}

TEST_CASE("diff soundness and minimality on random formulas (sampled)") {
    auto res = props::runDiffProperties(/*seed=*/12345, /*count=*/150);
    CHECK(res.instances == 150);
    CHECK(res.soundnessViolations == 0);
    CHECK(res.minimalityViolations == 0);
    CHECK(res.sanityViolations == 0);
}

TEST_CASE("smtlib backend failure surfaces as not-proven plus a warning") {
    TermArena arena;
    // `cat` answers nothing useful; every query must come back unknown
    Solver solver(arena, makeSmtLibBackend("cat > /dev/null"));
    TermId x = arena.fresh(Sort::Int, "x");
    std::vector<TermId> pi = {arena.eq(x, arena.intConst(1))};
    // a query that needs the backend: not proven
    CHECK_FALSE(solver.isValid(pi, arena.ge(x, arena.intConst(0))));
    CHECK(!solver.warnings().empty());
}

TEST_CASE("smtlib backend against a real solver when available") {
    if (std::system("command -v z3 >/dev/null 2>&1") != 0) {
        MESSAGE("z3 not installed; skipping");
        return;
    }
    TermArena arena;
    Solver solver(arena, makeSmtLibBackend("z3 -in"));
    TermId x = arena.fresh(Sort::Int, "x");
    std::vector<TermId> pi = {arena.ge(x, arena.intConst(1))};
    CHECK(solver.isValid(pi, arena.ge(x, arena.intConst(0))));
    CHECK_FALSE(solver.isValid(pi, arena.ge(x, arena.intConst(2))));
}
