#include "gvl/engine.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "gvl/printer.hpp"

namespace gvl {

namespace {

Sort sortOfType(const TypeRef& t) {
    switch (t.kind) {
        case TypeKind::Int:
        case TypeKind::Char: return Sort::Int;
        case TypeKind::Bool: return Sort::Bool;
        case TypeKind::Ref:
        case TypeKind::Null: return Sort::Ref;
        default: return Sort::Int;
    }
}

// Substitution of variables by replacement expressions; occurrence spans are
// preserved so check locations keep pointing at the declaration context.
ExprPtr substExpr(const ExprPtr& e, const std::map<std::string, ExprPtr>& map) {
    if (!e) return e;
    if (e->kind == ExprKind::Var) {
        auto it = map.find(e->name);
        if (it != map.end()) {
            auto c = cloneExpr(it->second);
            c->span = e->span;
            if (c->type.kind == TypeKind::Error) c->type = e->type;
            return c;
        }
        return e;
    }
    bool changed = false;
    std::vector<ExprPtr> args;
    for (auto& a : e->args) {
        ExprPtr s = substExpr(a, map);
        changed |= (s != a);
        args.push_back(std::move(s));
    }
    if (!changed) return e;
    auto c = std::make_shared<Expr>(*e);
    c->args = std::move(args);
    return c;
}

FormulaPtr substFormula(const FormulaPtr& f, const std::map<std::string, ExprPtr>& map) {
    if (!f) return f;
    auto c = std::make_shared<Formula>(*f);
    c->expr = substExpr(f->expr, map);
    for (auto& a : c->args) a = substExpr(a, map);
    c->lhs = substFormula(f->lhs, map);
    c->rhs = substFormula(f->rhs, map);
    return c;
}

GradualFormula substGradual(const GradualFormula& g, const std::map<std::string, ExprPtr>& map) {
    GradualFormula c = g;
    c.staticPart = substFormula(g.staticPart, map);
    return c;
}

// φ̃ && e, keeping any leading `?` on the outside
GradualFormula conjoinGradual(const GradualFormula& g, FormulaPtr extra) {
    GradualFormula c = cloneGradual(g);
    auto sep = mkFSep(c.staticPart, std::move(extra));
    sep->span = c.staticPart ? c.staticPart->span : c.span;
    c.staticPart = sep;
    return c;
}


enum class EvalMode { Normal, ProduceMode, ConsumeMode };

class Engine {
public:
    Engine(const Program& p, const EngineOptions& opts)
        : prog_(p), opts_(opts),
          solver_(arena_, opts.solverCommand.empty()
                              ? makeBuiltinBackend()
                              : makeSmtLibBackend(opts.solverCommand)) {}

    VerifyResult run() {
        VerifyResult res;
        for (const auto& d : prog_.predicates) {
            bool ok = verifyPredicate(d);
            res.decls.push_back({d.name, true, ok});
        }
        for (const auto& m : prog_.methods) {
            if (m.intrinsic || !m.body) continue;
            bool ok = verifyMethod(m);
            res.decls.push_back({m.name, false, ok});
        }
        res.ok = true;
        for (auto& d : res.decls) res.ok = res.ok && d.ok;
        res.checks = global_.checks;
        res.diagnostics = diags_;
        res.trace = std::move(trace_);
        res.solverWarnings = solver_.warnings();
        res.obligationsTotal = obligationsTotal_;
        res.obligationsStatic = obligationsStatic_;
        res.solverQueries = solver_.queryCount();
        return res;
    }

private:
    const Program& prog_;
    EngineOptions opts_;
    TermArena arena_;
    Solver solver_;
    GlobalChecks global_;
    std::vector<Diag> diags_;
    std::vector<TracePoint> trace_;
    FieldOriginMap fieldOrigins_;
    bool tracing_ = false;
    std::map<std::string, TypeRef> varTypes_;  // current method's variables

    long obligationsTotal_ = 0;
    long obligationsStatic_ = 0;

    using ExecK = std::function<bool(SymbolicState)>;
    using EvalK = std::function<bool(SymbolicState, TermId)>;
    using EvalListK = std::function<bool(SymbolicState, std::vector<TermId>)>;
    using ConsK = std::function<bool(SymbolicState, TermId)>;
    using ConsPK = std::function<bool(SymbolicState, Heap, Heap, TermId)>;

    bool fail(Span sp, const std::string& msg) {
        diags_.push_back({sp, msg});
        return false;
    }

    void countObligation(bool discharged) {
        ++obligationsTotal_;
        if (discharged) ++obligationsStatic_;
    }

    // ---- helpers -----------------------------------------------------------

    ExprPtr xlate(const SymbolicState& s, TermId t) {
        return translateTerm(arena_, s, fieldOrigins_, t);
    }

    ExprPtr xlateExpr(const SymbolicState& s, const ExprPtr& e) {
        return translateExpr(arena_, s, fieldOrigins_, e);
    }

    FormulaPtr residualFormula(const SymbolicState& s, const std::vector<TermId>& residuals,
                               Span sp) {
        ExprPtr acc;
        for (TermId t : residuals) {
            if (arena_.isTrue(t)) continue;
            ExprPtr e = xlate(s, t);
            acc = acc ? mkBin(BinOp::And, acc, e, sp) : e;
        }
        if (!acc) return mkFExpr(mkBoolLit(true, sp));
        auto f = mkFExpr(acc);
        f->span = sp;
        return f;
    }

    Sort fieldSort(const ExprPtr& fieldExpr) {
        if (fieldExpr && fieldExpr->type.kind != TypeKind::Error)
            return sortOfType(fieldExpr->type);
        return Sort::Int;
    }

    std::string fieldRecord(const ExprPtr& fieldExpr) {
        if (fieldExpr && !fieldExpr->args.empty() &&
            fieldExpr->args[0]->type.kind == TypeKind::Ref)
            return fieldExpr->args[0]->type.record;
        return "";
    }

    // chunk lookup: exact receiver match first, then provable aliasing
    const HeapChunk* findFieldChunk(const SymbolicState& s, const Heap& h,
                                    const std::string& field, TermId recv) {
        for (const auto& c : h)
            if (!c.isPred && c.name == field && c.receiver() == recv) return &c;
        for (const auto& c : h) {
            if (c.isPred || c.name != field || c.receiver() == recv) continue;
            if (solver_.check(s.pc, arena_.eq(c.receiver(), recv))) return &c;
        }
        return nullptr;
    }

    void trace(const std::string& label, int line, const SymbolicState& s) {
        if (!tracing_) return;
        trace_.push_back({label, line, dumpState(arena_, s)});
    }

    // ---- evaluation ---------------------------------------------------------

    struct EvalCtx {
        EvalMode mode = EvalMode::Normal;
        bool branchGuard = false;  // evaluating a formula-conditional guard
    };

    bool evalExpr(SymbolicState s, const ExprPtr& e, const EvalCtx& ctx, const EvalK& k) {
        switch (e->kind) {
            case ExprKind::IntLit: return k(std::move(s), arena_.intConst(e->intValue));
            case ExprKind::CharLit: return k(std::move(s), arena_.intConst(e->intValue));
            case ExprKind::BoolLit: return k(std::move(s), arena_.boolConst(e->boolValue));
            case ExprKind::NullLit: return k(std::move(s), arena_.nullConst());
            case ExprKind::SymRef: return k(std::move(s), (TermId)e->intValue);
            case ExprKind::Var: {
                TermId t = s.store.lookup(e->name);
                if (t == kNoTerm)
                    throw InternalError("engine: unbound variable " + e->name);
                return k(std::move(s), t);
            }
            case ExprKind::Unary: {
                UnOp op = e->unOp;
                return evalExpr(std::move(s), e->args[0], ctx, [this, op, k](SymbolicState s2, TermId t) {
                    return k(std::move(s2),
                             op == UnOp::Not ? arena_.logicalNot(t) : arena_.neg(t));
                });
            }
            case ExprKind::Binary: {
                BinOp op = e->binOp;
                return evalExpr(std::move(s), e->args[0], ctx,
                                [this, op, k, &e, ctx](SymbolicState s2, TermId a) {
                    return evalExpr(std::move(s2), e->args[1], ctx,
                                    [this, op, k, a](SymbolicState s3, TermId b) {
                        TermId t;
                        switch (op) {
                            case BinOp::Add: t = arena_.add(a, b); break;
                            case BinOp::Sub: t = arena_.sub(a, b); break;
                            case BinOp::Mul: t = arena_.mul(a, b); break;
                            case BinOp::Div: t = arena_.div(a, b); break;
                            case BinOp::Eq: t = arena_.eq(a, b); break;
                            case BinOp::Ne: t = arena_.ne(a, b); break;
                            case BinOp::Lt: t = arena_.lt(a, b); break;
                            case BinOp::Le: t = arena_.le(a, b); break;
                            case BinOp::Gt: t = arena_.gt(a, b); break;
                            case BinOp::Ge: t = arena_.ge(a, b); break;
                            case BinOp::And: t = arena_.logicalAnd(a, b); break;
                            case BinOp::Or: t = arena_.logicalOr(a, b); break;
                            default: t = arena_.mkTrue();
                        }
                        return k(std::move(s3), t);
                    });
                });
            }
            case ExprKind::Field: {
                return evalExpr(std::move(s), e->args[0], ctx,
                                [this, &e, ctx, k](SymbolicState s2, TermId t) {
                    return evalField(std::move(s2), e, t, ctx, k);
                });
            }
            default:
                throw InternalError("engine: non-core expression (kind " +
                                    std::to_string((int)e->kind) + ")");
        }
    }

    bool evalField(SymbolicState s, const ExprPtr& e, TermId recv, const EvalCtx& ctx,
                   const EvalK& k) {
        const std::string& f = e->name;
        bool counts = ctx.mode != EvalMode::ProduceMode;
        if (const HeapChunk* c = findFieldChunk(s, s.heap, f, recv)) {
            if (counts) countObligation(true);
            return k(std::move(s), c->snapshot);
        }
        if (const HeapChunk* c = findFieldChunk(s, s.optHeap, f, recv)) {
            if (counts) countObligation(true);
            return k(std::move(s), c->snapshot);
        }
        if (!s.isImprecise) {
            if (counts) countObligation(false);
            return fail(e->span, "insufficient permission to access " + printExpr(e));
        }
        switch (ctx.mode) {
            case EvalMode::Normal: {
                countObligation(false);
                auto res = solver_.assertGradual(true, s.pc, arena_.ne(recv, arena_.nullConst()));
                if (!res.ok)
                    return fail(e->span, "receiver of " + printExpr(e) + " may be null");
                ExprPtr et = xlate(s, recv);
                auto acc = mkFAcc(mkField(et, f, e->span));
                acc->span = e->span;
                addCheck(s.checks, e->span, e->span.node, acc);
                TermId snap = arena_.fresh(fieldSort(e), "p");
                fieldOrigins_[snap] = {recv, f};
                s.optHeap.push_back({false, f, {recv}, snap});
                pcAdd(s.pc, arena_.ne(recv, arena_.nullConst()));
                return k(std::move(s), snap);
            }
            case EvalMode::ProduceMode: {
                // checks only when unfolding introduces branch-condition code
                if (s.checks.origin.kind == OriginKind::Unfold && ctx.branchGuard) {
                    ExprPtr et = xlate(s, recv);
                    auto acc = mkFAcc(mkField(et, f, e->span));
                    acc->span = e->span;
                    addCheck(s.checks, e->span, e->span.node, acc);
                }
                TermId snap = arena_.fresh(fieldSort(e), "p");
                fieldOrigins_[snap] = {recv, f};
                s.optHeap.push_back({false, f, {recv}, snap});
                pcAdd(s.pc, arena_.ne(recv, arena_.nullConst()));
                return k(std::move(s), snap);
            }
            case EvalMode::ConsumeMode: {
                countObligation(false);
                auto res = solver_.assertGradual(true, s.pc, arena_.ne(recv, arena_.nullConst()));
                if (!res.ok)
                    return fail(e->span, "receiver of " + printExpr(e) + " may be null");
                ExprPtr et = xlate(s, recv);
                auto acc = mkFAcc(mkField(et, f, e->span));
                acc->span = e->span;
                addCheck(s.checks, e->span, e->span.node, acc);
                TermId snap = arena_.fresh(fieldSort(e), "p");
                fieldOrigins_[snap] = {recv, f};
                return k(std::move(s), snap);
            }
        }
        return false;
    }

    bool evalList(SymbolicState s, const std::vector<ExprPtr>& es, size_t i, const EvalCtx& ctx,
                  std::vector<TermId> acc, const EvalListK& k) {
        if (i == es.size()) return k(std::move(s), std::move(acc));
        return evalExpr(std::move(s), es[i], ctx,
                        [this, &es, i, ctx, acc = std::move(acc), k](SymbolicState s2,
                                                                     TermId t) mutable {
            acc.push_back(t);
            return evalList(std::move(s2), es, i + 1, ctx, std::move(acc), k);
        });
    }

    // ---- branch --------------------------------------------------------------

    bool branch(SymbolicState s, const ExprPtr& condExpr, TermId t, const ExecK& kTrue,
                const ExecK& kFalse) {
        bool canTrue = !solver_.check(s.pc, arena_.logicalNot(t));
        bool canFalse = !solver_.check(s.pc, t);

        auto explore = [&](bool positive, const ExecK& kk) {
            SymbolicState sb = s;
            pcPush(sb.pc, arena_.fresh(Sort::Bool, "bp"),
                   positive ? t : arena_.logicalNot(t));
            ExprPtr bcExpr = xlateExpr(s, condExpr);
            addBranchCond(sb.checks, condExpr->span, condExpr->span.node, bcExpr, !positive);
            trace(positive ? "branch-then" : "branch-else", condExpr->span.line, sb);
            return kk(std::move(sb));
        };

        if (s.isImprecise) {
            if (canTrue && canFalse) {
                bool resT = explore(true, kTrue);
                bool resF = explore(false, kFalse);
                if (resT != resF) {
                    // one-sided success: guard the surviving path at run time
                    ExprPtr bcExpr = xlateExpr(s, condExpr);
                    ExprPtr guard = resT ? bcExpr : mkUn(UnOp::Not, bcExpr, condExpr->span);
                    auto f = mkFExpr(guard);
                    f->span = condExpr->span;
                    CheckCollection tmp = s.checks;
                    const RuntimeCheck* rc =
                        addCheck(tmp, condExpr->span, condExpr->span.node, f);
                    if (rc) global_.add(*rc);
                    return true;
                }
                return resT;
            }
            if (canTrue) return explore(true, kTrue);
            if (canFalse) return explore(false, kFalse);
            return fail(condExpr->span, "no feasible branch (inconsistent state)");
        }
        bool rT = canTrue ? explore(true, kTrue) : true;
        bool rF = canFalse ? explore(false, kFalse) : true;
        return rT && rF;
    }

    // ---- produce --------------------------------------------------------------

    bool produce(SymbolicState s, const GradualFormula& g, TermId snap, const ExecK& k) {
        if (g.imprecise) {
            s.isImprecise = true;
            return produceFormula(std::move(s), g.staticPart, arena_.second(snap), k);
        }
        return produceFormula(std::move(s), g.staticPart, snap, k);
    }

    bool produceFormula(SymbolicState s, const FormulaPtr& f, TermId snap, const ExecK& k) {
        switch (f->kind) {
            case FormulaKind::Expr: {
                EvalCtx ctx{EvalMode::ProduceMode, false};
                return evalExpr(std::move(s), f->expr, ctx,
                                [this, snap, k](SymbolicState s2, TermId t) {
                    if (!arena_.isTrue(t)) pcAdd(s2.pc, t);
                    TermId eqn = arena_.eq(arena_.toSnap(snap), arena_.unit());
                    if (!arena_.isTrue(eqn)) pcAdd(s2.pc, eqn);
                    return k(std::move(s2));
                });
            }
            case FormulaKind::AccField: {
                const ExprPtr& fe = f->expr;  // Field node
                EvalCtx ctx{EvalMode::ProduceMode, false};
                return evalExpr(std::move(s), fe->args[0], ctx,
                                [this, &fe, snap, k](SymbolicState s2, TermId recv) {
                    HeapChunk c{false, fe->name, {recv},
                                arena_.fromSnap(snap, fieldSort(fe))};
                    if (heapHasChunk(s2.heap, c))
                        return fail(fe->span, "duplicate accessibility predicate acc(" +
                                                  printExpr(fe) + ")");
                    s2.heap.push_back(std::move(c));
                    pcAdd(s2.pc, arena_.ne(recv, arena_.nullConst()));
                    return k(std::move(s2));
                });
            }
            case FormulaKind::Pred: {
                EvalCtx ctx{EvalMode::ProduceMode, false};
                return evalList(std::move(s), f->args, 0, ctx, {},
                                [this, &f, snap, k](SymbolicState s2, std::vector<TermId> ts) {
                    HeapChunk c{true, f->pred, std::move(ts), arena_.toSnap(snap)};
                    if (heapHasChunk(s2.heap, c))
                        return fail(f->span, "duplicate predicate instance " + f->pred);
                    s2.heap.push_back(std::move(c));
                    return k(std::move(s2));
                });
            }
            case FormulaKind::Sep: {
                TermId s1 = arena_.first(snap), s2v = arena_.second(snap);
                return produceFormula(std::move(s), f->lhs, s1,
                                      [this, &f, s2v, k](SymbolicState st) {
                    return produceFormula(std::move(st), f->rhs, s2v, k);
                });
            }
            case FormulaKind::Cond: {
                EvalCtx ctx{EvalMode::ProduceMode, true};
                return evalExpr(std::move(s), f->expr, ctx,
                                [this, &f, snap, k](SymbolicState s2, TermId t) {
                    return branch(std::move(s2), f->expr, t,
                                  [this, &f, snap, k](SymbolicState s3) {
                        return produceFormula(std::move(s3), f->lhs, snap, k);
                    },
                                  [this, &f, snap, k](SymbolicState s3) {
                        return produceFormula(std::move(s3), f->rhs, snap, k);
                    });
                });
            }
        }
        return false;
    }

    // ---- heap removal ----------------------------------------------------------

    struct RemResult {
        Heap heap;
        TermId snapshot;
        bool found;
    };

    RemResult heapRemAcc(bool isImprecise, const Heap& h, const PathCondition& pc,
                         const std::string& f, TermId target, Sort snapSort) {
        Heap kept;
        TermId snap = kNoTerm;
        bool found = false;
        for (const auto& c : h) {
            if (!c.isPred && c.name == f) {
                TermId eq = arena_.eq(c.receiver(), target);
                bool provablyEq = c.receiver() == target || solver_.check(pc, eq);
                if (provablyEq && !found) {
                    found = true;
                    snap = c.snapshot;
                    continue;  // removed
                }
                // remove all chunks not provably distinct from the target
                bool possiblyAliased =
                    provablyEq || solver_.checkGradual(isImprecise, pc, eq).ok;
                if (possiblyAliased) continue;  // removed
            }
            kept.push_back(c);
        }
        if (found) return {std::move(kept), snap, true};
        // target not found: predicate chunks may cover it, drop them all
        Heap fieldsOnly;
        for (const auto& c : kept)
            if (!c.isPred) fieldsOnly.push_back(c);
        return {std::move(fieldsOnly), arena_.fresh(snapSort, "p"), false};
    }

    RemResult heapRemPred(const Heap& h, const PathCondition& pc, const std::string& p,
                          const std::vector<TermId>& args) {
        for (size_t i = 0; i < h.size(); ++i) {
            const auto& c = h[i];
            if (!c.isPred || c.name != p || c.args.size() != args.size()) continue;
            bool eq = true;
            for (size_t j = 0; j < args.size() && eq; ++j) {
                if (c.args[j] == args[j]) continue;
                if (!solver_.check(pc, arena_.eq(c.args[j], args[j]))) eq = false;
            }
            if (eq) {
                Heap kept;
                for (size_t j = 0; j < h.size(); ++j)
                    if (j != i) kept.push_back(h[j]);
                return {std::move(kept), c.snapshot, true};
            }
        }
        return {{}, arena_.fresh(Sort::Snap, "d"), false};
    }

    // ---- consolidate -------------------------------------------------------------

    enum class Consistency { Ok, DeadPath, Broken };

    // Adds separation and non-null facts for the regular heap. A path whose
    // condition was already contradictory is unreachable and verifies
    // vacuously; a contradiction introduced by the heap facts themselves is a
    // real inconsistency.
    Consistency consolidate(SymbolicState& s) {
        if (solver_.provedUnsat(pcAll(s.pc))) return Consistency::DeadPath;
        for (size_t i = 0; i < s.heap.size(); ++i) {
            const auto& a = s.heap[i];
            if (a.isPred) continue;
            pcAdd(s.pc, arena_.ne(a.receiver(), arena_.nullConst()));
            for (size_t j = i + 1; j < s.heap.size(); ++j) {
                const auto& b = s.heap[j];
                if (b.isPred || b.name != a.name) continue;
                pcAdd(s.pc, arena_.ne(a.receiver(), b.receiver()));
            }
        }
        if (solver_.provedUnsat(pcAll(s.pc))) return Consistency::Broken;
        return Consistency::Ok;
    }

    // ---- consume ------------------------------------------------------------------

    bool consume(SymbolicState s, const GradualFormula& g, const ConsK& k) {
        switch (consolidate(s)) {
            case Consistency::DeadPath:
                return true;  // unreachable path, vacuously verified
            case Consistency::Broken:
                return fail(g.span,
                            "inconsistent symbolic state (heap contradicts path condition)");
            case Consistency::Ok:
                break;
        }
        bool imprecideFormula = g.imprecise;
        Heap oh = s.optHeap;
        Heap hh = s.heap;
        if (!imprecideFormula) {
            return consumeFormula(s, s.isImprecise, std::move(oh), std::move(hh), g.staticPart,
                                  [k](SymbolicState s3, Heap oh2, Heap h2, TermId snap) {
                s3.optHeap = std::move(oh2);
                s3.heap = std::move(h2);
                return k(std::move(s3), snap);
            });
        }
        return consumeFormula(s, true, std::move(oh), std::move(hh), g.staticPart,
                              [this, k](SymbolicState s3, Heap, Heap, TermId snap) {
            s3.isImprecise = true;
            s3.optHeap.clear();
            s3.heap.clear();
            return k(std::move(s3), arena_.pair(arena_.unit(), arena_.toSnap(snap)));
        });
    }

    bool consumeFormula(SymbolicState s, bool fImp, Heap oh, Heap hh, const FormulaPtr& f,
                        const ConsPK& k) {
        switch (f->kind) {
            case FormulaKind::Expr: {
                bool outer = s.isImprecise;
                s.isImprecise = fImp;
                EvalCtx ctx{EvalMode::ConsumeMode, false};
                return evalExpr(std::move(s), f->expr, ctx,
                                [this, outer, &f, oh = std::move(oh), hh = std::move(hh),
                                 k](SymbolicState s2, TermId t) mutable {
                    s2.isImprecise = outer;
                    auto res = solver_.assertGradual(s2.isImprecise, s2.pc, t);
                    bool trivially = res.ok && res.residuals.size() == 1 &&
                                     arena_.isTrue(res.residuals[0]);
                    countObligation(trivially);
                    if (!res.ok) {
                        if (getenv("GVL_DEBUG_FAIL")) {
                            fprintf(stderr, "FAILED consume of %s; goal %s; pc:\n",
                                    printExpr(f->expr).c_str(), arena_.str(t).c_str());
                            for (TermId c : pcAll(s2.pc))
                                fprintf(stderr, "   %s\n", arena_.str(c).c_str());
                        }
                        return fail(f->span, "cannot establish " + printExpr(f->expr));
                    }
                    addCheck(s2.checks, f->span, f->span.node,
                             residualFormula(s2, res.residuals, f->span));
                    return k(std::move(s2), std::move(oh), std::move(hh), arena_.unit());
                });
            }
            case FormulaKind::AccField: {
                const ExprPtr fe = f->expr;
                bool outer = s.isImprecise;
                s.isImprecise = fImp;
                EvalCtx ctx{EvalMode::ConsumeMode, false};
                return evalExpr(std::move(s), fe->args[0], ctx,
                                [this, outer, fe, &f, oh = std::move(oh), hh = std::move(hh),
                                 k](SymbolicState s2, TermId recv) mutable {
                    s2.isImprecise = outer;
                    auto nn = solver_.assertGradual(s2.isImprecise, s2.pc,
                                                    arena_.ne(recv, arena_.nullConst()));
                    bool nnTrivial = nn.ok && nn.residuals.size() == 1 &&
                                     arena_.isTrue(nn.residuals[0]);
                    countObligation(nnTrivial);
                    if (!nn.ok)
                        return fail(f->span, "receiver of acc(" + printExpr(fe) +
                                                 ") may be null");
                    addCheck(s2.checks, f->span, f->span.node,
                             residualFormula(s2, nn.residuals, f->span));
                    Sort snapSort = fieldSort(fe);
                    RemResult r1 =
                        heapRemAcc(s2.isImprecise, hh, s2.pc, fe->name, recv, snapSort);
                    countObligation(r1.found);
                    if (s2.isImprecise) {
                        RemResult r2 =
                            heapRemAcc(true, oh, s2.pc, fe->name, recv, snapSort);
                        if (!r1.found && !r2.found) {
                            ExprPtr et = xlate(s2, recv);
                            auto acc = mkFAcc(mkField(et, fe->name, fe->span));
                            acc->span = f->span;
                            addCheck(s2.checks, f->span, f->span.node, acc);
                            TermId snap = r2.snapshot;
                            fieldOrigins_[snap] = {recv, fe->name};
                            return k(std::move(s2), std::move(r2.heap), std::move(r1.heap),
                                     snap);
                        }
                        return k(std::move(s2), std::move(r2.heap), std::move(r1.heap),
                                 r1.found ? r1.snapshot : r2.snapshot);
                    }
                    if (r1.found)
                        return k(std::move(s2), std::move(oh), std::move(r1.heap),
                                 r1.snapshot);
                    return fail(f->span,
                                "insufficient permission for acc(" + printExpr(fe) + ")");
                });
            }
            case FormulaKind::Pred: {
                bool outer = s.isImprecise;
                s.isImprecise = fImp;
                EvalCtx ctx{EvalMode::ConsumeMode, false};
                return evalList(std::move(s), f->args, 0, ctx, {},
                                [this, outer, &f, oh = std::move(oh), hh = std::move(hh),
                                 k](SymbolicState s2, std::vector<TermId> ts) mutable {
                    s2.isImprecise = outer;
                    RemResult r1 = heapRemPred(hh, s2.pc, f->pred, ts);
                    countObligation(r1.found);
                    if (s2.isImprecise) {
                        RemResult r2 = heapRemPred(oh, s2.pc, f->pred, ts);
                        if (!r1.found && !r2.found) {
                            std::vector<ExprPtr> argsX;
                            for (auto& a : f->args) argsX.push_back(xlateExpr(s2, a));
                            auto pf = mkFPred(f->pred, std::move(argsX), f->span);
                            addCheck(s2.checks, f->span, f->span.node, pf,
                                     /*needsSeparation=*/true);
                        }
                        return k(std::move(s2), std::move(r2.heap), std::move(r1.heap),
                                 r1.found ? r1.snapshot : r2.snapshot);
                    }
                    if (r1.found)
                        return k(std::move(s2), std::move(oh), std::move(r1.heap),
                                 r1.snapshot);
                    return fail(f->span, "insufficient permission for predicate " + f->pred);
                });
            }
            case FormulaKind::Sep: {
                return consumeFormula(std::move(s), fImp, std::move(oh), std::move(hh), f->lhs,
                                      [this, fImp, &f, k](SymbolicState s2, Heap oh2, Heap h2,
                                                          TermId d1) {
                    return consumeFormula(std::move(s2), fImp, std::move(oh2), std::move(h2),
                                          f->rhs,
                                          [this, d1, k](SymbolicState s3, Heap oh3, Heap h3,
                                                        TermId d2) {
                        return k(std::move(s3), std::move(oh3), std::move(h3),
                                 arena_.pair(arena_.toSnap(d1), arena_.toSnap(d2)));
                    });
                });
            }
            case FormulaKind::Cond: {
                bool outer = s.isImprecise;
                s.isImprecise = fImp;
                EvalCtx ctx{EvalMode::ConsumeMode, false};
                return evalExpr(std::move(s), f->expr, ctx,
                                [this, outer, fImp, &f, oh = std::move(oh), hh = std::move(hh),
                                 k](SymbolicState s2, TermId t) mutable {
                    s2.isImprecise = outer;
                    return branch(std::move(s2), f->expr, t,
                                  [this, fImp, &f, oh, hh, k](SymbolicState s3) {
                        return consumeFormula(std::move(s3), fImp, oh, hh, f->lhs, k);
                    },
                                  [this, fImp, &f, oh, hh, k](SymbolicState s3) {
                        return consumeFormula(std::move(s3), fImp, oh, hh, f->rhs, k);
                    });
                });
            }
        }
        return false;
    }

    // ---- well-formedness ------------------------------------------------------------

    bool wellFormed(SymbolicState s, const GradualFormula& g, TermId snap, const ExecK& k) {
        SymbolicState base = s;
        return produce(std::move(s), g, snap, [this, base, &g, snap, k](SymbolicState s2) {
            SymbolicState again = base;
            again.pc = s2.pc;
            again.checks = s2.checks;
            return produce(std::move(again), g, snap, k);
        });
    }

    // ---- statements --------------------------------------------------------------------

    bool execSeq(SymbolicState s, const std::vector<StmtPtr>& body, size_t i, const ExecK& k) {
        if (i == body.size()) return k(std::move(s));
        const StmtPtr& st = body[i];
        return exec(std::move(s), st, [this, &body, i, k](SymbolicState s2) {
            return execSeq(std::move(s2), body, i + 1, k);
        });
    }

    FormulaPtr synthAcc(const std::string& var, const std::string& field, Span sp,
                        const TypeRef& fieldType) {
        auto v = mkVar(var, sp);
        auto it = varTypes_.find(var);
        if (it != varTypes_.end()) v->type = it->second;
        auto fld = mkField(v, field, sp);
        fld->type = fieldType;
        auto acc = mkFAcc(fld);
        acc->span = sp;
        return acc;
    }

    bool exec(SymbolicState s, const StmtPtr& st, const ExecK& k) {
        auto traced = [this, &st, k](SymbolicState s2) {
            trace("stmt", st->span.line, s2);
            return k(std::move(s2));
        };
        switch (st->kind) {
            case StmtKind::Block:
                return execSeq(std::move(s), st->body, 0, k);
            case StmtKind::VarDecl: {
                havoc(s.store, {{st->varName, sortOfType(st->varType)}}, arena_);
                return k(std::move(s));  // declarations get no trace row of their own
            }
            case StmtKind::Assign: {
                return evalExpr(std::move(s), st->rhs, {}, [this, &st, traced](SymbolicState s2,
                                                                               TermId t) {
                    TermId v = arena_.fresh(arena_.sortOf(t), st->targetVar);
                    pcAdd(s2.pc, arena_.eq(v, t));
                    s2.store.set(st->targetVar, v);
                    return traced(std::move(s2));
                });
            }
            case StmtKind::FieldAssign: {
                return evalExpr(std::move(s), st->rhs, {}, [this, &st, traced](SymbolicState s2,
                                                                               TermId t) {
                    TypeRef ft = st->rhs->type;
                    auto vt = varTypes_.find(st->targetVar);
                    if (vt != varTypes_.end()) {
                        const RecordDecl* r = prog_.record(vt->second.record);
                        if (r) {
                            int idx = r->fieldIndex(st->fieldName);
                            if (idx >= 0) ft = r->fields[idx].type;
                        }
                    }
                    auto accF = synthAcc(st->targetVar, st->fieldName, st->span, ft);
                    GradualFormula g;
                    g.staticPart = accF;
                    g.span = st->span;
                    return consume(std::move(s2), g, [this, &st, t, ft,
                                                      traced](SymbolicState s3, TermId) {
                        auto accF2 = synthAcc(st->targetVar, st->fieldName, st->span, ft);
                        auto eq = mkBin(BinOp::Eq, cloneExpr(accF2->expr),
                                        mkSymRef(t, st->span), st->span);
                        eq->span = st->span;
                        auto conj = mkFSep(accF2, mkFExpr(eq));
                        conj->span = st->span;
                        GradualFormula g2;
                        g2.staticPart = conj;
                        g2.span = st->span;
                        TermId snap = arena_.pair(
                            arena_.toSnap(arena_.fresh(sortOfType(ft), "p")), arena_.unit());
                        return produce(std::move(s3), g2, snap, traced);
                    });
                });
            }
            case StmtKind::AllocAssign: {
                const RecordDecl* r = prog_.record(st->calleeOrType);
                if (!r) throw InternalError("engine: unknown record " + st->calleeOrType);
                havoc(s.store, {{st->targetVar, Sort::Ref}}, arena_);
                FormulaPtr conj;
                for (const auto& fld : r->fields) {
                    auto acc = synthAcc(st->targetVar, fld.name, st->span, fld.type);
                    conj = conj ? mkFSep(conj, acc) : acc;
                    conj->span = st->span;
                }
                GradualFormula g;
                g.span = st->span;
                g.staticPart = conj ? conj : mkFExpr(mkBoolLit(true, st->span));
                return produce(std::move(s), g, arena_.fresh(Sort::Snap, "alloc"), traced);
            }
            case StmtKind::Call:
                return execCall(std::move(s), st, traced);
            case StmtKind::AssertDyn: {
                // heap accesses are verified; the assertion itself stays dynamic
                return evalExpr(std::move(s), st->rhs, {}, [traced](SymbolicState s2, TermId) {
                    return traced(std::move(s2));
                });
            }
            case StmtKind::AssertStatic: {
                SymbolicState orig = s;
                return consume(std::move(s), st->formula, [this, &st, orig,
                                                           traced](SymbolicState s2,
                                                                   TermId snap) {
                    GradualFormula imp = cloneGradual(st->formula);
                    imp.imprecise = true;
                    TermId wrapped = arena_.pair(arena_.unit(), arena_.toSnap(snap));
                    return wellFormed(std::move(s2), imp, wrapped,
                                      [orig, traced](SymbolicState s3) {
                        SymbolicState out = orig;
                        out.pc = s3.pc;
                        out.checks = s3.checks;
                        return traced(std::move(out));
                    });
                });
            }
            case StmtKind::Fold: {
                const PredicateDecl* d = prog_.predicate(st->predName);
                if (!d) throw InternalError("engine: unknown predicate " + st->predName);
                return evalList(std::move(s), st->args, 0, {}, {},
                                [this, &st, d, traced](SymbolicState s2,
                                                       std::vector<TermId> ts) {
                    OriginInfo origin;
                    origin.kind = OriginKind::Fold;
                    origin.stmt = st.get();
                    origin.captured = std::make_shared<SymbolicState>(s2);
                    origin.args = ts;
                    s2.checks.origin = origin;
                    std::map<std::string, ExprPtr> sub;
                    for (size_t i = 0; i < d->params.size(); ++i) {
                        auto sr = mkSymRef(ts[i]);
                        sr->type = d->params[i].type;
                        sub[d->params[i].name] = sr;
                    }
                    GradualFormula body = substGradual(d->body, sub);
                    return consume(std::move(s2), body, [this, &st, ts,
                                                         traced](SymbolicState s3,
                                                                 TermId snap) {
                        s3.checks.origin = OriginInfo{};
                        std::vector<ExprPtr> args;
                        for (TermId t : ts) args.push_back(mkSymRef(t, st->span));
                        auto inst = mkFPred(st->predName, std::move(args), st->span);
                        GradualFormula g;
                        g.staticPart = inst;
                        g.span = st->span;
                        return produce(std::move(s3), g, snap, traced);
                    });
                });
            }
            case StmtKind::Unfold: {
                const PredicateDecl* d = prog_.predicate(st->predName);
                if (!d) throw InternalError("engine: unknown predicate " + st->predName);
                return evalList(std::move(s), st->args, 0, {}, {},
                                [this, &st, d, traced](SymbolicState s2,
                                                       std::vector<TermId> ts) {
                    OriginInfo origin;
                    origin.kind = OriginKind::Unfold;
                    origin.stmt = st.get();
                    origin.captured = std::make_shared<SymbolicState>(s2);
                    origin.args = ts;
                    s2.checks.origin = origin;
                    std::vector<ExprPtr> args;
                    for (TermId t : ts) args.push_back(mkSymRef(t, st->span));
                    auto inst = mkFPred(st->predName, std::move(args), st->span);
                    GradualFormula g;
                    g.staticPart = inst;
                    g.span = st->span;
                    return consume(std::move(s2), g, [this, &st, d, ts,
                                                      traced](SymbolicState s3, TermId snap) {
                        std::map<std::string, ExprPtr> sub;
                        for (size_t i = 0; i < d->params.size(); ++i) {
                            auto sr = mkSymRef(ts[i]);
                            sr->type = d->params[i].type;
                            sub[d->params[i].name] = sr;
                        }
                        GradualFormula body = substGradual(d->body, sub);
                        return produce(std::move(s3), body, snap,
                                       [traced](SymbolicState s4) {
                            s4.checks.origin = OriginInfo{};
                            return traced(std::move(s4));
                        });
                    });
                });
            }
            case StmtKind::If: {
                return evalExpr(std::move(s), st->rhs, {}, [this, &st, k](SymbolicState s2,
                                                                          TermId t) {
                    return branch(std::move(s2), st->rhs, t,
                                  [this, &st, k](SymbolicState s3) {
                        return execSeq(std::move(s3), st->body, 0, k);
                    },
                                  [this, &st, k](SymbolicState s3) {
                        return execSeq(std::move(s3), st->orelse, 0, k);
                    });
                });
            }
            case StmtKind::While:
                return execWhile(std::move(s), st, k);
            default:
                throw InternalError("engine: non-core statement");
        }
    }

    bool execCall(SymbolicState s, const StmtPtr& st, const ExecK& k) {
        const MethodDecl* callee = prog_.method(st->calleeOrType);
        if (!callee) throw InternalError("engine: unknown method " + st->calleeOrType);
        return evalList(std::move(s), st->args, 0, {}, {},
                        [this, &st, callee, k](SymbolicState s2, std::vector<TermId> ts) {
            OriginInfo origin;
            origin.kind = OriginKind::Call;
            origin.stmt = st.get();
            origin.captured = std::make_shared<SymbolicState>(s2);
            origin.args = ts;
            s2.checks.origin = origin;
            std::map<std::string, ExprPtr> sub;
            for (size_t i = 0; i < callee->params.size(); ++i) {
                auto sr = mkSymRef(ts[i]);
                sr->type = callee->params[i].type;
                sub[callee->params[i].name] = sr;
            }
            GradualFormula pre = substGradual(callee->pre, sub);
            return consume(std::move(s2), pre, [this, &st, callee, sub,
                                                k](SymbolicState s3, TermId) {
                SymbolicState s4 = std::move(s3);
                if (equiRecursivelyImprecise(prog_, callee->pre)) {
                    s4.isImprecise = true;
                    s4.optHeap.clear();
                    s4.heap.clear();
                }
                std::map<std::string, ExprPtr> postSub = sub;
                if (st->hasTarget && !callee->returns.empty()) {
                    havoc(s4.store,
                          {{st->targetVar, sortOfType(callee->returns[0].type)}}, arena_);
                    auto rv = mkVar(st->targetVar, st->span);
                    auto it = varTypes_.find(st->targetVar);
                    if (it != varTypes_.end()) rv->type = it->second;
                    postSub[callee->returns[0].name] = rv;
                }
                GradualFormula post = substGradual(callee->post, postSub);
                s4.checks.origin.postSide = true;
                return produce(std::move(s4), post, arena_.fresh(Sort::Snap, "post"),
                               [k](SymbolicState s5) {
                    s5.checks.origin = OriginInfo{};
                    return k(std::move(s5));
                });
            });
        });
    }

    // variables assigned anywhere in a statement list
    void collectTargets(const std::vector<StmtPtr>& body, std::set<std::string>& out) {
        for (const auto& st : body) {
            switch (st->kind) {
                case StmtKind::Assign: out.insert(st->targetVar); break;
                case StmtKind::AllocAssign: out.insert(st->targetVar); break;
                case StmtKind::Call:
                    if (st->hasTarget) out.insert(st->targetVar);
                    break;
                default: break;
            }
            collectTargets(st->body, out);
            collectTargets(st->orelse, out);
        }
    }

    bool execWhile(SymbolicState s, const StmtPtr& st, const ExecK& k) {
        SymbolicState s1 = s;
        std::set<std::string> targets;
        collectTargets(st->body, targets);
        Store havocked = s1.store;
        std::vector<std::pair<std::string, Sort>> havocVars;
        for (const auto& [name, val] : s1.store.entries)
            if (targets.count(name)) havocVars.push_back({name, arena_.sortOf(val)});
        havoc(havocked, havocVars, arena_);

        const GradualFormula& inv = st->formula;

        // --- loop body, verified from the invariant alone
        bool resBody = [&]() {
            SymbolicState sb = s1;
            sb.isImprecise = false;
            sb.optHeap.clear();
            sb.heap.clear();
            sb.store = havocked;
            OriginInfo origin;
            origin.kind = OriginKind::Loop;
            origin.stmt = st.get();
            origin.loopPhase = LoopPhase::Beginning;
            origin.captured = std::make_shared<SymbolicState>(sb);
            sb.checks.origin = origin;
            GradualFormula invAndCond = conjoinGradual(inv, mkFExpr(st->rhs));
            return wellFormed(std::move(sb), invAndCond, arena_.fresh(Sort::Snap, "inv"),
                              [this, &st, &inv](SymbolicState s3) {
                s3.checks.origin = OriginInfo{};
                return execSeq(std::move(s3), st->body, 0, [this, &st,
                                                            &inv](SymbolicState s4) {
                    OriginInfo endOrigin;
                    endOrigin.kind = OriginKind::Loop;
                    endOrigin.stmt = st.get();
                    endOrigin.loopPhase = LoopPhase::End;
                    endOrigin.captured = std::make_shared<SymbolicState>(s4);
                    SymbolicState se = s4;
                    se.checks.origin = endOrigin;
                    return evalExpr(std::move(se), st->rhs, {},
                                    [this, &inv, s4](SymbolicState se2, TermId) {
                        SymbolicState sc = s4;
                        sc.checks.origin = se2.checks.origin;
                        sc.checks.rcs = se2.checks.rcs;
                        return consume(std::move(sc), inv,
                                       [this](SymbolicState s5, TermId) {
                            for (const auto& rc : s5.checks.rcs) global_.add(rc);
                            return true;
                        });
                    });
                });
            });
        }();

        // --- skipping/leaving the loop
        bool resAfter = [&]() {
            SymbolicState sa = s1;
            OriginInfo beforeOrigin;
            beforeOrigin.kind = OriginKind::Loop;
            beforeOrigin.stmt = st.get();
            beforeOrigin.loopPhase = LoopPhase::Before;
            beforeOrigin.captured = std::make_shared<SymbolicState>(s1);
            sa.checks.origin = beforeOrigin;
            return evalExpr(std::move(sa), st->rhs, {},
                            [this, &st, &inv, &s1, &havocked, k](SymbolicState se, TermId) {
                SymbolicState sc = s1;
                sc.checks.origin = se.checks.origin;
                sc.checks.rcs = se.checks.rcs;
                return consume(std::move(sc), inv, [this, &st, &inv, &havocked,
                                                    k](SymbolicState s2, TermId) {
                    SymbolicState s3 = std::move(s2);
                    if (equiRecursivelyImprecise(prog_, inv)) {
                        s3.isImprecise = true;
                        s3.optHeap.clear();
                        s3.heap.clear();
                    }
                    s3.store = havocked;
                    OriginInfo afterOrigin;
                    afterOrigin.kind = OriginKind::Loop;
                    afterOrigin.stmt = st.get();
                    afterOrigin.loopPhase = LoopPhase::After;
                    afterOrigin.captured = std::make_shared<SymbolicState>(s3);
                    s3.checks.origin = afterOrigin;
                    auto negCond = mkUn(UnOp::Not, st->rhs, st->rhs->span);
                    negCond->span = st->rhs->span;
                    GradualFormula invAndNot = conjoinGradual(inv, mkFExpr(negCond));
                    return produce(std::move(s3), invAndNot,
                                   arena_.fresh(Sort::Snap, "inv"),
                                   [this, &st, k](SymbolicState s4) {
                        s4.checks.origin = OriginInfo{};
                        trace("stmt", st->span.line, s4);
                        return k(std::move(s4));
                    });
                });
            });
        }();

        if (s1.isImprecise) {
            if (!resBody && resAfter) {
                auto neg = mkUn(UnOp::Not, xlateExpr(s1, st->rhs), st->rhs->span);
                auto f = mkFExpr(neg);
                f->span = st->rhs->span;
                CheckCollection tmp = s1.checks;
                const RuntimeCheck* rc = addCheck(tmp, st->rhs->span, st->rhs->span.node, f);
                if (rc) global_.add(*rc);
            }
            return (!resBody || resAfter) && (resBody || resAfter);
        }
        return resBody && resAfter;
    }

    // ---- declarations -----------------------------------------------------------------

    void collectVarTypes(const std::vector<StmtPtr>& body) {
        for (const auto& st : body) {
            if (st->kind == StmtKind::VarDecl) varTypes_[st->varName] = st->varType;
            collectVarTypes(st->body);
            collectVarTypes(st->orelse);
        }
    }

    bool verifyPredicate(const PredicateDecl& d) {
        varTypes_.clear();
        SymbolicState s0 = SymbolicState::empty(arena_);
        std::vector<std::pair<std::string, Sort>> vars;
        for (const auto& p : d.params) {
            vars.push_back({p.name, sortOfType(p.type)});
            varTypes_[p.name] = p.type;
        }
        havoc(s0.store, vars, arena_);
        size_t diagsBefore = diags_.size();
        bool ok = wellFormed(std::move(s0), d.body, arena_.fresh(Sort::Snap, "wf"),
                             [](SymbolicState) { return true; });
        if (!ok && diags_.size() == diagsBefore)
            fail(d.span, "predicate body of '" + d.name + "' is not well-formed");
        return ok;
    }

    bool verifyMethod(const MethodDecl& m) {
        varTypes_.clear();
        tracing_ = (m.name == opts_.traceMethod);
        SymbolicState s0 = SymbolicState::empty(arena_);
        std::vector<std::pair<std::string, Sort>> vars;
        for (const auto& p : m.params) {
            vars.push_back({p.name, sortOfType(p.type)});
            varTypes_[p.name] = p.type;
        }
        for (const auto& r : m.returns) {
            vars.push_back({r.name, sortOfType(r.type)});
            varTypes_[r.name] = r.type;
        }
        collectVarTypes(m.body->body);
        havoc(s0.store, vars, arena_);

        size_t diagsBefore = diags_.size();
        bool ok = wellFormed(std::move(s0), m.pre, arena_.fresh(Sort::Snap, "pre"),
                             [this, &m](SymbolicState s1) {
            trace("entry", m.span.line, s1);
            SymbolicState postWf = s1;
            postWf.isImprecise = false;
            postWf.optHeap.clear();
            postWf.heap.clear();
            bool wfPost = wellFormed(std::move(postWf), m.post,
                                     arena_.fresh(Sort::Snap, "post"),
                                     [](SymbolicState) { return true; });
            if (!wfPost) {
                fail(m.span, "postcondition of '" + m.name + "' is not well-formed");
                return false;
            }
            return execSeq(std::move(s1), m.body->body, 0, [this, &m](SymbolicState s2) {
                return consume(std::move(s2), m.post, [this](SymbolicState s3, TermId) {
                    for (const auto& rc : s3.checks.rcs) global_.add(rc);
                    return true;
                });
            });
        });
        if (!ok && diags_.size() == diagsBefore)
            fail(m.span, "method '" + m.name + "' failed to verify");
        tracing_ = false;
        return ok;
    }
};

}  // namespace

bool equiRecursivelyImprecise(const Program& p, const FormulaPtr& f) {
    std::set<std::string> visited;
    std::function<bool(const FormulaPtr&)> go = [&](const FormulaPtr& x) -> bool {
        if (!x) return false;
        switch (x->kind) {
            case FormulaKind::Sep: return go(x->lhs) || go(x->rhs);
            case FormulaKind::Cond: return go(x->lhs) || go(x->rhs);
            case FormulaKind::Pred: {
                if (visited.count(x->pred)) return false;
                const PredicateDecl* d = p.predicate(x->pred);
                if (!d) return false;
                visited.insert(x->pred);
                bool b = d->body.imprecise || go(d->body.staticPart);
                visited.erase(x->pred);
                return b;
            }
            default: return false;
        }
    };
    return go(f);
}

bool equiRecursivelyImprecise(const Program& p, const GradualFormula& f) {
    if (f.imprecise) return true;
    return equiRecursivelyImprecise(p, f.staticPart);
}

VerifyResult verifyProgram(const Program& p, const EngineOptions& opts) {
    Engine e(p, opts);
    return e.run();
}

}  // namespace gvl
