#include "gvl/instrument.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "gvl/lower.hpp"
#include "gvl/printer.hpp"
#include "gvl/typecheck.hpp"

namespace gvl {

namespace {

const std::string kOwnedFields = "_ownedFields";

struct StmtIndex {
    std::map<int32_t, std::string> methodOfNode;  // any node -> method name

    void addStmt(const StmtPtr& s, const std::string& m) {
        if (!s) return;
        note(s->span, m);
        addExpr(s->lhs, m);
        addExpr(s->rhs, m);
        for (auto& a : s->args) addExpr(a, m);
        addFormula(s->formula.staticPart, m);
        for (auto& b : s->body) addStmt(b, m);
        for (auto& b : s->orelse) addStmt(b, m);
    }
    void addExpr(const ExprPtr& e, const std::string& m) {
        if (!e) return;
        note(e->span, m);
        for (auto& a : e->args) addExpr(a, m);
    }
    void addFormula(const FormulaPtr& f, const std::string& m) {
        if (!f) return;
        note(f->span, m);
        addExpr(f->expr, m);
        for (auto& a : f->args) addExpr(a, m);
        addFormula(f->lhs, m);
        addFormula(f->rhs, m);
    }
    void note(Span sp, const std::string& m) {
        if (sp.node >= 0 && !m.empty()) methodOfNode[sp.node] = m;
    }

    static StmtIndex build(Program& p) {
        StmtIndex idx;
        for (auto& m : p.methods) {
            if (m.intrinsic) continue;
            idx.addFormula(m.pre.staticPart, m.name);
            idx.addFormula(m.post.staticPart, m.name);
            idx.addStmt(m.body, m.name);
        }
        return idx;
    }
};

std::unique_ptr<Program> cloneProgram(const Program& p) {
    auto q = std::make_unique<Program>();
    q->sourceName = p.sourceName;
    q->nextNodeId = p.nextNodeId;
    q->records = p.records;
    for (const auto& d : p.predicates) {
        PredicateDecl c = d;
        c.body = cloneGradual(d.body);
        q->predicates.push_back(std::move(c));
    }
    for (const auto& m : p.methods) {
        MethodDecl c = m;
        c.pre = cloneGradual(m.pre);
        c.post = cloneGradual(m.post);
        c.body = cloneStmt(m.body);
        q->methods.push_back(std::move(c));
    }
    return q;
}

class Instrumenter {
public:
    Instrumenter(const Program& orig, const std::vector<RuntimeCheck>& checks,
                 InstrumentMode mode, DiagList& diags)
        : checks_(checks), mode_(mode), diags_(diags) {
        prog_ = cloneProgram(orig);
    }

    InstrumentResult run() {
        idx_ = StmtIndex::build(*prog_);
        appendIdFields();
        classifyMethods();
        if (mode_ == InstrumentMode::Gradual) planVerifierChecks();
        else planBaselineChecks();
        planBoundaries();
        applyPlans();
        generatePredicateFunctions();
        signatures();
        validate();

        InstrumentResult res;
        res.table = std::move(table_);
        res.checkSites = checkSites_;
        res.program = std::move(prog_);
        return res;
    }

private:
    std::unique_ptr<Program> prog_;
    const std::vector<RuntimeCheck>& checks_;
    InstrumentMode mode_;
    DiagList& diags_;
    StmtIndex idx_;
    std::vector<InsertedCheck> table_;
    int checkSites_ = 0;
    int freshCounter_ = 0;

    std::set<std::string> tracked_;
    std::map<int32_t, std::string> condVarOfNode_;
    int condCounter_ = 0;

    std::map<int32_t, std::vector<StmtPtr>> before_, after_, bodyBegin_, bodyEnd_;
    std::map<std::string, std::vector<StmtPtr>> atEnd_, atEntry_;

    std::set<std::string> predFnNeeded_, sepFnNeeded_, fpFnNeeded_;

    // ---- small builders -----------------------------------------------------

    Span sp(int line) {
        Span s;
        s.line = line;
        s.col = 1;
        s.node = prog_->freshNodeId();
        return s;
    }

    ExprPtr var(const std::string& n, int line, TypeRef t = {}) {
        auto v = mkVar(n, sp(line));
        v->type = t;
        return v;
    }

    ExprPtr intLit(int64_t v, int line) { return mkIntLit(v, sp(line)); }

    StmtPtr declStmt(const std::string& name, TypeRef t, int line) {
        auto d = std::make_shared<Stmt>();
        d->kind = StmtKind::VarDecl;
        d->span = sp(line);
        d->varName = name;
        d->varType = std::move(t);
        return d;
    }

    StmtPtr assignStmt(const std::string& name, ExprPtr rhs, int line) {
        auto a = std::make_shared<Stmt>();
        a->kind = StmtKind::Assign;
        a->span = sp(line);
        a->targetVar = name;
        a->rhs = std::move(rhs);
        return a;
    }

    StmtPtr callStmt(const std::string& callee, std::vector<ExprPtr> args, int line,
                     const std::string& target = "") {
        auto c = std::make_shared<Stmt>();
        c->kind = StmtKind::Call;
        c->span = sp(line);
        c->calleeOrType = callee;
        c->args = std::move(args);
        if (!target.empty()) {
            c->hasTarget = true;
            c->targetVar = target;
        }
        return c;
    }

    StmtPtr fieldAssignStmt(const std::string& recv, const std::string& field, ExprPtr rhs,
                            int line) {
        auto a = std::make_shared<Stmt>();
        a->kind = StmtKind::FieldAssign;
        a->span = sp(line);
        a->targetVar = recv;
        a->fieldName = field;
        a->rhs = std::move(rhs);
        return a;
    }

    StmtPtr ifStmt(ExprPtr cond, std::vector<StmtPtr> then, std::vector<StmtPtr> orelse,
                   int line) {
        auto s = std::make_shared<Stmt>();
        s->kind = StmtKind::If;
        s->span = sp(line);
        s->rhs = std::move(cond);
        s->body = std::move(then);
        s->orelse = std::move(orelse);
        return s;
    }

    ExprPtr ofVar(int line) { return var(kOwnedFields, line, TypeRef::refTy("OwnedFields")); }

    int fieldIndex(const std::string& record, const std::string& field) {
        const RecordDecl* r = prog_->record(record);
        if (!r) throw InternalError("instrument: unknown record " + record);
        int idx = r->fieldIndex(field);
        if (idx < 0) throw InternalError("instrument: unknown field " + record + "." + field);
        return idx;
    }

    std::string recordOfRecv(const ExprPtr& recv) {
        if (recv->type.kind == TypeKind::Ref && !recv->type.record.empty())
            return recv->type.record;
        throw InternalError("instrument: untyped receiver " + printExpr(recv));
    }

    // ---- structure passes ----------------------------------------------------

    void appendIdFields() {
        for (auto& r : prog_->records) {
            if (r.builtin) continue;
            if (r.fieldIndex("_id") < 0) r.fields.push_back({"_id", TypeRef::intTy(), {}});
        }
    }

    bool formulaImprecise(const GradualFormula& g) {
        return equiRecursivelyImprecise(*prog_, g);
    }

    bool methodHasImprecision(const MethodDecl& m) {
        if (formulaImprecise(m.pre) || formulaImprecise(m.post)) return true;
        bool found = false;
        std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
            if (!s || found) return;
            if (s->kind == StmtKind::While || s->kind == StmtKind::AssertStatic) {
                if (formulaImprecise(s->formula)) found = true;
            }
            if (s->kind == StmtKind::Fold || s->kind == StmtKind::Unfold) {
                const PredicateDecl* d = prog_->predicate(s->predName);
                GradualFormula inst;
                inst.staticPart = mkFPred(s->predName, {}, {});
                if (d && formulaImprecise(inst)) found = true;
            }
            for (auto& b : s->body) walk(b);
            for (auto& b : s->orelse) walk(b);
        };
        walk(m.body);
        return found;
    }

    std::string anchorMethod(const RuntimeCheck& rc) {
        int32_t node = rc.origin.stmt ? rc.origin.stmt->span.node : rc.locationNode;
        auto it = idx_.methodOfNode.find(node);
        return it == idx_.methodOfNode.end() ? "" : it->second;
    }

    void classifyMethods() {
        std::set<std::string> withChecks;
        if (mode_ == InstrumentMode::Gradual)
            for (const auto& rc : checks_) withChecks.insert(anchorMethod(rc));

        for (auto& m : prog_->methods) {
            if (m.intrinsic || !m.body) continue;
            bool needs = mode_ != InstrumentMode::Gradual;
            if (!needs) needs = methodHasImprecision(m) || withChecks.count(m.name) > 0;
            if (needs) tracked_.insert(m.name);
        }
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto& m : prog_->methods) {
                if (m.intrinsic || !m.body || tracked_.count(m.name)) continue;
                bool calls = false;
                std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
                    if (!s || calls) return;
                    if (s->kind == StmtKind::Call && tracked_.count(s->calleeOrType))
                        calls = true;
                    for (auto& b : s->body) walk(b);
                    for (auto& b : s->orelse) walk(b);
                };
                walk(m.body);
                if (calls) {
                    tracked_.insert(m.name);
                    changed = true;
                }
            }
        }
    }

    bool anyTracked() const { return !tracked_.empty(); }

    // ---- check encoding -------------------------------------------------------

    void noteSite(int checkId, const std::string& kind, int line) {
        table_.push_back({checkId, kind, line});
    }

    std::string condVarFor(const BranchCond& bc) {
        auto it = condVarOfNode_.find(bc.locationNode);
        if (it != condVarOfNode_.end()) return it->second;
        std::string name = "_cond_" + std::to_string(++condCounter_);
        condVarOfNode_[bc.locationNode] = name;
        return name;
    }

    ExprPtr guardExpr(const RuntimeCheck& rc, int line) {
        ExprPtr acc;
        for (const auto& bc : rc.bcs) {
            ExprPtr v = var(condVarFor(bc), line, TypeRef::boolTy());
            ExprPtr lit = bc.negated ? mkUn(UnOp::Not, v, sp(line)) : v;
            lit->type = TypeRef::boolTy();
            if (acc) {
                acc = mkBin(BinOp::And, acc, lit, sp(line));
                acc->type = TypeRef::boolTy();
            } else {
                acc = lit;
            }
        }
        return acc;  // null when unconditional
    }

    void markPredNeeded(const std::string& p, std::set<std::string>& into) {
        if (into.count(p)) return;
        into.insert(p);
        const PredicateDecl* d = prog_->predicate(p);
        if (!d) return;
        std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& f) {
            if (!f) return;
            if (f->kind == FormulaKind::Pred) markPredNeeded(f->pred, into);
            walk(f->lhs);
            walk(f->rhs);
        };
        walk(d->body.staticPart);
    }

    void emitCheckFormula(const FormulaPtr& f, int checkId, int line,
                          const std::string& sepTmp, std::vector<StmtPtr>& out) {
        switch (f->kind) {
            case FormulaKind::Expr: {
                if (f->expr->kind == ExprKind::BoolLit && f->expr->boolValue) return;
                out.push_back(callStmt("assertFormula",
                                       {cloneExpr(f->expr), intLit(checkId, line)}, line));
                noteSite(checkId, "assert", line);
                return;
            }
            case FormulaKind::AccField: {
                ExprPtr recv = cloneExpr(f->expr->args[0]);
                int idx = fieldIndex(recordOfRecv(recv), f->expr->name);
                out.push_back(callStmt(
                    "assertAcc", {ofVar(line), recv, intLit(idx, line), intLit(checkId, line)},
                    line));
                noteSite(checkId, "acc", line);
                if (!sepTmp.empty()) {
                    out.push_back(callStmt("sepAdd",
                                           {var(sepTmp, line, TypeRef::refTy("OwnedFields")),
                                            cloneExpr(f->expr->args[0]), intLit(idx, line),
                                            intLit(checkId, line)},
                                           line));
                    noteSite(checkId, "sep", line);
                }
                return;
            }
            case FormulaKind::Pred: {
                markPredNeeded(f->pred, predFnNeeded_);
                std::vector<ExprPtr> args;
                for (auto& a : f->args) args.push_back(cloneExpr(a));
                args.push_back(ofVar(line));
                out.push_back(callStmt("$pred_" + f->pred, std::move(args), line));
                noteSite(checkId, "pred", line);
                if (!sepTmp.empty()) {
                    markPredNeeded(f->pred, sepFnNeeded_);
                    std::vector<ExprPtr> sargs;
                    for (auto& a : f->args) sargs.push_back(cloneExpr(a));
                    sargs.push_back(var(sepTmp, line, TypeRef::refTy("OwnedFields")));
                    out.push_back(callStmt("$sep_" + f->pred, std::move(sargs), line));
                    noteSite(checkId, "sep", line);
                }
                return;
            }
            case FormulaKind::Cond: {
                std::vector<StmtPtr> then, orelse;
                emitCheckFormula(f->lhs, checkId, line, sepTmp, then);
                emitCheckFormula(f->rhs, checkId, line, sepTmp, orelse);
                if (then.empty() && orelse.empty()) return;
                out.push_back(
                    ifStmt(cloneExpr(f->expr), std::move(then), std::move(orelse), line));
                return;
            }
            case FormulaKind::Sep: {
                emitCheckFormula(f->lhs, checkId, line, sepTmp, out);
                emitCheckFormula(f->rhs, checkId, line, sepTmp, out);
                return;
            }
        }
    }

    std::vector<StmtPtr> encodeCheck(const RuntimeCheck& rc, int line) {
        std::vector<StmtPtr> body;
        std::string sepTmp;
        if (rc.needsSeparation) {
            sepTmp = "_tempFields" + std::to_string(++freshCounter_);
            body.push_back(declStmt(sepTmp, TypeRef::refTy("OwnedFields"), line));
            auto cntr = mkField(ofVar(line), "instCntr", sp(line));
            cntr->type = TypeRef::intTy();
            body.push_back(callStmt("initOwnedFields", {cntr}, line, sepTmp));
        }
        emitCheckFormula(rc.check, rc.id, line, sepTmp, body);
        if (rc.needsSeparation && body.size() == 2) body.clear();  // nothing spatial emitted
        if (body.empty()) return body;
        ++checkSites_;
        ExprPtr guard = guardExpr(rc, line);
        if (!guard) return body;
        std::vector<StmtPtr> wrapped;
        wrapped.push_back(ifStmt(std::move(guard), std::move(body), {}, line));
        return wrapped;
    }

    struct Anchored {
        enum Where { Before, After, BodyBegin, BodyEnd, MethodEnd } where = Before;
        int32_t node = -1;
        std::string method;
        int line = 0;
    };

    Anchored anchorOf(const OriginInfo& origin, int32_t locationNode) {
        Anchored a;
        if (origin.kind == OriginKind::Loop) {
            a.node = origin.stmt->span.node;
            a.line = origin.stmt->span.line;
            switch (origin.loopPhase) {
                case LoopPhase::Before: a.where = Anchored::Before; break;
                case LoopPhase::Beginning: a.where = Anchored::BodyBegin; break;
                case LoopPhase::End: a.where = Anchored::BodyEnd; break;
                case LoopPhase::After: a.where = Anchored::After; break;
            }
            return a;
        }
        if (origin.kind != OriginKind::None) {
            a.node = origin.stmt->span.node;
            a.line = origin.stmt->span.line;
            a.where = origin.postSide ? Anchored::After : Anchored::Before;
            return a;
        }
        StmtPtr host = enclosingStmt(locationNode);
        if (host) {
            a.node = host->span.node;
            a.line = host->span.line;
            a.where = Anchored::Before;
            return a;
        }
        auto mit = idx_.methodOfNode.find(locationNode);
        a.where = Anchored::MethodEnd;
        a.method = mit == idx_.methodOfNode.end() ? "" : mit->second;
        const MethodDecl* m = prog_->method(a.method);
        a.line = m ? m->span.line : 0;
        return a;
    }

    StmtPtr enclosingStmt(int32_t node) {
        for (auto& m : prog_->methods) {
            if (m.intrinsic || !m.body) continue;
            StmtPtr found = enclosingIn(m.body, node);
            if (found) return found;
        }
        return nullptr;
    }

    StmtPtr enclosingIn(const StmtPtr& s, int32_t node) {
        if (!s) return nullptr;
        for (auto& b : s->body) {
            StmtPtr f = enclosingIn(b, node);
            if (f) return f;
        }
        for (auto& b : s->orelse) {
            StmtPtr f = enclosingIn(b, node);
            if (f) return f;
        }
        if (s->kind != StmtKind::Block && containsNode(s, node)) return s;
        return nullptr;
    }

    bool exprContains(const ExprPtr& e, int32_t node) {
        if (!e) return false;
        if (e->span.node == node) return true;
        for (auto& a : e->args)
            if (exprContains(a, node)) return true;
        return false;
    }
    bool formulaContains(const FormulaPtr& f, int32_t node) {
        if (!f) return false;
        if (f->span.node == node) return true;
        if (exprContains(f->expr, node)) return true;
        for (auto& a : f->args)
            if (exprContains(a, node)) return true;
        return formulaContains(f->lhs, node) || formulaContains(f->rhs, node);
    }
    bool containsNode(const StmtPtr& s, int32_t node) {
        if (s->span.node == node) return true;
        if (exprContains(s->lhs, node) || exprContains(s->rhs, node)) return true;
        for (auto& a : s->args)
            if (exprContains(a, node)) return true;
        return formulaContains(s->formula.staticPart, node);
    }

    void planAt(const Anchored& a, std::vector<StmtPtr> stmts) {
        if (stmts.empty()) return;
        auto& dst = a.where == Anchored::Before      ? before_[a.node]
                    : a.where == Anchored::After     ? after_[a.node]
                    : a.where == Anchored::BodyBegin ? bodyBegin_[a.node]
                    : a.where == Anchored::BodyEnd   ? bodyEnd_[a.node]
                                                     : atEnd_[a.method];
        for (auto& s : stmts) dst.push_back(std::move(s));
    }

    // ---- gradual-mode planning --------------------------------------------------

    void planVerifierChecks() {
        auto sameAnchor = [](const Anchored& x, const Anchored& y) {
            return x.where == y.where && x.node == y.node && x.method == y.method;
        };
        std::vector<std::pair<Anchored, const RuntimeCheck*>> anchored;
        for (const auto& rc : checks_)
            anchored.push_back({anchorOf(rc.origin, rc.locationNode), &rc});

        struct CondPlan {
            Anchored a;
            ExprPtr cond;
            std::string name;
        };
        std::vector<CondPlan> conds;
        std::set<int32_t> seenCond;
        for (const auto& rc : checks_) {
            for (const auto& bc : rc.bcs) {
                std::string name = condVarFor(bc);
                if (seenCond.count(bc.locationNode)) continue;
                seenCond.insert(bc.locationNode);
                conds.push_back({anchorOf(bc.origin, bc.locationNode), bc.cond, name});
            }
        }

        auto guardedAtOwnAnchor = [&](const Anchored& a, const RuntimeCheck& rc) {
            for (const auto& bc : rc.bcs)
                if (sameAnchor(anchorOf(bc.origin, bc.locationNode), a)) return true;
            return false;
        };

        // checks first, then versioning, then checks guarded by conditions
        // versioned at the same point
        for (auto& [a, rc] : anchored)
            if (!guardedAtOwnAnchor(a, *rc)) planAt(a, encodeCheck(*rc, a.line));
        for (auto& cp : conds) {
            std::vector<StmtPtr> vs;
            vs.push_back(declStmt(cp.name, TypeRef::boolTy(), cp.a.line));
            vs.push_back(assignStmt(cp.name, cloneExpr(cp.cond), cp.a.line));
            noteSite(-1, "branch-guard", cp.a.line);
            planAt(cp.a, std::move(vs));
        }
        for (auto& [a, rc] : anchored)
            if (guardedAtOwnAnchor(a, *rc)) planAt(a, encodeCheck(*rc, a.line));
    }

    // ---- baseline-mode planning ---------------------------------------------------

    RuntimeCheck baselineCheck(FormulaPtr f, int line) {
        RuntimeCheck rc;
        rc.id = -1;
        rc.check = std::move(f);
        rc.locationSpan.line = line;
        bool spatial = false;
        std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& x) {
            if (!x) return;
            if (x->kind == FormulaKind::AccField || x->kind == FormulaKind::Pred)
                spatial = true;
            walk(x->lhs);
            walk(x->rhs);
        };
        walk(rc.check);
        rc.needsSeparation = spatial;
        return rc;
    }

    void planBaselineChecks() {
        for (auto& m : prog_->methods) {
            if (m.intrinsic || !m.body) continue;
            if (mode_ == InstrumentMode::Dynamic && m.name != "main") {
                auto pre = baselineCheck(cloneFormula(m.pre.staticPart), m.span.line);
                for (auto& s : encodeCheck(pre, m.span.line))
                    atEntry_[m.name].push_back(s);
                auto post = baselineCheck(cloneFormula(m.post.staticPart), m.span.line);
                planAt({Anchored::MethodEnd, -1, m.name, m.span.line},
                       encodeCheck(post, m.span.line));
            }
            std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
                if (!s) return;
                if (s->kind != StmtKind::Block) planDerefChecks(m, s);
                if (mode_ == InstrumentMode::Dynamic) {
                    if (s->kind == StmtKind::While) {
                        auto inv =
                            baselineCheck(cloneFormula(s->formula.staticPart), s->span.line);
                        planAt({Anchored::Before, s->span.node, "", s->span.line},
                               encodeCheck(inv, s->span.line));
                        auto inv2 =
                            baselineCheck(cloneFormula(s->formula.staticPart), s->span.line);
                        planAt({Anchored::BodyEnd, s->span.node, "", s->span.line},
                               encodeCheck(inv2, s->span.line));
                    }
                    if (s->kind == StmtKind::AssertStatic) {
                        auto f =
                            baselineCheck(cloneFormula(s->formula.staticPart), s->span.line);
                        planAt({Anchored::Before, s->span.node, "", s->span.line},
                               encodeCheck(f, s->span.line));
                    }
                    if (s->kind == StmtKind::Fold || s->kind == StmtKind::Unfold) {
                        std::vector<ExprPtr> args;
                        for (auto& a : s->args) args.push_back(cloneExpr(a));
                        auto inst = mkFPred(s->predName, std::move(args), s->span);
                        auto f = baselineCheck(inst, s->span.line);
                        planAt({Anchored::Before, s->span.node, "", s->span.line},
                               encodeCheck(f, s->span.line));
                    }
                }
                for (auto& b : s->body) walk(b);
                for (auto& b : s->orelse) walk(b);
            };
            walk(m.body);
        }
    }

    void planDerefChecks(const MethodDecl& m, const StmtPtr& s) {
        std::vector<StmtPtr> checks;
        auto emitFor = [&](const ExprPtr& recvTyped, const std::string& field) {
            if (recvTyped->type.kind != TypeKind::Ref || recvTyped->type.record.empty()) return;
            if (recvTyped->type.record == "OwnedFields") return;
            int idx = fieldIndex(recvTyped->type.record, field);
            checks.push_back(callStmt("assertAcc",
                                      {ofVar(s->span.line), cloneExpr(recvTyped),
                                       intLit(idx, s->span.line), intLit(-1, s->span.line)},
                                      s->span.line));
            noteSite(-1, "acc", s->span.line);
            ++checkSites_;
        };
        std::function<void(const ExprPtr&)> walkE = [&](const ExprPtr& e) {
            if (!e) return;
            for (auto& a : e->args) walkE(a);
            if (e->kind == ExprKind::Field) emitFor(e->args[0], e->name);
        };
        walkE(s->rhs);
        for (auto& a : s->args) walkE(a);
        if (s->kind == StmtKind::FieldAssign) {
            TypeRef recvType = varTypeIn(m, s->targetVar);
            if (recvType.kind == TypeKind::Ref && !recvType.record.empty()) {
                auto v = var(s->targetVar, s->span.line, recvType);
                emitFor(v, s->fieldName);
            }
        }
        if (checks.empty()) return;
        if (s->kind == StmtKind::While) {
            std::vector<StmtPtr> again;
            for (auto& c : checks) again.push_back(cloneStmt(c));
            planAt({Anchored::Before, s->span.node, "", s->span.line}, std::move(checks));
            planAt({Anchored::BodyEnd, s->span.node, "", s->span.line}, std::move(again));
        } else {
            planAt({Anchored::Before, s->span.node, "", s->span.line}, std::move(checks));
        }
    }

    TypeRef varTypeIn(const MethodDecl& m, const std::string& name) {
        for (auto& p : m.params)
            if (p.name == name) return p.type;
        for (auto& r : m.returns)
            if (r.name == name) return r.type;
        TypeRef out;
        std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
            if (!s) return;
            if (s->kind == StmtKind::VarDecl && s->varName == name) out = s->varType;
            for (auto& b : s->body) walk(b);
            for (auto& b : s->orelse) walk(b);
        };
        walk(m.body);
        return out;
    }

    // ---- boundaries -----------------------------------------------------------------

    ExprPtr substParams(const ExprPtr& e, const std::map<std::string, ExprPtr>& sub) {
        if (!e) return e;
        if (e->kind == ExprKind::Var) {
            auto it = sub.find(e->name);
            if (it != sub.end()) {
                auto c = cloneExpr(it->second);
                if (c->type.kind == TypeKind::Error) c->type = e->type;
                return c;
            }
            return cloneExpr(e);
        }
        auto c = std::make_shared<Expr>(*e);
        c->span = sp(e->span.line);
        c->args.clear();
        for (auto& a : e->args) c->args.push_back(substParams(a, sub));
        return c;
    }

    void emitFpWalk(const FormulaPtr& f, const std::map<std::string, ExprPtr>& sub,
                    const std::string& fromVar, const std::string& toVar, int line,
                    std::vector<StmtPtr>& out) {
        if (!f) return;
        auto tableExpr = [&](const std::string& v) -> ExprPtr {
            if (v.empty()) return mkNullLit(sp(line));
            return var(v, line, TypeRef::refTy("OwnedFields"));
        };
        switch (f->kind) {
            case FormulaKind::AccField: {
                int idx = fieldIndex(recordOfRecv(f->expr->args[0]), f->expr->name);
                ExprPtr recv = substParams(f->expr->args[0], sub);
                out.push_back(callStmt(
                    "fpMove", {tableExpr(fromVar), tableExpr(toVar), recv, intLit(idx, line)},
                    line));
                return;
            }
            case FormulaKind::Pred: {
                markPredNeeded(f->pred, fpFnNeeded_);
                std::vector<ExprPtr> args;
                for (auto& a : f->args) args.push_back(substParams(a, sub));
                args.push_back(tableExpr(fromVar));
                args.push_back(tableExpr(toVar));
                out.push_back(callStmt("$fp_" + f->pred, std::move(args), line));
                return;
            }
            case FormulaKind::Cond: {
                std::vector<StmtPtr> then, orelse;
                emitFpWalk(f->lhs, sub, fromVar, toVar, line, then);
                emitFpWalk(f->rhs, sub, fromVar, toVar, line, orelse);
                if (then.empty() && orelse.empty()) return;
                out.push_back(ifStmt(substParams(f->expr, sub), std::move(then),
                                     std::move(orelse), line));
                return;
            }
            case FormulaKind::Sep:
                emitFpWalk(f->lhs, sub, fromVar, toVar, line, out);
                emitFpWalk(f->rhs, sub, fromVar, toVar, line, out);
                return;
            default:
                return;
        }
    }

    void planBoundaries() {
        planAllocIds();
        if (!anyTracked()) return;
        for (auto& m : prog_->methods) {
            if (m.intrinsic || !m.body) continue;
            bool callerTracked = tracked_.count(m.name) > 0;
            std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
                if (!s) return;
                if (s->kind == StmtKind::Call) planCallBoundary(s, callerTracked);
                for (auto& b : s->body) walk(b);
                for (auto& b : s->orelse) walk(b);
            };
            walk(m.body);
            if (callerTracked && m.name != "main" && !formulaImprecise(m.post)) {
                int line = m.span.line;
                std::string keep = "$keep" + std::to_string(++freshCounter_);
                std::vector<StmtPtr> out;
                out.push_back(declStmt(keep, TypeRef::refTy("OwnedFields"), line));
                out.push_back(callStmt("initOwnedFields", {intLit(0, line)}, line, keep));
                emitFpWalk(m.post.staticPart, {}, kOwnedFields, keep, line, out);
                out.push_back(callStmt("ofClear", {ofVar(line)}, line));
                out.push_back(callStmt(
                    "ofMergeInto",
                    {var(keep, line, TypeRef::refTy("OwnedFields")), ofVar(line)}, line));
                for (auto& s : out) atEnd_[m.name].push_back(s);
            }
        }
        MethodDecl* mainM = prog_->method("main");
        if (mainM && tracked_.count("main")) {
            int line = mainM->span.line;
            std::vector<StmtPtr> init;
            init.push_back(declStmt(kOwnedFields, TypeRef::refTy("OwnedFields"), line));
            init.push_back(callStmt("initOwnedFields", {intLit(0, line)}, line, kOwnedFields));
            auto& dst = atEntry_["main"];
            dst.insert(dst.begin(), init.begin(), init.end());
        }
    }

    void planAllocIds() {
        for (auto& m : prog_->methods) {
            if (m.intrinsic || !m.body) continue;
            bool useTable = tracked_.count(m.name) > 0;
            std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
                if (!s) return;
                if (s->kind == StmtKind::AllocAssign &&
                    s->calleeOrType != "OwnedFields") {
                    const RecordDecl* r = prog_->record(s->calleeOrType);
                    int n = r ? (int)r->fields.size() : 0;
                    int line = s->span.line;
                    std::string tmp = "$id" + std::to_string(++freshCounter_);
                    std::vector<StmtPtr> out;
                    out.push_back(declStmt(tmp, TypeRef::intTy(), line));
                    if (useTable)
                        out.push_back(callStmt("addStructAcc",
                                               {ofVar(line), intLit(n, line)}, line, tmp));
                    else
                        out.push_back(callStmt("freshId", {intLit(n, line)}, line, tmp));
                    out.push_back(fieldAssignStmt(s->targetVar, "_id",
                                                  var(tmp, line, TypeRef::intTy()), line));
                    planAt({Anchored::After, s->span.node, "", line}, std::move(out));
                }
                for (auto& b : s->body) walk(b);
                for (auto& b : s->orelse) walk(b);
            };
            walk(m.body);
        }
    }

    void planCallBoundary(const StmtPtr& call, bool callerTracked) {
        const MethodDecl* callee = prog_->method(call->calleeOrType);
        if (!callee || callee->intrinsic) return;
        bool calleeTracked = tracked_.count(callee->name) > 0;
        int line = call->span.line;
        if (!calleeTracked) {
            if (!callerTracked) return;
            std::map<std::string, ExprPtr> sub;
            for (size_t i = 0; i < callee->params.size(); ++i)
                sub[callee->params[i].name] = call->args[i];
            std::vector<StmtPtr> pre;
            emitFpWalk(callee->pre.staticPart, sub, kOwnedFields, "", line, pre);
            planAt({Anchored::Before, call->span.node, "", line}, std::move(pre));
            if (call->hasTarget && !callee->returns.empty())
                sub[callee->returns[0].name] =
                    var(call->targetVar, line, callee->returns[0].type);
            std::vector<StmtPtr> post;
            emitFpWalk(callee->post.staticPart, sub, "", kOwnedFields, line, post);
            planAt({Anchored::After, call->span.node, "", line}, std::move(post));
            return;
        }
        if (!callerTracked)
            throw InternalError("instrument: untracked caller of tracked callee " +
                                callee->name);
        if (formulaImprecise(callee->pre)) {
            call->args.push_back(ofVar(line));
            return;
        }
        std::map<std::string, ExprPtr> sub;
        for (size_t i = 0; i < callee->params.size(); ++i)
            sub[callee->params[i].name] = call->args[i];
        std::string cof = "$cof" + std::to_string(++freshCounter_);
        std::vector<StmtPtr> pre;
        pre.push_back(declStmt(cof, TypeRef::refTy("OwnedFields"), line));
        auto cntr = mkField(ofVar(line), "instCntr", sp(line));
        cntr->type = TypeRef::intTy();
        pre.push_back(callStmt("initOwnedFields", {cntr}, line, cof));
        emitFpWalk(callee->pre.staticPart, sub, kOwnedFields, cof, line, pre);
        planAt({Anchored::Before, call->span.node, "", line}, std::move(pre));
        call->args.push_back(var(cof, line, TypeRef::refTy("OwnedFields")));
        std::vector<StmtPtr> post;
        post.push_back(callStmt(
            "ofMergeInto", {var(cof, line, TypeRef::refTy("OwnedFields")), ofVar(line)}, line));
        auto& dst = after_[call->span.node];
        dst.insert(dst.begin(), post.begin(), post.end());
    }

    // ---- applying plans ------------------------------------------------------------

    void applyPlans() {
        for (auto& m : prog_->methods) {
            if (m.intrinsic || !m.body) continue;
            rebuildBlock(m.body->body);
            auto eit = atEntry_.find(m.name);
            if (eit != atEntry_.end())
                m.body->body.insert(m.body->body.begin(), eit->second.begin(),
                                    eit->second.end());
            auto it = atEnd_.find(m.name);
            if (it != atEnd_.end())
                for (auto& s : it->second) m.body->body.push_back(s);
        }
    }

    void rebuildBlock(std::vector<StmtPtr>& body) {
        std::vector<StmtPtr> out;
        for (auto& s : body) {
            auto bit = before_.find(s->span.node);
            if (bit != before_.end())
                for (auto& x : bit->second) out.push_back(x);
            rebuildBlock(s->body);
            rebuildBlock(s->orelse);
            if (s->kind == StmtKind::While) {
                auto bb = bodyBegin_.find(s->span.node);
                if (bb != bodyBegin_.end())
                    s->body.insert(s->body.begin(), bb->second.begin(), bb->second.end());
                auto be = bodyEnd_.find(s->span.node);
                if (be != bodyEnd_.end())
                    for (auto& x : be->second) s->body.push_back(x);
            }
            out.push_back(s);
            auto ait = after_.find(s->span.node);
            if (ait != after_.end())
                for (auto& x : ait->second) out.push_back(x);
        }
        body = std::move(out);
    }

    // ---- generated predicate functions ------------------------------------------------

    void emitPredBody(const FormulaPtr& f, int line, std::vector<StmtPtr>& out) {
        if (!f) return;
        switch (f->kind) {
            case FormulaKind::Expr:
                if (f->expr->kind == ExprKind::BoolLit && f->expr->boolValue) return;
                out.push_back(
                    callStmt("assertFormula", {cloneExpr(f->expr), intLit(-1, line)}, line));
                return;
            case FormulaKind::AccField: {
                ExprPtr recv = cloneExpr(f->expr->args[0]);
                int idx = fieldIndex(recordOfRecv(recv), f->expr->name);
                out.push_back(callStmt(
                    "assertAcc",
                    {ofVar(line), recv, intLit(idx, line), intLit(-1, line)}, line));
                return;
            }
            case FormulaKind::Pred: {
                std::vector<ExprPtr> args;
                for (auto& a : f->args) args.push_back(cloneExpr(a));
                args.push_back(ofVar(line));
                out.push_back(callStmt("$pred_" + f->pred, std::move(args), line));
                return;
            }
            case FormulaKind::Cond: {
                std::vector<StmtPtr> then, orelse;
                emitPredBody(f->lhs, line, then);
                emitPredBody(f->rhs, line, orelse);
                if (then.empty() && orelse.empty()) return;
                out.push_back(
                    ifStmt(cloneExpr(f->expr), std::move(then), std::move(orelse), line));
                return;
            }
            case FormulaKind::Sep:
                emitPredBody(f->lhs, line, out);
                emitPredBody(f->rhs, line, out);
                return;
        }
    }

    void emitSepBody(const FormulaPtr& f, int line, std::vector<StmtPtr>& out) {
        if (!f) return;
        switch (f->kind) {
            case FormulaKind::AccField: {
                ExprPtr recv = cloneExpr(f->expr->args[0]);
                int idx = fieldIndex(recordOfRecv(recv), f->expr->name);
                out.push_back(callStmt("sepAdd",
                                       {var("_tempFields", line, TypeRef::refTy("OwnedFields")),
                                        recv, intLit(idx, line), intLit(-1, line)},
                                       line));
                return;
            }
            case FormulaKind::Pred: {
                std::vector<ExprPtr> args;
                for (auto& a : f->args) args.push_back(cloneExpr(a));
                args.push_back(var("_tempFields", line, TypeRef::refTy("OwnedFields")));
                out.push_back(callStmt("$sep_" + f->pred, std::move(args), line));
                return;
            }
            case FormulaKind::Cond: {
                std::vector<StmtPtr> then, orelse;
                emitSepBody(f->lhs, line, then);
                emitSepBody(f->rhs, line, orelse);
                if (then.empty() && orelse.empty()) return;
                out.push_back(
                    ifStmt(cloneExpr(f->expr), std::move(then), std::move(orelse), line));
                return;
            }
            case FormulaKind::Sep:
                emitSepBody(f->lhs, line, out);
                emitSepBody(f->rhs, line, out);
                return;
            default:
                return;
        }
    }

    void emitFpBody(const FormulaPtr& f, int line, std::vector<StmtPtr>& out) {
        if (!f) return;
        switch (f->kind) {
            case FormulaKind::AccField: {
                ExprPtr recv = cloneExpr(f->expr->args[0]);
                int idx = fieldIndex(recordOfRecv(recv), f->expr->name);
                out.push_back(callStmt("fpMove",
                                       {var("$from", line, TypeRef::refTy("OwnedFields")),
                                        var("$to", line, TypeRef::refTy("OwnedFields")), recv,
                                        intLit(idx, line)},
                                       line));
                return;
            }
            case FormulaKind::Pred: {
                std::vector<ExprPtr> args;
                for (auto& a : f->args) args.push_back(cloneExpr(a));
                args.push_back(var("$from", line, TypeRef::refTy("OwnedFields")));
                args.push_back(var("$to", line, TypeRef::refTy("OwnedFields")));
                out.push_back(callStmt("$fp_" + f->pred, std::move(args), line));
                return;
            }
            case FormulaKind::Cond: {
                std::vector<StmtPtr> then, orelse;
                emitFpBody(f->lhs, line, then);
                emitFpBody(f->rhs, line, orelse);
                if (then.empty() && orelse.empty()) return;
                out.push_back(
                    ifStmt(cloneExpr(f->expr), std::move(then), std::move(orelse), line));
                return;
            }
            case FormulaKind::Sep:
                emitFpBody(f->lhs, line, out);
                emitFpBody(f->rhs, line, out);
                return;
            default:
                return;
        }
    }

    void generatePredicateFunctions() {
        auto closeOver = [&](std::set<std::string>& s) {
            std::vector<std::string> work(s.begin(), s.end());
            while (!work.empty()) {
                std::string p = work.back();
                work.pop_back();
                const PredicateDecl* d = prog_->predicate(p);
                if (!d) continue;
                std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& f) {
                    if (!f) return;
                    if (f->kind == FormulaKind::Pred && !s.count(f->pred)) {
                        s.insert(f->pred);
                        work.push_back(f->pred);
                    }
                    walk(f->lhs);
                    walk(f->rhs);
                };
                walk(d->body.staticPart);
            }
        };
        closeOver(predFnNeeded_);
        closeOver(sepFnNeeded_);
        closeOver(fpFnNeeded_);

        auto newFn = [&](const std::string& name, const PredicateDecl& d,
                         std::vector<Param> extra) {
            MethodDecl fn;
            fn.name = name;
            fn.params = d.params;
            for (auto& e : extra) fn.params.push_back(e);
            fn.span = sp(d.span.line);
            fn.pre.staticPart = mkFExpr(mkBoolLit(true, sp(d.span.line)));
            fn.post.staticPart = mkFExpr(mkBoolLit(true, sp(d.span.line)));
            fn.body = std::make_shared<Stmt>();
            fn.body->kind = StmtKind::Block;
            fn.body->span = sp(d.span.line);
            return fn;
        };

        std::vector<MethodDecl> generated;
        for (const auto& d : prog_->predicates) {
            int line = d.span.line;
            if (predFnNeeded_.count(d.name)) {
                auto fn = newFn("$pred_" + d.name, d,
                                {{kOwnedFields, TypeRef::refTy("OwnedFields"), {}}});
                emitPredBody(d.body.staticPart, line, fn.body->body);
                generated.push_back(std::move(fn));
            }
            if (sepFnNeeded_.count(d.name)) {
                auto fn = newFn("$sep_" + d.name, d,
                                {{"_tempFields", TypeRef::refTy("OwnedFields"), {}}});
                emitSepBody(d.body.staticPart, line, fn.body->body);
                generated.push_back(std::move(fn));
            }
            if (fpFnNeeded_.count(d.name)) {
                auto fn = newFn("$fp_" + d.name, d,
                                {{"$from", TypeRef::refTy("OwnedFields"), {}},
                                 {"$to", TypeRef::refTy("OwnedFields"), {}}});
                emitFpBody(d.body.staticPart, line, fn.body->body);
                generated.push_back(std::move(fn));
            }
        }
        for (auto& fn : generated) prog_->methods.push_back(std::move(fn));
    }

    void signatures() {
        for (auto& m : prog_->methods) {
            if (m.intrinsic || !m.body) continue;
            if (m.name == "main") continue;
            if (m.name.rfind("$", 0) == 0) continue;
            if (tracked_.count(m.name))
                m.params.push_back({kOwnedFields, TypeRef::refTy("OwnedFields"), {}});
        }
    }

    void validate() {
        DiagList local;
        if (!typeCheck(*prog_, local)) {
            for (auto& d : local.all())
                diags_.error(d.span,
                             "instrumented program fails to re-typecheck: " + d.message);
            return;
        }
        if (!lowerProgram(*prog_, local)) {
            for (auto& d : local.all())
                diags_.error(d.span, "instrumented program fails to re-lower: " + d.message);
            return;
        }
        typeCheck(*prog_, local);
    }
};

}  // namespace

const char* instrumentModeName(InstrumentMode m) {
    switch (m) {
        case InstrumentMode::Gradual: return "gradual";
        case InstrumentMode::Dynamic: return "dynamic";
        case InstrumentMode::Framing: return "framing";
    }
    return "?";
}

InstrumentResult instrument(const Program& p, const std::vector<RuntimeCheck>& checks,
                            InstrumentMode mode, DiagList& diags) {
    Instrumenter inst(p, checks, mode, diags);
    return inst.run();
}

}  // namespace gvl
