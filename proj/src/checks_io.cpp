#include "gvl/checks_io.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "gvl/parser.hpp"
#include "gvl/printer.hpp"

namespace gvl {

namespace {

const char* loopPhaseName(LoopPhase p) {
    switch (p) {
        case LoopPhase::Before: return "before";
        case LoopPhase::Beginning: return "beginning";
        case LoopPhase::End: return "end";
        case LoopPhase::After: return "after";
    }
    return "?";
}

struct NodeIndex {
    std::map<int32_t, Span> spans;
    std::map<int32_t, const Stmt*> stmts;
    std::map<int32_t, std::string> methodOf;

    void addExpr(const ExprPtr& e, const std::string& method) {
        if (!e) return;
        note(e->span, method);
        for (auto& a : e->args) addExpr(a, method);
    }
    void addFormula(const FormulaPtr& f, const std::string& method) {
        if (!f) return;
        note(f->span, method);
        addExpr(f->expr, method);
        for (auto& a : f->args) addExpr(a, method);
        addFormula(f->lhs, method);
        addFormula(f->rhs, method);
    }
    void addStmt(const StmtPtr& s, const std::string& method) {
        if (!s) return;
        note(s->span, method);
        stmts[s->span.node] = s.get();
        addExpr(s->lhs, method);
        addExpr(s->rhs, method);
        for (auto& a : s->args) addExpr(a, method);
        addFormula(s->formula.staticPart, method);
        for (auto& b : s->body) addStmt(b, method);
        for (auto& b : s->orelse) addStmt(b, method);
        addStmt(s->forInit, method);
        addStmt(s->forStep, method);
    }
    void note(Span sp, const std::string& method) {
        if (sp.node < 0) return;
        spans[sp.node] = sp;
        if (!method.empty()) methodOf[sp.node] = method;
    }

    static NodeIndex build(const Program& p) {
        NodeIndex idx;
        for (const auto& d : p.predicates) idx.addFormula(d.body.staticPart, "");
        for (const auto& m : p.methods) {
            if (m.intrinsic) continue;
            idx.addFormula(m.pre.staticPart, m.name);
            idx.addFormula(m.post.staticPart, m.name);
            idx.addStmt(m.body, m.name);
        }
        return idx;
    }
};

std::string originStr(const OriginInfo& o) {
    std::ostringstream os;
    switch (o.kind) {
        case OriginKind::None: return "none";
        case OriginKind::Call: os << "call"; break;
        case OriginKind::Fold: os << "fold"; break;
        case OriginKind::Unfold: os << "unfold"; break;
        case OriginKind::Loop: os << "loop:" << loopPhaseName(o.loopPhase); break;
    }
    if (o.postSide) os << ":post";
    if (o.stmt) os << "#" << o.stmt->span.node << "@" << o.stmt->span.line << ":"
                   << o.stmt->span.col;
    return os.str();
}

bool parseOrigin(const std::string& s, ParsedCheck::Bc* bc, ParsedCheck* rc, std::string& err) {
    std::string kind = s;
    int32_t node = -1;
    auto hash = s.find('#');
    if (hash != std::string::npos) {
        kind = s.substr(0, hash);
        std::string rest = s.substr(hash + 1);
        auto at = rest.find('@');
        try {
            node = std::stoi(at == std::string::npos ? rest : rest.substr(0, at));
        } catch (...) {
            err = "bad origin node: " + s;
            return false;
        }
    }
    if (bc) {
        bc->originKind = kind;
        bc->originNode = node;
    } else {
        rc->originKind = kind;
        rc->originNode = node;
    }
    return true;
}

}  // namespace

std::string originKindString(const OriginInfo& o) { return originStr(o); }

std::string serializeChecks(const Program& p, const VerifyResult& res) {
    (void)p;
    std::ostringstream os;
    os << "gvl-checks 1\n";
    for (const auto& d : res.decls)
        os << "decl " << (d.isPredicate ? "predicate " : "method ") << d.name << " "
           << (d.ok ? "ok" : "fail") << "\n";
    for (const auto& rc : res.checks) {
        os << "check id=" << rc.id << " loc=" << rc.locationSpan.line << ":"
           << rc.locationSpan.col << "#" << rc.locationNode << " origin=" << originStr(rc.origin)
           << " sep=" << (rc.needsSeparation ? 1 : 0) << " formula=" << printFormula(rc.check)
           << "\n";
        for (const auto& bc : rc.bcs) {
            os << "bc loc=" << bc.locationSpan.line << ":" << bc.locationSpan.col << "#"
               << bc.locationNode << " neg=" << (bc.negated ? 1 : 0) << " origin=";
            os << originStr(bc.origin);
            os << " cond=" << printExpr(bc.cond) << "\n";
        }
    }
    os << "end\n";
    return os.str();
}

std::optional<ParsedChecks> parseChecks(const std::string& text, std::string& error) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "gvl-checks 1") {
        error = "missing or unsupported header";
        return std::nullopt;
    }
    ParsedChecks out;
    auto keyVal = [](const std::string& l, const std::string& key) -> std::string {
        auto pos = l.find(" " + key + "=");
        if (pos == std::string::npos) return "";
        size_t start = pos + key.size() + 2;
        size_t end = l.find(' ', start);
        return l.substr(start, end == std::string::npos ? std::string::npos : end - start);
    };
    auto tailVal = [](const std::string& l, const std::string& key) -> std::string {
        auto pos = l.find(" " + key + "=");
        if (pos == std::string::npos) return "";
        return l.substr(pos + key.size() + 2);
    };
    auto parseLoc = [&](const std::string& v, int32_t& node, Span& sp) {
        auto hash = v.find('#');
        auto colon = v.find(':');
        if (hash == std::string::npos || colon == std::string::npos) return false;
        try {
            sp.line = std::stoi(v.substr(0, colon));
            sp.col = std::stoi(v.substr(colon + 1, hash - colon - 1));
            node = std::stoi(v.substr(hash + 1));
            sp.node = node;
        } catch (...) {
            return false;
        }
        return true;
    };
    while (std::getline(in, line)) {
        if (line == "end") return out;
        if (line.rfind("decl ", 0) == 0) {
            out.declVerdicts.push_back(line.substr(5));
            continue;
        }
        if (line.rfind("check ", 0) == 0) {
            ParsedCheck c;
            try {
                c.id = std::stoi(keyVal(line, "id"));
            } catch (...) {
                error = "bad check id: " + line;
                return std::nullopt;
            }
            if (!parseLoc(keyVal(line, "loc"), c.locationNode, c.locationSpan)) {
                error = "bad check loc: " + line;
                return std::nullopt;
            }
            if (!parseOrigin(keyVal(line, "origin"), nullptr, &c, error)) return std::nullopt;
            c.needsSeparation = keyVal(line, "sep") == "1";
            c.formulaText = tailVal(line, "formula");
            out.checks.push_back(std::move(c));
            continue;
        }
        if (line.rfind("bc ", 0) == 0) {
            if (out.checks.empty()) {
                error = "bc line before any check";
                return std::nullopt;
            }
            ParsedCheck::Bc bc;
            if (!parseLoc(keyVal(line, "loc"), bc.node, bc.locationSpan)) {
                error = "bad bc loc: " + line;
                return std::nullopt;
            }
            bc.negated = keyVal(line, "neg") == "1";
            if (!parseOrigin(keyVal(line, "origin"), &bc, nullptr, error)) return std::nullopt;
            bc.condText = tailVal(line, "cond");
            out.checks.back().bcs.push_back(std::move(bc));
            continue;
        }
        if (!line.empty()) {
            error = "unrecognized line: " + line;
            return std::nullopt;
        }
    }
    error = "missing 'end' line";
    return std::nullopt;
}

namespace {

OriginInfo mkOrigin(const NodeIndex& idx, const std::string& kind, int32_t node,
                    std::string& error) {
    OriginInfo o;
    std::string k = kind;
    if (k.size() > 5 && k.substr(k.size() - 5) == ":post") {
        o.postSide = true;
        k = k.substr(0, k.size() - 5);
    }
    if (k == "none") return o;
    if (k == "call") o.kind = OriginKind::Call;
    else if (k == "fold") o.kind = OriginKind::Fold;
    else if (k == "unfold") o.kind = OriginKind::Unfold;
    else if (k.rfind("loop:", 0) == 0) {
        o.kind = OriginKind::Loop;
        std::string ph = k.substr(5);
        if (ph == "before") o.loopPhase = LoopPhase::Before;
        else if (ph == "beginning") o.loopPhase = LoopPhase::Beginning;
        else if (ph == "end") o.loopPhase = LoopPhase::End;
        else if (ph == "after") o.loopPhase = LoopPhase::After;
        else error = "bad loop phase: " + k;
    } else {
        error = "bad origin kind: " + k;
        return o;
    }
    auto it = idx.stmts.find(node);
    if (it == idx.stmts.end()) {
        error = "origin node not found: " + std::to_string(node);
        return o;
    }
    o.stmt = it->second;
    return o;
}

// Minimal type annotation for reparsed check formulas (field types and record
// names are needed downstream by the instrumenter). The scope is the method
// that hosts the check location.
void annotateExpr(const Program& p, const std::map<std::string, TypeRef>& scope,
                  const ExprPtr& e) {
    if (!e) return;
    for (auto& a : e->args) annotateExpr(p, scope, a);
    switch (e->kind) {
        case ExprKind::IntLit: e->type = TypeRef::intTy(); break;
        case ExprKind::BoolLit: e->type = TypeRef::boolTy(); break;
        case ExprKind::CharLit: e->type = TypeRef::charTy(); break;
        case ExprKind::NullLit: e->type = TypeRef::nullTy(); break;
        case ExprKind::Var: {
            auto it = scope.find(e->name);
            if (it != scope.end()) e->type = it->second;
            break;
        }
        case ExprKind::Field: {
            const TypeRef& rt = e->args[0]->type;
            if (rt.kind == TypeKind::Ref) {
                const RecordDecl* r = p.record(rt.record);
                if (r) {
                    int idx = r->fieldIndex(e->name);
                    if (idx >= 0) e->type = r->fields[idx].type;
                }
            }
            break;
        }
        case ExprKind::Binary:
            e->type = binOpPrec(e->binOp) >= 5 ? TypeRef::intTy() : TypeRef::boolTy();
            break;
        case ExprKind::Unary:
            e->type = e->unOp == UnOp::Neg ? TypeRef::intTy() : TypeRef::boolTy();
            break;
        default: break;
    }
}

void annotateFormula(const Program& p, const std::map<std::string, TypeRef>& scope,
                     const FormulaPtr& f) {
    if (!f) return;
    annotateExpr(p, scope, f->expr);
    for (auto& a : f->args) annotateExpr(p, scope, a);
    annotateFormula(p, scope, f->lhs);
    annotateFormula(p, scope, f->rhs);
}

std::map<std::string, TypeRef> methodScope(const Program& p, const std::string& method) {
    std::map<std::string, TypeRef> scope;
    const MethodDecl* m = p.method(method);
    if (!m) return scope;
    for (auto& prm : m->params) scope[prm.name] = prm.type;
    for (auto& r : m->returns) scope[r.name] = r.type;
    std::function<void(const StmtPtr&)> walk = [&](const StmtPtr& s) {
        if (!s) return;
        if (s->kind == StmtKind::VarDecl) scope[s->varName] = s->varType;
        for (auto& b : s->body) walk(b);
        for (auto& b : s->orelse) walk(b);
        walk(s->forInit);
        walk(s->forStep);
    };
    walk(m->body);
    return scope;
}

}  // namespace

std::vector<RuntimeCheck> resolveChecks(const Program& p, const ParsedChecks& parsed,
                                        std::string& error) {
    NodeIndex idx = NodeIndex::build(p);
    // reparsing needs a scratch program for node ids; formulas keep their own
    Program scratch;
    scratch.records = p.records;
    scratch.predicates = p.predicates;
    scratch.methods = p.methods;
    scratch.nextNodeId = p.nextNodeId + 1000000;

    std::vector<RuntimeCheck> out;
    for (const auto& c : parsed.checks) {
        RuntimeCheck rc;
        rc.id = c.id;
        rc.locationNode = c.locationNode;
        rc.locationSpan = c.locationSpan;
        auto spanIt = idx.spans.find(c.locationNode);
        if (spanIt == idx.spans.end()) {
            error = "check location node not found: " + std::to_string(c.locationNode);
            return {};
        }
        rc.needsSeparation = c.needsSeparation;
        rc.origin = mkOrigin(idx, c.originKind, c.originNode, error);
        if (!error.empty()) return {};

        DiagList diags;
        auto f = parseFormula(c.formulaText, scratch, diags);
        if (!f) {
            error = "cannot reparse check formula: " + c.formulaText + "\n" + diags.str();
            return {};
        }
        std::string method;
        auto mit = idx.methodOf.find(rc.origin.stmt ? rc.origin.stmt->span.node
                                                    : c.locationNode);
        if (mit != idx.methodOf.end()) method = mit->second;
        auto scope = methodScope(p, method);
        annotateFormula(p, scope, f->staticPart);
        rc.check = f->staticPart;

        for (const auto& b : c.bcs) {
            BranchCond bc;
            bc.locationNode = b.node;
            bc.locationSpan = b.locationSpan;
            bc.negated = b.negated;
            bc.origin = mkOrigin(idx, b.originKind, b.originNode, error);
            if (!error.empty()) return {};
            DiagList d2;
            bc.cond = parseExprText(b.condText, scratch, d2);
            if (!bc.cond) {
                error = "cannot reparse branch condition: " + b.condText;
                return {};
            }
            annotateExpr(p, scope, bc.cond);
            rc.bcs.push_back(std::move(bc));
        }
        out.push_back(std::move(rc));
    }
    return out;
}

}  // namespace gvl
