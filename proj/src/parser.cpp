#include "gvl/parser.hpp"

#include <set>

#include "gvl/lexer.hpp"

namespace gvl {

namespace {

const std::set<std::string> kKeywords = {
    "struct", "typedef", "int", "bool", "char", "void", "if", "else", "while",
    "for", "return", "assert", "alloc", "NULL", "true", "false", "requires",
    "ensures", "predicate", "fold", "unfold", "loop_invariant", "acc",
};

class Parser {
public:
    Parser(std::vector<Token> toks, DiagList& diags, const ParseOptions& opts)
        : toks_(std::move(toks)), diags_(diags), opts_(opts) {}

    std::unique_ptr<Program> parseProgram(const std::string& sourceName) {
        auto p = std::make_unique<Program>();
        p->sourceName = sourceName;
        prog_ = p.get();
        registerBuiltins(*p);
        while (!at(Tok::End) && diags_.ok()) {
            parseDecl(*p);
        }
        checkDuplicates(*p);
        if (!diags_.ok()) return nullptr;
        return p;
    }

    GradualFormula parseFormulaEntry(Program& p) {
        prog_ = &p;
        return parseGradualFormula();
    }

    ExprPtr parseExprEntry(Program& p) {
        prog_ = &p;
        return parseExpr();
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
    DiagList& diags_;
    ParseOptions opts_;
    Program* prog_ = nullptr;

    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(size_t off = 1) const {
        size_t i = pos_ + off;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    bool at(Tok k) const { return cur().kind == k; }
    bool atIdent(const std::string& s) const { return at(Tok::Ident) && cur().text == s; }
    Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    Span spanHere() {
        Span s = cur().span;
        s.node = prog_->freshNodeId();
        return s;
    }
    void err(const std::string& msg) { diags_.error(cur().span, msg); }

    Token expect(Tok k, const char* what) {
        if (!at(k)) {
            err(std::string("expected ") + what);
            return cur();
        }
        return take();
    }
    std::string expectIdent(const char* what) {
        if (!at(Tok::Ident)) {
            err(std::string("expected ") + what);
            return "<error>";
        }
        std::string n = cur().text;
        if (kKeywords.count(n)) {
            err("'" + n + "' is a keyword, expected " + what);
        }
        take();
        return n;
    }

    void checkUserName(const std::string& n, Span sp) {
        if (!opts_.allowReserved && isReservedName(n))
            diags_.error(sp, "identifier '" + n + "' uses a reserved prefix");
    }

    void checkDuplicates(Program& p) {
        std::set<std::string> names;
        auto add = [&](const std::string& n, Span sp, const char* kind) {
            if (!names.insert(n).second)
                diags_.error(sp, std::string("duplicate declaration of ") + kind + " '" + n + "'");
        };
        for (auto& r : p.records)
            if (!r.builtin) add(r.name, r.span, "record");
        for (auto& d : p.predicates) add(d.name, d.span, "predicate");
        for (auto& m : p.methods)
            if (!m.intrinsic) add(m.name, m.span, "method");
            else if (names.count(m.name))
                diags_.error(p.method(m.name)->span, "cannot redefine builtin '" + m.name + "'");
        for (auto& m : p.methods) {
            if (m.intrinsic) continue;
            std::set<std::string> fieldNames;
            (void)fieldNames;
        }
        for (auto& r : p.records) {
            std::set<std::string> fs;
            for (auto& f : r.fields)
                if (!fs.insert(f.name).second)
                    diags_.error(f.span, "duplicate field '" + f.name + "' in record '" + r.name + "'");
        }
    }

    // ---- declarations ------------------------------------------------------

    void parseDecl(Program& p) {
        if (atIdent("typedef")) {
            take();
            if (atIdent("struct")) take();
            expectIdent("type name");
            expectIdent("typedef alias");
            expect(Tok::Semi, "';'");
            return;
        }
        if (atIdent("struct") && peek().kind == Tok::Ident && peek(2).kind == Tok::LBrace) {
            parseStruct(p);
            return;
        }
        if (atIdent("predicate")) {
            parsePredicate(p);
            return;
        }
        parseMethod(p);
    }

    void parseStruct(Program& p) {
        Span sp = spanHere();
        take();  // struct
        RecordDecl r;
        r.span = sp;
        r.name = expectIdent("record name");
        checkUserName(r.name, sp);
        expect(Tok::LBrace, "'{'");
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            Param f;
            f.span = spanHere();
            f.type = parseType();
            f.name = expectIdent("field name");
            checkUserName(f.name, f.span);
            expect(Tok::Semi, "';'");
            r.fields.push_back(std::move(f));
        }
        expect(Tok::RBrace, "'}'");
        expect(Tok::Semi, "';'");
        p.records.push_back(std::move(r));
    }

    void parsePredicate(Program& p) {
        Span sp = spanHere();
        take();  // predicate
        PredicateDecl d;
        d.span = sp;
        d.name = expectIdent("predicate name");
        checkUserName(d.name, sp);
        expect(Tok::LParen, "'('");
        d.params = parseParams();
        expect(Tok::RParen, "')'");
        expect(Tok::Assign, "'='");
        d.body = parseGradualFormula();
        expect(Tok::Semi, "';'");
        p.predicates.push_back(std::move(d));
    }

    void parseMethod(Program& p) {
        Span sp = spanHere();
        MethodDecl m;
        m.span = sp;
        TypeRef ret = parseType();
        m.name = expectIdent("method name");
        checkUserName(m.name, sp);
        expect(Tok::LParen, "'('");
        m.params = parseParams();
        expect(Tok::RParen, "')'");
        if (ret.kind != TypeKind::Void) m.returns.push_back({kResultVar, ret, sp});
        bool sawPre = false, sawPost = false;
        m.pre = trueFormula(sp);
        m.post = trueFormula(sp);
        while (atIdent("requires") || atIdent("ensures")) {
            bool isPre = cur().text == "requires";
            Span csp = cur().span;
            take();
            GradualFormula f = parseGradualFormula();
            expect(Tok::Semi, "';'");
            if (isPre) {
                if (sawPre) diags_.error(csp, "duplicate requires clause");
                m.pre = std::move(f);
                sawPre = true;
            } else {
                if (sawPost) diags_.error(csp, "duplicate ensures clause");
                m.post = std::move(f);
                sawPost = true;
            }
        }
        m.body = parseBlock();
        p.methods.push_back(std::move(m));
    }

    std::vector<Param> parseParams() {
        std::vector<Param> out;
        if (at(Tok::RParen)) return out;
        while (true) {
            Param prm;
            prm.span = spanHere();
            prm.type = parseType();
            prm.name = expectIdent("parameter name");
            checkUserName(prm.name, prm.span);
            out.push_back(std::move(prm));
            if (!at(Tok::Comma)) break;
            take();
        }
        return out;
    }

    TypeRef parseType() {
        TypeRef t;
        if (atIdent("struct")) {
            take();
            t = TypeRef::refTy(expectIdent("record name"));
            // `struct S` must be used through a pointer
            if (at(Tok::Star)) take();
            else err("record types must be pointers (expected '*')");
            while (at(Tok::Star)) { take(); err("multi-level pointers are not supported"); }
            return t;
        }
        if (!at(Tok::Ident)) {
            err("expected type");
            return TypeRef::errorTy();
        }
        std::string n = take().text;
        if (n == "int") t = TypeRef::intTy();
        else if (n == "bool") t = TypeRef::boolTy();
        else if (n == "char") t = TypeRef::charTy();
        else if (n == "void") t = TypeRef::voidTy();
        else t = TypeRef::refTy(n);
        if (at(Tok::Star)) {
            take();
            if (t.kind == TypeKind::Ref) {
                // S* already handled; keep as is
            } else if (t.kind == TypeKind::Int || t.kind == TypeKind::Bool ||
                       t.kind == TypeKind::Char) {
                // value-type pointer: becomes a single-field box record in lowering
                t = TypeRef::refTy("$box_" + n);
            } else {
                err("cannot form pointer to this type");
            }
            while (at(Tok::Star)) { take(); err("multi-level pointers are not supported"); }
        } else if (t.kind == TypeKind::Ref) {
            err("record types must be pointers (expected '*')");
        }
        return t;
    }

    GradualFormula trueFormula(Span sp) {
        GradualFormula g;
        g.imprecise = false;
        g.span = sp;
        auto e = mkBoolLit(true, sp);
        e->span.node = prog_->freshNodeId();
        g.staticPart = mkFExpr(e);
        g.staticPart->span = e->span;
        return g;
    }

    // ---- formulas ----------------------------------------------------------

    GradualFormula parseGradualFormula() {
        GradualFormula g;
        g.span = spanHere();
        if (at(Tok::Question)) {
            take();
            g.imprecise = true;
            if (at(Tok::AndAnd)) {
                take();
                if (at(Tok::Question)) {
                    err("only one top-level '?' is allowed, and only leftmost");
                    take();
                }
                g.staticPart = parseFormula();
            } else {
                auto e = mkBoolLit(true, g.span);
                g.staticPart = mkFExpr(e);
                g.staticPart->span = e->span;
            }
        } else {
            g.staticPart = parseFormula();
        }
        return g;
    }

    FormulaPtr parseFormula() {
        FormulaPtr f = parseFormulaConjunct();
        if (at(Tok::AndAnd)) {
            take();
            if (at(Tok::Question)) {
                err("'?' must be the leftmost conjunct");
                take();
            }
            FormulaPtr rest = parseFormula();
            Span sp = f->span;
            sp.node = prog_->freshNodeId();
            auto s = mkFSep(f, rest);
            s->span = sp;
            return s;
        }
        return f;
    }

    FormulaPtr parseFormulaConjunct() {
        Span sp = spanHere();
        if (atIdent("acc")) {
            take();
            expect(Tok::LParen, "'('");
            // acc(e->f) or acc(p(args))
            if (at(Tok::Ident) && !kKeywords.count(cur().text) && peek().kind == Tok::LParen) {
                std::string pn = take().text;
                take();  // (
                auto args = parseArgs();
                expect(Tok::RParen, "')'");
                expect(Tok::RParen, "')'");
                auto f = mkFPred(pn, std::move(args), sp);
                f->span = sp;
                return f;
            }
            ExprPtr access = parseExpr();
            expect(Tok::RParen, "')'");
            auto f = mkFAcc(access);
            f->span = sp;
            return f;
        }
        // predicate instance p(args): identifier followed by '(' (calls are not
        // legal in formulas, so this is unambiguous)
        if (at(Tok::Ident) && !kKeywords.count(cur().text) && peek().kind == Tok::LParen) {
            std::string pn = take().text;
            take();  // (
            auto args = parseArgs();
            expect(Tok::RParen, "')'");
            auto f = mkFPred(pn, std::move(args), sp);
            f->span = sp;
            return f;
        }
        // boolean expression conjunct (parsed below '&&' precedence) or
        // a formula conditional e ? f1 : f2; the else branch is greedy and
        // extends over the rest of the conjunction
        ExprPtr e = parseCmp();
        if (at(Tok::Question)) {
            take();
            FormulaPtr a = parseFormula();
            expect(Tok::Colon, "':'");
            FormulaPtr b = parseFormula();
            auto f = mkFCond(e, a, b);
            f->span = sp;
            return f;
        }
        return exprConjunct(e, sp);
    }

    // A parenthesized ternary at conjunct level is a formula conditional
    // whose branches are boolean expressions.
    FormulaPtr exprConjunct(const ExprPtr& e, Span sp) {
        if (e->kind == ExprKind::Ternary) {
            auto f = mkFCond(e->args[0], exprConjunct(e->args[1], e->args[1]->span),
                             exprConjunct(e->args[2], e->args[2]->span));
            f->span = sp;
            return f;
        }
        auto f = mkFExpr(e);
        f->span = sp;
        return f;
    }

    // ---- statements --------------------------------------------------------

    StmtPtr newStmt(StmtKind k, Span sp) {
        auto s = std::make_shared<Stmt>();
        s->kind = k;
        s->span = sp;
        return s;
    }

    StmtPtr parseBlock() {
        Span sp = spanHere();
        expect(Tok::LBrace, "'{'");
        auto blk = newStmt(StmtKind::Block, sp);
        while (!at(Tok::RBrace) && !at(Tok::End) && diags_.ok()) {
            parseStmtInto(blk->body);
        }
        expect(Tok::RBrace, "'}'");
        return blk;
    }

    // A statement may expand to several (decl+init).
    void parseStmtInto(std::vector<StmtPtr>& out) {
        Span sp = spanHere();
        if (at(Tok::LBrace)) {
            out.push_back(parseBlock());
            return;
        }
        if (atIdent("if")) {
            out.push_back(parseIf());
            return;
        }
        if (atIdent("while")) {
            take();
            expect(Tok::LParen, "'('");
            ExprPtr cond = parseExpr();
            expect(Tok::RParen, "')'");
            auto s = newStmt(StmtKind::While, sp);
            s->rhs = cond;
            s->formula = parseOptLoopInvariant(sp);
            auto body = parseBlock();
            s->body = std::move(body->body);
            out.push_back(s);
            return;
        }
        if (atIdent("for")) {
            take();
            expect(Tok::LParen, "'('");
            auto s = newStmt(StmtKind::For, sp);
            std::vector<StmtPtr> initStmts;
            if (!at(Tok::Semi)) parseSimpleStmtInto(initStmts);
            expect(Tok::Semi, "';'");
            s->rhs = at(Tok::Semi) ? mkBoolLit(true, sp) : parseExpr();
            expect(Tok::Semi, "';'");
            std::vector<StmtPtr> stepStmts;
            if (!at(Tok::RParen)) parseSimpleStmtInto(stepStmts);
            expect(Tok::RParen, "')'");
            s->formula = parseOptLoopInvariant(sp);
            auto body = parseBlock();
            s->body = std::move(body->body);
            if (!initStmts.empty()) {
                auto blk = newStmt(StmtKind::Block, sp);
                blk->body = std::move(initStmts);
                s->forInit = blk;
            }
            if (!stepStmts.empty()) {
                auto blk = newStmt(StmtKind::Block, sp);
                blk->body = std::move(stepStmts);
                s->forStep = blk;
            }
            out.push_back(s);
            return;
        }
        if (atIdent("return")) {
            take();
            auto s = newStmt(StmtKind::Return, sp);
            if (!at(Tok::Semi)) s->rhs = parseExpr();
            expect(Tok::Semi, "';'");
            out.push_back(s);
            return;
        }
        if (atIdent("assert")) {
            bool spec = cur().inSpec;
            take();
            auto s = newStmt(spec ? StmtKind::AssertStatic : StmtKind::AssertDyn, sp);
            if (spec) {
                s->formula = parseGradualFormula();
                if (s->formula.imprecise) diags_.error(sp, "static assert formula cannot be imprecise");
            } else {
                expect(Tok::LParen, "'('");
                s->rhs = parseExpr();
                expect(Tok::RParen, "')'");
            }
            expect(Tok::Semi, "';'");
            out.push_back(s);
            return;
        }
        if (atIdent("fold") || atIdent("unfold")) {
            bool isFold = cur().text == "fold";
            take();
            auto s = newStmt(isFold ? StmtKind::Fold : StmtKind::Unfold, sp);
            if (atIdent("acc")) {
                take();
                expect(Tok::LParen, "'('");
                parsePredInstanceInto(*s);
                expect(Tok::RParen, "')'");
            } else {
                parsePredInstanceInto(*s);
            }
            expect(Tok::Semi, "';'");
            out.push_back(s);
            return;
        }
        parseSimpleStmtInto(out);
        expect(Tok::Semi, "';'");
    }

    GradualFormula parseOptLoopInvariant(Span sp) {
        if (atIdent("loop_invariant")) {
            take();
            GradualFormula f = parseGradualFormula();
            expect(Tok::Semi, "';'");
            return f;
        }
        return trueFormula(sp);
    }

    void parsePredInstanceInto(Stmt& s) {
        s.predName = expectIdent("predicate name");
        expect(Tok::LParen, "'('");
        s.args = parseArgs();
        expect(Tok::RParen, "')'");
    }

    StmtPtr parseIf() {
        Span sp = spanHere();
        take();  // if
        expect(Tok::LParen, "'('");
        ExprPtr cond = parseExpr();
        expect(Tok::RParen, "')'");
        auto s = newStmt(StmtKind::If, sp);
        s->rhs = cond;
        auto thenB = parseBlock();
        s->body = std::move(thenB->body);
        if (atIdent("else")) {
            take();
            if (atIdent("if")) {
                s->orelse.push_back(parseIf());
            } else {
                auto elseB = parseBlock();
                s->orelse = std::move(elseB->body);
            }
        }
        return s;
    }

    bool startsType() {
        if (!at(Tok::Ident)) return false;
        const std::string& n = cur().text;
        if (n == "int" || n == "bool" || n == "char" || n == "struct" || n == "void")
            return peek().kind == Tok::Ident || peek().kind == Tok::Star ||
                   (n == "struct" && peek().kind == Tok::Ident);
        if (kKeywords.count(n)) return false;
        // `Name* x` or `Name x` (record type via auto-typedef)
        if (peek().kind == Tok::Star && peek(2).kind == Tok::Ident) return true;
        return false;
    }

    // simple statements: declarations, assignments, bare calls
    void parseSimpleStmtInto(std::vector<StmtPtr>& out) {
        Span sp = spanHere();
        if (startsType()) {
            TypeRef t = parseType();
            std::string name = expectIdent("variable name");
            checkUserName(name, sp);
            auto d = newStmt(StmtKind::VarDecl, sp);
            d->varName = name;
            d->varType = t;
            out.push_back(d);
            if (at(Tok::Assign)) {
                Span asp = spanHere();
                take();
                auto a = newStmt(StmtKind::Assign, asp);
                a->lhs = mkVar(name, asp);
                a->lhs->span.node = prog_->freshNodeId();
                a->rhs = parseExpr();
                out.push_back(a);
            }
            return;
        }
        ExprPtr e = parseExpr();
        if (at(Tok::Assign)) {
            Span asp = spanHere();
            take();
            if (e->kind != ExprKind::Var && e->kind != ExprKind::Field &&
                e->kind != ExprKind::Deref) {
                diags_.error(e->span, "invalid assignment target");
            }
            auto a = newStmt(StmtKind::Assign, asp);
            a->lhs = e;
            a->rhs = parseExpr();
            out.push_back(a);
            return;
        }
        if (e->kind == ExprKind::Call) {
            auto c = newStmt(StmtKind::Call, sp);
            c->calleeOrType = e->name;
            c->args = e->args;
            c->hasTarget = false;
            out.push_back(c);
            return;
        }
        diags_.error(e->span, "expression statement must be a call");
        auto c = newStmt(StmtKind::AssertDyn, sp);
        c->rhs = e;
        out.push_back(c);
    }

    // ---- expressions -------------------------------------------------------

    std::vector<ExprPtr> parseArgs() {
        std::vector<ExprPtr> args;
        if (at(Tok::RParen)) return args;
        while (true) {
            args.push_back(parseExpr());
            if (!at(Tok::Comma)) break;
            take();
        }
        return args;
    }

    ExprPtr parseExpr() {
        ExprPtr c = parseOr();
        if (at(Tok::Question)) {
            Span sp = spanHere();
            take();
            ExprPtr a = parseExpr();
            expect(Tok::Colon, "':'");
            ExprPtr b = parseExpr();
            auto t = std::make_shared<Expr>();
            t->kind = ExprKind::Ternary;
            t->span = sp;
            t->args = {c, a, b};
            return t;
        }
        return c;
    }

    ExprPtr parseOr() {
        ExprPtr e = parseAnd();
        while (at(Tok::OrOr)) {
            Span sp = spanHere();
            take();
            e = mkBin(BinOp::Or, e, parseAnd(), sp);
        }
        return e;
    }

    ExprPtr parseAnd() {
        ExprPtr e = parseCmp();
        while (at(Tok::AndAnd)) {
            Span sp = spanHere();
            take();
            e = mkBin(BinOp::And, e, parseCmp(), sp);
        }
        return e;
    }

    ExprPtr parseCmp() {
        ExprPtr e = parseAdd();
        while (at(Tok::EqEq) || at(Tok::NotEq) || at(Tok::Lt) || at(Tok::Le) || at(Tok::Gt) ||
               at(Tok::Ge)) {
            Span sp = spanHere();
            Tok k = take().kind;
            BinOp op = k == Tok::EqEq  ? BinOp::Eq
                       : k == Tok::NotEq ? BinOp::Ne
                       : k == Tok::Lt    ? BinOp::Lt
                       : k == Tok::Le    ? BinOp::Le
                       : k == Tok::Gt    ? BinOp::Gt
                                         : BinOp::Ge;
            e = mkBin(op, e, parseAdd(), sp);
        }
        return e;
    }

    ExprPtr parseAdd() {
        ExprPtr e = parseMul();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            Span sp = spanHere();
            BinOp op = take().kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
            e = mkBin(op, e, parseMul(), sp);
        }
        return e;
    }

    ExprPtr parseMul() {
        ExprPtr e = parseUnary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            Span sp = spanHere();
            BinOp op = take().kind == Tok::Star ? BinOp::Mul : BinOp::Div;
            e = mkBin(op, e, parseUnary(), sp);
        }
        return e;
    }

    ExprPtr parseUnary() {
        Span sp = spanHere();
        if (at(Tok::Minus)) {
            take();
            return mkUn(UnOp::Neg, parseUnary(), sp);
        }
        if (at(Tok::Bang)) {
            take();
            return mkUn(UnOp::Not, parseUnary(), sp);
        }
        if (at(Tok::Star)) {
            take();
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::Deref;
            e->span = sp;
            e->args = {parseUnary()};
            return e;
        }
        return parsePostfix();
    }

    ExprPtr parsePostfix() {
        ExprPtr e = parsePrimary();
        while (at(Tok::Arrow)) {
            Span sp = spanHere();
            take();
            std::string f = expectIdent("field name");
            e = mkField(e, f, sp);
        }
        return e;
    }

    ExprPtr parsePrimary() {
        Span sp = spanHere();
        if (at(Tok::IntLit)) return mkIntLit(take().intValue, sp);
        if (at(Tok::CharLit)) {
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::CharLit;
            e->intValue = take().intValue;
            e->span = sp;
            e->type = TypeRef::charTy();
            return e;
        }
        if (at(Tok::LParen)) {
            take();
            ExprPtr e = parseExpr();
            expect(Tok::RParen, "')'");
            return e;
        }
        if (at(Tok::Ident)) {
            std::string n = cur().text;
            if (n == "NULL") {
                take();
                return mkNullLit(sp);
            }
            if (n == "true" || n == "false") {
                take();
                return mkBoolLit(n == "true", sp);
            }
            if (n == "alloc") {
                take();
                expect(Tok::LParen, "'('");
                if (atIdent("struct")) take();
                std::string rn;
                if (atIdent("int") || atIdent("bool") || atIdent("char")) rn = take().text;
                else rn = expectIdent("type name");
                if (rn == "int" || rn == "bool" || rn == "char") rn = "$box_" + rn;
                expect(Tok::RParen, "')'");
                auto e = std::make_shared<Expr>();
                e->kind = ExprKind::Alloc;
                e->name = rn;
                e->span = sp;
                return e;
            }
            if (kKeywords.count(n)) {
                err("unexpected keyword '" + n + "' in expression");
                take();
                return mkIntLit(0, sp);
            }
            take();
            if (at(Tok::LParen)) {
                take();
                auto e = std::make_shared<Expr>();
                e->kind = ExprKind::Call;
                e->name = n;
                e->span = sp;
                e->args = parseArgs();
                expect(Tok::RParen, "')'");
                return e;
            }
            return mkVar(n, sp);
        }
        err("expected expression");
        take();
        return mkIntLit(0, sp);
    }
};

}  // namespace

void registerBuiltins(Program& p) {
    if (p.record("OwnedFields")) return;
    RecordDecl of;
    of.name = "OwnedFields";
    of.fields.push_back({"instCntr", TypeRef::intTy(), {}});
    of.builtin = true;
    p.records.push_back(std::move(of));

    auto addIntrinsic = [&p](const std::string& name, TypeRef ret, std::vector<Param> params,
                             FormulaPtr pre = nullptr, FormulaPtr post = nullptr) {
        MethodDecl m;
        m.name = name;
        m.params = std::move(params);
        if (ret.kind != TypeKind::Void) m.returns.push_back({kResultVar, ret, {}});
        m.intrinsic = true;
        GradualFormula t;
        t.imprecise = false;
        t.staticPart = pre ? pre : mkFExpr(mkBoolLit(true));
        m.pre = t;
        GradualFormula u;
        u.imprecise = false;
        u.staticPart = post ? post : mkFExpr(mkBoolLit(true));
        m.post = u;
        p.methods.push_back(std::move(m));
    };
    auto node = [&p](ExprPtr e) {
        e->span.node = p.freshNodeId();
        return e;
    };
    auto fnode = [&p](FormulaPtr f) {
        f->span.node = p.freshNodeId();
        return f;
    };
    TypeRef ofp = TypeRef::refTy("OwnedFields");
    TypeRef anyRef = TypeRef::refTy("");  // wildcard, intrinsics only
    addIntrinsic("initOwnedFields", ofp, {{"cntr", TypeRef::intTy(), {}}});
    addIntrinsic("addStructAcc", TypeRef::intTy(),
                 {{"of", ofp, {}}, {"nFields", TypeRef::intTy(), {}}});
    addIntrinsic("freshId", TypeRef::intTy(), {{"nFields", TypeRef::intTy(), {}}});
    addIntrinsic("assertAcc", TypeRef::voidTy(),
                 {{"of", ofp, {}},
                  {"r", anyRef, {}},
                  {"fieldIdx", TypeRef::intTy(), {}},
                  {"checkId", TypeRef::intTy(), {}}});
    addIntrinsic("sepAdd", TypeRef::voidTy(),
                 {{"tmp", ofp, {}},
                  {"r", anyRef, {}},
                  {"fieldIdx", TypeRef::intTy(), {}},
                  {"checkId", TypeRef::intTy(), {}}});
    addIntrinsic("assertFormula", TypeRef::voidTy(),
                 {{"cond", TypeRef::boolTy(), {}}, {"checkId", TypeRef::intTy(), {}}});
    addIntrinsic("fpMove", TypeRef::voidTy(),
                 {{"from", ofp, {}}, {"to", ofp, {}}, {"r", anyRef, {}},
                  {"fieldIdx", TypeRef::intTy(), {}}});
    addIntrinsic("ofMergeInto", TypeRef::voidTy(), {{"from", ofp, {}}, {"to", ofp, {}}});
    addIntrinsic("ofClear", TypeRef::voidTy(), {{"of", ofp, {}}});
    // benchmark value generators: the workload size is nonnegative and the
    // random draw lies in [0, bound)
    addIntrinsic("workload", TypeRef::intTy(), {}, nullptr,
                 fnode(mkFExpr(node(mkBin(BinOp::Ge, node(mkVar(kResultVar)),
                                          node(mkIntLit(0)))))));
    addIntrinsic("randomInt", TypeRef::intTy(), {{"bound", TypeRef::intTy(), {}}},
                 fnode(mkFExpr(node(mkBin(BinOp::Gt, node(mkVar("bound")),
                                          node(mkIntLit(0)))))),
                 fnode(mkFSep(fnode(mkFExpr(node(mkBin(BinOp::Ge, node(mkVar(kResultVar)),
                                                       node(mkIntLit(0)))))),
                              fnode(mkFExpr(node(mkBin(BinOp::Lt, node(mkVar(kResultVar)),
                                                       node(mkVar("bound")))))))));
}

std::unique_ptr<Program> parse(const std::string& source, DiagList& diags,
                               const ParseOptions& opts, const std::string& sourceName) {
    auto toks = lex(source, diags);
    if (!diags.ok()) return nullptr;
    Parser parser(std::move(toks), diags, opts);
    return parser.parseProgram(sourceName);
}

std::optional<GradualFormula> parseFormula(const std::string& text, Program& p, DiagList& diags) {
    auto toks = lex(text, diags);
    if (!diags.ok()) return std::nullopt;
    Parser parser(std::move(toks), diags, {});
    GradualFormula f = parser.parseFormulaEntry(p);
    if (!diags.ok()) return std::nullopt;
    return f;
}

ExprPtr parseExprText(const std::string& text, Program& p, DiagList& diags) {
    auto toks = lex(text, diags);
    if (!diags.ok()) return nullptr;
    Parser parser(std::move(toks), diags, {});
    auto e = parser.parseExprEntry(p);
    if (!diags.ok()) return nullptr;
    return e;
}

}  // namespace gvl
