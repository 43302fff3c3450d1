#include "gvl/lexer.hpp"

#include <cctype>

namespace gvl {

namespace {

struct Cursor {
    const std::string& src;
    size_t pos = 0;
    int line = 1;
    int col = 1;

    bool done() const { return pos >= src.size(); }
    char peek(size_t off = 0) const { return pos + off < src.size() ? src[pos + off] : '\0'; }
    char next() {
        char c = src[pos++];
        if (c == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        return c;
    }
    Span here() const { return Span{line, col, -1}; }
};

bool identStart(char c) { return std::isalpha((unsigned char)c) || c == '_' || c == '$'; }
bool identChar(char c) { return std::isalnum((unsigned char)c) || c == '_' || c == '$'; }

}  // namespace

std::vector<Token> lex(const std::string& src, DiagList& diags) {
    std::vector<Token> out;
    Cursor c{src};
    bool inLineSpec = false;   // //@ ... to end of line
    bool inBlockSpec = false;  // /*@ ... @*/

    auto push = [&](Tok kind, Span sp, std::string text = {}, int64_t v = 0) {
        Token t;
        t.kind = kind;
        t.span = sp;
        t.text = std::move(text);
        t.intValue = v;
        t.inSpec = inLineSpec || inBlockSpec;
        out.push_back(std::move(t));
    };

    while (!c.done()) {
        char ch = c.peek();
        if (ch == '\n' && inLineSpec) inLineSpec = false;
        if (std::isspace((unsigned char)ch)) {
            c.next();
            continue;
        }
        Span sp = c.here();
        if (ch == '/' && c.peek(1) == '/') {
            if (c.peek(2) == '@') {
                c.next(); c.next(); c.next();
                inLineSpec = true;
                continue;
            }
            while (!c.done() && c.peek() != '\n') c.next();
            continue;
        }
        if (ch == '/' && c.peek(1) == '*') {
            if (c.peek(2) == '@') {
                c.next(); c.next(); c.next();
                inBlockSpec = true;
                continue;
            }
            c.next(); c.next();
            while (!c.done() && !(c.peek() == '*' && c.peek(1) == '/')) c.next();
            if (c.done()) {
                diags.error(sp, "unterminated comment");
            } else {
                c.next(); c.next();
            }
            continue;
        }
        if (ch == '@' && c.peek(1) == '*' && c.peek(2) == '/') {
            c.next(); c.next(); c.next();
            if (!inBlockSpec) diags.error(sp, "stray '@*/'");
            inBlockSpec = false;
            continue;
        }
        if (identStart(ch)) {
            std::string id;
            while (!c.done() && identChar(c.peek())) id += c.next();
            push(Tok::Ident, sp, id);
            continue;
        }
        if (std::isdigit((unsigned char)ch)) {
            std::string num;
            while (!c.done() && std::isdigit((unsigned char)c.peek())) num += c.next();
            int64_t v = 0;
            try {
                v = std::stoll(num);
            } catch (...) {
                diags.error(sp, "integer literal out of range: " + num);
            }
            push(Tok::IntLit, sp, num, v);
            continue;
        }
        if (ch == '\'') {
            c.next();
            int64_t v = 0;
            if (c.peek() == '\\') {
                c.next();
                char esc = c.done() ? '\0' : c.next();
                switch (esc) {
                    case 'n': v = '\n'; break;
                    case 't': v = '\t'; break;
                    case '0': v = '\0'; break;
                    case '\\': v = '\\'; break;
                    case '\'': v = '\''; break;
                    default: diags.error(sp, "unknown escape in char literal");
                }
            } else if (!c.done()) {
                v = (unsigned char)c.next();
            }
            if (c.peek() == '\'') c.next();
            else diags.error(sp, "unterminated char literal");
            push(Tok::CharLit, sp, {}, v);
            continue;
        }
        if (ch == '\\') {
            // `\result`
            c.next();
            if (identStart(c.peek())) {
                std::string id = "\\";
                while (!c.done() && identChar(c.peek())) id += c.next();
                push(Tok::Ident, sp, id);
            } else {
                diags.error(sp, "unexpected '\\'");
            }
            continue;
        }
        c.next();
        switch (ch) {
            case '{': push(Tok::LBrace, sp); break;
            case '}': push(Tok::RBrace, sp); break;
            case '(': push(Tok::LParen, sp); break;
            case ')': push(Tok::RParen, sp); break;
            case ';': push(Tok::Semi, sp); break;
            case ',': push(Tok::Comma, sp); break;
            case ':': push(Tok::Colon, sp); break;
            case '?': push(Tok::Question, sp); break;
            case '+': push(Tok::Plus, sp); break;
            case '*': push(Tok::Star, sp); break;
            case '/': push(Tok::Slash, sp); break;
            case '-':
                if (c.peek() == '>') {
                    c.next();
                    push(Tok::Arrow, sp);
                } else {
                    push(Tok::Minus, sp);
                }
                break;
            case '=':
                if (c.peek() == '=') {
                    c.next();
                    push(Tok::EqEq, sp);
                } else {
                    push(Tok::Assign, sp);
                }
                break;
            case '!':
                if (c.peek() == '=') {
                    c.next();
                    push(Tok::NotEq, sp);
                } else {
                    push(Tok::Bang, sp);
                }
                break;
            case '<':
                if (c.peek() == '=') {
                    c.next();
                    push(Tok::Le, sp);
                } else {
                    push(Tok::Lt, sp);
                }
                break;
            case '>':
                if (c.peek() == '=') {
                    c.next();
                    push(Tok::Ge, sp);
                } else {
                    push(Tok::Gt, sp);
                }
                break;
            case '&':
                if (c.peek() == '&') {
                    c.next();
                    push(Tok::AndAnd, sp);
                } else {
                    diags.error(sp, "expected '&&'");
                }
                break;
            case '|':
                if (c.peek() == '|') {
                    c.next();
                    push(Tok::OrOr, sp);
                } else {
                    diags.error(sp, "expected '||'");
                }
                break;
            default:
                diags.error(sp, std::string("unexpected character '") + ch + "'");
        }
    }
    Token end;
    end.kind = Tok::End;
    end.span = c.here();
    out.push_back(end);
    return out;
}

}  // namespace gvl
