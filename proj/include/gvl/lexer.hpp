#pragma once

#include <string>
#include <vector>

#include "gvl/diag.hpp"

namespace gvl {

enum class Tok : uint8_t {
    End,
    Ident,
    IntLit,
    CharLit,
    // punctuation / operators
    LBrace, RBrace, LParen, RParen,
    Semi, Comma, Colon, Question,
    Arrow,      // ->
    Assign,     // =
    EqEq, NotEq, Le, Ge, Lt, Gt,
    Plus, Minus, Star, Slash,
    AndAnd, OrOr, Bang,
    Backslash,  // reserved; `\result` is lexed as a single Ident
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int64_t intValue = 0;
    Span span;
    bool inSpec = false;  // inside //@ ... or /*@ ... @*/
};

// Tokenizes source text. Spec-comment markers (`//@`, `/*@`, `@*/`) are
// transparent: tokens inside them carry inSpec=true. Plain comments are
// skipped.
std::vector<Token> lex(const std::string& src, DiagList& diags);

}  // namespace gvl
