#include "gvl/solver.hpp"

#include <algorithm>
#include <csignal>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace gvl {

// ---------------------------------------------------------------------------
// Negation normal form

TermId toNnf(TermArena& arena, TermId t, bool negate) {
    const TermNode& n = arena.node(t);
    if (n.kind == TermKind::BoolConst) return arena.boolConst(negate ? !n.boolValue : n.boolValue);
    if (n.kind != TermKind::App) return negate ? arena.logicalNot(t) : t;
    switch (n.op) {
        case TermOp::Not:
            return toNnf(arena, n.args[0], !negate);
        case TermOp::And: {
            TermId a = toNnf(arena, n.args[0], negate);
            TermId b = toNnf(arena, n.args[1], negate);
            return negate ? arena.logicalOr(a, b) : arena.logicalAnd(a, b);
        }
        case TermOp::Or: {
            TermId a = toNnf(arena, n.args[0], negate);
            TermId b = toNnf(arena, n.args[1], negate);
            return negate ? arena.logicalAnd(a, b) : arena.logicalOr(a, b);
        }
        case TermOp::Lt:
            // !(a < b) == b <= a
            return negate ? arena.le(n.args[1], n.args[0]) : t;
        case TermOp::Le:
            // !(a <= b) == b < a
            return negate ? arena.lt(n.args[1], n.args[0]) : t;
        default:
            return negate ? arena.logicalNot(t) : t;
    }
}

namespace {

// ---------------------------------------------------------------------------
// Exact rationals over int64 with overflow detection

struct Overflow {};

int64_t checkedMul(int64_t a, int64_t b) {
    __int128 r = (__int128)a * b;
    if (r > INT64_MAX / 4 || r < INT64_MIN / 4) throw Overflow{};
    return (int64_t)r;
}
int64_t checkedAdd(int64_t a, int64_t b) {
    __int128 r = (__int128)a + b;
    if (r > INT64_MAX / 4 || r < INT64_MIN / 4) throw Overflow{};
    return (int64_t)r;
}

int64_t gcd64(int64_t a, int64_t b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b) {
        int64_t t = a % b;
        a = b;
        b = t;
    }
    return a;
}

struct Rat {
    int64_t n = 0, d = 1;

    Rat() = default;
    Rat(int64_t v) : n(v), d(1) {}
    Rat(int64_t nn, int64_t dd) : n(nn), d(dd) { norm(); }

    void norm() {
        if (d == 0) throw Overflow{};
        if (d < 0) {
            n = -n;
            d = -d;
        }
        int64_t g = gcd64(n, d);
        if (g > 1) {
            n /= g;
            d /= g;
        }
    }
    bool isZero() const { return n == 0; }
    bool isNeg() const { return n < 0; }
    bool isPos() const { return n > 0; }
    Rat operator+(const Rat& o) const {
        return Rat(checkedAdd(checkedMul(n, o.d), checkedMul(o.n, d)), checkedMul(d, o.d));
    }
    Rat operator-(const Rat& o) const {
        return Rat(checkedAdd(checkedMul(n, o.d), -checkedMul(o.n, d)), checkedMul(d, o.d));
    }
    Rat operator*(const Rat& o) const { return Rat(checkedMul(n, o.n), checkedMul(d, o.d)); }
    Rat operator/(const Rat& o) const {
        if (o.n == 0) throw Overflow{};
        return Rat(checkedMul(n, o.d), checkedMul(d, o.n));
    }
    Rat operator-() const { return Rat(-n, d); }
    bool operator==(const Rat& o) const { return n == o.n && d == o.d; }
};

// floor(n/d)
int64_t ratFloor(const Rat& r) {
    int64_t q = r.n / r.d;
    if (r.n % r.d != 0 && r.n < 0) --q;
    return q;
}

// Linear expression: sum of coeff*var + constant. Vars are term ids.
struct LinExpr {
    std::map<TermId, Rat> coeffs;
    Rat constant;

    void addTerm(TermId var, const Rat& c) {
        auto it = coeffs.find(var);
        if (it == coeffs.end()) {
            if (!c.isZero()) coeffs[var] = c;
        } else {
            it->second = it->second + c;
            if (it->second.isZero()) coeffs.erase(it);
        }
    }
    void addScaled(const LinExpr& o, const Rat& s) {
        for (auto& [v, c] : o.coeffs) addTerm(v, c * s);
        constant = constant + o.constant * s;
    }
};

// ---------------------------------------------------------------------------
// Union-find congruence closure

struct UnionFind {
    std::map<TermId, TermId> parent;

    TermId find(TermId x) {
        auto it = parent.find(x);
        if (it == parent.end()) {
            parent[x] = x;
            return x;
        }
        if (it->second == x) return x;
        TermId r = find(it->second);
        parent[x] = r;
        return r;
    }
    bool merge(TermId a, TermId b) {
        TermId ra = find(a), rb = find(b);
        if (ra == rb) return false;
        if (ra > rb) std::swap(ra, rb);
        parent[rb] = ra;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Builtin backend

class BuiltinBackend final : public SolverBackend {
public:
    std::string name() const override { return "builtin"; }

    SolverVerdict checkSat(const TermArena& arenaIn, const std::vector<TermId>& assertions)
        override {
        TermArena& arena = const_cast<TermArena&>(arenaIn);
        std::vector<TermId> work;
        work.reserve(assertions.size());
        for (TermId t : assertions) {
            TermId n = toNnf(arena, t, false);
            if (arena.isTrue(n)) continue;
            if (arena.isFalse(n)) return SolverVerdict::Unsatisfiable;
            work.push_back(n);
        }
        if (work.empty()) return SolverVerdict::Satisfiable;

        if (auto exact = tryEnumerate(arena, work)) return *exact;

        budget_ = 20000;
        std::map<TermId, bool> assign;
        SolverVerdict v = dpll(arena, work, assign);
        if (v == SolverVerdict::Unknown && getenv("GVL_DEBUG_UNKNOWN")) {
            fprintf(stderr, "UNKNOWN query (%zu assertions, budget left %ld):\n", work.size(),
                    budget_);
            for (TermId t : work) fprintf(stderr, "  %s\n", arena.str(t).c_str());
        }
        return v;
    }

private:
    long budget_ = 0;

    // ---- bounded exhaustive enumeration ------------------------------------

    struct Env {
        std::map<TermId, int64_t> ints;
        std::map<TermId, bool> bools;
    };

    static bool evalTerm(const TermArena& arena, TermId t, const Env& env, int64_t& iv, bool& bv,
                         bool& isBool) {
        const TermNode& n = arena.node(t);
        switch (n.kind) {
            case TermKind::IntConst:
                iv = n.intValue;
                isBool = false;
                return true;
            case TermKind::BoolConst:
                bv = n.boolValue;
                isBool = true;
                return true;
            case TermKind::Atom: {
                if (n.sort == Sort::Int) {
                    auto it = env.ints.find(t);
                    if (it == env.ints.end()) return false;
                    iv = it->second;
                    isBool = false;
                    return true;
                }
                if (n.sort == Sort::Bool) {
                    auto it = env.bools.find(t);
                    if (it == env.bools.end()) return false;
                    bv = it->second;
                    isBool = true;
                    return true;
                }
                return false;
            }
            case TermKind::App: {
                int64_t ia[2] = {0, 0};
                bool ba[2] = {false, false};
                bool childBool[2] = {false, false};
                if (n.op == TermOp::Not) {
                    if (!evalTerm(arena, n.args[0], env, ia[0], ba[0], childBool[0])) return false;
                    bv = !ba[0];
                    isBool = true;
                    return true;
                }
                for (size_t i = 0; i < n.args.size() && i < 2; ++i)
                    if (!evalTerm(arena, n.args[i], env, ia[i], ba[i], childBool[i])) return false;
                isBool = true;
                switch (n.op) {
                    case TermOp::Add: iv = ia[0] + ia[1]; isBool = false; return true;
                    case TermOp::Sub: iv = ia[0] - ia[1]; isBool = false; return true;
                    case TermOp::Mul: iv = ia[0] * ia[1]; isBool = false; return true;
                    case TermOp::Eq:
                        bv = childBool[0] ? (ba[0] == ba[1]) : (ia[0] == ia[1]);
                        return true;
                    case TermOp::Lt: bv = ia[0] < ia[1]; return true;
                    case TermOp::Le: bv = ia[0] <= ia[1]; return true;
                    case TermOp::And: bv = ba[0] && ba[1]; return true;
                    case TermOp::Or: bv = ba[0] || ba[1]; return true;
                    default: return false;
                }
            }
            default:
                return false;
        }
    }

    // Enumerates assignments when every integer atom has syntactic finite
    // bounds among the top-level assertions and no other sorts appear.
    std::optional<SolverVerdict> tryEnumerate(const TermArena& arena,
                                              const std::vector<TermId>& work) {
        std::vector<TermId> atoms;
        for (TermId t : work) arena.collectAtoms(t, atoms);
        std::vector<TermId> ints, bools;
        for (TermId a : atoms) {
            Sort s = arena.sortOf(a);
            if (s == Sort::Int) ints.push_back(a);
            else if (s == Sort::Bool) bools.push_back(a);
            else return std::nullopt;
        }
        // division makes assignments partial; bail out
        std::function<bool(TermId)> hasDiv = [&](TermId t) {
            const TermNode& n = arena.node(t);
            if (n.kind == TermKind::App) {
                if (n.op == TermOp::Div || n.op == TermOp::Pair || n.op == TermOp::First ||
                    n.op == TermOp::Second)
                    return true;
                for (TermId a : n.args)
                    if (hasDiv(a)) return true;
            }
            return n.kind == TermKind::NullConst || n.kind == TermKind::Unit;
        };
        for (TermId t : work)
            if (hasDiv(t)) return std::nullopt;

        std::map<TermId, std::pair<int64_t, int64_t>> bounds;  // var -> [lo, hi]
        auto noteLo = [&](TermId v, int64_t lo) {
            auto it = bounds.find(v);
            if (it == bounds.end()) bounds[v] = {lo, INT64_MAX};
            else it->second.first = std::max(it->second.first, lo);
        };
        auto noteHi = [&](TermId v, int64_t hi) {
            auto it = bounds.find(v);
            if (it == bounds.end()) bounds[v] = {INT64_MIN, hi};
            else it->second.second = std::min(it->second.second, hi);
        };
        for (TermId t : work) {
            const TermNode& n = arena.node(t);
            if (n.kind != TermKind::App) continue;
            auto atomConst = [&](TermId x, TermId y, TermId& atom, int64_t& c, bool& constRight) {
                if (arena.isAtom(x) && arena.node(y).kind == TermKind::IntConst) {
                    atom = x;
                    c = arena.node(y).intValue;
                    constRight = true;
                    return true;
                }
                if (arena.isAtom(y) && arena.node(x).kind == TermKind::IntConst) {
                    atom = y;
                    c = arena.node(x).intValue;
                    constRight = false;
                    return true;
                }
                return false;
            };
            TermId atom;
            int64_t c;
            bool constRight;
            if (n.op == TermOp::Le && atomConst(n.args[0], n.args[1], atom, c, constRight)) {
                if (constRight) noteHi(atom, c);
                else noteLo(atom, c);
            } else if (n.op == TermOp::Lt && atomConst(n.args[0], n.args[1], atom, c, constRight)) {
                if (constRight) noteHi(atom, c - 1);
                else noteLo(atom, c + 1);
            } else if (n.op == TermOp::Eq &&
                       atomConst(n.args[0], n.args[1], atom, c, constRight)) {
                noteLo(atom, c);
                noteHi(atom, c);
            }
        }
        long double combos = 1;
        for (TermId v : ints) {
            auto it = bounds.find(v);
            if (it == bounds.end() || it->second.first == INT64_MIN ||
                it->second.second == INT64_MAX)
                return std::nullopt;
            if (it->second.first > it->second.second) return SolverVerdict::Unsatisfiable;
            combos *= (long double)(it->second.second - it->second.first + 1);
            if (combos > 200000) return std::nullopt;
        }
        combos *= (long double)(1LL << std::min<size_t>(bools.size(), 20));
        if (combos > 200000) return std::nullopt;

        Env env;
        std::vector<int64_t> cursor(ints.size());
        for (size_t i = 0; i < ints.size(); ++i) cursor[i] = bounds[ints[i]].first;
        size_t boolCombos = 1ULL << bools.size();
        while (true) {
            for (size_t i = 0; i < ints.size(); ++i) env.ints[ints[i]] = cursor[i];
            for (size_t bm = 0; bm < boolCombos; ++bm) {
                for (size_t i = 0; i < bools.size(); ++i) env.bools[bools[i]] = (bm >> i) & 1;
                bool all = true;
                for (TermId t : work) {
                    int64_t iv;
                    bool bv, isBool;
                    if (!evalTerm(arena, t, env, iv, bv, isBool) || !isBool || !bv) {
                        all = false;
                        break;
                    }
                }
                if (all) return SolverVerdict::Satisfiable;
            }
            // advance odometer
            size_t k = 0;
            for (; k < ints.size(); ++k) {
                if (cursor[k] < bounds[ints[k]].second) {
                    ++cursor[k];
                    for (size_t j = 0; j < k; ++j) cursor[j] = bounds[ints[j]].first;
                    break;
                }
            }
            if (k == ints.size()) break;
        }
        return SolverVerdict::Unsatisfiable;
    }

    // ---- DPLL ---------------------------------------------------------------

    static bool isLiteralCore(const TermArena& arena, TermId t) {
        const TermNode& n = arena.node(t);
        if (n.kind == TermKind::Atom) return n.sort == Sort::Bool;
        if (n.kind != TermKind::App) return false;
        return n.op != TermOp::And && n.op != TermOp::Or && n.op != TermOp::Not;
    }

    TermId partialEval(TermArena& arena, TermId t, const std::map<TermId, bool>& assign) {
        const TermNode& n = arena.node(t);
        if (n.kind == TermKind::BoolConst) return t;
        auto it = assign.find(t);
        if (it != assign.end()) return arena.boolConst(it->second);
        if (n.kind != TermKind::App) return t;
        switch (n.op) {
            case TermOp::Not:
                return arena.logicalNot(partialEval(arena, n.args[0], assign));
            case TermOp::And:
                return arena.logicalAnd(partialEval(arena, n.args[0], assign),
                                        partialEval(arena, n.args[1], assign));
            case TermOp::Or:
                return arena.logicalOr(partialEval(arena, n.args[0], assign),
                                       partialEval(arena, n.args[1], assign));
            default:
                return t;
        }
    }

    TermId firstUndecided(const TermArena& arena, TermId t, const std::map<TermId, bool>& assign) {
        if (isLiteralCore(arena, t) && !assign.count(t)) return t;
        const TermNode& n = arena.node(t);
        if (n.kind == TermKind::App) {
            for (TermId a : n.args) {
                TermId r = firstUndecided(arena, a, assign);
                if (r != kNoTerm) return r;
            }
        }
        return kNoTerm;
    }

    SolverVerdict dpll(TermArena& arena, std::vector<TermId> work, std::map<TermId, bool> assign) {
        if (--budget_ <= 0) return SolverVerdict::Unknown;
        bool changed = true;
        while (changed) {
            changed = false;
            std::vector<TermId> next;
            for (TermId t : work) {
                TermId s = partialEval(arena, t, assign);
                if (arena.isTrue(s)) continue;
                if (arena.isFalse(s)) return SolverVerdict::Unsatisfiable;
                bool neg = false;
                TermId core = s;
                while (true) {
                    const TermNode& cn = arena.node(core);
                    if (cn.kind == TermKind::App && cn.op == TermOp::Not) {
                        neg = !neg;
                        core = cn.args[0];
                    } else {
                        break;
                    }
                }
                if (isLiteralCore(arena, core)) {
                    auto it = assign.find(core);
                    bool val = !neg;
                    if (it != assign.end()) {
                        if (it->second != val) return SolverVerdict::Unsatisfiable;
                        continue;
                    }
                    assign[core] = val;
                    changed = true;
                    continue;
                }
                next.push_back(s);
            }
            work = std::move(next);
        }
        if (work.empty()) return theoryCheck(arena, assign);
        TermId split = firstUndecided(arena, work[0], assign);
        if (split == kNoTerm) return SolverVerdict::Unknown;
        auto tryBranch = [&](bool val) {
            auto a2 = assign;
            a2[split] = val;
            return dpll(arena, work, std::move(a2));
        };
        SolverVerdict a = tryBranch(true);
        if (a == SolverVerdict::Satisfiable) return a;
        SolverVerdict b = tryBranch(false);
        if (b == SolverVerdict::Satisfiable) return b;
        if (a == SolverVerdict::Unknown || b == SolverVerdict::Unknown)
            return SolverVerdict::Unknown;
        return SolverVerdict::Unsatisfiable;
    }

    // ---- theory: congruence closure + linear integer arithmetic -------------

    void collectSubterms(const TermArena& arena, TermId t, std::set<TermId>& out) {
        if (!out.insert(t).second) return;
        const TermNode& n = arena.node(t);
        for (TermId a : n.args) collectSubterms(arena, a, out);
    }

    SolverVerdict theoryCheck(TermArena& arena, const std::map<TermId, bool>& assign) {
        std::vector<std::pair<TermId, TermId>> eqs, neqs;
        std::vector<std::pair<TermId, bool>> cmps;  // Le/Lt literal, polarity
        std::set<TermId> terms;

        for (const auto& [lit, val] : assign) {
            collectSubterms(arena, lit, terms);
            const TermNode& n = arena.node(lit);
            if (n.kind == TermKind::App && n.op == TermOp::Eq) {
                if (val) eqs.push_back({n.args[0], n.args[1]});
                else neqs.push_back({n.args[0], n.args[1]});
            } else if (n.kind == TermKind::App && (n.op == TermOp::Le || n.op == TermOp::Lt)) {
                cmps.push_back({lit, val});
            }
        }

        UnionFind uf;
        for (auto& [a, b] : eqs) uf.merge(a, b);
        // boolean literals participate in congruence through the truth constants
        for (const auto& [lit, val] : assign) uf.merge(lit, arena.boolConst(val));

        // congruence propagation
        bool changed = true;
        std::vector<TermId> apps;
        for (TermId t : terms)
            if (arena.node(t).kind == TermKind::App) apps.push_back(t);
        while (changed) {
            changed = false;
            for (size_t i = 0; i < apps.size(); ++i) {
                for (size_t j = i + 1; j < apps.size(); ++j) {
                    const TermNode& x = arena.node(apps[i]);
                    const TermNode& y = arena.node(apps[j]);
                    if (x.op != y.op || x.args.size() != y.args.size()) continue;
                    if (uf.find(apps[i]) == uf.find(apps[j])) continue;
                    bool argsEq = true;
                    for (size_t k = 0; k < x.args.size(); ++k)
                        if (uf.find(x.args[k]) != uf.find(y.args[k])) {
                            argsEq = false;
                            break;
                        }
                    if (argsEq) {
                        uf.merge(apps[i], apps[j]);
                        changed = true;
                    }
                }
            }
        }

        // constant clashes within a class
        std::map<TermId, TermId> classConst;  // class rep -> constant term
        for (TermId t : terms) {
            const TermNode& n = arena.node(t);
            bool isConst = n.kind == TermKind::IntConst || n.kind == TermKind::BoolConst ||
                           n.kind == TermKind::NullConst || n.kind == TermKind::Unit;
            if (!isConst) continue;
            TermId r = uf.find(t);
            auto it = classConst.find(r);
            if (it == classConst.end()) classConst[r] = t;
            else if (it->second != t) return SolverVerdict::Unsatisfiable;
        }
        for (auto& [a, b] : neqs)
            if (uf.find(a) == uf.find(b)) return SolverVerdict::Unsatisfiable;

        // ---- linear arithmetic over the integer-sorted facts
        try {
            std::vector<LinExpr> lessEq;  // e <= 0
            std::vector<LinExpr> zero;    // e == 0
            auto linOf = [&](TermId t, auto&& self) -> LinExpr {
                LinExpr e;
                const TermNode& n = arena.node(t);
                if (n.kind == TermKind::IntConst) {
                    e.constant = Rat(n.intValue);
                    return e;
                }
                if (n.kind == TermKind::App) {
                    switch (n.op) {
                        case TermOp::Add: {
                            e = self(n.args[0], self);
                            e.addScaled(self(n.args[1], self), Rat(1));
                            return e;
                        }
                        case TermOp::Sub: {
                            e = self(n.args[0], self);
                            e.addScaled(self(n.args[1], self), Rat(-1));
                            return e;
                        }
                        case TermOp::Mul: {
                            LinExpr a = self(n.args[0], self);
                            LinExpr b = self(n.args[1], self);
                            if (a.coeffs.empty()) {
                                b.constant = b.constant * a.constant;
                                for (auto& [v, c] : b.coeffs) c = c * a.constant;
                                return b;
                            }
                            if (b.coeffs.empty()) {
                                a.constant = a.constant * b.constant;
                                for (auto& [v, c] : a.coeffs) c = c * b.constant;
                                return a;
                            }
                            e.addTerm(uf.find(t), Rat(1));  // nonlinear: opaque
                            return e;
                        }
                        default:
                            e.addTerm(uf.find(t), Rat(1));  // opaque app (div, ...)
                            return e;
                    }
                }
                e.addTerm(uf.find(t), Rat(1));
                return e;
            };

            for (auto& [lit, val] : cmps) {
                const TermNode& n = arena.node(lit);
                if (arena.sortOf(n.args[0]) != Sort::Int) continue;
                LinExpr a = linOf(n.args[0], linOf);
                LinExpr b = linOf(n.args[1], linOf);
                LinExpr e;
                if (val) {
                    // a <= b  (or a < b):  a - b (+1) <= 0
                    e = a;
                    e.addScaled(b, Rat(-1));
                    if (n.op == TermOp::Lt) e.constant = e.constant + Rat(1);
                } else {
                    // !(a <= b) => b < a;  !(a < b) => b <= a
                    e = b;
                    e.addScaled(a, Rat(-1));
                    if (n.op == TermOp::Le) e.constant = e.constant + Rat(1);
                }
                lessEq.push_back(std::move(e));
            }
            for (auto& [x, y] : eqs) {
                if (arena.sortOf(x) != Sort::Int) continue;
                LinExpr e = linOf(x, linOf);
                e.addScaled(linOf(y, linOf), Rat(-1));
                zero.push_back(std::move(e));
            }
            // integer disequalities: a != b splits into a < b or b < a
            std::vector<std::pair<LinExpr, LinExpr>> neqSplits;
            for (auto& [x, y] : neqs) {
                if (arena.sortOf(x) != Sort::Int) continue;
                LinExpr lt1 = linOf(x, linOf);  // x - y + 1 <= 0
                lt1.addScaled(linOf(y, linOf), Rat(-1));
                lt1.constant = lt1.constant + Rat(1);
                LinExpr lt2 = linOf(y, linOf);  // y - x + 1 <= 0
                lt2.addScaled(linOf(x, linOf), Rat(-1));
                lt2.constant = lt2.constant + Rat(1);
                neqSplits.push_back({std::move(lt1), std::move(lt2)});
            }

            // congruence-derived integer equalities: every int term equals its rep
            {
                std::map<TermId, std::vector<TermId>> classes;
                for (TermId t : terms)
                    if (arena.sortOf(t) == Sort::Int) classes[uf.find(t)].push_back(t);
                for (auto& [rep, members] : classes) {
                    for (TermId m : members) {
                        if (m == rep) continue;
                        LinExpr e = linOf(m, linOf);
                        e.addScaled(linOf(rep, linOf), Rat(-1));
                        if (!e.coeffs.empty() || !e.constant.isZero()) zero.push_back(std::move(e));
                    }
                }
            }

            // without any disequalities: infeasible means unsat outright
            if (!linFeasible(zero, lessEq)) return SolverVerdict::Unsatisfiable;
            // keep only disequalities that matter: a != b is redundant when
            // a == b is already infeasible under the other constraints
            std::vector<std::pair<LinExpr, LinExpr>> activeSplits;
            for (auto& [lt1, lt2] : neqSplits) {
                LinExpr asEq = lt1;           // x - y + 1 <= 0 minus the +1 is x - y = 0
                asEq.constant = asEq.constant - Rat(1);
                auto zeroPlus = zero;
                zeroPlus.push_back(asEq);
                if (linFeasible(std::move(zeroPlus), lessEq))
                    activeSplits.push_back({lt1, lt2});
                if (activeSplits.size() > 10) break;  // cap; dropping extras is sound
            }
            if (activeSplits.size() > 10) activeSplits.resize(10);
            std::function<bool(size_t, std::vector<LinExpr>)> feasibleWithSplits =
                [&](size_t idx, std::vector<LinExpr> cons) -> bool {
                if (idx == activeSplits.size()) return linFeasible(zero, std::move(cons));
                {
                    auto left = cons;
                    left.push_back(activeSplits[idx].first);
                    if (feasibleWithSplits(idx + 1, std::move(left))) return true;
                }
                cons.push_back(activeSplits[idx].second);
                return feasibleWithSplits(idx + 1, std::move(cons));
            };
            if (!activeSplits.empty() && !feasibleWithSplits(0, lessEq))
                return SolverVerdict::Unsatisfiable;
        } catch (const Overflow&) {
            return SolverVerdict::Unknown;
        }
        return SolverVerdict::Satisfiable;
    }

    // Gaussian elimination on equations, then Fourier-Motzkin with integer
    // tightening for single-variable bounds. Returns false when infeasible.
    bool linFeasible(std::vector<LinExpr> zero, std::vector<LinExpr> lessEq) {
        // equations
        for (size_t i = 0; i < zero.size(); ++i) {
            LinExpr& eq = zero[i];
            if (eq.coeffs.empty()) {
                if (!eq.constant.isZero()) return false;
                continue;
            }
            TermId var = eq.coeffs.begin()->first;
            Rat coeff = eq.coeffs.begin()->second;
            // var = -(rest)/coeff
            LinExpr sub;  // substitution expression for var
            for (auto& [v, c] : eq.coeffs)
                if (v != var) sub.addTerm(v, -(c / coeff));
            sub.constant = -(eq.constant / coeff);
            auto applySub = [&](LinExpr& e) {
                auto it = e.coeffs.find(var);
                if (it == e.coeffs.end()) return;
                Rat c = it->second;
                e.coeffs.erase(it);
                e.addScaled(sub, c);
            };
            for (size_t j = i + 1; j < zero.size(); ++j) applySub(zero[j]);
            for (auto& e : lessEq) applySub(e);
        }

        // drop duplicate constraints to curb elimination blowup
        auto dedupe = [](std::vector<LinExpr>& cs) {
            std::set<std::string> seen;
            std::vector<LinExpr> out;
            for (auto& e : cs) {
                std::string k = std::to_string(e.constant.n) + "/" + std::to_string(e.constant.d);
                for (auto& [v, c] : e.coeffs)
                    k += "|" + std::to_string(v) + ":" + std::to_string(c.n) + "/" +
                         std::to_string(c.d);
                if (seen.insert(k).second) out.push_back(std::move(e));
            }
            cs = std::move(out);
        };
        dedupe(lessEq);

        // collect variables
        std::set<TermId> vars;
        for (auto& e : lessEq)
            for (auto& [v, c] : e.coeffs) vars.insert(v);

        // integer tightening for single-variable constraints: c*x + k <= 0
        auto tighten = [&](LinExpr& e) {
            if (e.coeffs.size() != 1) return;
            auto& [v, c] = *e.coeffs.begin();
            // x <= floor(-k/c) for c > 0; x >= ceil(-k/c) for c < 0
            Rat bound = -(e.constant / c);
            if (c.isPos()) {
                // x <= floor(bound)
                int64_t f = ratFloor(bound);
                e.coeffs[v] = Rat(1);
                e.constant = Rat(-f);
            } else {
                // x >= ceil(bound), i.e. -x + ceil(bound) <= 0
                int64_t cl = -ratFloor(-bound);
                e.coeffs[v] = Rat(-1);
                e.constant = Rat(cl);
            }
        };
        for (auto& e : lessEq) tighten(e);

        // Fourier-Motzkin elimination, cheapest variable first
        size_t rounds = vars.size();
        for (size_t round = 0; round < rounds; ++round) {
            // pick the variable with the smallest pos*neg fan-out
            TermId best = kNoTerm;
            size_t bestCost = SIZE_MAX;
            std::map<TermId, std::pair<size_t, size_t>> counts;
            for (auto& e : lessEq)
                for (auto& [v, c] : e.coeffs) {
                    if (c.isPos()) counts[v].first++;
                    else counts[v].second++;
                }
            if (counts.empty()) break;
            for (auto& [v, pn] : counts) {
                size_t cost = pn.first * pn.second;
                if (cost < bestCost) {
                    bestCost = cost;
                    best = v;
                }
            }
            TermId v = best;
            std::vector<LinExpr> pos, neg, rest;
            for (auto& e : lessEq) {
                auto it = e.coeffs.find(v);
                if (it == e.coeffs.end()) rest.push_back(e);
                else if (it->second.isPos()) pos.push_back(e);
                else neg.push_back(e);
            }
            if (pos.size() * neg.size() + rest.size() > 800) throw Overflow{};
            for (auto& p : pos) {
                for (auto& ng : neg) {
                    Rat cp = p.coeffs.at(v);
                    Rat cn = ng.coeffs.at(v);
                    LinExpr comb = p;
                    comb.addScaled(ng, -(cp / cn));
                    comb.coeffs.erase(v);
                    tighten(comb);
                    rest.push_back(std::move(comb));
                }
            }
            lessEq = std::move(rest);
            dedupe(lessEq);
            for (auto& e : lessEq) {
                if (e.coeffs.empty() && e.constant.isPos()) return false;
            }
        }
        for (auto& e : lessEq)
            if (e.coeffs.empty() && e.constant.isPos()) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// SMT-LIB 2 backend

class SmtLibBackend final : public SolverBackend {
public:
    explicit SmtLibBackend(std::string cmd) : cmd_(std::move(cmd)) {}
    ~SmtLibBackend() override { stop(); }

    std::string name() const override { return "smtlib:" + cmd_; }

    SolverVerdict checkSat(const TermArena& arena, const std::vector<TermId>& assertions)
        override {
        if (!running_ && !start()) return SolverVerdict::Unknown;
        std::ostringstream script;
        emitScript(arena, assertions, script);
        script << "(check-sat)\n";
        if (!writeAll(script.str())) {
            stop();
            return SolverVerdict::Unknown;
        }
        std::string answer = readLine(5000);
        writeAll("(reset)\n");
        if (answer == "sat") return SolverVerdict::Satisfiable;
        if (answer == "unsat") return SolverVerdict::Unsatisfiable;
        if (answer != "unknown") stop();
        return SolverVerdict::Unknown;
    }

private:
    std::string cmd_;
    bool running_ = false;
    pid_t pid_ = -1;
    int inFd_ = -1, outFd_ = -1;

    bool start() {
        int toChild[2], fromChild[2];
        if (pipe(toChild) != 0 || pipe(fromChild) != 0) return false;
        pid_ = fork();
        if (pid_ < 0) return false;
        if (pid_ == 0) {
            dup2(toChild[0], 0);
            dup2(fromChild[1], 1);
            close(toChild[0]);
            close(toChild[1]);
            close(fromChild[0]);
            close(fromChild[1]);
            execl("/bin/sh", "sh", "-c", cmd_.c_str(), (char*)nullptr);
            _exit(127);
        }
        close(toChild[0]);
        close(fromChild[1]);
        inFd_ = toChild[1];
        outFd_ = fromChild[0];
        running_ = true;
        return true;
    }

    void stop() {
        if (!running_) return;
        close(inFd_);
        close(outFd_);
        if (pid_ > 0) {
            kill(pid_, SIGTERM);
            int status;
            waitpid(pid_, &status, 0);
        }
        running_ = false;
        pid_ = -1;
    }

    bool writeAll(const std::string& s) {
        size_t off = 0;
        while (off < s.size()) {
            ssize_t w = write(inFd_, s.data() + off, s.size() - off);
            if (w <= 0) return false;
            off += (size_t)w;
        }
        return true;
    }

    std::string readLine(int timeoutMs) {
        std::string line;
        while (true) {
            struct pollfd pfd{outFd_, POLLIN, 0};
            int pr = poll(&pfd, 1, timeoutMs);
            if (pr <= 0) return "";
            char c;
            ssize_t r = read(outFd_, &c, 1);
            if (r <= 0) return "";
            if (c == '\n') {
                if (!line.empty()) return line;
                continue;
            }
            line += c;
        }
    }

    void emitScript(const TermArena& arena, const std::vector<TermId>& assertions,
                    std::ostream& os) {
        std::set<TermId> atoms;
        bool usesRef = false, usesSnap = false, usesMulU = false, usesDivU = false;
        std::function<void(TermId)> scan = [&](TermId t) {
            const TermNode& n = arena.node(t);
            if (n.kind == TermKind::Atom) {
                atoms.insert(t);
                if (n.sort == Sort::Ref) usesRef = true;
                if (n.sort == Sort::Snap) usesSnap = true;
            }
            if (n.kind == TermKind::NullConst) usesRef = true;
            if (n.kind == TermKind::Unit) usesSnap = true;
            if (n.kind == TermKind::App) {
                if (n.op == TermOp::Pair || n.op == TermOp::First || n.op == TermOp::Second ||
                    n.op == TermOp::SnapOf || n.op == TermOp::IntOfSnap ||
                    n.op == TermOp::BoolOfSnap || n.op == TermOp::RefOfSnap)
                    usesSnap = true;
                if (n.op == TermOp::Mul && arena.node(n.args[0]).kind != TermKind::IntConst &&
                    arena.node(n.args[1]).kind != TermKind::IntConst)
                    usesMulU = true;
                if (n.op == TermOp::Div &&
                    (arena.node(n.args[1]).kind != TermKind::IntConst))
                    usesDivU = true;
                for (TermId a : n.args) scan(a);
            }
        };
        for (TermId t : assertions) scan(t);

        os << "(set-logic QF_UFLIA)\n";
        if (usesRef) {
            os << "(declare-sort Ref 0)\n(declare-const null$ Ref)\n";
        }
        if (usesSnap) {
            if (!usesRef) os << "(declare-sort Ref 0)\n(declare-const null$ Ref)\n";
            os << "(declare-sort Snap 0)\n(declare-const unit$ Snap)\n"
               << "(declare-fun pair$ (Snap Snap) Snap)\n"
               << "(declare-fun first$ (Snap) Snap)\n"
               << "(declare-fun second$ (Snap) Snap)\n"
               << "(declare-fun snap_i$ (Int) Snap)\n"
               << "(declare-fun snap_b$ (Bool) Snap)\n"
               << "(declare-fun snap_r$ (Ref) Snap)\n"
               << "(declare-fun ival$ (Snap) Int)\n"
               << "(declare-fun bval$ (Snap) Bool)\n"
               << "(declare-fun rval$ (Snap) Ref)\n";
        }
        if (usesMulU) os << "(declare-fun mul$ (Int Int) Int)\n";
        if (usesDivU) os << "(declare-fun div$ (Int Int) Int)\n";
        for (TermId a : atoms) {
            const char* sort = nullptr;
            switch (arena.sortOf(a)) {
                case Sort::Int: sort = "Int"; break;
                case Sort::Bool: sort = "Bool"; break;
                case Sort::Ref: sort = "Ref"; break;
                case Sort::Snap: sort = "Snap"; break;
            }
            os << "(declare-const a" << a << " " << sort << ")\n";
        }
        for (TermId t : assertions) {
            os << "(assert ";
            emitTerm(arena, t, os);
            os << ")\n";
        }
    }

    void emitTerm(const TermArena& arena, TermId t, std::ostream& os) {
        const TermNode& n = arena.node(t);
        switch (n.kind) {
            case TermKind::Atom: os << "a" << t; return;
            case TermKind::IntConst:
                if (n.intValue < 0) os << "(- " << -n.intValue << ")";
                else os << n.intValue;
                return;
            case TermKind::BoolConst: os << (n.boolValue ? "true" : "false"); return;
            case TermKind::NullConst: os << "null$"; return;
            case TermKind::Unit: os << "unit$"; return;
            case TermKind::App: {
                const char* sym = nullptr;
                switch (n.op) {
                    case TermOp::Add: sym = "+"; break;
                    case TermOp::Sub: sym = "-"; break;
                    case TermOp::Mul:
                        sym = (arena.node(n.args[0]).kind == TermKind::IntConst ||
                               arena.node(n.args[1]).kind == TermKind::IntConst)
                                  ? "*"
                                  : "mul$";
                        break;
                    case TermOp::Div:
                        sym = arena.node(n.args[1]).kind == TermKind::IntConst ? "div" : "div$";
                        break;
                    case TermOp::Neg: sym = "-"; break;
                    case TermOp::Eq: sym = "="; break;
                    case TermOp::Lt: sym = "<"; break;
                    case TermOp::Le: sym = "<="; break;
                    case TermOp::And: sym = "and"; break;
                    case TermOp::Or: sym = "or"; break;
                    case TermOp::Not: sym = "not"; break;
                    case TermOp::Pair: sym = "pair$"; break;
                    case TermOp::First: sym = "first$"; break;
                    case TermOp::Second: sym = "second$"; break;
                    case TermOp::SnapOf:
                        switch (arena.sortOf(n.args[0])) {
                            case Sort::Int: sym = "snap_i$"; break;
                            case Sort::Bool: sym = "snap_b$"; break;
                            default: sym = "snap_r$"; break;
                        }
                        break;
                    case TermOp::IntOfSnap: sym = "ival$"; break;
                    case TermOp::BoolOfSnap: sym = "bval$"; break;
                    case TermOp::RefOfSnap: sym = "rval$"; break;
                }
                os << "(" << sym;
                for (TermId a : n.args) {
                    os << " ";
                    emitTerm(arena, a, os);
                }
                os << ")";
                return;
            }
        }
    }
};

}  // namespace

std::unique_ptr<SolverBackend> makeBuiltinBackend() { return std::make_unique<BuiltinBackend>(); }

std::unique_ptr<SolverBackend> makeSmtLibBackend(const std::string& command) {
    return std::make_unique<SmtLibBackend>(command);
}

// ---------------------------------------------------------------------------
// Solver wrapper

Solver::Solver(TermArena& arena, std::unique_ptr<SolverBackend> backend)
    : arena_(arena), backend_(backend ? std::move(backend) : makeBuiltinBackend()) {}

SolverVerdict Solver::checkSatMemo(const std::vector<TermId>& assertions) {
    std::vector<TermId> key(assertions);
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());

    // Split into connected components by shared atoms: a conjunction of
    // variable-disjoint groups is satisfiable iff each group is. Components
    // are memoized separately, so growing path conditions mostly hit cache.
    std::map<TermId, TermId> atomRoot;  // atom -> representative atom
    std::function<TermId(TermId)> find = [&](TermId x) -> TermId {
        auto it = atomRoot.find(x);
        if (it == atomRoot.end() || it->second == x) return x;
        TermId r = find(it->second);
        atomRoot[x] = r;
        return r;
    };
    std::vector<std::vector<TermId>> assertionAtoms(key.size());
    for (size_t i = 0; i < key.size(); ++i) {
        arena_.collectAtoms(key[i], assertionAtoms[i]);
        for (size_t j = 1; j < assertionAtoms[i].size(); ++j) {
            TermId a = find(assertionAtoms[i][0]);
            TermId b = find(assertionAtoms[i][j]);
            if (a != b) atomRoot[std::max(a, b)] = std::min(a, b);
        }
        if (!assertionAtoms[i].empty()) find(assertionAtoms[i][0]);
    }
    std::map<TermId, std::vector<TermId>> groups;  // root -> assertions
    std::vector<TermId> ground;
    for (size_t i = 0; i < key.size(); ++i) {
        if (assertionAtoms[i].empty()) ground.push_back(key[i]);
        else groups[find(assertionAtoms[i][0])].push_back(key[i]);
    }

    auto solveOne = [this](std::vector<TermId> part) {
        std::string k;
        k.reserve(part.size() * 6);
        for (TermId t : part) {
            k += std::to_string(t);
            k += ',';
        }
        auto it = memo_.find(k);
        if (it != memo_.end()) return it->second;
        ++queries_;
        SolverVerdict v = backend_->checkSat(arena_, part);
        if (v == SolverVerdict::Unknown && warnings_.size() < 16)
            warnings_.push_back("solver backend '" + backend_->name() +
                                "' returned unknown; treating goal as not proven");
        memo_[k] = v;
        return v;
    };

    bool unknown = false;
    if (!ground.empty()) {
        SolverVerdict v = solveOne(std::move(ground));
        if (v == SolverVerdict::Unsatisfiable) return v;
        if (v == SolverVerdict::Unknown) unknown = true;
    }
    for (auto& [root, part] : groups) {
        SolverVerdict v = solveOne(std::move(part));
        if (v == SolverVerdict::Unsatisfiable) return SolverVerdict::Unsatisfiable;
        if (v == SolverVerdict::Unknown) unknown = true;
    }
    return unknown ? SolverVerdict::Unknown : SolverVerdict::Satisfiable;
}

bool Solver::isValid(const std::vector<TermId>& constraints, TermId goal) {
    if (arena_.isTrue(goal)) return true;
    for (TermId c : constraints)
        if (c == goal) return true;
    std::vector<TermId> q(constraints);
    q.push_back(toNnf(arena_, goal, true));
    return checkSatMemo(q) == SolverVerdict::Unsatisfiable;
}

bool Solver::isSat(const std::vector<TermId>& constraints) {
    SolverVerdict v = checkSatMemo(constraints);
    return v != SolverVerdict::Unsatisfiable;  // unknown counts as possibly-sat
}

bool Solver::provedUnsat(const std::vector<TermId>& constraints) {
    return checkSatMemo(constraints) == SolverVerdict::Unsatisfiable;
}

bool Solver::check(const PathCondition& pc, TermId t) { return isValid(pcAll(pc), t); }

GradualResult Solver::checkGradual(bool isImprecise, const PathCondition& pc, TermId t) {
    std::vector<TermId> constraints = pcAll(pc);
    if (isValid(constraints, t)) return {true, {arena_.mkTrue()}};
    if (isImprecise) {
        std::vector<TermId> q(constraints);
        q.push_back(t);
        if (isSat(q)) return {true, diff(constraints, t)};
    }
    return {false, {}};
}

GradualResult Solver::assertGradual(bool isImprecise, const PathCondition& pc, TermId t) {
    return checkGradual(isImprecise, pc, t);
}

std::vector<TermId> Solver::cnfConjuncts(TermId t) {
    TermId n = toNnf(arena_, t, false);
    constexpr size_t kClauseBound = 64;
    bool exceeded = false;
    // clause = disjunction of literals, kept as a sorted vector of term ids
    using Clause = std::vector<TermId>;
    std::function<std::vector<Clause>(TermId)> go = [&](TermId x) -> std::vector<Clause> {
        if (exceeded) return {};
        const TermNode& nd = arena_.node(x);
        if (nd.kind == TermKind::App && nd.op == TermOp::And) {
            auto a = go(nd.args[0]);
            auto b = go(nd.args[1]);
            for (auto& c : b) a.push_back(std::move(c));
            if (a.size() > kClauseBound) exceeded = true;
            return a;
        }
        if (nd.kind == TermKind::App && nd.op == TermOp::Or) {
            auto a = go(nd.args[0]);
            auto b = go(nd.args[1]);
            std::vector<Clause> out;
            if (a.size() * b.size() > kClauseBound) {
                exceeded = true;
                return {};
            }
            for (auto& ca : a)
                for (auto& cb : b) {
                    Clause c = ca;
                    for (TermId l : cb)
                        if (std::find(c.begin(), c.end(), l) == c.end()) c.push_back(l);
                    out.push_back(std::move(c));
                }
            return out;
        }
        return {{x}};
    };
    auto clauses = go(n);
    if (exceeded) return {n};
    std::vector<TermId> out;
    for (auto& c : clauses) {
        TermId acc = c[0];
        for (size_t i = 1; i < c.size(); ++i) acc = arena_.logicalOr(acc, c[i]);
        if (arena_.isTrue(acc)) continue;
        if (std::find(out.begin(), out.end(), acc) == out.end()) out.push_back(acc);
    }
    return out;
}

std::vector<TermId> Solver::diff(const std::vector<TermId>& constraints, TermId t) {
    std::vector<TermId> out;
    for (TermId c : cnfConjuncts(t)) {
        if (!isValid(constraints, c)) out.push_back(c);
    }
    return out;
}

}  // namespace gvl
