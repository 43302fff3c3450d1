// Shared property-test harness for the solver: random small formulas over
// bounded integer variables, with an independent exhaustive-enumeration
// oracle. Used by the unit suite and the acceptance suite.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gvl/solver.hpp"

namespace gvl::props {

struct Instance {
    std::vector<TermId> vars;        // int atoms, each ranging over [lo, hi]
    int64_t lo = -3, hi = 3;
    std::vector<TermId> pi;          // constraints (includes the range bounds)
    TermId t = kNoTerm;              // goal formula
};

class Gen {
public:
    Gen(TermArena& arena, uint64_t seed) : arena_(arena), rng_(seed) {}

    Instance make(int maxVars = 4) {
        Instance ins;
        int nv = 1 + (int)(rng_() % maxVars);
        for (int i = 0; i < nv; ++i)
            ins.vars.push_back(arena_.fresh(Sort::Int, "x" + std::to_string(i)));
        for (TermId v : ins.vars) {
            ins.pi.push_back(arena_.le(arena_.intConst(ins.lo), v));
            ins.pi.push_back(arena_.le(v, arena_.intConst(ins.hi)));
        }
        int facts = (int)(rng_() % 3);
        for (int i = 0; i < facts; ++i) ins.pi.push_back(atom(ins));
        ins.t = formula(ins, 2);
        return ins;
    }

    TermId atom(const Instance& ins) {
        TermId lhs = linSum(ins);
        TermId rhs = (rng_() % 2) ? arena_.intConst((int64_t)(rng_() % 9) - 4)
                                  : ins.vars[rng_() % ins.vars.size()];
        switch (rng_() % 6) {
            case 0: return arena_.eq(lhs, rhs);
            case 1: return arena_.ne(lhs, rhs);
            case 2: return arena_.lt(lhs, rhs);
            case 3: return arena_.le(lhs, rhs);
            case 4: return arena_.gt(lhs, rhs);
            default: return arena_.ge(lhs, rhs);
        }
    }

    TermId formula(const Instance& ins, int depth) {
        if (depth == 0 || rng_() % 3 == 0) return atom(ins);
        switch (rng_() % 3) {
            case 0:
                return arena_.logicalAnd(formula(ins, depth - 1), formula(ins, depth - 1));
            case 1:
                return arena_.logicalOr(formula(ins, depth - 1), formula(ins, depth - 1));
            default:
                return arena_.logicalNot(formula(ins, depth - 1));
        }
    }

private:
    TermArena& arena_;
    std::mt19937_64 rng_;

    TermId linSum(const Instance& ins) {
        TermId v = ins.vars[rng_() % ins.vars.size()];
        int64_t c = (int64_t)(rng_() % 5) - 2;
        TermId e = c == 1 ? v : arena_.mul(arena_.intConst(c == 0 ? 1 : c), v);
        if (rng_() % 3 == 0) {
            TermId w = ins.vars[rng_() % ins.vars.size()];
            e = (rng_() % 2) ? arena_.add(e, w) : arena_.sub(e, w);
        }
        return e;
    }
};

// Independent oracle: evaluate a term under a full integer assignment.
inline bool oracleEval(const TermArena& arena, TermId t,
                       const std::vector<TermId>& vars, const std::vector<int64_t>& vals,
                       int64_t& iv, bool& bv, bool& isBool) {
    const TermNode& n = arena.node(t);
    switch (n.kind) {
        case TermKind::IntConst: iv = n.intValue; isBool = false; return true;
        case TermKind::BoolConst: bv = n.boolValue; isBool = true; return true;
        case TermKind::Atom: {
            for (size_t i = 0; i < vars.size(); ++i)
                if (vars[i] == t) {
                    iv = vals[i];
                    isBool = false;
                    return true;
                }
            return false;
        }
        case TermKind::App: {
            int64_t ia[2] = {0, 0};
            bool ba[2] = {false, false}, cb[2] = {false, false};
            for (size_t i = 0; i < n.args.size(); ++i)
                if (!oracleEval(arena, n.args[i], vars, vals, ia[i], ba[i], cb[i])) return false;
            isBool = true;
            switch (n.op) {
                case TermOp::Add: iv = ia[0] + ia[1]; isBool = false; return true;
                case TermOp::Sub: iv = ia[0] - ia[1]; isBool = false; return true;
                case TermOp::Mul: iv = ia[0] * ia[1]; isBool = false; return true;
                case TermOp::Eq: bv = cb[0] ? (ba[0] == ba[1]) : (ia[0] == ia[1]); return true;
                case TermOp::Lt: bv = ia[0] < ia[1]; return true;
                case TermOp::Le: bv = ia[0] <= ia[1]; return true;
                case TermOp::And: bv = ba[0] && ba[1]; return true;
                case TermOp::Or: bv = ba[0] || ba[1]; return true;
                case TermOp::Not: bv = !ba[0]; return true;
                default: return false;
            }
        }
        default:
            return false;
    }
}

inline bool oracleBool(const TermArena& arena, TermId t, const std::vector<TermId>& vars,
                       const std::vector<int64_t>& vals) {
    int64_t iv;
    bool bv, isBool;
    if (!oracleEval(arena, t, vars, vals, iv, bv, isBool) || !isBool)
        throw InternalError("oracle: unevaluable term");
    return bv;
}

// Enumerates every assignment; calls fn(vals) and stops early when fn returns
// false. Returns false when stopped early.
inline bool forEachAssignment(const Instance& ins,
                              const std::function<bool(const std::vector<int64_t>&)>& fn) {
    std::vector<int64_t> vals(ins.vars.size(), ins.lo);
    while (true) {
        if (!fn(vals)) return false;
        size_t k = 0;
        for (; k < vals.size(); ++k) {
            if (vals[k] < ins.hi) {
                ++vals[k];
                for (size_t j = 0; j < k; ++j) vals[j] = ins.lo;
                break;
            }
        }
        if (k == vals.size()) return true;
    }
}

struct PropResult {
    int instances = 0;
    int soundnessViolations = 0;
    int minimalityViolations = 0;
    int sanityViolations = 0;  // is_valid => is_sat cross-check
};

// Runs the diff soundness / minimality / validity-sat properties over `count`
// random satisfiable instances.
inline PropResult runDiffProperties(uint64_t seed, int count) {
    TermArena arena;
    Solver solver(arena);
    Gen gen(arena, seed);
    PropResult res;
    int guard = 0;
    while (res.instances < count && guard < count * 50) {
        ++guard;
        Instance ins = gen.make();
        // precondition of diff: pi and t jointly satisfiable (per the oracle)
        bool piSat = false, piAndTSat = false;
        forEachAssignment(ins, [&](const std::vector<int64_t>& vals) {
            bool pi = true;
            for (TermId c : ins.pi)
                if (!oracleBool(arena, c, ins.vars, vals)) {
                    pi = false;
                    break;
                }
            if (pi) {
                piSat = true;
                if (oracleBool(arena, ins.t, ins.vars, vals)) piAndTSat = true;
            }
            return !(piSat && piAndTSat);
        });
        if (!piAndTSat) continue;
        ++res.instances;

        std::vector<TermId> kept = solver.diff(ins.pi, ins.t);

        // soundness: pi && all(kept) => t on every assignment
        forEachAssignment(ins, [&](const std::vector<int64_t>& vals) {
            bool pi = true;
            for (TermId c : ins.pi)
                if (!oracleBool(arena, c, ins.vars, vals)) {
                    pi = false;
                    break;
                }
            if (!pi) return true;
            for (TermId c : kept)
                if (!oracleBool(arena, c, ins.vars, vals)) return true;
            if (!oracleBool(arena, ins.t, ins.vars, vals)) {
                ++res.soundnessViolations;
                return false;
            }
            return true;
        });

        // minimality: each kept conjunct is not individually entailed by pi
        for (TermId c : kept) {
            bool witness = !forEachAssignment(ins, [&](const std::vector<int64_t>& vals) {
                bool pi = true;
                for (TermId cc : ins.pi)
                    if (!oracleBool(arena, cc, ins.vars, vals)) {
                        pi = false;
                        break;
                    }
                if (pi && !oracleBool(arena, c, ins.vars, vals)) return false;  // found witness
                return true;
            });
            if (!witness) ++res.minimalityViolations;
        }

        // sanity: is_valid(C, g) implies is_sat(C + {g}) when is_sat(C)
        if (solver.isSat(ins.pi) && solver.isValid(ins.pi, ins.t)) {
            std::vector<TermId> q(ins.pi);
            q.push_back(ins.t);
            if (!solver.isSat(q)) ++res.sanityViolations;
        }
    }
    return res;
}

}  // namespace gvl::props
