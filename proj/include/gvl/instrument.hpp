#pragma once

#include <memory>
#include <vector>

#include "gvl/engine.hpp"

namespace gvl {

enum class InstrumentMode { Gradual, Dynamic, Framing };

struct InsertedCheck {
    int checkId = -1;      // id in the verifier's check set, -1 for baseline checks
    std::string kind;      // assert | acc | pred | sep | branch-guard
    int line = 0;          // anchor line in the original program
};

struct InstrumentResult {
    std::unique_ptr<Program> program;
    std::vector<InsertedCheck> table;  // side table mapping insertions to check ids
    int checkSites = 0;                // number of check sites emitted
};

// Encodes run-time checks into an executable program: branch-condition
// versioning, predicate/separation functions, ownership assertions, and
// owned-fields passing at method boundaries. In Gradual mode `checks` is the
// verifier's accumulated set; the baseline modes ignore it.
InstrumentResult instrument(const Program& p, const std::vector<RuntimeCheck>& checks,
                            InstrumentMode mode, DiagList& diags);

const char* instrumentModeName(InstrumentMode m);

}  // namespace gvl
