#pragma once

#include <memory>
#include <string>

#include "gvl/ast.hpp"
#include "gvl/parser.hpp"

namespace gvl {

// parse -> box records -> type check -> lower -> re-check. Returns null and
// fills diags on any error.
std::unique_ptr<Program> loadProgram(const std::string& source, DiagList& diags,
                                     const ParseOptions& opts = {},
                                     const std::string& sourceName = "<input>");

std::unique_ptr<Program> loadProgramFile(const std::string& path, DiagList& diags,
                                         const ParseOptions& opts = {});

std::string readFileOrThrow(const std::string& path);

}  // namespace gvl
