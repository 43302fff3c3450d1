#include "gvl/frontend.hpp"

#include <fstream>
#include <sstream>

#include "gvl/lower.hpp"
#include "gvl/typecheck.hpp"

namespace gvl {

std::unique_ptr<Program> loadProgram(const std::string& source, DiagList& diags,
                                     const ParseOptions& opts, const std::string& sourceName) {
    auto p = parse(source, diags, opts, sourceName);
    if (!p) return nullptr;
    addBoxRecords(*p);
    if (!typeCheck(*p, diags)) return nullptr;
    if (!lowerProgram(*p, diags)) return nullptr;
    if (!typeCheck(*p, diags)) return nullptr;
    return p;
}

std::string readFileOrThrow(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InternalError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::unique_ptr<Program> loadProgramFile(const std::string& path, DiagList& diags,
                                         const ParseOptions& opts) {
    std::string src;
    try {
        src = readFileOrThrow(path);
    } catch (const InternalError& e) {
        diags.error({}, e.msg);
        return nullptr;
    }
    return loadProgram(src, diags, opts, path);
}

}  // namespace gvl
