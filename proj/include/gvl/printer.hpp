#pragma once

#include <string>

#include "gvl/ast.hpp"

namespace gvl {

std::string printExpr(const ExprPtr& e);
std::string printFormula(const FormulaPtr& f);
std::string printGradual(const GradualFormula& g);
std::string printStmt(const StmtPtr& s, int indent = 0);
std::string printProgram(const Program& p);

}  // namespace gvl
