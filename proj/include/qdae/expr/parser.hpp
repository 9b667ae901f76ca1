#pragma once

#include <set>
#include <string>
#include <string_view>

#include "qdae/expr/expression.hpp"

namespace qdae::expr {

/// Parses an expression.
///
/// Grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := base ('^' ['-'] number)?
///   base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
///
/// Identifiers listed in `parameters` become Parameter refs, all others become
/// Variable refs. `der(x)` is a first-order derivative ref; `der(der(x))`
/// nests to order 2. A '-' directly in front of a numeric literal yields a
/// negative constant rather than a Neg node. No folding is performed, so
/// `parse_expression(to_string(e))` reproduces `e` node for node.
///
/// Throws ParseError with line/column on malformed input or unknown functions.
Expression parse_expression(std::string_view text, const std::set<std::string, std::less<>>& parameters = {});

/// Prints with the minimum parentheses the grammar needs to reparse into the
/// same tree. Reals use the shortest round-trip representation.
std::string to_string(const Expression& e);

std::string format_double(double v);

}  // namespace qdae::expr
