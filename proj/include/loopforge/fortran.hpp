// SPDX-License-Identifier: Apache-2.0
//
// Fortran-77 subset front-end, `!$loopy` pragma blocks and the transform
// script language.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "loopforge/error.hpp"
#include "loopforge/kernel.hpp"
#include "loopforge/transforms.hpp"

namespace loopforge {

struct FortranDecl {
  std::string name;
  DType dtype = DType::f32;
  /// Per dimension: lower and upper bound (lower defaults to 1).
  std::vector<std::pair<ExprPtr, ExprPtr>> dims;
  SourceSpan span;
};

struct FortranStmt {
  enum class Kind { assign, do_loop, if_block };
  Kind kind = Kind::assign;
  SourceSpan span;
  std::set<std::string> tags;
  // assign: Fortran-shaped expressions (array references are calls)
  ExprPtr lhs, rhs;
  // do_loop
  std::string var;
  ExprPtr lo, hi;
  std::vector<FortranStmt> body;
  // if_block (uses body as the then-branch)
  ExprPtr cond;
  std::vector<FortranStmt> else_body;
};

struct PragmaBlock {
  enum class Kind { transform, tagged };
  Kind kind = Kind::transform;
  std::string tag;      // tagged
  std::string payload;  // transform: comment markers stripped
  SourceSpan span;      // line of the begin marker
};

struct FortranUnit {
  std::string name;
  std::vector<std::string> args;
  std::vector<FortranDecl> decls;
  bool implicit_none = false;
  std::vector<FortranStmt> body;
  std::vector<PragmaBlock> pragmas;
  std::vector<std::string> warnings;

  const FortranDecl* find_decl(std::string_view n) const;
};

/// Throws ParseError (with line and column) for syntax errors and for every
/// restricted construct, naming it.
FortranUnit parse_fortran(std::string_view source);

/// Throws ParseError for non-unit strides and non-affine bounds.
Kernel lower_to_kernel(const FortranUnit& u, std::vector<std::string>* warnings = nullptr);

// Transform scripts -----------------------------------------------------------

struct ScriptValue {
  enum class Kind { string, integer, none, identifier };
  Kind kind = Kind::none;
  std::string text;
  std::int64_t value = 0;
};

struct ScriptStatement {
  std::string target;
  std::string verb;
  std::vector<ScriptValue> positional;  // the kernel comes first
  std::vector<std::pair<std::string, ScriptValue>> keywords;
  SourceSpan span;
};

struct TransformScript {
  std::vector<ScriptStatement> statements;
};

/// `first_line` is the source line of the script's first line.
TransformScript parse_transform_script(std::string_view text, int first_line = 1);

/// Checks every statement (verbs, arity, literal types, kernel names) before
/// running any of them, then applies them in order.
std::map<std::string, Kernel> run_transform_script(std::map<std::string, Kernel> kernels,
                                                   const TransformScript& script,
                                                   TransformLog* log = nullptr);

/// Names of the verbs the script language accepts.
std::vector<std::string> script_verbs();

struct Translation {
  FortranUnit unit;
  Kernel raw;          // lowered, before any transform
  Kernel transformed;  // after the embedded transform blocks
  std::vector<std::string> warnings;
};

/// Parses, lowers and applies the embedded transform blocks, then any
/// `extra_script` given.
Translation translate_fortran(std::string_view source, std::string_view extra_script = {},
                              int extra_first_line = 1);
/// Same for a native kernel file; `unit` stays empty.
Translation translate_native(std::string_view knl_text, std::string_view script = {}, int first_line = 1);

}  // namespace loopforge
