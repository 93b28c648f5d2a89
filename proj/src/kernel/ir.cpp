// SPDX-License-Identifier: Apache-2.0
//
// IR text dump and the native kernel file format.

#include <cctype>
#include <sstream>

#include "loopforge/error.hpp"
#include "loopforge/kernel.hpp"

namespace loopforge {

namespace {

std::string join(const std::vector<std::string>& xs, const std::string& sep) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? sep : "") + xs[k];
  return out;
}

std::string join(const std::set<std::string>& xs, const std::string& sep) {
  return join(std::vector<std::string>(xs.begin(), xs.end()), sep);
}

std::string affine_list(const std::vector<poly::AffineExpr>& xs) {
  std::vector<std::string> parts;
  for (const auto& x : xs) parts.push_back(render(from_affine(x)));
  return join(parts, ", ");
}

std::string render_arg(const ArgDecl& a) {
  std::string s = a.name + ": " + dtype_name(a.dtype);
  if (a.kind == ArgKind::array) {
    s += "[" + affine_list(a.shape) + "]";
    if (a.strides != contiguous_strides(a.shape, false)) {
      if (a.strides == contiguous_strides(a.shape, true))
        s += " colmajor";
      else
        s += " strides=[" + affine_list(a.strides) + "]";
    }
  }
  if (a.is_output) s += " out";
  return s;
}

std::string render_temporary(const TemporaryDecl& t) {
  std::string s = t.name + ": " + dtype_name(t.dtype);
  if (!t.shape.empty()) s += "[" + affine_list(t.shape) + "]";
  s += t.space == AddressSpace::workgroup ? " workgroup" : " private";
  if (!t.base_offsets.empty()) s += " base=[" + affine_list(t.base_offsets) + "]";
  return s;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<poly::AffineExpr> parse_shape(const std::string& text, int line) {
  std::vector<poly::AffineExpr> out;
  if (trim(text).empty()) return out;
  // Split on top-level commas.
  int depth = 0;
  std::string cur;
  auto flush = [&] {
    ExprPtr e;
    try {
      e = parse_expr(cur);
    } catch (const ParseError& err) {
      throw ParseError(std::string("bad extent: ") + err.what(), SourceSpan{line, 1});
    }
    auto a = to_affine(e);
    if (!a) throw ParseError("extent '" + trim(cur) + "' is not affine", SourceSpan{line, 1});
    out.push_back(*a);
    cur.clear();
  };
  for (char c : text) {
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == ',' && depth == 0)
      flush();
    else
      cur += c;
  }
  flush();
  return out;
}

// "NAME: DTYPE[SHAPE] word word" -> pieces.
struct Decl {
  std::string name;
  DType dtype = DType::f32;
  bool has_shape = false;
  std::vector<poly::AffineExpr> shape;
  std::vector<std::string> flags;
};

Decl parse_decl(std::string_view text, int line) {
  Decl d;
  std::size_t colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ParseError("expected 'name: dtype[shape]'", SourceSpan{line, 1});
  d.name = trim(text.substr(0, colon));
  std::string rest = trim(text.substr(colon + 1));
  std::size_t i = 0;
  while (i < rest.size() && (std::isalnum(static_cast<unsigned char>(rest[i])) || rest[i] == '_')) ++i;
  auto dt = parse_dtype(rest.substr(0, i));
  if (!dt) throw ParseError("unknown dtype '" + rest.substr(0, i) + "'", SourceSpan{line, 1});
  d.dtype = *dt;
  if (i < rest.size() && rest[i] == '[') {
    std::size_t close = rest.find(']', i);
    if (close == std::string::npos) throw ParseError("unterminated shape", SourceSpan{line, 1});
    d.has_shape = true;
    d.shape = parse_shape(rest.substr(i + 1, close - i - 1), line);
    i = close + 1;
  }
  d.flags = words(rest.substr(i));
  return d;
}

}  // namespace

std::string render_rule(const SubstitutionRule& r) {
  return r.name + "(" + join(r.params, ", ") + ") := " + render(r.body);
}

std::string render_instruction(const Instruction& insn) {
  std::string s = render(insn.lhs) + " = " + render(insn.rhs);
  std::vector<std::string> opts{"id=" + insn.id};
  if (!insn.within.empty()) opts.push_back("inames=" + join(insn.within, ":"));
  if (!insn.depends_on.empty()) opts.push_back("dep=" + join(insn.depends_on, ":"));
  if (!insn.tags.empty()) opts.push_back("tags=" + join(insn.tags, ":"));
  if (!insn.predicates.empty()) {
    std::vector<std::string> ps;
    for (const auto& p : insn.predicates) ps.push_back((p.negated ? "!" : "") + p.flag);
    opts.push_back("if=" + join(ps, ":"));
  }
  return s + "  {" + join(opts, ", ") + "}";
}

std::string render_ir(const Kernel& k) {
  std::ostringstream out;
  out << "kernel " << k.name << "\n";
  out << "domains:\n";
  for (std::size_t n = 0; n < k.domains.size(); ++n) {
    out << "  " << n;
    if (auto p = k.domains.parent(n)) out << " (in " << *p << ")";
    out << ": " << k.domains.node(n).str() << "\n";
  }
  if (!k.assumptions.empty()) {
    out << "assumptions:\n";
    for (const auto& l : k.assumptions.lines()) out << "  " << l << "\n";
  }
  if (!k.args.empty()) {
    out << "args:\n";
    for (const auto& a : k.args) out << "  " << render_arg(a) << "\n";
  }
  if (!k.temporaries.empty()) {
    out << "temporaries:\n";
    for (const auto& t : k.temporaries) out << "  " << render_temporary(t) << "\n";
  }
  if (!k.iname_order.empty()) {
    out << "inames:\n";
    for (const auto& i : k.iname_order) {
      out << "  " << i;
      auto tag = k.tag_of(i);
      if (tag.kind != IndexTag::Kind::none) out << ": " << tag.str();
      out << "\n";
    }
  }
  if (!k.rules.empty()) {
    out << "rules:\n";
    for (const auto& r : k.rules) {
      out << "  " << render_rule(r) << "\n";
      for (const auto& [name, value] : r.implicit)
        out << "    where " << name << " = " << render(value) << "\n";
    }
  }
  out << "instructions:\n";
  for (const auto& insn : k.instructions) out << "  " << render_instruction(insn) << "\n";
  return out.str();
}

Kernel parse_knl(std::string_view text) {
  std::string name;
  std::vector<std::string> domains;
  KernelOptions options;
  std::vector<std::pair<std::string, IndexTag>> tags;
  int line = 0;
  std::size_t pos = 0;
  bool found_separator = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string l = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line;
    if (l.empty() || l[0] == '#') continue;
    if (l == "---") {
      found_separator = true;
      break;
    }
    std::size_t sp = l.find_first_of(" \t");
    std::string key = l.substr(0, sp);
    std::string rest = sp == std::string::npos ? "" : trim(l.substr(sp));
    if (key == "kernel") {
      name = rest;
    } else if (key == "domain") {
      domains.push_back(rest);
    } else if (key == "assume") {
      options.assumptions.push_back(rest);
    } else if (key == "arg") {
      Decl d = parse_decl(rest, line);
      ArgDecl a;
      a.name = d.name;
      a.dtype = d.dtype;
      a.kind = d.has_shape ? ArgKind::array : ArgKind::scalar;
      a.shape = d.shape;
      bool colmajor = false;
      for (const auto& f : d.flags) {
        if (f == "out")
          a.is_output = true;
        else if (f == "colmajor")
          colmajor = true;
        else
          throw ParseError("unknown argument flag '" + f + "'", SourceSpan{line, 1});
      }
      a.strides = contiguous_strides(a.shape, colmajor);
      options.args.push_back(a);
    } else if (key == "temp") {
      Decl d = parse_decl(rest, line);
      TemporaryDecl t;
      t.name = d.name;
      t.dtype = d.dtype;
      t.shape = d.shape;
      for (const auto& f : d.flags) {
        if (f == "private")
          t.space = AddressSpace::private_;
        else if (f == "workgroup")
          t.space = AddressSpace::workgroup;
        else
          throw ParseError("unknown temporary flag '" + f + "'", SourceSpan{line, 1});
      }
      options.temporaries.push_back(t);
    } else if (key == "tag") {
      auto w = words(rest);
      if (w.size() != 2) throw ParseError("expected 'tag INAME TAG'", SourceSpan{line, 1});
      try {
        tags.emplace_back(w[0], IndexTag::parse(w[1]));
      } catch (const TransformError& e) {
        throw ParseError(e.what(), SourceSpan{line, 1});
      }
    } else {
      throw ParseError("unknown header line '" + key + "'", SourceSpan{line, 1});
    }
  }
  if (!found_separator) throw ParseError("missing '---' line before the kernel body", SourceSpan{line, 1});
  if (name.empty()) name = "loopy_kernel";
  // Leading newlines keep body line numbers aligned with the file.
  std::string body(static_cast<std::size_t>(line), '\n');
  if (pos < text.size()) body += text.substr(pos);
  Kernel k = make_kernel(domains, body, name, options);
  for (const auto& [iname, tag] : tags) {
    if (!k.is_iname(iname)) throw ParseError("tag on unknown iname '" + iname + "'", SourceSpan{0, 0});
    k.iname_tags[iname] = tag;
  }
  return k;
}

}  // namespace loopforge
