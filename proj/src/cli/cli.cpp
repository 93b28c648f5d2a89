// SPDX-License-Identifier: Apache-2.0

#include "loopforge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "loopforge/codegen.hpp"
#include "loopforge/corpus.hpp"
#include "loopforge/error.hpp"
#include "loopforge/fortran.hpp"
#include "loopforge/interp.hpp"
#include "loopforge/transforms.hpp"

namespace loopforge {
namespace {

namespace fs = std::filesystem;

enum class Frontend { fortran, native };
enum class Mode { translate, dump_ir, run, check };

struct CliConfig {
  fs::path input;
  Frontend frontend = Frontend::fortran;
  Target target = Target::c;
  Mode mode = Mode::translate;
  std::optional<fs::path> transforms;
  std::optional<fs::path> output;
  std::string stage = "transformed";
  std::vector<std::string> params;   // name=value
  std::vector<std::string> inputs;   // name=path
  std::vector<std::string> outputs;  // name=path
};

/// A user error attributed to a file and (when known) a position in it.
struct Diagnostic {
  fs::path file;
  SourceSpan span;
  std::string message;
};

class Reporter {
 public:
  explicit Reporter(std::ostream& err) : err_(err) {
    const char* c = std::getenv("LOOPFORGE_COLOR");
    color_ = c && std::string(c) == "1";
  }

  void error(const Diagnostic& d) { print(d, "error", "\033[1;31m"); }
  void warning(const fs::path& file, const std::string& message) { print({file, {}, message}, "warning", "\033[1;35m"); }

 private:
  void print(const Diagnostic& d, const char* kind, const char* code) {
    std::string where = d.file.string();
    if (d.span.line > 0) where += ":" + std::to_string(d.span.line) + ":" + std::to_string(std::max(d.span.column, 1));
    if (color_)
      err_ << "\033[1m" << where << ":\033[0m " << code << kind << ":\033[0m " << d.message << "\n";
    else
      err_ << where << ": " << kind << ": " << d.message << "\n";
  }

  std::ostream& err_;
  bool color_ = false;
};

struct UserError {
  Diagnostic diagnostic;
};

[[noreturn]] void fail(const fs::path& file, const std::string& message, SourceSpan span = {}) {
  throw UserError{{file, span, message}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(p, "cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Frontend frontend_for(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".f" || ext == ".for" || ext == ".f77" || ext == ".f90") return Frontend::fortran;
  if (ext == ".knl") return Frontend::native;
  fail(p, "unknown input kind '" + ext + "' (expected .f, .for, .f77, .f90 or .knl)");
}

/// Maps a byte offset to line and column.
SourceSpan span_of_offset(std::string_view text, std::size_t offset) {
  SourceSpan s{1, 1};
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++s.line;
      s.column = 1;
    } else {
      ++s.column;
    }
  }
  return s;
}

SourceSpan span_of(const ParseError& e, std::string_view text) {
  // Offset-only errors carry line 1; recompute for multi-line text.
  if (e.span().line == 1 && e.offset() > 0) return span_of_offset(text, e.offset());
  return e.span();
}

/// Front end plus embedded transforms, then the external script. Errors are
/// attributed to the file they came from.
Translation translate(const CliConfig& cfg) {
  std::string source = slurp(cfg.input);
  Translation t;
  try {
    t = cfg.frontend == Frontend::fortran ? translate_fortran(source) : translate_native(source);
  } catch (const ParseError& e) {
    fail(cfg.input, e.what(), span_of(e, source));
  } catch (const TransformError& e) {
    fail(cfg.input, e.what(), e.span());
  } catch (const Error& e) {
    fail(cfg.input, e.what());
  }
  if (!cfg.transforms) return t;
  std::string script = slurp(*cfg.transforms);
  TransformScript parsed;
  try {
    parsed = parse_transform_script(script, 1);
  } catch (const ParseError& e) {
    fail(*cfg.transforms, e.what(), span_of(e, script));
  }
  TransformLog log;
  try {
    const std::string name = t.transformed.name;
    auto out = run_transform_script({{name, t.transformed}}, parsed, &log);
    t.transformed = out.at(name);
  } catch (const ParseError& e) {
    fail(*cfg.transforms, e.what(), e.span());
  } catch (const TransformError& e) {
    fail(*cfg.transforms, e.what(), e.span());
  } catch (const Error& e) {
    fail(*cfg.transforms, e.what());
  }
  t.warnings.insert(t.warnings.end(), log.warnings.begin(), log.warnings.end());
  return t;
}

void write_text(const CliConfig& cfg, const std::string& text, std::ostream& out) {
  if (!cfg.output) {
    out << text;
    return;
  }
  std::ofstream f(*cfg.output, std::ios::binary);
  if (!f) fail(*cfg.output, "cannot write file");
  f << text;
}

std::pair<std::string, std::string> split_binding(const std::string& b, const char* flag) {
  auto eq = b.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == b.size())
    throw UserError{{{}, {}, std::string(flag) + " expects name=value, got '" + b + "'"}};
  return {b.substr(0, eq), b.substr(eq + 1)};
}

/// Integer parameters go to `params`; float scalars become rank-0 buffers.
void bind_params(const CliConfig& cfg, const Kernel& k, ExecutionEnv& env) {
  auto known = k.params();
  for (const auto& b : cfg.params) {
    auto [name, text] = split_binding(b, "--param");
    const ArgDecl* a = k.find_arg(name);
    bool is_param = std::find(known.begin(), known.end(), name) != known.end();
    if (is_param || (a && a->kind == ArgKind::scalar && a->dtype == DType::i32)) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size())
        throw UserError{{{}, {}, "--param " + name + ": '" + text + "' is not an integer"}};
      env.params[name] = v;
    } else if (a && a->kind == ArgKind::scalar) {
      char* end = nullptr;
      double v = std::strtod(text.c_str(), &end);
      if (end != text.c_str() + text.size())
        throw UserError{{{}, {}, "--param " + name + ": '" + text + "' is not a number"}};
      env.arrays[name] = Buffer{a->dtype, {}, {v}};
    } else {
      throw UserError{{{}, {}, "--param " + name + ": kernel '" + k.name + "' has no such parameter or scalar"}};
    }
  }
}

ExecutionEnv build_env(const CliConfig& cfg, const Kernel& k) {
  ExecutionEnv env;
  bind_params(cfg, k, env);
  for (const auto& p : k.params())
    if (!env.params.count(p)) throw UserError{{{}, {}, "missing --param " + p + "=<value>"}};
  for (const auto& b : cfg.inputs) {
    auto [name, path] = split_binding(b, "--in");
    const ArgDecl* a = k.find_arg(name);
    if (!a) throw UserError{{path, {}, "kernel '" + k.name + "' has no argument '" + name + "'"}};
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");
    Buffer buf;
    try {
      buf = read_array(in);
    } catch (const Error& e) {
      fail(path, e.what());
    }
    std::vector<std::int64_t> want = a->kind == ArgKind::array ? concrete_shape(*a, env.params) : std::vector<std::int64_t>{};
    if (buf.shape != want) {
      std::ostringstream s;
      s << "shape of '" << name << "' is (";
      for (std::size_t i = 0; i < buf.shape.size(); ++i) s << (i ? ", " : "") << buf.shape[i];
      s << ") but the kernel expects (";
      for (std::size_t i = 0; i < want.size(); ++i) s << (i ? ", " : "") << want[i];
      s << ")";
      fail(path, s.str());
    }
    if (buf.dtype != a->dtype)
      fail(path, "'" + name + "' holds " + dtype_name(buf.dtype) + " but the kernel expects " + dtype_name(a->dtype));
    if (buf.data.size() != storage_size(*a, env.params)) fail(path, "element count does not match the argument's storage");
    env.arrays[name] = std::move(buf);
  }
  for (const auto& a : k.args) {
    if (a.is_output || env.arrays.count(a.name) || env.params.count(a.name)) continue;
    throw UserError{{{}, {}, "missing input for '" + a.name + "' (use --in " + a.name + "=<file>" +
                                 (a.kind == ArgKind::scalar ? " or --param" : "") + ")"}};
  }
  return env;
}

int do_run(const CliConfig& cfg, const Translation& t) {
  const Kernel& k = t.transformed;
  std::vector<std::pair<std::string, std::string>> outs;
  for (const auto& b : cfg.outputs) {
    auto binding = split_binding(b, "--out");
    const ArgDecl* a = k.find_arg(binding.first);
    if (!a || !a->is_output) throw UserError{{{}, {}, "'" + binding.first + "' is not an output of kernel '" + k.name + "'"}};
    outs.push_back(binding);
  }
  ExecutionEnv env = build_env(cfg, k);
  try {
    env = interpret_bounds_checked(k, std::move(env));
  } catch (const Error& e) {
    fail(cfg.input, e.what());
  }
  for (const auto& [name, path] : outs) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(path, "cannot write file");
    write_array(f, env.arrays.at(name));
  }
  return 0;
}

/// Largest output difference relative to the output's magnitude.
double relative_difference(const Kernel& k, const ExecutionEnv& a, const ExecutionEnv& b, std::string& where) {
  double worst = 0;
  for (const auto& arg : k.args) {
    if (!arg.is_output) continue;
    const auto& x = a.arrays.at(arg.name).data;
    const auto& y = b.arrays.at(arg.name).data;
    double scale = 1;
    for (double v : x)
      if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
      if (x[i] == y[i] || (std::isnan(x[i]) && std::isnan(y[i]))) continue;
      double d = std::abs(x[i] - y[i]) / scale;
      if (!(d <= worst)) {
        worst = std::isnan(d) ? INFINITY : d;
        where = arg.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return worst;
}

int do_check(const CliConfig& cfg, const Translation& t, std::ostream& out) {
  try {
    validate(t.raw);
    validate(t.transformed);
  } catch (const Error& e) {
    fail(cfg.input, e.what());
  }
  out << "validate: ok\n";
  Schedule s;
  try {
    s = schedule(t.transformed);
    emit(t.transformed, Target::c);
    emit(t.transformed, Target::opencl);
  } catch (const Error& e) {
    fail(cfg.input, e.what());
  }
  out << "schedule and emit: ok\n";

  ExecutionEnv bound;
  bind_params(cfg, t.raw, bound);
  std::map<std::string, std::int64_t> params = random_params(t.transformed, 0);
  for (const auto& [n, v] : bound.params) params[n] = v;
  bool f32 = false;
  for (const auto& a : t.raw.args) f32 = f32 || a.dtype == DType::f32;
  const double tolerance = f32 ? 1e-4 : 1e-10;
  double worst = 0;
  const int runs = 3;
  for (std::uint64_t seed = 0; seed < runs; ++seed) {
    ExecutionEnv env = random_inputs(t.raw, params, seed);
    for (const auto& [n, b] : bound.arrays) env.arrays[n] = b;
    std::string where;
    double d = 0;
    try {
      d = relative_difference(t.raw, interpret_bounds_checked(t.raw, env), interpret_bounds_checked(t.transformed, env), where);
    } catch (const Error& e) {
      fail(cfg.input, std::string("interpreting on random inputs: ") + e.what());
    }
    worst = std::max(worst, d);
    if (d > tolerance) {
      std::ostringstream msg;
      msg << "transformed kernel disagrees with the untransformed one at " << where << " (relative difference " << d
          << ", seed " << seed << ")";
      fail(cfg.input, msg.str());
    }
  }
  std::ostringstream p;
  for (const auto& [n, v] : params) p << " " << n << "=" << v;
  out << "interpret " << runs << " random inputs (" << (p.str().empty() ? " no parameters" : p.str().substr(1))
      << "): ok, max relative difference " << worst << "\n";
  return 0;
}

int execute(const CliConfig& cfg, std::ostream& out, Reporter& report) {
  Translation t = translate(cfg);
  for (const auto& w : t.warnings) report.warning(cfg.input, w);
  switch (cfg.mode) {
    case Mode::translate: {
      std::string text;
      try {
        text = emit(t.transformed, cfg.target);
      } catch (const Error& e) {
        fail(cfg.input, e.what());
      }
      write_text(cfg, text, out);
      return 0;
    }
    case Mode::dump_ir: {
      const Kernel* k = &t.transformed;
      Kernel expanded;
      if (cfg.stage == "raw") {
        k = &t.raw;
      } else if (cfg.stage == "expanded") {
        try {
          expanded = expand_all_rules(t.transformed);
        } catch (const Error& e) {
          fail(cfg.input, e.what());
        }
        k = &expanded;
      }
      write_text(cfg, render_ir(*k), out);
      return 0;
    }
    case Mode::run:
      return do_run(cfg, t);
    case Mode::check:
      return do_check(cfg, t, out);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"loopforge: loop-kernel translator and transformer", "loopforge"};
  app.require_subcommand(1);
  std::string input, transforms, output, target = "c";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("file", input, "Input kernel (.f Fortran or .knl native)")->required();
    sub->add_option("--transforms", transforms, "Transform script applied after the embedded ones");
  };
  auto* translate_cmd = app.add_subcommand("translate", "Emit C or OpenCL source");
  add_common(translate_cmd);
  translate_cmd->add_option("--target", target, "Output language")->check(CLI::IsMember({"c", "opencl"}));
  translate_cmd->add_option("-o,--output", output, "Write to this file instead of standard output");

  auto* dump_cmd = app.add_subcommand("dump-ir", "Print the kernel IR");
  add_common(dump_cmd);
  dump_cmd->add_option("--stage", cfg.stage, "Pipeline stage")->check(CLI::IsMember({"raw", "transformed", "expanded"}));
  dump_cmd->add_option("-o,--output", output, "Write to this file instead of standard output");

  auto* run_cmd = app.add_subcommand("run", "Interpret the transformed kernel on array files");
  add_common(run_cmd);
  run_cmd->add_option("--param", cfg.params, "Parameter or scalar binding name=value")->required();
  run_cmd->add_option("--in", cfg.inputs, "Input array name=file");
  run_cmd->add_option("--out", cfg.outputs, "Output array name=file");

  auto* check_cmd = app.add_subcommand("check", "Validate, schedule and compare against the untransformed kernel");
  add_common(check_cmd);
  check_cmd->add_option("--param", cfg.params, "Parameter binding name=value (random otherwise)");

  Reporter report(err);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (translate_cmd->parsed()) cfg.mode = Mode::translate;
    if (dump_cmd->parsed()) cfg.mode = Mode::dump_ir;
    if (run_cmd->parsed()) cfg.mode = Mode::run;
    if (check_cmd->parsed()) cfg.mode = Mode::check;
    cfg.input = input;
    cfg.target = target == "opencl" ? Target::opencl : Target::c;
    if (!transforms.empty()) cfg.transforms = transforms;
    if (!output.empty()) cfg.output = output;
    cfg.frontend = frontend_for(cfg.input);
    return execute(cfg, out, report);
  } catch (const UserError& e) {
    Diagnostic d = e.diagnostic;
    if (d.file.empty()) d.file = cfg.input;
    report.error(d);
    return 1;
  } catch (const Error& e) {
    report.error({cfg.input, {}, e.what()});
    return 1;
  } catch (const InternalError& e) {
    err << "loopforge: internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "loopforge: internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace loopforge
