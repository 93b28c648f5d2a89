// SPDX-License-Identifier: Apache-2.0

#include "loopforge/corpus.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "loopforge/codegen.hpp"
#include "loopforge/error.hpp"

namespace loopforge {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spill(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

std::map<std::string, std::int64_t> parse_params(const std::string& script) {
  std::map<std::string, std::int64_t> out;
  std::istringstream lines(script);
  std::string line;
  while (std::getline(lines, line)) {
    auto pos = line.find("# params:");
    if (pos == std::string::npos) continue;
    std::istringstream words(line.substr(pos + 9));
    std::string w;
    while (words >> w) {
      auto eq = w.find('=');
      if (eq == std::string::npos) throw Error("malformed parameter binding '" + w + "'");
      out[w.substr(0, eq)] = std::stoll(w.substr(eq + 1));
    }
  }
  return out;
}

}  // namespace

Fixture load_fixture(const fs::path& dir) {
  Fixture f;
  f.id = dir.filename().string();
  f.dir = dir;
  if (auto s = slurp(dir / "input.f")) {
    f.fortran = true;
    f.source = *s;
  } else if (auto k = slurp(dir / "input.knl")) {
    f.source = *k;
  } else {
    throw Error("fixture " + f.id + " has neither input.f nor input.knl");
  }
  f.transforms = slurp(dir / "transforms.txt").value_or("");
  f.expected_c = slurp(dir / "expected.c");
  f.expected_ir = slurp(dir / "expected.ir");
  f.params = parse_params(f.transforms);
  return f;
}

std::vector<Fixture> load_corpus(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<Fixture> out;
  for (const auto& d : dirs) out.push_back(load_fixture(d));
  return out;
}

FixtureOutput run_fixture(const Fixture& f) {
  FixtureOutput out;
  out.translation = f.fortran ? translate_fortran(f.source, f.transforms, 1) : translate_native(f.source, f.transforms, 1);
  out.c = emit(out.translation.transformed, Target::c);
  out.ir = render_ir(out.translation.transformed);
  return out;
}

void bless_fixture(const Fixture& f) {
  FixtureOutput out = run_fixture(f);
  spill(f.dir / "expected.c", out.c);
  spill(f.dir / "expected.ir", out.ir);
}

// Structural comparison ----------------------------------------------------------------

std::vector<std::string> structural_tokens(std::string_view text) {
  static const char* multi[] = {"<=", ">=", "==", "!=", "++", "--", "&&", "||", "**", ":=", "->", "+=", "-=", "*="};
  std::vector<std::string> out;
  std::size_t i = 0;
  auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      std::string id(text.substr(i, j - i));
      std::size_t us = id.rfind('_');
      if (us != std::string::npos && us > 0 && us + 1 < id.size() &&
          std::all_of(id.begin() + static_cast<std::ptrdiff_t>(us) + 1, id.end(),
                      [](char d) { return std::isdigit(static_cast<unsigned char>(d)); }))
        id.erase(us);
      out.push_back(id);
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      std::size_t j = i;
      while (j < text.size()) {
        char d = text[j];
        if (ident_char(d) || d == '.') {
          ++j;
        } else if ((d == '+' || d == '-') && (text[j - 1] == 'e' || text[j - 1] == 'E' || text[j - 1] == 'p')) {
          ++j;
        } else {
          break;
        }
      }
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      std::string tok(1, c);
      for (const char* m : multi)
        if (text.substr(i, 2) == m) tok = m;
      out.push_back(tok);
      i += tok.size();
    }
  }
  return out;
}

bool structurally_equal(std::string_view a, std::string_view b) { return structural_tokens(a) == structural_tokens(b); }

bool structurally_contains(std::string_view text, std::string_view fragment) {
  auto hay = structural_tokens(text);
  auto needle = structural_tokens(fragment);
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// Random kernels -------------------------------------------------------------------------

namespace {

class KernelGen {
 public:
  KernelGen(std::uint64_t seed, const RandomLimits& lim) : rng_(seed), lim_(lim) {}

  std::string text(std::uint64_t seed) {
    int dims = uniform(1, std::max(1, std::min(lim_.max_dims, 3)));
    dtype_ = chance(0.5) ? "f32" : "f64";
    int budget = 3000;
    for (int d = 0; d < dims; ++d) {
      std::string name = "i" + std::to_string(d);
      inames_.push_back(name);
      int cap = std::max(1, std::min(lim_.max_extent, budget));
      int e = uniform(std::min(2, cap), cap);
      if (d == 0 && chance(0.4)) {
        param_ = true;
        e = std::min(40, cap);
        extents_.push_back("n");
      } else {
        extents_.push_back(std::to_string(e));
      }
      budget = std::max(1, budget / std::max(1, e));
    }
    // Last iname bounded by the previous one: a triangular nest.
    triangular_ = dims >= 2 && chance(0.25);
    reduction_ = chance(0.3);
    reduction_extent_ = uniform(1, 6);

    std::ostringstream head;
    head << "kernel rand" << seed << "\n";
    std::string dom;
    std::size_t rect = triangular_ ? inames_.size() - 1 : inames_.size();
    for (std::size_t d = 0; d < rect; ++d) dom += std::string(d ? " and " : "") + "0<=" + inames_[d] + "<" + extents_[d];
    std::vector<std::string> names(inames_.begin(), inames_.begin() + static_cast<std::ptrdiff_t>(rect));
    head << "domain {[" << join(names) << "]: " << dom << "}\n";
    if (triangular_) {
      const std::string& last = inames_.back();
      head << "domain {[" << last << "]: 0<=" << last << "<=" << inames_[inames_.size() - 2] << "}\n";
    }
    if (reduction_) head << "domain {[r]: 0<=r<" << reduction_extent_ << "}\n";
    if (param_) {
      head << "assume n >= 1\n";
      head << "arg n: i32\n";
    }
    std::vector<std::string> shape;
    for (std::size_t d = 0; d < inames_.size(); ++d) shape.push_back(extent_of(d) + " + 2");
    head << "arg x0: " << dtype_ << "[" << join(shape) << "]\n";
    head << "arg x1: " << dtype_ << "[" << shape[0] << "]\n";
    head << "arg s: " << dtype_ << "\n";
    if (reduction_) head << "arg w: " << dtype_ << "[" << reduction_extent_ << "]\n";

    std::ostringstream body;
    int rules = uniform(0, std::max(0, std::min(lim_.max_rules, 2)));
    if (rules >= 1) {
      index_rule_ = true;
      body << (chance(0.5) ? "g0(p) := x1[p]*2" : "g0(p) := x1[p] + x1[p + 1]") << "\n";
    }
    if (rules >= 2) {
      value_rule_ = true;
      body << (chance(0.5) ? "g1(a, b) := a*b + 1.5" : "g1(a, b) := (a - b)/(abs(b) + 1)") << "\n";
    }

    int count = uniform(1, std::max(1, lim_.max_instructions));
    std::vector<std::string> outputs;
    std::vector<std::string> decls;
    for (int n = 0; n < count; ++n) {
      int level = uniform(1, static_cast<int>(inames_.size()));
      // A shallower instruction closes deeper loops; their scalars die.
      for (auto* m : {&temps_, &flags_})
        for (auto it = m->begin(); it != m->end();) it = it->first > level ? m->erase(it) : std::next(it);
      reads_.clear();
      int kind = uniform(0, 9);
      bool last = n + 1 == count;
      if (last && outputs.empty()) kind = 9;
      std::string lhs;
      std::string rhs = expr(level, 0);
      std::vector<std::string> preds;
      if (kind <= 2) {
        std::string t = "t" + std::to_string(temp_count_++);
        decls.push_back("temp " + t + ": " + dtype_);
        lhs = t;
      } else if (kind == 3) {
        std::string c = "c" + std::to_string(flag_count_++);
        decls.push_back("temp " + c + ": i32");
        static const char* ops[] = {" >= ", " < ", " <= ", " > ", " != "};
        rhs = expr(level, 1) + ops[uniform(0, 4)] + expr(level, 1);
        lhs = c;
      } else {
        std::string out = "out" + std::to_string(outputs.size());
        bool accumulate = kind == 4 && level >= 2;
        int dims = accumulate ? level - 1 : level;
        std::vector<std::string> idx(inames_.begin(), inames_.begin() + dims);
        std::vector<std::string> oshape;
        for (int d = 0; d < dims; ++d) oshape.push_back(extent_of(static_cast<std::size_t>(d)));
        decls.push_back("arg " + out + ": " + dtype_ + "[" + join(oshape) + "] out");
        outputs.push_back(out);
        lhs = out + "[" + join(idx) + "]";
        if (accumulate) rhs = lhs + " + " + rhs;
        auto& flags = flags_[level];
        if (!flags.empty() && chance(0.5)) {
          const std::string& f = flags[static_cast<std::size_t>(uniform(0, static_cast<int>(flags.size()) - 1))];
          preds.push_back((chance(0.5) ? "!" : "") + f);
          reads_.insert(f);
        }
      }
      std::vector<std::string> within(inames_.begin(), inames_.begin() + level);
      body << lhs << " = " << rhs << "  {id=s" << n << ", inames=" << join(within, ":");
      std::set<std::string> deps;
      if (n > 0) deps.insert("s" + std::to_string(n - 1));
      for (const auto& r : reads_) deps.insert(writer_.at(r));
      if (!deps.empty()) body << ", dep=" << join(std::vector<std::string>(deps.begin(), deps.end()), ":");
      if (!preds.empty()) body << ", if=" << preds[0];
      body << "}\n";
      if (kind <= 3) writer_[lhs] = "s" + std::to_string(n);
      if (kind <= 2) temps_[level].push_back(lhs);
      if (kind == 3) flags_[level].push_back(lhs);
    }
    for (const auto& d : decls) head << d << "\n";
    return head.str() + "---\n" + body.str();
  }

 private:
  std::mt19937_64 rng_;
  RandomLimits lim_;
  std::string dtype_;
  std::vector<std::string> inames_;
  std::vector<std::string> extents_;
  bool param_ = false;
  bool triangular_ = false;
  bool reduction_ = false;
  int reduction_extent_ = 1;
  bool index_rule_ = false;
  bool value_rule_ = false;
  int temp_count_ = 0;
  int flag_count_ = 0;
  std::map<int, std::vector<std::string>> temps_;
  std::map<int, std::vector<std::string>> flags_;
  std::map<std::string, std::string> writer_;
  std::set<std::string> reads_;

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  static std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
  }

  // Extent of iname d for shapes; the triangular iname never exceeds its parent.
  std::string extent_of(std::size_t d) const {
    if (triangular_ && d + 1 == inames_.size()) return extents_[d - 1];
    return extents_[d];
  }

  std::string offset_index(const std::string& iname) {
    int c = uniform(0, 2);
    return c ? iname + " + " + std::to_string(c) : iname;
  }

  std::string leaf(int level) {
    for (;;) {
      switch (uniform(0, 9)) {
        case 0:
        case 1: {
          std::vector<std::string> idx;
          for (std::size_t d = 0; d < inames_.size(); ++d)
            idx.push_back(static_cast<int>(d) < level ? offset_index(inames_[d]) : std::to_string(uniform(0, 2)));
          return "x0[" + join(idx) + "]";
        }
        case 2: return "x1[" + offset_index(inames_[0]) + "]";
        case 3: return "s";
        case 4: {
          static const char* lits[] = {"0.5", "1.25", "3", "2", "-1.5"};
          std::string l = lits[uniform(0, 4)];
          return l[0] == '-' ? "(" + l + ")" : l;
        }
        case 5: return "0.5*" + inames_[static_cast<std::size_t>(uniform(0, level - 1))];
        case 6:
          if (!temps_[level].empty()) {
            const auto& t = temps_[level][static_cast<std::size_t>(uniform(0, static_cast<int>(temps_[level].size()) - 1))];
            reads_.insert(t);
            return t;
          }
          break;
        case 7:
          if (index_rule_) return "g0(" + inames_[0] + (chance(0.5) ? " + 1" : "") + ")";
          break;
        case 8:
          if (reduction_) return "sum(r, w[r]*x1[" + offset_index(inames_[0]) + "])";
          break;
        default:
          if (value_rule_) return "g1(x1[" + inames_[0] + "], s)";
          break;
      }
    }
  }

  std::string expr(int level, int depth) {
    if (depth >= 3 || chance(0.3)) return leaf(level);
    switch (uniform(0, 8)) {
      case 0: return expr(level, depth + 1) + " + " + expr(level, depth + 1);
      case 1: return expr(level, depth + 1) + " - " + expr(level, depth + 1);
      case 2: return "(" + expr(level, depth + 1) + ")*" + expr(level, depth + 1);
      case 3: return "(" + expr(level, depth + 1) + ")/(abs(" + expr(level, depth + 1) + ") + 1)";
      case 4: return "(" + expr(level, depth + 1) + ")**2";
      case 5: return "sqrt(abs(" + expr(level, depth + 1) + "))";
      case 6: return std::string(chance(0.5) ? "min(" : "max(") + expr(level, depth + 1) + ", " + expr(level, depth + 1) + ")";
      case 7: return "-(" + expr(level, depth + 1) + ")";
      default:
        if (value_rule_) return "g1(" + expr(level, depth + 1) + ", " + expr(level, depth + 1) + ")";
        return leaf(level);
    }
  }
};

}  // namespace

Kernel random_kernel(std::uint64_t seed, const RandomLimits& limits) {
  KernelGen g(seed, limits);
  return parse_knl(g.text(seed));
}

std::map<std::string, std::int64_t> random_params(const Kernel& k, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_int_distribution<std::int64_t> value(1, 40);
  std::vector<std::string> names;
  for (const auto& p : k.params())
    if (!poly::Assumptions::is_quotient_name(p)) names.push_back(p);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::map<std::string, std::int64_t> out;
    poly::Valuation v;
    for (const auto& n : names) v[n] = out[n] = value(rng);
    try {
      k.assumptions.check(v);
      return out;
    } catch (const Error&) {
    }
  }
  throw Error("no parameter values in [1, 40] satisfy the assumptions of " + k.name);
}

// Compiled-C oracle ------------------------------------------------------------------------

std::optional<std::string> find_c_compiler() {
  std::vector<std::string> candidates;
  if (const char* cc = std::getenv("CC"); cc && *cc) candidates.emplace_back(cc);
  for (const char* c : {"cc", "gcc", "clang"}) candidates.emplace_back(c);
  for (const auto& c : candidates) {
    std::string probe = "command -v '" + c + "' >/dev/null 2>&1";
    if (std::system(probe.c_str()) == 0) return c;
  }
  return std::nullopt;
}

namespace {

const char* c_type(DType t) { return t == DType::i32 ? "int" : t == DType::f32 ? "float" : "double"; }

bool passed_by_pointer(const ArgDecl& a) { return a.kind == ArgKind::array || a.is_output; }

}  // namespace

std::string c_harness(const Kernel& k) {
  std::ostringstream h;
  h << emit(k, Target::c) << "\n#include <stdio.h>\n#include <stdlib.h>\n\n";
  h << "static double rd(void)\n{\n  char buf[128];\n  if (scanf(\"%127s\", buf) != 1)\n    exit(3);\n"
       "  return strtod(buf, 0);\n}\n\n";
  h << "int main(void)\n{\n  long count;\n";
  std::vector<std::string> call;
  for (const auto& a : k.args) {
    const char* t = c_type(a.dtype);
    if (passed_by_pointer(a)) {
      h << "  count = (long)rd();\n";
      h << "  " << t << " *" << a.name << " = malloc(sizeof(" << t << ") * (count ? count : 1));\n";
      h << "  long " << a.name << "_n = count;\n";
      h << "  for (long q = 0; q < count; ++q)\n    " << a.name << "[q] = (" << t << ")rd();\n";
    } else {
      h << "  " << t << " " << a.name << " = (" << t << ")rd();\n";
    }
    call.push_back(a.name);
  }
  h << "  " << k.name << "(";
  for (std::size_t i = 0; i < call.size(); ++i) h << (i ? ", " : "") << call[i];
  h << ");\n";
  for (const auto& a : k.args) {
    if (!a.is_output) continue;
    h << "  for (long q = 0; q < " << a.name << "_n; ++q)\n    printf(\"%a\\n\", (double)" << a.name << "[q]);\n";
  }
  h << "  return 0;\n}\n";
  return h.str();
}

CompiledKernel::CompiledKernel(const Kernel& k, const std::string& compiler) : kernel_(k) {
  std::string tmpl = (fs::temp_directory_path() / "loopforge-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw Error("cannot create a temporary directory");
  dir_ = tmpl;
  spill(dir_ / "kernel.c", c_harness(k));
  std::string cmd = "'" + compiler + "' -O1 -ffp-contract=off -o '" + (dir_ / "kernel").string() + "' '" +
                    (dir_ / "kernel.c").string() + "' -lm > '" + (dir_ / "cc.log").string() + "' 2>&1";
  if (std::system(cmd.c_str()) != 0)
    throw Error("C compilation failed:\n" + slurp(dir_ / "cc.log").value_or(""));
}

CompiledKernel::~CompiledKernel() {
  std::error_code ec;
  fs::remove_all(dir_, ec);
}

ExecutionEnv CompiledKernel::run(const ExecutionEnv& env) const {
  std::ostringstream in;
  char buf[64];
  auto put = [&](double v, DType t) {
    if (t == DType::i32)
      in << static_cast<long long>(v) << "\n";
    else {
      std::snprintf(buf, sizeof buf, "%a", v);
      in << buf << "\n";
    }
  };
  for (const auto& a : kernel_.args) {
    if (a.kind == ArgKind::scalar && !a.is_output && env.params.count(a.name)) {
      put(static_cast<double>(env.params.at(a.name)), DType::i32);
      continue;
    }
    auto it = env.arrays.find(a.name);
    std::vector<double> data;
    if (it != env.arrays.end())
      data = it->second.data;
    else if (a.is_output)
      data.assign(a.kind == ArgKind::array ? storage_size(a, env.params) : 1, 0.0);
    else
      throw Error("missing input '" + a.name + "'");
    if (passed_by_pointer(a)) {
      in << data.size() << "\n";
      for (double v : data) put(v, a.dtype);
    } else {
      put(data.at(0), a.dtype);
    }
  }
  spill(dir_ / "in.txt", in.str());
  std::string cmd = "'" + (dir_ / "kernel").string() + "' < '" + (dir_ / "in.txt").string() + "' > '" +
                    (dir_ / "out.txt").string() + "'";
  if (std::system(cmd.c_str()) != 0) throw Error("compiled kernel " + kernel_.name + " failed");
  std::istringstream out(slurp(dir_ / "out.txt").value_or(""));
  ExecutionEnv result = env;
  for (const auto& a : kernel_.args) {
    if (!a.is_output) continue;
    Buffer& b = result.arrays[a.name];
    b.dtype = a.dtype;
    if (a.kind == ArgKind::array) b.shape = concrete_shape(a, env.params);
    std::size_t n = a.kind == ArgKind::array ? storage_size(a, env.params) : 1;
    b.data.assign(n, 0.0);
    for (auto& v : b.data) {
      std::string w;
      if (!(out >> w)) throw Error("short output from compiled kernel " + kernel_.name);
      v = std::strtod(w.c_str(), nullptr);
    }
  }
  return result;
}

}  // namespace loopforge
