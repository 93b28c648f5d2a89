// SPDX-License-Identifier: Apache-2.0

#include "loopforge/interp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "loopforge/error.hpp"

namespace loopforge {

namespace {

double round_to(double v, DType t) {
  switch (t) {
    case DType::f32: return static_cast<float>(v);
    case DType::f64: return v;
    case DType::i32: {
      double x = std::trunc(v);
      if (!(x >= std::numeric_limits<std::int32_t>::min() && x <= std::numeric_limits<std::int32_t>::max()))
        throw InterpError("value " + format_double(v) + " does not fit in i32");
      return x;
    }
  }
  return v;
}

double wrap32(std::int64_t v) { return static_cast<double>(static_cast<std::int32_t>(static_cast<std::uint32_t>(v))); }

double arith(BinOp op, double a, double b, DType t) {
  switch (t) {
    case DType::f32: {
      float x = static_cast<float>(a), y = static_cast<float>(b);
      switch (op) {
        case BinOp::add: return x + y;
        case BinOp::sub: return x - y;
        case BinOp::mul: return x * y;
        case BinOp::div: return x / y;
        case BinOp::pow: return ::powf(x, y);
      }
      break;
    }
    case DType::f64:
      switch (op) {
        case BinOp::add: return a + b;
        case BinOp::sub: return a - b;
        case BinOp::mul: return a * b;
        case BinOp::div: return a / b;
        case BinOp::pow: return ::pow(a, b);
      }
      break;
    case DType::i32: {
      auto x = static_cast<std::int64_t>(a), y = static_cast<std::int64_t>(b);
      switch (op) {
        case BinOp::add: return wrap32(x + y);
        case BinOp::sub: return wrap32(x - y);
        case BinOp::mul: return wrap32(x * y);
        default: throw InternalError("integer division or power reached the interpreter");
      }
    }
  }
  return 0;
}

struct UnaryFn {
  float (*f)(float);
  double (*d)(double);
};
struct BinaryFn {
  float (*f)(float, float);
  double (*d)(double, double);
};

const std::map<std::string, UnaryFn, std::less<>>& unary_functions() {
  static const std::map<std::string, UnaryFn, std::less<>> m{
      {"sqrt", {::sqrtf, ::sqrt}},   {"sin", {::sinf, ::sin}},     {"cos", {::cosf, ::cos}},
      {"tan", {::tanf, ::tan}},      {"asin", {::asinf, ::asin}},  {"acos", {::acosf, ::acos}},
      {"atan", {::atanf, ::atan}},   {"exp", {::expf, ::exp}},     {"log", {::logf, ::log}},
      {"log10", {::log10f, ::log10}}, {"fabs", {::fabsf, ::fabs}}, {"floor", {::floorf, ::floor}},
      {"ceil", {::ceilf, ::ceil}},   {"sinh", {::sinhf, ::sinh}},  {"cosh", {::coshf, ::cosh}},
      {"tanh", {::tanhf, ::tanh}},
  };
  return m;
}

const std::map<std::string, BinaryFn, std::less<>>& binary_functions() {
  static const std::map<std::string, BinaryFn, std::less<>> m{
      {"pow", {::powf, ::pow}}, {"atan2", {::atan2f, ::atan2}}, {"fmod", {::fmodf, ::fmod}},
      {"fmin", {::fminf, ::fmin}}, {"fmax", {::fmaxf, ::fmax}},
  };
  return m;
}

double min_max(bool is_min, double a, double b, DType t) {
  if (t == DType::i32) return is_min ? std::min(a, b) : std::max(a, b);
  const auto& fn = binary_functions().at(is_min ? "fmin" : "fmax");
  if (t == DType::f32) return fn.f(static_cast<float>(a), static_cast<float>(b));
  return fn.d(a, b);
}

struct TempStore {
  const TemporaryDecl* decl = nullptr;
  std::vector<std::int64_t> shape;
  std::vector<double> data;
  std::vector<char> written;
  std::map<std::vector<std::int64_t>, double> overflow;
};

struct Interp {
  const Kernel& k;
  ExecutionEnv& env;
  bool check_temporaries;
  poly::Valuation vals;
  std::vector<std::string> open;
  std::map<std::string, TempStore> temps;
  std::map<std::string, TypedExpr> typed;
  std::map<const void*, poly::Bounds> bound_cache;
  std::map<std::string, std::vector<std::int64_t>> strides;
  const Instruction* current = nullptr;

  std::int64_t eval_bound(const std::vector<poly::QuasiAffineBound>& bs, bool lower) const {
    std::int64_t r = 0;
    for (std::size_t i = 0; i < bs.size(); ++i) {
      std::int64_t v = bs[i].evaluate(vals);
      r = i == 0 ? v : (lower ? std::max(r, v) : std::min(r, v));
    }
    return r;
  }

  const poly::Bounds& bounds(const void* key, const std::string& iname) {
    auto it = bound_cache.find(key);
    if (it == bound_cache.end()) it = bound_cache.emplace(key, loop_bounds(k, open, iname)).first;
    return it->second;
  }

  std::string where() const { return current ? " in instruction '" + current->id + "'" : ""; }

  static std::string index_text(const std::vector<std::int64_t>& idx) {
    std::string s;
    for (auto i : idx) s += (s.empty() ? "" : ", ") + std::to_string(i);
    return "[" + s + "]";
  }

  std::int64_t int_value(const ExprPtr& e) {
    if (auto a = to_affine(e)) return a->evaluate(vals);
    TypedExpr t = type_expr(k, e, DType::i32, DType::f64);
    if (t.type != DType::i32) throw InterpError("non-integer subscript '" + render(e) + "'" + where());
    return static_cast<std::int64_t>(eval(t));
  }

  std::vector<std::int64_t> indices(const std::vector<ExprPtr>& idx) {
    std::vector<std::int64_t> out;
    for (const auto& i : idx) out.push_back(int_value(i));
    return out;
  }

  // Storage ------------------------------------------------------------------

  double* arg_slot(const std::string& name, const std::vector<std::int64_t>& idx) {
    Buffer& b = env.arrays.at(name);
    if (idx.size() != b.shape.size())
      throw InterpError("rank mismatch accessing '" + name + "'" + where());
    const auto& st = strides.at(name);
    std::int64_t off = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) {
      if (idx[d] < 0 || idx[d] >= b.shape[d])
        throw InterpError("out-of-bounds access " + name + index_text(idx) + where());
      off += idx[d] * st[d];
    }
    return &b.data.at(static_cast<std::size_t>(off));
  }

  std::optional<std::size_t> temp_offset(TempStore& t, const std::vector<std::int64_t>& idx) {
    std::int64_t off = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) {
      if (idx[d] < 0 || idx[d] >= t.shape[d]) {
        if (check_temporaries)
          throw InterpError("temporary access " + t.decl->name + index_text(idx) + " outside its extent" + where());
        return std::nullopt;
      }
      off = off * t.shape[d] + idx[d];
    }
    return static_cast<std::size_t>(off);
  }

  double load(const std::string& name, const std::vector<std::int64_t>& idx) {
    auto t = temps.find(name);
    if (t != temps.end()) {
      auto off = temp_offset(t->second, idx);
      if (off) {
        if (!t->second.written[*off])
          throw InterpError("read of never-written temporary " + name + index_text(idx) + where());
        return t->second.data[*off];
      }
      auto o = t->second.overflow.find(idx);
      if (o == t->second.overflow.end())
        throw InterpError("read of never-written temporary " + name + index_text(idx) + where());
      return o->second;
    }
    auto v = vals.find(name);
    if (v != vals.end() && idx.empty()) return static_cast<double>(v->second);
    if (!env.arrays.count(name)) throw InterpError("no value for '" + name + "'" + where());
    return *arg_slot(name, idx);
  }

  void store(const std::string& name, const std::vector<std::int64_t>& idx, double value) {
    auto t = temps.find(name);
    if (t != temps.end()) {
      auto off = temp_offset(t->second, idx);
      if (off) {
        t->second.data[*off] = value;
        t->second.written[*off] = 1;
      } else {
        t->second.overflow[idx] = value;
      }
    } else {
      *arg_slot(name, idx) = value;
    }
    if (env.record_writes) env.writes.push_back({current->id, name, idx});
  }

  // Expressions --------------------------------------------------------------

  double converted(const TypedExpr& child, DType to) { return round_to(eval(child), to); }

  double call(const TypedExpr& t) {
    const Expr& e = *t.expr;
    std::vector<double> a;
    for (const auto& c : t.args) a.push_back(converted(c, t.type));
    if (e.name == "min" || e.name == "max") {
      if (a.empty()) throw InterpError("min/max without arguments" + where());
      double r = a[0];
      for (std::size_t i = 1; i < a.size(); ++i) r = min_max(e.name == "min", r, a[i], t.type);
      return r;
    }
    if (e.name == "abs") {
      if (a.size() != 1) throw InterpError("abs takes one argument" + where());
      if (t.type == DType::i32) return wrap32(std::llabs(static_cast<std::int64_t>(a[0])));
      return t.type == DType::f32 ? static_cast<double>(::fabsf(static_cast<float>(a[0]))) : ::fabs(a[0]);
    }
    if (auto u = unary_functions().find(e.name); u != unary_functions().end()) {
      if (a.size() != 1) throw InterpError(e.name + " takes one argument" + where());
      return t.type == DType::f32 ? static_cast<double>(u->second.f(static_cast<float>(a[0]))) : u->second.d(a[0]);
    }
    if (auto b = binary_functions().find(e.name); b != binary_functions().end()) {
      if (a.size() != 2) throw InterpError(e.name + " takes two arguments" + where());
      return t.type == DType::f32 ? static_cast<double>(b->second.f(static_cast<float>(a[0]), static_cast<float>(a[1])))
                                  : b->second.d(a[0], a[1]);
    }
    throw InterpError("unknown function '" + e.name + "'" + where());
  }

  double reduction(const TypedExpr& t) {
    const Expr& e = *t.expr;
    const auto& b = bounds(&t, e.name);
    std::int64_t lo = eval_bound(b.lower, true), hi = eval_bound(b.upper, false);
    RedOp op = e.redop();
    double acc = op == RedOp::product ? 1 : 0;
    bool first = true;
    open.push_back(e.name);
    for (std::int64_t j = lo; j <= hi; ++j) {
      vals[e.name] = j;
      double v = converted(t.args[0], t.type);
      switch (op) {
        case RedOp::sum: acc = arith(BinOp::add, acc, v, t.type); break;
        case RedOp::product: acc = arith(BinOp::mul, acc, v, t.type); break;
        case RedOp::min:
        case RedOp::max: acc = first ? v : min_max(op == RedOp::min, acc, v, t.type); break;
      }
      first = false;
    }
    open.pop_back();
    vals.erase(e.name);
    if (first && (op == RedOp::min || op == RedOp::max))
      throw InterpError(redop_name(op) + " over an empty range of '" + e.name + "'" + where());
    return acc;
  }

  double eval(const TypedExpr& t) {
    const Expr& e = *t.expr;
    switch (e.kind) {
      case ExprKind::int_lit: return round_to(static_cast<double>(e.ival), t.type);
      case ExprKind::float_lit: return round_to(e.fval, t.type);
      case ExprKind::var: return load(e.name, {});
      case ExprKind::subscript: return load(e.name, indices(e.args));
      case ExprKind::call: return call(t);
      case ExprKind::rule: throw InternalError("interpreting unexpanded rule '" + e.name + "'");
      case ExprKind::binop: {
        if (t.int_power >= 0) {
          if (t.int_power == 0) return round_to(1, t.type);
          double x = converted(t.args[0], t.type);
          double r = x;
          for (int i = 1; i < t.int_power; ++i) r = arith(BinOp::mul, r, x, t.type);
          return r;
        }
        double a = converted(t.args[0], t.type);
        double b = converted(t.args[1], t.type);
        return arith(e.binop(), a, b, t.type);
      }
      case ExprKind::unop: {
        if (e.unop() == UnOp::lnot) return eval(t.args[0]) == 0 ? 1 : 0;
        double x = converted(t.args[0], t.type);
        return t.type == DType::i32 ? wrap32(-static_cast<std::int64_t>(x)) : -x;
      }
      case ExprKind::compare: {
        double a = converted(t.args[0], t.operand);
        double b = converted(t.args[1], t.operand);
        switch (e.cmpop()) {
          case CmpOp::lt: return a < b;
          case CmpOp::le: return a <= b;
          case CmpOp::gt: return a > b;
          case CmpOp::ge: return a >= b;
          case CmpOp::eq: return a == b;
          case CmpOp::ne: return a != b;
        }
        break;
      }
      case ExprKind::reduction: return reduction(t);
    }
    throw InternalError("unhandled expression kind");
  }

  // Schedule -----------------------------------------------------------------

  bool predicates_hold(const std::set<Predicate>& ps) {
    for (const auto& p : ps) {
      bool v = load(p.flag, {}) != 0;
      if (v == p.negated) return false;
    }
    return true;
  }

  void statement(const ScheduleNode& n) {
    const Instruction& insn = *k.find_instruction(n.insn_id);
    current = &insn;
    if (predicates_hold(n.predicates)) {
      auto it = typed.find(insn.id);
      if (it == typed.end()) it = typed.emplace(insn.id, type_rhs(k, insn)).first;
      DType target = *k.dtype_of(insn.assignee());
      double v = converted(it->second, target);
      std::vector<std::int64_t> idx;
      if (insn.lhs->kind == ExprKind::subscript) idx = indices(insn.lhs->args);
      store(insn.assignee(), idx, v);
    }
    current = nullptr;
  }

  void walk(const std::vector<ScheduleNode>& nodes) {
    for (const auto& n : nodes) {
      switch (n.kind) {
        case ScheduleNode::Kind::statement: statement(n); break;
        case ScheduleNode::Kind::conditional:
          if (predicates_hold(n.predicates)) walk(n.children);
          break;
        case ScheduleNode::Kind::loop: {
          const auto& b = bounds(&n, n.iname);
          std::int64_t lo = eval_bound(b.lower, true), hi = eval_bound(b.upper, false);
          open.push_back(n.iname);
          for (std::int64_t v = lo; v <= hi; ++v) {
            vals[n.iname] = v;
            walk(n.children);
          }
          vals.erase(n.iname);
          open.pop_back();
          break;
        }
      }
    }
  }
};

}  // namespace

std::vector<std::int64_t> concrete_shape(const ArgDecl& a, const std::map<std::string, std::int64_t>& params) {
  poly::Valuation v(params.begin(), params.end());
  std::vector<std::int64_t> out;
  for (const auto& d : a.shape) out.push_back(d.evaluate(v));
  return out;
}

std::size_t storage_size(const ArgDecl& a, const std::map<std::string, std::int64_t>& params) {
  if (a.kind == ArgKind::scalar) return 1;
  poly::Valuation v(params.begin(), params.end());
  auto shape = concrete_shape(a, params);
  std::int64_t last = 0;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (shape[d] <= 0) return 0;
    last += (shape[d] - 1) * a.strides[d].evaluate(v);
  }
  return static_cast<std::size_t>(last + 1);
}

ExecutionEnv interpret_schedule(const Schedule& s, ExecutionEnv env, bool check_temporaries) {
  const Kernel& k = s.kernel;
  Interp in{k, env, check_temporaries, {}, {}, {}, {}, {}, {}, nullptr};
  try {
    for (const auto& p : k.params())
      if (!env.params.count(p)) throw InterpError("no value for parameter '" + p + "'");
    poly::Valuation pv(env.params.begin(), env.params.end());
    in.vals = k.assumptions.extend_valuation(pv);
    for (const auto& a : k.args) {
      if (a.kind == ArgKind::scalar && !a.is_output && env.params.count(a.name)) continue;
      auto shape = a.kind == ArgKind::scalar ? std::vector<std::int64_t>{} : concrete_shape(a, env.params);
      std::size_t size = storage_size(a, env.params);
      auto it = env.arrays.find(a.name);
      if (it == env.arrays.end()) {
        if (!a.is_output) throw InterpError("missing input '" + a.name + "'");
        it = env.arrays.emplace(a.name, Buffer{a.dtype, shape, std::vector<double>(size, 0.0)}).first;
      }
      if (it->second.shape != shape || it->second.data.size() != size)
        throw InterpError("buffer for '" + a.name + "' does not match its declared shape");
      it->second.dtype = a.dtype;
      std::vector<std::int64_t> st;
      for (const auto& x : a.strides) st.push_back(x.evaluate(pv));
      in.strides[a.name] = st;
    }
    for (const auto& t : k.temporaries) {
      TempStore ts;
      ts.decl = &t;
      std::int64_t size = 1;
      for (const auto& d : t.shape) {
        ts.shape.push_back(d.evaluate(in.vals));
        size *= std::max<std::int64_t>(ts.shape.back(), 0);
      }
      ts.data.assign(static_cast<std::size_t>(size), 0.0);
      ts.written.assign(static_cast<std::size_t>(size), 0);
      in.temps.emplace(t.name, std::move(ts));
    }
    in.walk(s.body);
  } catch (const InterpError&) {
    throw;
  } catch (const InternalError&) {
    throw;
  } catch (const Error& e) {
    throw InterpError(e.what());
  }
  return env;
}

ExecutionEnv interpret(const Kernel& k, ExecutionEnv env) {
  return interpret_schedule(schedule(k), std::move(env), false);
}

ExecutionEnv interpret_bounds_checked(const Kernel& k, ExecutionEnv env) {
  return interpret_schedule(schedule(k), std::move(env), true);
}

ExecutionEnv random_inputs(const Kernel& k, const std::map<std::string, std::int64_t>& params,
                           std::uint64_t seed) {
  ExecutionEnv env;
  env.params = params;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> real(-4.0, 8.0);
  std::uniform_int_distribution<int> integer(-5, 10);
  for (const auto& a : k.args) {
    if (a.kind == ArgKind::scalar && params.count(a.name)) continue;
    Buffer b;
    b.dtype = a.dtype;
    if (a.kind == ArgKind::array) b.shape = concrete_shape(a, params);
    b.data.assign(storage_size(a, params), 0.0);
    if (!a.is_output)
      for (auto& x : b.data) x = a.dtype == DType::i32 ? integer(rng) : round_to(real(rng), a.dtype);
    env.arrays[a.name] = std::move(b);
  }
  return env;
}

static_assert(std::endian::native == std::endian::little, "array files assume a little-endian host");

void write_array(std::ostream& out, const Buffer& b) {
  auto put = [&](const void* p, std::size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
  out.write("LFA1", 4);
  std::uint32_t code = b.dtype == DType::i32 ? 0 : b.dtype == DType::f32 ? 1 : 2;
  std::uint32_t rank = static_cast<std::uint32_t>(b.shape.size());
  put(&code, 4);
  put(&rank, 4);
  for (auto d : b.shape) put(&d, 8);
  for (double v : b.data) {
    if (b.dtype == DType::i32) {
      auto x = static_cast<std::int32_t>(v);
      put(&x, 4);
    } else if (b.dtype == DType::f32) {
      auto x = static_cast<float>(v);
      put(&x, 4);
    } else {
      put(&v, 8);
    }
  }
}

Buffer read_array(std::istream& in) {
  auto get = [&](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw Error("truncated array file");
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "LFA1", 4) != 0) throw Error("not an array file (bad magic)");
  std::uint32_t code = 0, rank = 0;
  get(&code, 4);
  get(&rank, 4);
  if (code > 2) throw Error("array file has unknown dtype code " + std::to_string(code));
  if (rank > 16) throw Error("array file rank " + std::to_string(rank) + " is too large");
  Buffer b;
  b.dtype = code == 0 ? DType::i32 : code == 1 ? DType::f32 : DType::f64;
  std::size_t count = 1;
  for (std::uint32_t d = 0; d < rank; ++d) {
    std::int64_t e = 0;
    get(&e, 8);
    if (e < 0) throw Error("array file has a negative extent");
    b.shape.push_back(e);
    count *= static_cast<std::size_t>(e);
  }
  b.data.resize(count);
  for (auto& v : b.data) {
    if (b.dtype == DType::i32) {
      std::int32_t x;
      get(&x, 4);
      v = x;
    } else if (b.dtype == DType::f32) {
      float x;
      get(&x, 4);
      v = x;
    } else {
      get(&v, 8);
    }
  }
  return b;
}

}  // namespace loopforge
