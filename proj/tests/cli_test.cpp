// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loopforge/cli.hpp"
#include "loopforge/corpus.hpp"
#include "loopforge/interp.hpp"

using namespace loopforge;
namespace fs = std::filesystem;

namespace {

const fs::path kCorpus = LOOPFORGE_CORPUS_DIR;

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "loopforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "loopforge-cli-XXXXXX").string();
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::string input_of(const std::string& id) {
  fs::path dir = kCorpus / id;
  return (fs::exists(dir / "input.f") ? dir / "input.f" : dir / "input.knl").string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kDiff = R"(      subroutine diff(n, u, result)
      implicit none
      integer n, i
      real u(n+1), result(n)
      do i = 1, n
        result(i) = u(i+1) - u(i)
      end do
      end
)";

}  // namespace

TEST(Cli, TranslateFillToOpenCL) {
  Result r = cli({"translate", input_of("fill"), "--target", "opencl"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("__kernel void"), std::string::npos);
  EXPECT_NE(r.out.find("get_group_id(0)"), std::string::npos) << r.out;
}

TEST(Cli, DumpRawIrListsConditionPredicate) {
  Result r = cli({"dump-ir", input_of("conditional"), "--stage", "raw"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("loopy_cond0 = a >= 3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("if=loopy_cond0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("if=!loopy_cond0"), std::string::npos) << r.out;
}

TEST(Cli, TranslateMatchesCorpusGoldenFiles) {
  for (const auto& f : load_corpus(kCorpus)) {
    SCOPED_TRACE(f.id);
    ASSERT_TRUE(f.expected_c && f.expected_ir);
    std::string script = (f.dir / "transforms.txt").string();
    Result c = cli({"translate", input_of(f.id), "--transforms", script});
    EXPECT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(c.out, *f.expected_c);
    EXPECT_EQ(cli({"translate", input_of(f.id), "--transforms", script}).out, c.out);
    Result ir = cli({"dump-ir", input_of(f.id), "--transforms", script});
    EXPECT_EQ(ir.out, *f.expected_ir);
  }
}

TEST(Cli, DumpIrStages) {
  std::string in = input_of("bsquare");
  std::string script = (kCorpus / "bsquare" / "transforms.txt").string();
  Result raw = cli({"dump-ir", in, "--transforms", script, "--stage", "raw"});
  Result transformed = cli({"dump-ir", in, "--transforms", script});
  Result expanded = cli({"dump-ir", in, "--transforms", script, "--stage", "expanded"});
  EXPECT_EQ(raw.out.find("bsquare(alpha) :="), std::string::npos);
  EXPECT_NE(transformed.out.find("bsquare(alpha) :="), std::string::npos) << transformed.out;
  EXPECT_EQ(expanded.out.find("bsquare("), std::string::npos) << expanded.out;
  EXPECT_EQ(cli({"dump-ir", in, "--stage", "parsed"}).code, 1);
}

TEST(Cli, OutputFile) {
  TempDir tmp;
  Result r = cli({"translate", input_of("fill"), "-o", (tmp / "fill.c").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(slurp(tmp / "fill.c"), *load_fixture(kCorpus / "fill").expected_c);
}

TEST(Cli, RunWritesOutputArrays) {
  TempDir tmp;
  fs::path src = tmp.write("diff.f", kDiff);
  Buffer u{DType::f32, {33}, {}};
  for (int i = 0; i < 33; ++i) u.data.push_back(static_cast<float>(0.25 * i * i - 3));
  {
    std::ofstream f(tmp / "u.bin", std::ios::binary);
    write_array(f, u);
  }
  Result r = cli({"run", src.string(), "--param", "n=32", "--in", "u=" + (tmp / "u.bin").string(), "--out",
                  "result=" + (tmp / "r.bin").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(tmp / "r.bin", std::ios::binary);
  Buffer result = read_array(f);
  EXPECT_EQ(result.dtype, DType::f32);
  ASSERT_EQ(result.shape, std::vector<std::int64_t>{32});
  for (int i = 0; i < 32; ++i) EXPECT_EQ(result.data[i], static_cast<double>(static_cast<float>(u.data[i + 1]) - static_cast<float>(u.data[i]))) << i;
}

TEST(Cli, RunReportsBadBindings) {
  TempDir tmp;
  fs::path src = tmp.write("diff.f", kDiff);
  Buffer u{DType::f32, {10}, std::vector<double>(10, 1.0)};
  {
    std::ofstream f(tmp / "u.bin", std::ios::binary);
    write_array(f, u);
  }
  std::string in = "u=" + (tmp / "u.bin").string();
  Result shape = cli({"run", src.string(), "--param", "n=32", "--in", in});
  EXPECT_EQ(shape.code, 1);
  EXPECT_NE(shape.err.find("shape of 'u' is (10) but the kernel expects (33)"), std::string::npos) << shape.err;
  Result missing = cli({"run", src.string(), "--param", "n=32"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("missing input for 'u'"), std::string::npos) << missing.err;
  Result not_output = cli({"run", src.string(), "--param", "n=9", "--in", in, "--out", "u=x.bin"});
  EXPECT_EQ(not_output.code, 1);
  EXPECT_NE(not_output.err.find("'u' is not an output"), std::string::npos) << not_output.err;
  Result bad_param = cli({"run", src.string(), "--param", "n=abc", "--in", in});
  EXPECT_EQ(bad_param.code, 1);
  EXPECT_NE(bad_param.err.find("not an integer"), std::string::npos) << bad_param.err;
  EXPECT_EQ(cli({"run", src.string(), "--in", in}).code, 1);  // run requires --param
}

TEST(Cli, CheckPassesOnEveryFixture) {
  for (const auto& f : load_corpus(kCorpus)) {
    Result r = cli({"check", input_of(f.id), "--transforms", (f.dir / "transforms.txt").string()});
    EXPECT_EQ(r.code, 0) << f.id << ": " << r.err;
    EXPECT_NE(r.out.find("validate: ok"), std::string::npos) << f.id;
    EXPECT_NE(r.out.find("max relative difference"), std::string::npos) << f.id;
  }
}

TEST(Cli, DiagnosticsCarryFileLineAndColumn) {
  TempDir tmp;
  fs::path src = tmp.write("exit.f",
                           "      subroutine f(n, a)\n      integer n, i\n      real a(n)\n      do i = 1, n\n"
                           "        if (i > 3) exit\n        a(i) = 1\n      end do\n      end\n");
  Result r = cli({"translate", src.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(r.err.rfind(src.string() + ":5:", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("EXIT"), std::string::npos) << r.err;

  fs::path knl = tmp.write("k.knl", "kernel k\ndomain {[i]: 0<=i<n}\n---\nout[i] = 2*a[i] +\n");
  Result body = cli({"translate", knl.string()});
  EXPECT_EQ(body.code, 1);
  EXPECT_EQ(body.err.rfind(knl.string() + ":4:", 0), 0u) << body.err;
}

TEST(Cli, ExternalScriptErrorsPointIntoTheScript) {
  TempDir tmp;
  fs::path knl = tmp.write("k.knl", "kernel k\ndomain {[i]: 0<=i<n}\n---\nout[i] = 2*a[i]\n");
  fs::path script = tmp.write("t.txt", "# split twice\nk = split_iname(k, \"i\", 4)\nk = split_iname(k, \"zz\", 4)\n");
  Result r = cli({"translate", knl.string(), "--transforms", script.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err, script.string() + ":3:1: error: split_iname: unknown iname 'zz'\n");
  fs::path verb = tmp.write("v.txt", "\n\nk = frobnicate(k)\n");
  Result v = cli({"translate", knl.string(), "--transforms", verb.string()});
  EXPECT_EQ(v.code, 1);
  EXPECT_EQ(v.err.rfind(verb.string() + ":3:", 0), 0u) << v.err;
}

TEST(Cli, EmbeddedAndExternalScriptsCompose) {
  TempDir tmp;
  fs::path script = tmp.write("more.txt", "fill = tag_inames(fill, \"i_inner\", \"unroll\")\n");
  Result r = cli({"dump-ir", input_of("fill"), "--transforms", script.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("i_inner: unroll"), std::string::npos) << r.out;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"bogus"}).code, 1);
  EXPECT_EQ(cli({"translate", input_of("fill"), "--target", "cuda"}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
  Result ext = cli({"translate", "kernel.txt"});
  EXPECT_EQ(ext.code, 1);
  EXPECT_NE(ext.err.find("unknown input kind"), std::string::npos);
  Result none = cli({"translate", "does-not-exist.f"});
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.err.find("cannot open file"), std::string::npos);
}

TEST(Cli, ColorIsOptIn) {
  setenv("LOOPFORGE_COLOR", "1", 1);
  Result colored = cli({"translate", "missing.knl"});
  setenv("LOOPFORGE_COLOR", "0", 1);
  Result plain = cli({"translate", "missing.knl"});
  unsetenv("LOOPFORGE_COLOR");
  EXPECT_NE(colored.err.find("\033["), std::string::npos);
  EXPECT_EQ(plain.err, "missing.knl: error: cannot open file\n");
}
