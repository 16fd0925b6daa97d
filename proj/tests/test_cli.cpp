// Exercises the installed binary through a shell, covering exit codes,
// determinism and the end-to-end train/eval/decode flow.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "ctct_cli_tests";

int run(const std::string& args, const std::string& out_file = "") {
  std::string cmd = std::string(CTCT_CLI_BIN) + " " + args;
  cmd += " > " + (out_file.empty() ? std::string("/dev/null") : out_file) + " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Concatenation of every regular file in a directory tree, sorted by path.
std::string tree_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const fs::path& f : files) {
    all += f.lexically_relative(dir).string() + "\n";
    all += slurp(f);
  }
  return all;
}

struct Fixture {
  fs::path dir;
  explicit Fixture(const char* name) : dir(kRoot / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file(dir / "vocab.txt", "ab\nba\naab\nbb\n");
    write_file(dir / "model.cfg",
               "input_height = 16\n"
               "cnn_stack = conv:6:3:1,bn,pool:2:2,conv:8:3:1,pool:2:2,pool:2:1,conv:8:2:0\n"
               "rnn_layers = 1\n"
               "rnn_size = 8\n");
  }
  std::string p(const std::string& rel) const { return (dir / rel).string(); }
};

}  // namespace

TEST_CASE("render twice with one seed gives identical trees") {
  Fixture fx("render_det");
  std::string common = "render --vocab " + fx.p("vocab.txt") + " --atlas builtin:ab --count 12 --seed 7 --out ";
  REQUIRE(run(common + fx.p("a")) == 0);
  REQUIRE(run(common + fx.p("b")) == 0);
  CHECK(tree_bytes(fx.dir / "a") == tree_bytes(fx.dir / "b"));
  CHECK(fs::exists(fx.dir / "a" / "manifest.tsv"));
}

TEST_CASE("render usage and data errors") {
  Fixture fx("render_err");
  // count 0 fails flag validation
  CHECK(run("render --vocab " + fx.p("vocab.txt") + " --atlas builtin:ab --count 0 --seed 1 --out " + fx.p("x")) == 1);
  // atlas misses 'b'; the message must name the codepoint
  std::string out = fx.p("missing_glyph.txt");
  CHECK(run("render --vocab " + fx.p("vocab.txt") + " --atlas builtin:a --count 4 --seed 1 --out " + fx.p("x"), out) == 2);
  CHECK(slurp(out).find("U+0062") != std::string::npos);
  // unknown subcommand and missing required flags are usage errors
  CHECK(run("frobnicate") == 1);
  CHECK(run("render --count 4") == 1);
}

TEST_CASE("overfit smoke test and decode oracle") {
  Fixture fx("overfit");
  write_file(fx.dir / "one.txt", "ab\n");
  REQUIRE(run("render --vocab " + fx.p("one.txt") + " --atlas builtin:ab --count 8 --seed 3 --out " + fx.p("data")) == 0);
  REQUIRE(run("train --config " + fx.p("model.cfg") + " --manifest " + fx.p("data/manifest.tsv") +
              " --out " + fx.p("run") + " --seed 5 --epochs 200 --batch 8 --ckpt-every 200") == 0);

  // per-batch loss log: first vs last line, single batch per epoch
  std::istringstream log(slurp(fx.dir / "run" / "loss.log"));
  std::vector<double> losses;
  long epoch, batch;
  double loss;
  while (log >> epoch >> batch >> loss) losses.push_back(loss);
  REQUIRE(losses.size() == 200);
  CHECK(losses.back() < 0.1 * losses.front());

  std::string out = fx.p("decoded.txt");
  REQUIRE(run("decode --ckpt " + fx.p("run/ckpt_last.bin") + " --image " + fx.p("data/img_000002.pgm"), out) == 0);
  CHECK(slurp(out) == "ab\n");
  // beam flag variant decodes too
  REQUIRE(run("decode --beam 8 --ckpt " + fx.p("run/ckpt_last.bin") + " --image " + fx.p("data/img_000002.pgm"), out) == 0);
  CHECK(slurp(out) == "ab\n");
  // unreadable image
  CHECK(run("decode --ckpt " + fx.p("run/ckpt_last.bin") + " --image " + fx.p("nope.pgm")) == 2);
}

TEST_CASE("resume reproduces an uninterrupted run bit-exactly") {
  Fixture fx("resume");
  REQUIRE(run("render --vocab " + fx.p("vocab.txt") + " --atlas builtin:ab --count 16 --seed 11 --out " + fx.p("data")) == 0);
  std::string base = "train --config " + fx.p("model.cfg") + " --manifest " + fx.p("data/manifest.tsv") + " --seed 21 --batch 8 ";
  REQUIRE(run(base + "--out " + fx.p("full") + " --epochs 4") == 0);
  REQUIRE(run(base + "--out " + fx.p("half") + " --epochs 2") == 0);
  REQUIRE(run(base + "--out " + fx.p("half") + " --epochs 4 --resume " + fx.p("half/ckpt_2.bin")) == 0);

  CHECK(slurp(fx.dir / "full" / "ckpt_4.bin") == slurp(fx.dir / "half" / "ckpt_4.bin"));
  // appended log equals the uninterrupted one line for line
  CHECK(slurp(fx.dir / "full" / "loss.log") == slurp(fx.dir / "half" / "loss.log"));
}

TEST_CASE("eval prints machine-readable metrics and rejects bad checkpoints") {
  Fixture fx("evalfmt");
  write_file(fx.dir / "one.txt", "ab\n");
  REQUIRE(run("render --vocab " + fx.p("one.txt") + " --atlas builtin:ab --count 8 --seed 3 --out " + fx.p("data")) == 0);
  REQUIRE(run("train --config " + fx.p("model.cfg") + " --manifest " + fx.p("data/manifest.tsv") +
              " --out " + fx.p("run") + " --seed 5 --epochs 200 --batch 8 --ckpt-every 200") == 0);
  std::string out = fx.p("eval.txt");
  REQUIRE(run("eval --ckpt " + fx.p("run/ckpt_last.bin") + " --manifest " + fx.p("data/manifest.tsv"), out) == 0);
  CHECK(slurp(out).find("wrr\t1.000000") != std::string::npos);
  REQUIRE(run("eval --decoder beam --beam 4 --ckpt " + fx.p("run/ckpt_last.bin") + " --manifest " + fx.p("data/manifest.tsv"), out) == 0);
  CHECK(slurp(out).find("wrr\t1.000000") != std::string::npos);

  write_file(fx.dir / "bad.bin", "NOTACKPT1\nxxxxxxxx");
  out = fx.p("bad.txt");
  CHECK(run("eval --ckpt " + fx.p("bad.bin") + " --manifest " + fx.p("data/manifest.tsv"), out) == 2);
  CHECK(slurp(out).find("BadCheckpoint") != std::string::npos);
}

TEST_CASE("gradcheck subcommand passes with its negative control") {
  Fixture fx("gradcheck");
  std::string out = fx.p("gc.txt");
  REQUIRE(run("gradcheck --seed 1", out) == 0);
  std::string text = slurp(out);
  CHECK(text.find("status\tpass") != std::string::npos);
  CHECK(text.find("negative_control") != std::string::npos);
}

TEST_CASE("dump-activations writes one PGM per channel") {
  Fixture fx("dump");
  write_file(fx.dir / "one.txt", "ab\n");
  REQUIRE(run("render --vocab " + fx.p("one.txt") + " --atlas builtin:ab --count 4 --seed 3 --out " + fx.p("data")) == 0);
  REQUIRE(run("train --config " + fx.p("model.cfg") + " --manifest " + fx.p("data/manifest.tsv") +
              " --out " + fx.p("run") + " --seed 5 --epochs 2 --batch 4") == 0);
  REQUIRE(run("dump-activations --ckpt " + fx.p("run/ckpt_last.bin") + " --image " + fx.p("data/img_000000.pgm") +
              " --layer conv1 --out " + fx.p("acts")) == 0);
  int count = 0;
  for (const auto& e : fs::directory_iterator(fx.dir / "acts"))
    if (e.path().extension() == ".pgm") ++count;
  CHECK(count == 6);  // conv1 channels in the test config

  std::string out = fx.p("unknown.txt");
  CHECK(run("dump-activations --ckpt " + fx.p("run/ckpt_last.bin") + " --image " + fx.p("data/img_000000.pgm") +
            " --layer conv99 --out " + fx.p("acts"), out) == 1);
  CHECK(slurp(out).find("blstm1") != std::string::npos);  // lists valid names
}

TEST_CASE("CTCT_NUMERIC is validated") {
  Fixture fx("numeric");
  std::string cmd = std::string("CTCT_NUMERIC=f16 ") + CTCT_CLI_BIN + " gradcheck --seed 1 > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
}
