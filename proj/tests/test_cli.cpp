#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

// End-to-end checks through the installed binary: the full pipeline on a tiny
// synthetic corpus, exit codes, and manifest/rerun determinism.

namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("HCTC_BIN");
  REQUIRE_MESSAGE(b != nullptr, "HCTC_BIN must point at the hctc binary");
  return b;
}

int run(const std::string& args) {
  const std::string cmd = bin() + " " + args + " >cli_stdout.txt 2>cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

struct Workspace {
  fs::path dir;
  Workspace() : dir("cli_ws") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 1, data errors exit 2") {
  CHECK(run("definitely-not-a-subcommand") == 1);
  CHECK(run("score --ref missing.tsv") == 1);  // missing required --hyp
  CHECK(run("score --ref missing.tsv --hyp also_missing.tsv") == 2);
  CHECK(slurp("cli_stderr.txt").rfind("error:", 0) == 0);
  CHECK(run("--help") == 0);
}

TEST_CASE("bpe learn/apply/invert round trip on a toy corpus") {
  Workspace ws;
  spit(ws.p("corpus.tsv"),
       "u1\tyou know it's no not even cold weather\n"
       "u2\tcold weather you know\n"
       "u3\tit's not even cold\n"
       "u4\tweather weather cold cold\n");

  CHECK(run("bpe learn --transcripts " + ws.p("corpus.tsv") + " --ops 30 --merges " +
            ws.p("merges.txt") + " --inventory " + ws.p("inv.txt") + " --char-inventory " +
            ws.p("chars.txt")) == 0);
  CHECK(fs::exists(ws.p("merges.txt")));
  CHECK(fs::exists(ws.p("merges.txt") + ".manifest.json"));

  CHECK(run("bpe apply --transcripts " + ws.p("corpus.tsv") + " --merges " + ws.p("merges.txt") +
            " --inventory " + ws.p("inv.txt") + " --output " + ws.p("pieces.tsv")) == 0);
  const std::string pieces = slurp(ws.p("pieces.tsv"));
  CHECK(pieces.find('\t') != std::string::npos);

  CHECK(run("bpe invert --pieces " + ws.p("pieces.tsv") + " --output " + ws.p("restored.tsv")) ==
        0);
  CHECK(slurp(ws.p("restored.tsv")) == slurp(ws.p("corpus.tsv")));
}

TEST_CASE("features convert round trips through text") {
  Workspace ws;
  spit(ws.p("mat.txt"), "0.5 1.25 -3\n2 0 7.5\n");
  CHECK(run("features convert --input " + ws.p("mat.txt") + " --output " + ws.p("mat.feat")) == 0);
  CHECK(run("features convert --to-text --input " + ws.p("mat.feat") + " --output " +
            ws.p("mat2.txt")) == 0);
  CHECK(run("features convert --input " + ws.p("mat2.txt") + " --output " + ws.p("mat2.feat")) ==
        0);
  CHECK(slurp(ws.p("mat.feat")) == slurp(ws.p("mat2.feat")));

  spit(ws.p("bad.feat"), "XXXX????");
  CHECK(run("features convert --to-text --input " + ws.p("bad.feat") + " --output " +
            ws.p("x.txt")) == 2);
}

TEST_CASE("score reports pooled rates and mismatched ids fail") {
  Workspace ws;
  spit(ws.p("ref.tsv"), "u1\ta b c d e f g h i\nu2\tx\n");
  spit(ws.p("hyp.tsv"), "u1\ta b c d e f g h i\nu2\ty\n");
  CHECK(run("score --ref " + ws.p("ref.tsv") + " --hyp " + ws.p("hyp.tsv")) == 0);
  const std::string report = slurp("cli_stdout.txt");
  CHECK(report.find("%WER 10.00") != std::string::npos);
  CHECK(report.find("wer=0.1") != std::string::npos);

  spit(ws.p("hyp2.tsv"), "u1\ta b c\nu9\ty\n");
  CHECK(run("score --ref " + ws.p("ref.tsv") + " --hyp " + ws.p("hyp2.tsv")) == 2);
  CHECK(slurp("cli_stderr.txt").find("u9") != std::string::npos);
}

TEST_CASE("full pipeline: synth, units, train, decode, score, rerun determinism") {
  Workspace ws;
  // Tiny corpus and model so the whole pipeline stays in seconds.
  CHECK(run("synth generate --out-dir " + ws.p("data") +
            " --train 12 --test 4 --alphabet 5 --lexicon 6 --noise 0.05 --seed 7 "
            "--frames-min 3 --frames-max 5 --word-min 2 --word-max 3 --words-min 1 --words-max 2") ==
        0);
  REQUIRE(fs::exists(ws.p("data/train.scp")));
  REQUIRE(fs::exists(ws.p("data/test.ref")));

  CHECK(run("bpe learn --transcripts " + ws.p("data/train.ref") + " --ops 8 --merges " +
            ws.p("bpe8.merges") + " --inventory " + ws.p("bpe8.inv") + " --char-inventory " +
            ws.p("char.inv")) == 0);

  const std::string train_cmd =
      "train --topology hmtl --head char=" + ws.p("char.inv") + " --head bpe8=" + ws.p("bpe8.inv") +
      "," + ws.p("bpe8.merges") + " --train-scp " + ws.p("data/train.scp") + " --transcripts " +
      ws.p("data/train.ref") + " --encoder-layers 1 --hidden 6 --proj 0 --epochs 2 --batch 4 " +
      "--lr 0.1 --seed 3 --subsample --output ";
  CHECK(run(train_cmd + ws.p("model.ckpt")) == 0);
  REQUIRE(fs::exists(ws.p("model.ckpt")));
  REQUIRE(fs::exists(ws.p("model.ckpt.manifest.json")));

  // Bit-exact rerun with identical arguments.
  CHECK(run(train_cmd + ws.p("model2.ckpt")) == 0);
  CHECK(slurp(ws.p("model.ckpt")) == slurp(ws.p("model2.ckpt")));

  CHECK(run("inspect checkpoint --path " + ws.p("model.ckpt")) == 0);
  const std::string summary = slurp("cli_stdout.txt");
  CHECK(summary.find("topology: hmtl") != std::string::npos);
  CHECK(summary.find("heads:") != std::string::npos);

  CHECK(run("lm train --backend ngram --order 2 --alpha 0.2 --transcripts " +
            ws.p("data/train.ref") + " --inventory " + ws.p("bpe8.inv") + " --merges " +
            ws.p("bpe8.merges") + " --output " + ws.p("bpe8.lm")) == 0);

  const std::string greedy_cmd = "decode --model " + ws.p("model.ckpt") + " --scp " +
                                 ws.p("data/test.scp") + " --head bpe8 --inventory " +
                                 ws.p("bpe8.inv") + " --mode greedy --output ";
  CHECK(run(greedy_cmd + ws.p("greedy.tsv")) == 0);
  CHECK(run(greedy_cmd + ws.p("greedy2.tsv")) == 0);
  CHECK(slurp(ws.p("greedy.tsv")) == slurp(ws.p("greedy2.tsv")));

  CHECK(run("decode --model " + ws.p("model.ckpt") + " --scp " + ws.p("data/test.scp") +
            " --head bpe8 --inventory " + ws.p("bpe8.inv") +
            " --mode fusion --lm " + ws.p("bpe8.lm") + " --beam 8 --bonus 1.5 --output " +
            ws.p("fusion.tsv")) == 0);

  // Hypothesis files are scoreable against the references (rate meaningless
  // at this training budget).
  CHECK(run("score --ref " + ws.p("data/test.ref") + " --hyp " + ws.p("greedy.tsv")) == 0);
  CHECK(run("score --ref " + ws.p("data/test.ref") + " --hyp " + ws.p("fusion.tsv")) == 0);

  // Parallel decode produces identical output in input order.
  CHECK(run(greedy_cmd + ws.p("greedy4.tsv") + " --jobs 4") == 0);
  CHECK(slurp(ws.p("greedy4.tsv")) == slurp(ws.p("greedy.tsv")));

  // Wrong inventory for the head is a contract error.
  CHECK(run("decode --model " + ws.p("model.ckpt") + " --scp " + ws.p("data/test.scp") +
            " --head bpe8 --inventory " + ws.p("char.inv") + " --mode greedy --output " +
            ws.p("bad.tsv")) == 2);
}

TEST_CASE("train honors a key-value config file with flag overrides") {
  Workspace ws;
  CHECK(run("synth generate --out-dir " + ws.p("data") +
            " --train 6 --test 2 --alphabet 4 --lexicon 4 --noise 0.05 --seed 9 "
            "--frames-min 3 --frames-max 4 --word-min 2 --word-max 2 --words-min 1 --words-max 1") ==
        0);
  CHECK(run("bpe learn --transcripts " + ws.p("data/train.ref") + " --ops 0 --merges " +
            ws.p("none.merges") + " --char-inventory " + ws.p("char.inv")) == 0);
  spit(ws.p("train.cfg"),
       "# desk-scale settings\n"
       "topology = stl\n"
       "encoder_layers = 1\n"
       "hidden_dim = 4\n"
       "proj_dim = 0\n"
       "seed = 5\n"
       "learning_rate = 0.05\n"
       "grad_clip = 5.0\n"
       "epochs = 1\n"
       "batch_size = 2\n"
       "subsample = 0\n");
  CHECK(run("train --config " + ws.p("train.cfg") + " --head char=" + ws.p("char.inv") +
            " --train-scp " + ws.p("data/train.scp") + " --transcripts " + ws.p("data/train.ref") +
            " --hidden 5 --output " + ws.p("m.ckpt")) == 0);
  CHECK(run("inspect checkpoint --path " + ws.p("m.ckpt")) == 0);
  const std::string summary = slurp("cli_stdout.txt");
  CHECK(summary.find("topology: stl") != std::string::npos);      // from config
  CHECK(summary.find("hidden_dim: 5") != std::string::npos);      // flag wins
  CHECK(summary.find("encoder_layers: 1") != std::string::npos);  // from config
}
