// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const testutil::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + DUTRACK_CLI + "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_all(out);
  r.err = read_all(err);
  return r;
}

}  // namespace

TEST_CASE("cli errors name the offending input") {
  testutil::TempDir dir("cli-err");
  CHECK(cli(dir, "--help").code == 0);
  CHECK(cli(dir, "").code != 0);

  std::filesystem::create_directories(dir / "data");
  const Run missing = cli(dir, "track --checkpoint " + (dir / "nope.ckpt").string() + " --data " +
                                   (dir / "data").string() + " --out " + (dir / "res").string());
  CHECK(missing.code == 1);
  CHECK(missing.err.find("nope.ckpt") != std::string::npos);

  std::ofstream(dir / "bad.conf") << "topk = 3\nsearch_sise = 128\n";
  const Run bad = cli(dir, "track --config " + (dir / "bad.conf").string());
  CHECK(bad.code == 1);
  CHECK(bad.err.find("search_sise") != std::string::npos);
  CHECK(bad.err.find(":2:") != std::string::npos);

  const Run nodata = cli(dir, "eval --data " + (dir / "absent").string() + " --results " + (dir / "r").string());
  CHECK(nodata.code == 1);
  CHECK(nodata.err.find("absent") != std::string::npos);
}

TEST_CASE("cli end to end on a tiny suite") {
  testutil::TempDir dir("cli-e2e");
  std::ofstream(dir / "tiny.suite") << "families = static\ncount = 2\nseed = 3\nlength = 12\nwidth = 96\n"
                                       "height = 96\nnoise = 2\n";
  std::ofstream(dir / "tiny.conf") << "model_dim = 16\nnum_heads = 2\nnum_blocks = 1\nlang_tokens = 8\n"
                                      "template_size = 32\nsearch_size = 64\nmax_dynamic = 3\n"
                                      "stage1_epochs = 1\nstage2_epochs = 1\nsamples_per_epoch = 8\n"
                                      "batch_size = 4\n";
  const std::string conf = " --config " + (dir / "tiny.conf").string();
  REQUIRE(cli(dir, "synth --suite " + (dir / "tiny.suite").string() + " --out " + (dir / "data").string()).code ==
          0);
  CHECK(std::filesystem::exists(dir / "data" / "static-001" / "groundtruth.txt"));

  const std::string ckpt = (dir / "m.ckpt").string();
  REQUIRE(cli(dir, "train" + conf + " --data " + (dir / "data").string() + " --out " + ckpt).code == 0);
  CHECK(std::filesystem::exists(ckpt + ".vocab"));
  CHECK(read_all(ckpt + ".loss.csv").starts_with("epoch,loss\n1,"));

  const std::string common = conf + " --checkpoint " + ckpt + " --data " + (dir / "data").string();
  REQUIRE(cli(dir, "track" + common + " --out " + (dir / "r1").string() + " --diagnostics").code == 0);
  REQUIRE(cli(dir, "track" + common + " --out " + (dir / "r2").string() + " --jobs 2").code == 0);
  const std::string r1 = read_all(dir / "r1" / "static-000.txt");
  CHECK(r1 == read_all(dir / "r2" / "static-000.txt"));
  CHECK(std::count(r1.begin(), r1.end(), '\n') == 12);
  CHECK(read_all(dir / "r1" / "static-000.updates.txt").starts_with("1,"));

  const Run eval = cli(dir, "eval --data " + (dir / "data").string() + " --results " + (dir / "r1").string());
  REQUIRE(eval.code == 0);
  CHECK(eval.out.starts_with("sequence,auc,precision,norm_precision\n"));
  CHECK(eval.out == read_all(dir / "r1" / "metrics.csv"));

  const Run ablate = cli(dir, "ablate" + common);
  REQUIRE(ablate.code == 0);
  std::size_t topk_rows = 0, policy_rows = 0;
  std::istringstream lines(ablate.out);
  for (std::string line; std::getline(lines, line);) {
    topk_rows += line.starts_with("topk ");
    policy_rows += line.starts_with("policy ");
  }
  CHECK(topk_rows == 4);
  CHECK(policy_rows == 4);
}

TEST_CASE("committed fixture checkpoint tracks the static suite") {
  testutil::TempDir dir("cli-fixture");
  const std::string src = DUTRACK_SOURCE_DIR;
  const std::string data = (dir / "data").string(), res = (dir / "res").string();
  REQUIRE(cli(dir, "synth --suite " + src + "/suites/static.suite --out " + data).code == 0);
  REQUIRE(cli(dir, "track --config " + src + "/configs/desk.conf --checkpoint " + src +
                       "/fixtures/desk.ckpt --data " + data + " --out " + res)
              .code == 0);
  const Run eval = cli(dir, "eval --data " + data + " --results " + res);
  REQUIRE(eval.code == 0);
  const auto at = eval.out.find("\nall,");
  REQUIRE(at != std::string::npos);
  const double auc = std::stod(eval.out.substr(at + 5));
  INFO("static suite AUC " << auc);
  CHECK(auc > 0.9);
}
