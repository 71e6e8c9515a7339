#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "degas/checkpoint.hpp"
#include "degas/cli.hpp"
#include "degas/io.hpp"
#include "test_util.hpp"

namespace degas {
namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "degas");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    data = (dir / "train.dgs").string();
    gen_toy_dataset(24, 16, 3, data);
    RunConfig c = testing::tiny_config();
    c.epochs = 3;
    c.dataset = data;
    config = (dir / "run.cfg").string();
    write_text_file(config, to_text(c));
  }
  std::string out(const std::string& name) const { return (dir / name).string(); }

  testing::TempDir dir{"cli"};
  std::string data, config;
};

TEST(Cli, CountSpace) {
  const auto r = cli({"count-space", "4", "4", "4", "7", "7", "7", "5", "9", "9"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "8890560\n");
}

TEST(Cli, UsageErrors) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"frobnicate"}, {"count-space", "0"}, {"retrain"}, {"search", "--bogus"}}) {
    const auto r = cli(args);
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  }
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, RuntimeErrorsAreOneLine) {
  testing::TempDir dir("clierr");
  auto r = cli({"--out", (dir / "o").string(), "search", "--data", (dir / "missing.dgs").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);

  write_text_file(dir / "bad.cfg", "stages = 3\nwarp = 1\n");
  r = cli({"--config", (dir / "bad.cfg").string(), "count-space", "2"});
  EXPECT_EQ(r.code, 0);  // count-space takes no config
  r = cli({"--config", (dir / "bad.cfg").string(), "prune", "--random"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("config line 2"), std::string::npos) << r.err;
}

TEST(Cli, GenDataIsDeterministic) {
  testing::TempDir dir("cligen");
  EXPECT_EQ(cli({"--seed", "4", "gen-data", (dir / "a.dgs").string(), "--count", "5", "--size", "8"}).code, 0);
  EXPECT_EQ(cli({"--seed", "4", "gen-data", (dir / "b.dgs").string(), "--count", "5", "--size", "8"}).code, 0);
  EXPECT_EQ(read_file(dir / "a.dgs"), read_file(dir / "b.dgs"));
  EXPECT_EQ(read_file(dir / "a.dgs"), encode_dataset(render_toy_images(5, 8, 4)));
}

TEST(Cli, GradCheck) {
  const auto r = cli({"grad-check", "--seeds", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("passed at tolerance"), std::string::npos);
}

TEST_F(CliRun, SearchThenPruneIsReproducible) {
  for (const char* run : {"a", "b"}) {
    const auto s = cli({"--config", config, "--out", out(run), "search"});
    ASSERT_EQ(s.code, 0) << s.err;
    const auto p = cli({"--config", config, "--out", out(run), "prune"});
    ASSERT_EQ(p.code, 0) << p.err;
  }
  const std::string ga = slurp(dir / "a" / "genotype.txt");
  EXPECT_EQ(ga, slurp(dir / "b" / "genotype.txt"));
  EXPECT_NE(ga.find("# config "), std::string::npos);

  const std::string csv = slurp(dir / "a" / "search_loss.csv");
  EXPECT_EQ(csv.rfind("# config ", 0), 0u);
  EXPECT_NE(csv.find("\nepoch,w_loss,a_loss,lr,seconds\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_FALSE(std::filesystem::exists(dir / "a" / ".degas.lock"));
}

TEST_F(CliRun, StopAndResumeMatchesUninterrupted) {
  ASSERT_EQ(cli({"--config", config, "--out", out("full"), "search"}).code, 0);
  ASSERT_EQ(cli({"--config", config, "--out", out("split"), "search", "--stop-after", "1"}).code, 0);
  const auto r = cli({"--config", config, "--out", out("split"), "search", "--resume"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("resuming at epoch 2"), std::string::npos);
  // Checkpoints record wall-clock seconds, so compare the state itself.
  auto a = load_search_state(read_file(dir / "full" / "search.ckpt"));
  auto b = load_search_state(read_file(dir / "split" / "search.ckpt"));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].w_loss, b.history[e].w_loss);
  EXPECT_EQ(a.graph.alpha_values(), b.graph.alpha_values());
  EXPECT_EQ(a.latents.z, b.latents.z);
  const auto wa = a.graph.weights(), wb = b.graph.weights();
  for (std::size_t i = 0; i < wa.size(); ++i) EXPECT_EQ(wa[i]->value, wb[i]->value);

  // A different config cannot resume that checkpoint.
  RunConfig other = testing::tiny_config();
  other.epochs = 3, other.dataset = data, other.lambda = 0.5;
  write_text_file(dir / "other.cfg", to_text(other));
  const auto bad = cli({"--config", out("other.cfg"), "--out", out("split"), "search", "--resume"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("different config"), std::string::npos);
}

TEST_F(CliRun, LockBlocksSecondWriter) {
  std::filesystem::create_directories(dir / "locked");
  write_text_file(dir / "locked" / ".degas.lock", "1\n");
  const auto r = cli({"--config", config, "--out", out("locked"), "search"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("in use"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "locked" / "search.ckpt"));
}

TEST_F(CliRun, RandomPruneRetrainEval) {
  auto r = cli({"--config", config, "--seed", "9", "prune", "--random", "--file", out("rand.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Genotype g = load_genotype(out("rand.txt"));
  EXPECT_NE(g.provenance.find(" random"), std::string::npos);

  r = cli({"--config", config, "--out", out("m"), "retrain", "--genotype", out("rand.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir / "m" / "retrain_loss.csv");
  EXPECT_NE(csv.find("\nepoch,loss,lr,seconds\n"), std::string::npos);

  r = cli({"--config", config, "--out", out("m"), "eval", "--samples", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("proxy_frechet ", 0), 0u);
  EXPECT_EQ(read_dataset(dir / "m" / "samples.dgs").shape(), (Shape{20, 3, 16, 16}));
  EXPECT_EQ(read_dataset(dir / "m" / "interpolation.dgs").dim(0), 8u);
  const std::string metrics = slurp(dir / "m" / "eval_metrics.csv");
  EXPECT_NE(metrics.find("\nmetric,value\nproxy_frechet,"), std::string::npos);
  EXPECT_NE(metrics.find("\nsamples,20\nreference,24\n"), std::string::npos);

  // Same seed, same samples.
  const Bytes first = read_file(dir / "m" / "samples.dgs");
  ASSERT_EQ(cli({"--config", config, "--out", out("m"), "eval", "--samples", "20"}).code, 0);
  EXPECT_EQ(read_file(dir / "m" / "samples.dgs"), first);
}

TEST_F(CliRun, TransferToLargerBase) {
  // Genotype searched for 32x32 (S=3, base 4), retrained on 48x48 with base 6.
  RunConfig c = testing::tiny_config();
  c.stages = 3, c.epochs = 1;
  write_text_file(dir / "s3.cfg", to_text(c));
  const std::string big = out("big.dgs");
  gen_toy_dataset(8, 48, 4, big);
  ASSERT_EQ(cli({"--config", out("s3.cfg"), "prune", "--random", "--file", out("g.txt")}).code, 0);
  auto r = cli({"--config", out("s3.cfg"), "--out", out("t"), "retrain", "--genotype", out("g.txt"), "--base", "6",
                "--data", big});
  ASSERT_EQ(r.code, 0) << r.err;
  TrainState s = load_training_state(read_file(dir / "t" / "model.ckpt"));
  EXPECT_EQ(s.config.base, 6u);
  EXPECT_EQ(s.net.generate(Tensor::zeros({1, c.latent_dim}), Mode::eval).shape(), (Shape{1, 3, 48, 48}));
  // Base 4 does not fit 48x48 images.
  r = cli({"--config", out("s3.cfg"), "--out", out("t2"), "retrain", "--genotype", out("g.txt"), "--data", big});
  EXPECT_EQ(r.code, 1);
}

}  // namespace
}  // namespace degas
