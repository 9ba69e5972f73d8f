#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "atr/config/config.hpp"
#include "atr/learner/checkpoint.hpp"
#include "atr/learner/trainer.hpp"

using namespace atr;
using namespace atr::learner;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "atr_unit_ckpt";
  fs::create_directories(dir);
  return dir / name;
}

config::RunConfig tiny() {
  config::RunConfig c;
  c.train.num_envs = 3;
  c.train.horizon = 6;
  c.train.minibatches = 2;
  c.train.epochs = 1;
  c.train.iterations = 4;
  c.env.seed = 21;
  return c;
}

}  // namespace

TEST(Tensor, RoundTripsEveryDtype) {
  TensorFile f;
  Mat m(2, 3);
  m << 1.5, -2, 3, 4, 5.25, -6;
  f.add(Tensor::f32("a", m));
  f.add(Tensor::f64("b", {0.1, 0.2, 1e-300}, {3}));
  f.add(Tensor::u64("c", {1, 0xFFFFFFFFFFFFFFFFull}));
  f.add(Tensor::text("d", "robot: a1\n"));
  const fs::path p = scratch("types.bin");
  f.save(p);
  const TensorFile g = TensorFile::load(p);
  EXPECT_EQ(g.require("a").as_mat(), m);
  EXPECT_EQ(g.require("a").shape, (std::vector<std::uint64_t>{2, 3}));
  EXPECT_EQ(g.require("b").as_f64(), (std::vector<double>{0.1, 0.2, 1e-300}));
  EXPECT_EQ(g.require("c").as_u64()[1], 0xFFFFFFFFFFFFFFFFull);
  EXPECT_EQ(g.require("d").as_text(), "robot: a1\n");
  EXPECT_EQ(g.find("missing"), nullptr);
  EXPECT_THROW(g.require("missing"), std::runtime_error);
}

TEST(Tensor, HeaderIsLittleEndianMagic) {
  TensorFile f;
  f.add(Tensor::u64("x", {7}));
  const fs::path p = scratch("magic.bin");
  f.save(p);
  std::ifstream is(p, std::ios::binary);
  char head[8];
  is.read(head, 8);
  EXPECT_EQ(std::string(head, 4), "ATRC");
  EXPECT_EQ(static_cast<unsigned char>(head[4]), kCheckpointVersion);
  EXPECT_EQ(head[5], 0);
}

TEST(Tensor, RejectsGarbage) {
  const fs::path p = scratch("garbage.bin");
  {
    std::ofstream os(p, std::ios::binary);
    os << "not a checkpoint";
  }
  EXPECT_THROW(TensorFile::load(p), std::runtime_error);
  EXPECT_THROW(TensorFile::load(scratch("does_not_exist.bin")), std::runtime_error);
}

TEST(Bundle, StoreRestoreGivesIdenticalForward) {
  NetConfig c;
  PolicyBundle a(c, env::ObsVec::Zero(), 5), b(c, env::ObsVec::Zero(), 6);
  TensorFile f;
  store_bundle(f, a);
  const fs::path p = scratch("bundle.bin");
  f.save(p);
  restore_bundle(TensorFile::load(p), b);
  env::Env e(env::EnvConfig{}, 0);
  const auto fr = e.reset();
  const PolicyInputs in = pack({fr});
  for (Mode m : {Mode::kTraining, Mode::kDeployment}) {
    const auto oa = a.evaluate(in, m, true, true), ob = b.evaluate(in, m, true, true);
    EXPECT_EQ(oa.mean, ob.mean);
    EXPECT_EQ(oa.value, ob.value);
    EXPECT_EQ(oa.ext_hat, ob.ext_hat);
  }
}

TEST(Bundle, ShapeMismatchThrows) {
  NetConfig small, full;
  full.profile = "full";
  PolicyBundle a(small, env::ObsVec::Zero(), 1), b(full, env::ObsVec::Zero(), 1);
  TensorFile f;
  store_bundle(f, a);
  EXPECT_THROW(restore_bundle(f, b), std::runtime_error);
}

namespace {

void expect_resume_bit_exact(const config::RunConfig& cfg, const std::string& file) {
  Trainer straight(cfg);
  straight.iterate();
  straight.iterate();
  const fs::path p = scratch(file);
  straight.save(p);
  straight.iterate();
  const auto s3 = straight.iterate();

  auto resumed = Trainer::resume(p);
  EXPECT_EQ(resumed->iteration(), 2);
  resumed->iterate();
  const auto r3 = resumed->iterate();
  EXPECT_EQ(s3.update.policy_loss, r3.update.policy_loss);
  EXPECT_EQ(s3.mean_terms, r3.mean_terms);
  EXPECT_EQ(straight.grid(), resumed->grid());
  auto pa = straight.bundle().params(), pb = resumed->bundle().params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
    ASSERT_EQ(pa[i]->m, pb[i]->m) << pa[i]->name;
  }
}

}  // namespace

TEST(Resume, ContinuesBitExact) { expect_resume_bit_exact(tiny(), "resume.bin"); }

TEST(Resume, ContinuesBitExactWithEstimatedEpisodes) {
  auto cfg = tiny();
  cfg.train.p_use_estimate = 0.5;
  expect_resume_bit_exact(cfg, "resume_est.bin");
}

TEST(LoadPolicy, RestoresConfigAndWeights) {
  Trainer t(tiny());
  t.iterate();
  const fs::path p = scratch("policy.bin");
  t.save(p);
  const LoadedPolicy lp = load_policy(p);
  EXPECT_EQ(lp.iteration, 1);
  EXPECT_EQ(lp.config.env.seed, 21u);
  EXPECT_EQ(lp.config.train.num_envs, 3);
  EXPECT_EQ(lp.grid, t.grid());
  env::Env e(lp.config.env, 0);
  const PolicyInputs in = pack({e.reset()});
  EXPECT_EQ(lp.bundle->evaluate(in, Mode::kDeployment).mean,
            t.bundle().evaluate(in, Mode::kDeployment).mean);
}
