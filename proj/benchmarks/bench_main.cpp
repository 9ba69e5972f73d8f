#include <benchmark/benchmark.h>

#include "atr/config/config.hpp"
#include "atr/env/env.hpp"
#include "atr/learner/trainer.hpp"
#include "atr/transporter/transporter.hpp"

using namespace atr;

static void BM_TransporterStep(benchmark::State& st) {
  using namespace atr::transporter;
  const Kind kind = st.range(0) == 1 ? Kind::kType1 : Kind::kType2;
  const TransporterParams p = preset("g1", kind);
  TransporterState s = rest_state(p);
  s.orientation.pitch = 0.1;
  for (auto _ : st) {
    s = *step(s, p, WrenchSet{}, 0.002);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_TransporterStep)->Arg(1)->Arg(2);

// one control step = 10 physics substeps
static void BM_EnvStep(benchmark::State& st) {
  env::Env e(env::EnvConfig{}, 0);
  e.reset();
  for (auto _ : st) benchmark::DoNotOptimize(e.step(env::ActVec::Zero()));
  st.SetItemsProcessed(st.iterations());
}
BENCHMARK(BM_EnvStep);

static void BM_VecEnvStep(benchmark::State& st) {
  const int n = 64;
  env::VecEnv v(env::EnvConfig{}, n, static_cast<int>(st.range(0)));
  v.reset();
  const Eigen::MatrixXd acts = Eigen::MatrixXd::Zero(n, env::kActDim);
  for (auto _ : st) benchmark::DoNotOptimize(v.step(acts));
  st.SetItemsProcessed(st.iterations() * n);
}
BENCHMARK(BM_VecEnvStep)->Arg(1)->Arg(4)->UseRealTime();

static void BM_PolicyForward(benchmark::State& st) {
  learner::NetConfig c;
  c.profile = st.range(1) == 0 ? "small" : "full";
  learner::PolicyBundle b(c, env::ObsVec::Zero(), 1);
  env::Env e(env::EnvConfig{}, 0);
  const std::vector<env::Frame> frames(static_cast<std::size_t>(st.range(0)), e.reset());
  const learner::PolicyInputs in = learner::pack(frames);
  for (auto _ : st) benchmark::DoNotOptimize(b.evaluate(in, learner::Mode::kDeployment));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_PolicyForward)->Args({1, 0})->Args({64, 0})->Args({64, 1});

// rollout collection plus the PPO and estimator update
static void BM_TrainIteration(benchmark::State& st) {
  config::RunConfig c;
  c.train.num_envs = 16;
  c.train.horizon = 24;
  learner::Trainer t(c);
  for (auto _ : st) benchmark::DoNotOptimize(t.iterate());
}
BENCHMARK(BM_TrainIteration)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
