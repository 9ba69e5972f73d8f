#include "atr/config/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <yaml-cpp/yaml.h>

namespace atr::config {

namespace {

void check_keys(const YAML::Node& node, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!node) return;
  if (!node.IsMap()) throw std::invalid_argument("config: '" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& dst) {
  if (node && node[key]) dst = node[key].as<T>();
}

}  // namespace

void RunConfig::validate() const {
  env.validate();
  net.validate();
  train.validate();
  if (net.history != env.history)
    throw std::invalid_argument("config: network and env history lengths differ");
}

namespace {

RunConfig from_root(const YAML::Node& root) {
  RunConfig c;
  if (!root || root.IsNull()) {
    c.validate();
    return c;
  }
  check_keys(root, "<root>",
             {"robot", "transporter", "env", "perturbation", "dr", "rewards", "net", "ppo",
              "estimators", "curriculum"});

  const YAML::Node robot = root["robot"];
  check_keys(robot, "robot", {"preset"});
  read(robot, "preset", c.env.robot);

  const YAML::Node tp = root["transporter"];
  check_keys(tp, "transporter", {"kind"});
  if (tp && tp["kind"]) c.env.kind = transporter::kind_from_string(tp["kind"].as<std::string>());

  const YAML::Node e = root["env"];
  check_keys(e, "env",
             {"batch", "seed", "threads", "dt_physics", "decimation", "episode_length_s",
              "command_period_s", "history", "action_scale", "obs_noise", "init_height_noise",
              "init_joint_noise", "h_des"});
  read(e, "batch", c.train.num_envs);
  read(e, "seed", c.env.seed);
  read(e, "threads", c.train.threads);
  read(e, "dt_physics", c.env.dt_physics);
  read(e, "decimation", c.env.decimation);
  read(e, "episode_length_s", c.env.episode_length_s);
  read(e, "command_period_s", c.env.command_period_s);
  read(e, "history", c.env.history);
  read(e, "action_scale", c.env.action_scale);
  read(e, "obs_noise", c.env.obs_noise);
  read(e, "init_height_noise", c.env.init_height_noise);
  read(e, "init_joint_noise", c.env.init_joint_noise);
  read(e, "h_des", c.env.h_des);

  const YAML::Node p = root["perturbation"];
  check_keys(p, "perturbation", {"enabled", "period_s", "duration_s", "body_max", "deck_max"});
  read(p, "enabled", c.env.perturbations);
  read(p, "period_s", c.env.push_period_s);
  read(p, "duration_s", c.env.push_duration_s);
  read(p, "body_max", c.env.push_body_max);
  read(p, "deck_max", c.env.push_deck_max);

  const YAML::Node dr = root["dr"];
  check_keys(dr, "dr", {"mode"});
  if (dr && dr["mode"]) c.env.dr = env::dr_mode_from_string(dr["mode"].as<std::string>());

  const YAML::Node r = root["rewards"];
  check_keys(r, "rewards", {"k", "f_tol", "tracking_sigma"});
  if (r && r["k"]) {
    const auto k = r["k"].as<std::vector<double>>();
    if (k.size() != c.env.weights.k.size())
      throw std::invalid_argument("config: rewards.k needs exactly 20 weights");
    std::copy(k.begin(), k.end(), c.env.weights.k.begin());
  }
  read(r, "f_tol", c.env.weights.f_tol);
  read(r, "tracking_sigma", c.env.weights.tracking_sigma);

  const YAML::Node n = root["net"];
  check_keys(n, "net", {"profile", "temporal", "init_std"});
  read(n, "profile", c.net.profile);
  read(n, "temporal", c.net.temporal);
  read(n, "init_std", c.net.init_std);
  c.net.history = c.env.history;

  const YAML::Node o = root["ppo"];
  check_keys(o, "ppo",
             {"horizon", "iterations", "gamma", "gae_lambda", "clip", "epochs", "minibatches",
              "learning_rate", "entropy_coef", "value_coef", "grad_clip", "reward_scale",
              "positive_reward", "checkpoint_every"});
  read(o, "horizon", c.train.horizon);
  read(o, "iterations", c.train.iterations);
  read(o, "gamma", c.train.gamma);
  read(o, "gae_lambda", c.train.gae_lambda);
  read(o, "clip", c.train.clip);
  read(o, "epochs", c.train.epochs);
  read(o, "minibatches", c.train.minibatches);
  read(o, "learning_rate", c.train.learning_rate);
  read(o, "entropy_coef", c.train.entropy_coef);
  read(o, "value_coef", c.train.value_coef);
  read(o, "grad_clip", c.train.grad_clip);
  read(o, "reward_scale", c.train.reward_scale);
  read(o, "positive_reward", c.train.positive_reward);
  read(o, "checkpoint_every", c.train.checkpoint_every);

  const YAML::Node est = root["estimators"];
  check_keys(est, "estimators", {"roa_lambda", "coef", "p_use_estimate"});
  read(est, "roa_lambda", c.train.roa_lambda);
  read(est, "coef", c.train.estimator_coef);
  read(est, "p_use_estimate", c.train.p_use_estimate);

  const YAML::Node cur = root["curriculum"];
  check_keys(cur, "curriculum", {"v_init", "w_init"});
  read(cur, "v_init", c.train.cmd_v_init);
  read(cur, "w_init", c.train.cmd_w_init);

  c.validate();
  return c;
}

}  // namespace

RunConfig parse(const std::string& text) {
  // malformed documents and values of the wrong type both surface here
  try {
    return from_root(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string to_yaml(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "robot" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "preset" << YAML::Value << c.env.robot << YAML::EndMap;
  out << YAML::Key << "transporter" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << transporter::to_string(c.env.kind) << YAML::EndMap;

  out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "batch" << YAML::Value << c.train.num_envs;
  out << YAML::Key << "seed" << YAML::Value << c.env.seed;
  out << YAML::Key << "threads" << YAML::Value << c.train.threads;
  out << YAML::Key << "dt_physics" << YAML::Value << c.env.dt_physics;
  out << YAML::Key << "decimation" << YAML::Value << c.env.decimation;
  out << YAML::Key << "episode_length_s" << YAML::Value << c.env.episode_length_s;
  out << YAML::Key << "command_period_s" << YAML::Value << c.env.command_period_s;
  out << YAML::Key << "history" << YAML::Value << c.env.history;
  out << YAML::Key << "action_scale" << YAML::Value << c.env.action_scale;
  out << YAML::Key << "obs_noise" << YAML::Value << c.env.obs_noise;
  out << YAML::Key << "init_height_noise" << YAML::Value << c.env.init_height_noise;
  out << YAML::Key << "init_joint_noise" << YAML::Value << c.env.init_joint_noise;
  out << YAML::Key << "h_des" << YAML::Value << c.env.h_des;
  out << YAML::EndMap;

  out << YAML::Key << "perturbation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << c.env.perturbations;
  out << YAML::Key << "period_s" << YAML::Value << c.env.push_period_s;
  out << YAML::Key << "duration_s" << YAML::Value << c.env.push_duration_s;
  out << YAML::Key << "body_max" << YAML::Value << c.env.push_body_max;
  out << YAML::Key << "deck_max" << YAML::Value << c.env.push_deck_max;
  out << YAML::EndMap;

  out << YAML::Key << "dr" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << env::to_string(c.env.dr) << YAML::EndMap;

  out << YAML::Key << "rewards" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "k" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double k : c.env.weights.k) out << k;
  out << YAML::EndSeq;
  out << YAML::Key << "f_tol" << YAML::Value << c.env.weights.f_tol;
  out << YAML::Key << "tracking_sigma" << YAML::Value << c.env.weights.tracking_sigma;
  out << YAML::EndMap;

  out << YAML::Key << "net" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "profile" << YAML::Value << c.net.profile;
  out << YAML::Key << "temporal" << YAML::Value << c.net.temporal;
  out << YAML::Key << "init_std" << YAML::Value << c.net.init_std;
  out << YAML::EndMap;

  const auto& t = c.train;
  out << YAML::Key << "ppo" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "horizon" << YAML::Value << t.horizon;
  out << YAML::Key << "iterations" << YAML::Value << t.iterations;
  out << YAML::Key << "gamma" << YAML::Value << t.gamma;
  out << YAML::Key << "gae_lambda" << YAML::Value << t.gae_lambda;
  out << YAML::Key << "clip" << YAML::Value << t.clip;
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "minibatches" << YAML::Value << t.minibatches;
  out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
  out << YAML::Key << "entropy_coef" << YAML::Value << t.entropy_coef;
  out << YAML::Key << "value_coef" << YAML::Value << t.value_coef;
  out << YAML::Key << "grad_clip" << YAML::Value << t.grad_clip;
  out << YAML::Key << "reward_scale" << YAML::Value << t.reward_scale;
  out << YAML::Key << "positive_reward" << YAML::Value << t.positive_reward;
  out << YAML::Key << "checkpoint_every" << YAML::Value << t.checkpoint_every;
  out << YAML::EndMap;

  out << YAML::Key << "estimators" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "roa_lambda" << YAML::Value << t.roa_lambda;
  out << YAML::Key << "coef" << YAML::Value << t.estimator_coef;
  out << YAML::Key << "p_use_estimate" << YAML::Value << t.p_use_estimate;
  out << YAML::EndMap;

  out << YAML::Key << "curriculum" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "v_init" << YAML::Value << t.cmd_v_init;
  out << YAML::Key << "w_init" << YAML::Value << t.cmd_w_init;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace atr::config
