#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <sstream>

#include "aero/learning.hpp"
#include "aero/rng.hpp"

using namespace aero;
using namespace aero::learning;

namespace {

QFunction small_q(int inputs, int actions, std::uint64_t seed, std::vector<int> hidden = {8},
                  Activation act = Activation::tanh_fn) {
  QConfig config;
  config.mlp.input_dim = inputs;
  config.mlp.actions = actions;
  config.mlp.hidden = std::move(hidden);
  config.mlp.activation = act;
  config.learning_rate = 0.05;
  config.discount = 0.8;
  config.sync_period = 10;
  return QFunction(config, seed);
}

std::vector<double> random_state(Rng& rng, int dim) {
  auto s = std::vector<double>(std::size_t(dim));
  for (auto& v : s) v = rng.uniform(-1.0, 1.0);
  return s;
}

}  // namespace

TEST_CASE("replay memory is a bounded FIFO") {
  ReplayMemory memory(5, 1);
  for (int i = 0; i < 9; ++i) {
    Transition t;
    t.state = {double(i)};
    t.next_state = {double(i)};
    memory.push(std::move(t));
  }
  CHECK(memory.size() == 5);
  int expected = 4;  // items 4..8 survive, oldest first
  for (const auto& t : memory.buffer()) CHECK(t.state[0] == doctest::Approx(double(expected++)));
}

TEST_CASE("replay sampling is deterministic per seed") {
  ReplayMemory a(10, 42), b(10, 42);
  for (int i = 0; i < 10; ++i) {
    Transition t;
    t.state = {double(i)};
    t.next_state = {double(i)};
    a.push(t);
    b.push(t);
  }
  const auto sa = a.sample(6);
  const auto sb = b.sample(6);
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i]->state[0] == sb[i]->state[0]);
}

TEST_CASE("dueling combination: forced arithmetic") {
  // V = 2, advantages [1, 0, -1] -> Q = [3, 2, 1]
  DuelingMlp::Forward f;
  f.value = 2.0;
  f.advantage = {1.0, 0.0, -1.0};
  const auto q = DuelingMlp::combine(f);
  CHECK(q[0] == doctest::Approx(3.0));
  CHECK(q[1] == doctest::Approx(2.0));
  CHECK(q[2] == doctest::Approx(1.0));

  // constant advantages collapse to V
  f.advantage = {0.7, 0.7, 0.7};
  const auto q2 = DuelingMlp::combine(f);
  for (double v : q2) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("dueling identity: mean over actions of (Q - V) vanishes") {
  Rng rng(5);
  const auto qf = small_q(6, 4, 99, {16, 8});
  for (int trial = 0; trial < 50; ++trial) {
    const auto state = random_state(rng, 6);
    const auto forward = qf.online().forward(state);
    const auto q = qf.online().q_values(state);
    double mean = 0.0;
    for (double v : q) mean += v - forward.value;
    mean /= double(q.size());
    CHECK(std::abs(mean) < 1e-9);
  }
}

TEST_CASE("double target: forced arithmetic and endpoints") {
  auto qf = small_q(2, 2, 7);
  Transition t;
  t.state = {0.1, 0.2};
  t.action = 0;
  t.reward = 1.0;
  t.next_state = {0.3, -0.1};

  // with W- == W the double target equals the plain max target
  const auto q_next = qf.online().q_values(t.next_state);
  const double max_q = *std::max_element(q_next.begin(), q_next.end());
  CHECK(qf.double_target(t) == doctest::Approx(1.0 + 0.8 * max_q).epsilon(1e-12));

  // terminal transitions collapse to the reward
  t.terminal = true;
  CHECK(qf.double_target(t) == doctest::Approx(1.0));

  // discount zero collapses to the reward
  QConfig config;
  config.mlp.input_dim = 2;
  config.mlp.actions = 2;
  config.mlp.hidden = {8};
  config.discount = 0.0;
  QFunction qz(config, 7);
  t.terminal = false;
  CHECK(qz.double_target(t) == doctest::Approx(1.0));
}

TEST_CASE("double target decouples selection from evaluation after divergence") {
  auto qf = small_q(2, 3, 11);
  // push the online net away from the target with a few updates
  Rng rng(3);
  std::vector<Transition> pool;
  for (int i = 0; i < 40; ++i) {
    Transition t;
    t.state = random_state(rng, 2);
    t.action = rng.uniform_int(0, 2);
    t.reward = rng.uniform(-1, 1);
    t.next_state = random_state(rng, 2);
    pool.push_back(t);
  }
  for (int i = 0; i < 5; ++i) {
    std::vector<const Transition*> batch;
    for (int j = 0; j < 8; ++j) batch.push_back(&pool[std::size_t((i * 8 + j) % pool.size())]);
    qf.train_step(batch);
  }
  Transition probe;
  probe.state = {0.4, -0.2};
  probe.action = 0;
  probe.reward = 0.5;
  probe.next_state = {-0.3, 0.9};
  const auto online_q = qf.online().q_values(probe.next_state);
  const auto target_q = qf.target().q_values(probe.next_state);
  const int chosen = int(std::max_element(online_q.begin(), online_q.end()) - online_q.begin());
  CHECK(qf.double_target(probe) ==
        doctest::Approx(0.5 + 0.8 * target_q[std::size_t(chosen)]).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(17);
  for (const auto act : {Activation::tanh_fn, Activation::leaky_relu}) {
    DuelingMlp net({4, 3, {10, 6}, act, 1.0}, 21);
    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
      const auto state = random_state(rng, 4);
      const int action = point % 3;
      const auto grad = net.gradient(state, action);
      auto params = net.parameters();
      const double h = 1e-5;
      for (std::size_t i = 0; i < params.size(); i += 7) {  // probe a spread of parameters
        auto plus = params, minus = params;
        plus[i] += h;
        minus[i] -= h;
        DuelingMlp p = net, m = net;
        p.set_parameters(plus);
        m.set_parameters(minus);
        const double fd = (p.q_values(state)[std::size_t(action)] -
                           m.q_values(state)[std::size_t(action)]) /
                          (2 * h);
        const double err = std::abs(grad[i] - fd) / std::max({std::abs(fd), std::abs(grad[i]), 1e-2});
        worst = std::max(worst, err);
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("train_step: zero TD error leaves parameters unchanged") {
  auto qf = small_q(2, 2, 31);
  Transition t;
  t.state = {0.2, -0.4};
  t.action = 1;
  t.next_state = {0.0, 0.0};
  t.terminal = true;
  t.reward = qf.online().q_values(t.state)[1];  // Y == Q exactly
  const auto before = qf.online().parameters();
  const double loss = qf.train_step({&t});
  CHECK(loss == doctest::Approx(0.0));
  const auto after = qf.online().parameters();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("train_step on a linear approximator moves Q by sigma * |features|^2 * delta") {
  QConfig config;
  config.mlp.input_dim = 3;
  config.mlp.actions = 2;
  config.mlp.hidden = {};  // linear heads on the raw input
  config.learning_rate = 0.01;
  config.discount = 0.0;
  QFunction qf(config, 5);

  Transition t;
  t.state = {0.5, -1.0, 2.0};
  t.action = 0;
  t.reward = 3.0;
  t.next_state = {0.0, 0.0, 0.0};
  t.terminal = true;

  const double q_before = qf.dueling_q(t.state)[0];
  const double delta = t.reward - q_before;
  qf.train_step({&t});
  const double q_after = qf.dueling_q(t.state)[0];

  // dQ/dtheta for the linear dueling head: value row sees x (norm^2 + 1 with bias),
  // advantage rows see (1 - 1/|A|) scaled features for the chosen action and
  // -1/|A| for the other, so the analytic step is sigma * delta * g.g
  double norm2 = 1.0;  // value bias
  for (double x : t.state) norm2 += x * x;
  const double adv_scale = (1.0 - 0.5) * (1.0 - 0.5) + 0.25;  // both advantage rows contribute
  double gg = norm2 + adv_scale * (norm2);
  CHECK(q_after - q_before == doctest::Approx(config.learning_rate * delta * gg).epsilon(1e-9));
}

TEST_CASE("target network syncs every sync_period steps") {
  auto qf = small_q(2, 2, 13);
  Rng rng(2);
  Transition t;
  t.state = random_state(rng, 2);
  t.action = 0;
  t.reward = 1.0;
  t.next_state = random_state(rng, 2);
  for (int i = 0; i < 9; ++i) qf.train_step({&t});
  CHECK(qf.online().parameters() != qf.target().parameters());
  qf.train_step({&t});  // 10th call triggers the copy
  CHECK(qf.online().parameters() == qf.target().parameters());
}

TEST_CASE("epsilon-greedy endpoints and masking") {
  auto qf = small_q(2, 3, 3);
  const std::vector<double> state = {0.3, 0.6};
  EpsilonSchedule explore{1.0, 0.0, 0.0};
  EpsilonSchedule exploit{0.0, 0.0, 0.0};
  Rng rng(9);

  // pure exploitation picks the argmax
  const auto q = qf.dueling_q(state);
  const int best = int(std::max_element(q.begin(), q.end()) - q.begin());
  for (int i = 0; i < 20; ++i) CHECK(epsilon_greedy(qf, state, exploit, {}, rng) == best);

  // masked argmax avoids the best action
  std::vector<std::uint8_t> mask(3, 1);
  mask[std::size_t(best)] = 0;
  const int second = epsilon_greedy(qf, state, exploit, mask, rng);
  CHECK(second != best);

  // all masked is an error
  CHECK_THROWS_AS(epsilon_greedy(qf, state, exploit, {0, 0, 0}, rng), std::runtime_error);

  // full exploration is uniform over valid actions (chi-square, 3 bins)
  std::map<int, int> counts;
  const int n = 30000;
  for (int i = 0; i < n; ++i) counts[epsilon_greedy(qf, state, explore, {}, rng)]++;
  double chi2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double expect = n / 3.0;
    chi2 += (counts[a] - expect) * (counts[a] - expect) / expect;
  }
  CHECK(chi2 < 9.21);  // 0.01 level, 2 degrees of freedom
}

TEST_CASE("epsilon decay follows max(eps - k*dec, floor)") {
  EpsilonSchedule schedule{1.0, 0.00005, 0.0001};
  schedule.decay();
  CHECK(schedule.epsilon == doctest::Approx(0.99995));
  for (int k = 1; k < 400; ++k) {
    schedule.decay();
    CHECK(schedule.epsilon == doctest::Approx(std::max(1.0 - (k + 1) * 0.00005, 0.0001)));
  }
  EpsilonSchedule at_floor{0.0001, 0.00005, 0.0001};
  at_floor.decay();
  CHECK(at_floor.epsilon == doctest::Approx(0.0001));
}

TEST_CASE("identical seeds give identical training trajectories") {
  auto run = [](std::uint64_t seed) {
    auto qf = small_q(3, 2, seed);
    ReplayMemory memory(50, seed + 1);
    Rng env(seed + 2);
    EpsilonSchedule schedule{0.5, 0.01, 0.05};
    std::vector<int> actions;
    for (int step = 0; step < 60; ++step) {
      Transition t;
      t.state = random_state(env, 3);
      t.action = epsilon_greedy(qf, t.state, schedule, {}, env);
      actions.push_back(t.action);
      t.reward = env.uniform(-1, 1);
      t.next_state = random_state(env, 3);
      memory.push(std::move(t));
      schedule.decay();
      if (memory.size() >= 8) qf.train_step(memory.sample(8));
    }
    return std::pair{actions, qf.online().parameters()};
  };
  const auto a = run(12345);
  const auto b = run(12345);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("convergence smoke: 5-state chain reaches the goal from every start") {
  // states 0..4, actions {left, right}, terminal reward 1 at state 4
  QConfig config;
  config.mlp.input_dim = 5;
  config.mlp.actions = 2;
  config.mlp.hidden = {};  // tabular-equivalent on one-hot states
  config.learning_rate = 0.1;
  config.discount = 0.8;
  config.sync_period = 50;
  QFunction qf(config, 8);
  ReplayMemory memory(500, 9);
  EpsilonSchedule schedule{1.0, 0.0004, 0.05};
  Rng env(10);

  auto one_hot = [](int s) {
    std::vector<double> v(5, 0.0);
    v[std::size_t(s)] = 1.0;
    return v;
  };
  int state = 0;
  for (int step = 0; step < 5000; ++step) {
    const int action = epsilon_greedy(qf, one_hot(state), schedule, {}, env);
    const int next = std::clamp(state + (action == 1 ? 1 : -1), 0, 4);
    Transition t;
    t.state = one_hot(state);
    t.action = action;
    t.reward = next == 4 ? 1.0 : 0.0;
    t.terminal = next == 4;
    t.next_state = one_hot(next);
    memory.push(std::move(t));
    schedule.decay();
    if (memory.size() >= 32) qf.train_step(memory.sample(32));
    state = t.terminal ? 0 : next;
  }
  for (int start = 0; start < 4; ++start) {
    int s = start;
    for (int hop = 0; hop < 10 && s != 4; ++hop) {
      const auto q = qf.dueling_q(one_hot(s));
      s += (q[1] > q[0] ? 1 : -1);
      s = std::clamp(s, 0, 4);
    }
    CHECK(s == 4);
  }
}

TEST_CASE("checkpoint save/load restores the QFunction bit-exactly") {
  auto qf = small_q(3, 2, 77);
  Rng rng(1);
  for (int i = 0; i < 12; ++i) {
    Transition t;
    t.state = random_state(rng, 3);
    t.action = i % 2;
    t.reward = rng.uniform(-1, 1);
    t.next_state = random_state(rng, 3);
    qf.train_step({&t});
  }
  std::ostringstream out;
  qf.save(out);
  QFunction restored;
  std::istringstream in(out.str());
  restored.load(in);
  CHECK(restored.online().parameters() == qf.online().parameters());
  CHECK(restored.target().parameters() == qf.target().parameters());
  CHECK(restored.train_calls() == qf.train_calls());

  // continuing training from the checkpoint matches the original exactly
  Transition t;
  t.state = {0.1, 0.2, 0.3};
  t.action = 1;
  t.reward = 0.7;
  t.next_state = {0.0, 0.1, -0.2};
  qf.train_step({&t});
  restored.train_step({&t});
  CHECK(restored.online().parameters() == qf.online().parameters());
}
