#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gridnav/numcore/nn.hpp"
#include "oracles.hpp"

using namespace numcore;

namespace {

Array randu(Rng& rng, std::vector<int> shape, float lo = -1.0f, float hi = 1.0f) {
  Array a(std::move(shape));
  for (float& v : a.data) v = lo + (hi - lo) * rng.uniformf();
  return a;
}

}  // namespace

TEST_CASE("rng determinism and splitting") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  Rng c1 = c.split(1), c2 = c.split(2);
  CHECK(c1.next_u64() != c2.next_u64());
  // inclusive bounds
  Rng d(7);
  for (int i = 0; i < 1000; ++i) {
    int v = d.uniform_int(3, 5);
    CHECK(v >= 3);
    CHECK(v <= 5);
  }
}

TEST_CASE("matmul identity and hand product") {
  Graph g;
  Var a = g.input(Array({2, 2}, {1, 2, 3, 4}));
  Var eye = g.input(Array({2, 2}, {1, 0, 0, 1}));
  Var out = g.matmul(eye, a);
  CHECK(g.value(out).data == std::vector<float>{1, 2, 3, 4});

  Var b = g.input(Array({2, 2}, {5, 6, 7, 8}));
  Var p = g.matmul(a, b);
  CHECK(g.value(p).data == std::vector<float>{19, 22, 43, 50});
}

TEST_CASE("matmul shape mismatch names op and shapes") {
  Graph g;
  Var a = g.input(Array({2, 3}));
  Var b = g.input(Array({4, 5}));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
  try {
    g.matmul(a, b);
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
}

TEST_CASE("softmax symmetry and row sums") {
  Graph g;
  Var s = g.softmax(g.input(Array({1, 3}, {0, 0, 0})));
  for (float v : g.value(s).data) CHECK(v == doctest::Approx(1.0f / 3.0f).epsilon(1e-6));

  Rng rng(3);
  Var r = g.softmax(g.input(randu(rng, {8, 16}, -4.0f, 4.0f)));
  const Array& y = g.value(r);
  for (int i = 0; i < 8; ++i) {
    float acc = 0.0f;
    for (int j = 0; j < 16; ++j) acc += y.at({i, j});
    CHECK(std::fabs(acc - 1.0f) < 1e-6f);
  }
}

TEST_CASE("layernorm normalizes rows") {
  Graph g;
  Rng rng(5);
  Var gain = g.input(ones({32}));
  Var bias = g.input(zeros({32}));
  Var y = g.layernorm(g.input(randu(rng, {6, 32}, -3.0f, 5.0f)), gain, bias);
  const Array& v = g.value(y);
  for (int r = 0; r < 6; ++r) {
    double mu = 0, var = 0;
    for (int c = 0; c < 32; ++c) mu += v.at({r, c});
    mu /= 32;
    for (int c = 0; c < 32; ++c) var += (v.at({r, c}) - mu) * (v.at({r, c}) - mu);
    var /= 32;
    CHECK(std::fabs(mu) < 1e-4);
    CHECK(std::fabs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("backward of sum is ones; constant branch gets zeros") {
  Graph g;
  ParamStore ps;
  ps.create("x", Array({2, 3}, {1, -2, 3, 0.5f, 0, -1}));
  ps.create("unused", Array({2}, {1, 1}));
  Var x = g.param(ps, "x");
  Var unused = g.param(ps, "unused");
  (void)unused;  // participates in no computation
  Var loss = g.sum(x);
  g.backward(loss);
  for (float v : ps.grad("x").data) CHECK(v == 1.0f);
  for (float v : ps.grad("unused").data) CHECK(v == 0.0f);
}

TEST_CASE("backward rejects non-scalar loss") {
  Graph g;
  ParamStore ps;
  ps.create("x", Array({2}, {1, 2}));
  Var x = g.param(ps, "x");
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("forward is repeatable bitwise") {
  Rng rng(11);
  Array in = randu(rng, {4, 8});
  Array w = randu(rng, {8, 8});
  auto run = [&]() {
    Graph g;
    Var y = g.softmax(g.matmul(g.input(in), g.input(w)));
    return g.value(y).data;
  };
  CHECK(run() == run());
}

TEST_CASE("finite differences: random 3-layer MLP") {
  Rng rng(17);
  ParamStore ps;
  ps.create("w1", trunc_normal(rng, {6, 8}, 0.5f));
  ps.create("b1", randu(rng, {8}, -0.2f, 0.2f));
  ps.create("w2", trunc_normal(rng, {8, 8}, 0.5f));
  ps.create("b2", randu(rng, {8}, -0.2f, 0.2f));
  ps.create("w3", trunc_normal(rng, {8, 4}, 0.5f));
  ps.create("b3", randu(rng, {4}, -0.2f, 0.2f));
  Array x = randu(rng, {5, 6});
  Array t = randu(rng, {5, 4});

  auto build = [&](Graph& g) {
    Var h1 = g.relu(g.add(g.matmul(g.input(x), g.param(ps, "w1")), g.param(ps, "b1")));
    Var h2 = g.gelu(g.add(g.matmul(h1, g.param(ps, "w2")), g.param(ps, "b2")));
    Var y = g.add(g.matmul(h2, g.param(ps, "w3")), g.param(ps, "b3"));
    Var d = g.sub(y, g.input(t));
    return g.sum(g.mul(d, d));
  };
  auto loss_value = [&]() {
    Graph g;
    return g.value(build(g)).data[0];
  };
  {
    Graph g;
    ps.zero_grads();
    g.backward(build(g));
  }
  auto report = oracles::fd_check_params(ps, loss_value, 1e-3f);
  CHECK_MESSAGE(report.max_rel < 1e-3f, "worst param: ", report.worst_param);
}

TEST_CASE("finite differences: every primitive op") {
  Rng rng(23);
  // Each case: builds scalar loss from a single op applied to parameter "x".
  struct Case {
    const char* name;
    std::vector<int> shape;
    std::function<Var(Graph&, Var)> body;
    float min_abs = 0.0f;  // push inputs away from zero (relu kink)
  };
  std::vector<Case> cases;
  cases.push_back({"add", {3, 4}, [](Graph& g, Var x) {
                     return g.add(x, g.input(Array::full({3, 4}, 0.3f)));
                   }});
  cases.push_back({"add_broadcast", {3, 4}, [](Graph& g, Var x) {
                     return g.add(x, g.input(Array({4}, {0.1f, -0.2f, 0.3f, 0.4f})));
                   }});
  cases.push_back({"sub", {3, 4}, [](Graph& g, Var x) {
                     return g.sub(x, g.input(Array::full({3, 4}, 0.7f)));
                   }});
  cases.push_back({"mul", {3, 4}, [&](Graph& g, Var x) {
                     Rng r2(71);
                     return g.mul(x, g.input(randu(r2, {3, 4})));
                   }});
  cases.push_back({"mul_broadcast", {3, 4}, [](Graph& g, Var x) {
                     return g.mul(x, g.input(Array({4}, {0.5f, -1.5f, 2.0f, 1.0f})));
                   }});
  cases.push_back({"scale", {3, 4}, [](Graph& g, Var x) { return g.scale(x, -1.7f); }});
  cases.push_back({"matmul", {3, 4}, [&](Graph& g, Var x) {
                     Rng r2(72);
                     return g.matmul(x, g.input(randu(r2, {4, 5})));
                   }});
  cases.push_back({"matmul_nt", {3, 4}, [&](Graph& g, Var x) {
                     Rng r2(73);
                     return g.matmul(x, g.input(randu(r2, {5, 4})), true);
                   }});
  cases.push_back({"matmul_rhs", {4, 5}, [&](Graph& g, Var x) {
                     Rng r2(74);
                     return g.matmul(g.input(randu(r2, {3, 4})), x);
                   }});
  cases.push_back({"conv2d", {2, 2, 5, 6}, [&](Graph& g, Var x) {
                     Rng r2(75);
                     Var w = g.input(randu(r2, {3, 2, 3, 3}, -0.5f, 0.5f));
                     Var b = g.input(randu(r2, {3}, -0.1f, 0.1f));
                     return g.conv2d(x, w, b, 2, 1);
                   }});
  cases.push_back({"conv2d_kernel", {3, 2, 3, 3}, [&](Graph& g, Var w) {
                     Rng r2(76);
                     Var x = g.input(randu(r2, {2, 2, 5, 6}));
                     Var b = g.input(randu(r2, {3}, -0.1f, 0.1f));
                     return g.conv2d(x, w, b, 1, 0);
                   }});
  cases.push_back({"relu", {3, 4}, [](Graph& g, Var x) { return g.relu(x); }, 0.08f});
  cases.push_back({"gelu", {3, 4}, [](Graph& g, Var x) { return g.gelu(x); }});
  cases.push_back({"softmax", {3, 4}, [](Graph& g, Var x) { return g.softmax(x); }});
  cases.push_back({"layernorm", {3, 8}, [&](Graph& g, Var x) {
                     Rng r2(77);
                     return g.layernorm(x, g.input(randu(r2, {8}, 0.5f, 1.5f)),
                                        g.input(randu(r2, {8}, -0.2f, 0.2f)));
                   }});
  cases.push_back({"reshape", {3, 4}, [](Graph& g, Var x) { return g.reshape(x, {2, 6}); }});
  cases.push_back({"concat", {3, 4}, [&](Graph& g, Var x) {
                     Rng r2(78);
                     return g.concat({x, g.input(randu(r2, {3, 2})), x}, 1);
                   }});
  cases.push_back({"slice", {3, 6}, [](Graph& g, Var x) { return g.slice(x, 1, 1, 3); }});
  cases.push_back({"mean_rows", {3, 6}, [](Graph& g, Var x) { return g.mean_rows(x); }});

  for (auto& c : cases) {
    INFO("op: " << c.name);
    ParamStore ps;
    Array x0 = randu(rng, c.shape, -1.0f, 1.0f);
    if (c.min_abs > 0.0f)
      for (float& v : x0.data) v += (v >= 0.0f ? c.min_abs : -c.min_abs);
    ps.create("x", std::move(x0));
    // fixed random projection to a scalar so every output coordinate matters
    auto build = [&](Graph& g) {
      Var y = c.body(g, g.param(ps, "x"));
      Var flat = g.reshape(y, {1, static_cast<int>(g.value(y).numel())});
      Rng r4(100);
      Var p = g.input(randu(r4, {static_cast<int>(g.value(y).numel()), 1}));
      Var s = g.matmul(flat, p);
      return g.sum(g.mul(s, s));
    };
    auto loss_value = [&]() {
      Graph g;
      return g.value(build(g)).data[0];
    };
    {
      Graph g;
      ps.zero_grads();
      g.backward(build(g));
    }
    auto report = oracles::fd_check_params(ps, loss_value);
    CHECK_MESSAGE(report.max_rel < 1e-3f, c.name, " max rel err ", report.max_rel);
  }
}

TEST_CASE("conv2d identity kernel and hand convolution") {
  Graph g;
  Array img({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Var out = g.conv2d(g.input(img), g.input(Array({1, 1, 1, 1}, {1.0f})),
                     g.input(zeros({1})), 1, 0);
  CHECK(g.value(out).data == img.data);

  Var pool = g.conv2d(g.input(Array::full({1, 1, 4, 4}, 1.0f)),
                      g.input(Array::full({1, 1, 2, 2}, 1.0f)), g.input(zeros({1})), 2, 0);
  CHECK(g.value(pool).shape == std::vector<int>{1, 1, 2, 2});
  for (float v : g.value(pool).data) CHECK(v == 4.0f);
}

TEST_CASE("conv2d output extent and oversized kernel error") {
  Graph g;
  // floor((H + 2p - k)/s) + 1
  Var out = g.conv2d(g.input(Array({1, 1, 7, 9})), g.input(Array({2, 1, 3, 3})),
                     g.input(zeros({2})), 2, 1);
  CHECK(g.value(out).shape == std::vector<int>{1, 2, 4, 5});
  CHECK_THROWS_AS(g.conv2d(g.input(Array({1, 1, 2, 2})), g.input(Array({1, 1, 5, 5})),
                           g.input(zeros({1})), 1, 1),
                  std::invalid_argument);
}

TEST_CASE("multi-head attention") {
  Rng rng(31);
  SUBCASE("single token reduces to value projection") {
    ParamStore ps;
    create_attention_params(ps, "attn", 8, rng);
    Graph g;
    Array x = randu(rng, {1, 8});
    AttentionWeights w = load_attention_params(g, ps, "attn");
    Var out = multi_head_attention(g, g.input(x), w, 2);
    // attention over one token is the identity: out = (x Wv + bv) Wo + bo
    Var v = g.add(g.matmul(g.input(x), g.param(ps, "attn.wv")), g.param(ps, "attn.bv"));
    Var expect = g.add(g.matmul(v, g.param(ps, "attn.wo")), g.param(ps, "attn.bo"));
    for (int64_t i = 0; i < 8; ++i)
      CHECK(g.value(out).data[i] == doctest::Approx(g.value(expect).data[i]).epsilon(1e-5));
  }
  SUBCASE("rejects indivisible head count") {
    ParamStore ps;
    create_attention_params(ps, "attn", 6, rng);
    Graph g;
    AttentionWeights w = load_attention_params(g, ps, "attn");
    CHECK_THROWS_AS(multi_head_attention(g, g.input(Array({2, 6})), w, 4), std::invalid_argument);
  }
  SUBCASE("two tokens match explicit softmax(QK^T/sqrt(dh))V") {
    // d=2, one head; weights chosen by hand, biases zero.
    ParamStore ps;
    ps.create("a.wq", Array({2, 2}, {1, 0, 0, 1}));
    ps.create("a.wk", Array({2, 2}, {0, 1, 1, 0}));
    ps.create("a.wv", Array({2, 2}, {2, 0, 0, 0.5f}));
    ps.create("a.wo", Array({2, 2}, {1, 0, 0, 1}));
    ps.create("a.bq", zeros({2}));
    ps.create("a.bk", zeros({2}));
    ps.create("a.bv", zeros({2}));
    ps.create("a.bo", zeros({2}));
    Graph g;
    AttentionWeights w = load_attention_params(g, ps, "a");
    Array x({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    Var out = multi_head_attention(g, g.input(x), w, 1);
    // Q = x, K = x with swapped cols, V = diag(2, .5) applied.
    // Q = [[1,0],[0,1]], K = [[0,1],[1,0]], V = [[2,0],[0,0.5]]
    // scores/sqrt(2): row0: [q0.k0, q0.k1] = [0, 1]/sqrt2; row1: [1, 0]/sqrt2
    double s = 1.0 / std::sqrt(2.0);
    double e0 = std::exp(0.0), e1 = std::exp(s);
    double a01 = e1 / (e0 + e1), a00 = e0 / (e0 + e1);
    // row0 attends a00 to token0, a01 to token1 -> v = a00*[2,0] + a01*[0,0.5]
    CHECK(g.value(out).at({0, 0}) == doctest::Approx(2.0 * a00).epsilon(1e-5));
    CHECK(g.value(out).at({0, 1}) == doctest::Approx(0.5 * a01).epsilon(1e-5));
    CHECK(g.value(out).at({1, 0}) == doctest::Approx(2.0 * a01).epsilon(1e-5));
    CHECK(g.value(out).at({1, 1}) == doctest::Approx(0.5 * a00).epsilon(1e-5));
  }
  SUBCASE("gradients pass finite differences") {
    ParamStore ps;
    create_attention_params(ps, "attn", 8, rng);
    Array x = randu(rng, {3, 8});
    auto build = [&](Graph& g) {
      AttentionWeights w = load_attention_params(g, ps, "attn");
      Var out = multi_head_attention(g, g.input(x), w, 2);
      return g.sum(g.mul(out, out));
    };
    auto loss_value = [&]() {
      Graph g;
      return g.value(build(g)).data[0];
    };
    {
      Graph g;
      ps.zero_grads();
      g.backward(build(g));
    }
    auto report = oracles::fd_check_params(ps, loss_value);
    CHECK_MESSAGE(report.max_rel < 1e-3f, "worst param: ", report.worst_param);
  }
}

TEST_CASE("adamw") {
  SUBCASE("zero gradient and zero weight decay leave params unchanged") {
    ParamStore ps;
    ps.create("x", Array({3}, {1, -2, 3}));
    AdamWConfig cfg;
    cfg.weight_decay = 0.0f;
    adamw_step(ps, cfg);
    CHECK(ps.value("x").data == std::vector<float>{1, -2, 3});
  }
  SUBCASE("one step on f(x)=x^2 decreases |x|") {
    ParamStore ps;
    ps.create("x", Array({1}, {1.0f}));
    ps.grad("x").data[0] = 2.0f;  // d/dx x^2 at 1
    AdamWConfig cfg;
    cfg.lr = 0.1f;
    cfg.weight_decay = 0.0f;
    adamw_step(ps, cfg);
    // bias-corrected mhat = 2, vhat = 4 -> step = lr * 2/(2+eps) ~= 0.1
    CHECK(std::fabs(ps.value("x").data[0]) < 1.0f);
    CHECK(ps.value("x").data[0] == doctest::Approx(0.9f).epsilon(1e-4));
  }
  SUBCASE("100 steps converge on a 2-D quadratic") {
    ParamStore ps;
    ps.create("x", Array({2}, {1.5f, -2.0f}));
    AdamWConfig cfg;
    cfg.lr = 0.1f;
    cfg.weight_decay = 0.0f;
    float loss = 0.0f;
    for (int i = 0; i < 100; ++i) {
      ps.zero_grads();
      Graph g;
      Var x = g.param(ps, "x");
      Var l = g.mean(g.mul(x, x));
      loss = g.value(l).data[0];
      g.backward(l);
      adamw_step(ps, cfg);
    }
    CHECK(loss < 1e-3f);
  }
  SUBCASE("NaN gradient is rejected naming the parameter") {
    ParamStore ps;
    ps.create("enc.w", Array({1}, {1.0f}));
    ps.grad("enc.w").data[0] = std::nanf("");
    CHECK_THROWS_WITH_AS(adamw_step(ps, AdamWConfig{}), doctest::Contains("enc.w"),
                         std::runtime_error);
  }
}

TEST_CASE("checkpoint container round trip and errors") {
  Rng rng(47);
  ParamStore ps;
  ps.create("a.weight", randu(rng, {3, 5}));
  ps.create("b.bias", randu(rng, {7}));
  std::string path = "test_ckpt.vntw";
  save_checkpoint(ps, path);

  ParamStore loaded;
  load_checkpoint(loaded, path);
  CHECK(loaded.names() == ps.names());
  CHECK(loaded.value("a.weight").data == ps.value("a.weight").data);
  CHECK(loaded.value("b.bias").shape == std::vector<int>{7});

  // corrupt the magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  ParamStore bad;
  CHECK_THROWS_WITH_AS(load_checkpoint(bad, path), doctest::Contains("bad magic"),
                       std::runtime_error);

  // truncated payload
  save_checkpoint(ps, path);
  {
    std::ifstream f(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    std::ofstream g(path, std::ios::binary | std::ios::trunc);
    g.write(all.data(), static_cast<std::streamsize>(all.size() - 9));
  }
  ParamStore trunc;
  CHECK_THROWS_WITH_AS(load_checkpoint(trunc, path), doctest::Contains("truncated"),
                       std::runtime_error);
  std::remove(path.c_str());
}
