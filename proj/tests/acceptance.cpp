// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <sys/wait.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "psgnn/evaluate.hpp"
#include "psgnn/gnn.hpp"
#include "psgnn/model.hpp"
#include "psgnn/ops.hpp"
#include "psgnn/runtime.hpp"
#include "psgnn/scene.hpp"
#include "test_support.hpp"

using namespace psgnn;
using psgnn::testing::max_abs_diff;
using psgnn::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Workspace {
 public:
  Workspace(fs::path dir, std::string cli) : dir_(std::move(dir)), cli_(std::move(cli)) { fs::create_directories(dir_); }

  fs::path operator/(const std::string& name) const { return dir_ / name; }

  void cli(const std::string& args, const std::string& stdout_file = "") const {
    const std::string out = stdout_file.empty() ? "/dev/null" : (dir_ / stdout_file).string();
    const std::string cmd = cli_ + " " + args + " > " + out + " 2>> " + (dir_ / "cli.log").string();
    std::cout << "  $ psgnn " << args << std::endl;
    const auto t0 = Clock::now();
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw std::runtime_error("command failed: " + cmd);
    std::cout << fmt("    (%.1f s)", seconds_since(t0)) << std::endl;
  }

  // Trains once per distinct name; later criteria reuse the checkpoint.
  fs::path trained(const std::string& name, const std::string& extra) {
    const fs::path ckpt = dir_ / (name + ".ckpt");
    if (done_.insert(name).second) {
      cli("train --data " + (dir_ / "train.psgd").string() + " --out " + ckpt.string() +
          " --epochs 30 --seed 42 --quiet" + extra);
    }
    return ckpt;
  }

  void datasets() {
    if (have_data_) return;
    cli("gen-data --out " + (dir_ / "train.psgd").string() + " --count 2000 --seed 1");
    cli("gen-data --out " + (dir_ / "test.psgd").string() + " --count 500 --seed 2");
    have_data_ = true;
  }

 private:
  fs::path dir_;
  std::string cli_;
  std::set<std::string> done_;
  bool have_data_ = false;
};

EvalReport eval_on_test(Workspace& ws, const fs::path& ckpt) {
  return evaluate(load_checkpoint(ckpt), ws / "test.psgd", MatchOptions{});
}

std::string pr(const EvalReport& r) {
  return fmt("P=%.4f R=%.4f F1=%.4f (TP %zu FP %zu FN %zu)", r.precision, r.recall, r.f1(), r.true_positives,
             r.false_positives, r.false_negatives);
}

Outcome gradients() {
  const auto t0 = Clock::now();
  double op_worst = 0.0, op_abs = 0.0;
  std::size_t op_count = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto errors = psgnn::testing::op_gradient_errors(trial);
    op_count = errors.size();
    for (const auto& [name, err] : errors) {
      op_worst = std::max(op_worst, err.max_relative_error);
      op_abs = std::max(op_abs, err.max_absolute_error);
    }
  }

  SceneConfig two;
  two.slots_min = two.slots_max = 2;
  const SceneRecord scene = generate_scene(two, 2024);
  const ModelParams params = init_model_params(ModelConfig{}, 42);
  auto loss = [&] {
    Rng mask(7);
    return sample_loss(params, scene, true, &mask).total;
  };
  double composite_worst = 0.0, composite_abs = 0.0;
  std::string worst_path;
  std::size_t checked = 0;
  std::set<std::string> modules;
  for (const auto& [path, t] : params.tensors()) {
    const auto r = psgnn::testing::check_gradient(loss, t, 3, 1e-6);
    checked += r.checked;
    composite_abs = std::max(composite_abs, r.max_absolute_error);
    modules.insert(path.substr(0, path.find('.')));
    if (r.max_relative_error > composite_worst) {
      composite_worst = r.max_relative_error;
      worst_path = path;
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = op_worst < 1e-4 && composite_worst < 1e-4 && elapsed < 120.0 && modules.size() >= 5;
  if (worst_path.empty()) worst_path = "-";
  return {pass, fmt("%zu ops: rel %.2e abs %.2e; composite over %zu coords in %zu modules: rel %.2e (%s) abs %.2e; %.1f s",
                    op_count, op_worst, op_abs, checked, modules.size(), composite_worst, worst_path.c_str(),
                    composite_abs, elapsed)};
}

Outcome detection_quality(Workspace& ws) {
  ws.datasets();
  const EvalReport r = eval_on_test(ws, ws.trained("attentional", ""));
  return {r.precision >= 0.95 && r.recall >= 0.95, pr(r) + ", need P>=0.95 and R>=0.95"};
}

Outcome ablation(Workspace& ws) {
  ws.datasets();
  const EvalReport att = eval_on_test(ws, ws.trained("attentional", ""));
  const EvalReport fcn = eval_on_test(ws, ws.trained("fcn", " --variant fcn-baseline"));
  return {att.f1() >= fcn.f1(), fmt("attentional F1 %.4f, fcn-baseline F1 %.4f", att.f1(), fcn.f1())};
}

Outcome similarity(Workspace& ws) {
  ws.datasets();
  const SimilarityReport s = similarity_report(load_checkpoint(ws.trained("attentional", "")), ws / "test.psgd");
  const bool pass = s.paired_after > s.unpaired_after && s.gap_after() >= s.gap_before();
  return {pass, fmt("before: paired %.4f unpaired %.4f; after: paired %.4f unpaired %.4f; gap %.4f -> %.4f",
                    s.paired_before, s.unpaired_before, s.paired_after, s.unpaired_after, s.gap_before(),
                    s.gap_after())};
}

Outcome matching_boundaries() {
  const MatchOptions opts;
  const std::vector<GroundTruthSlot> one = {{0.3, 0.4, 0.5, 0.4}};
  const SlotPrediction exact{0.3, 0.4, 0.5, 0.4, 0.9, 0, 1};
  const SlotPrediction edge{0.3 + 6.0 / 600.0, 0.4, 0.5, 0.4 + 8.0 / 600.0, 0.9, 0, 1};
  const bool exact_tp = match_slots(std::vector{exact}, one, opts).true_positives == 1;
  const bool edge_miss = match_slots(std::vector{edge}, one, opts).true_positives == 0;

  const std::vector<GroundTruthSlot> two = {{0.1, 0.1, 0.3, 0.1}, {0.6, 0.6, 0.8, 0.6}};
  const std::vector<SlotPrediction> dets = {{0.1, 0.1, 0.3, 0.1, 0.9, 0, 1},
                                            {0.6, 0.6, 0.8, 0.6, 0.8, 2, 3},
                                            {0.2, 0.8, 0.4, 0.8, 0.7, 4, 5}};
  EvalReport r;
  r.add(match_slots(dets, two, opts));
  const bool counting = r.true_positives == 2 && r.false_positives == 1 && std::abs(r.precision - 2.0 / 3.0) < 1e-15 &&
                        r.recall == 1.0;
  return {exact_tp && edge_miss && counting,
          fmt("exact->TP %s; norm 10 px->miss %s; counting P=%.4f R=%.4f", exact_tp ? "yes" : "no",
              edge_miss ? "yes" : "no", r.precision, r.recall)};
}

Outcome structural_invariants(Workspace& ws) {
  Rng rng(606);
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* name) {
    if (!ok) failed.emplace_back(name);
  };

  double softmax_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Tensor s = softmax(random_tensor({4, 7}, rng, -20, 20));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) total += s[r * 7 + c];
      softmax_err = std::max(softmax_err, std::abs(total - 1.0));
    }
  }
  check(softmax_err < 1e-12, "softmax normalisation");

  ModelParams p = init_model_params(ModelConfig{}, 7);
  double rows_err = 0.0;
  for (std::size_t h = 0; h < 4; ++h) {
    const Tensor a = attention_weights(random_tensor({6, kNodeWidth}, rng), graph_layer_params(p, 0), h);
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 6; ++c) total += a[r * 6 + c];
      rows_err = std::max(rows_err, std::abs(total - 1.0));
    }
  }
  check(rows_err < 1e-12, "attention rows");

  const std::vector<std::size_t> perm = {4, 2, 0, 5, 1, 3};
  double perm_err = 0.0;
  for (auto variant : {GnnVariant::attentional, GnnVariant::fcn_baseline}) {
    ModelConfig cfg;
    cfg.gnn.variant = variant;
    const ModelParams q = init_model_params(cfg, 8);
    for (int t = 0; t < 10; ++t) {
      const NodeFeatures n{random_tensor({6, kNodeWidth}, rng), random_tensor({6, 2}, rng, 0, 1)};
      const NodeFeatures np{gather_rows(n.features, perm), gather_rows(n.positions, perm)};
      const Tensor y = gnn_forward(n, cfg.gnn, q), yp = gnn_forward(np, cfg.gnn, q);
      perm_err = std::max(perm_err, max_abs_diff(yp.data(), gather_rows(y, perm).data()));
    }
  }
  check(perm_err < 1e-10, "permutation equivariance");

  for (const auto& [path, t] : p.tensors()) {
    if (path.find(".update.fc1.") != std::string::npos) {
      Tensor z = t;
      for (auto& v : z.mutable_data()) v = 0.0;
    }
  }
  const NodeFeatures n{random_tensor({5, kNodeWidth}, rng), random_tensor({5, 2}, rng, 0, 1)};
  check(max_abs_diff(gnn_forward(n, p.config().gnn, p).data(), n.features.data()) == 0.0, "residual identity");

  bool antichain = true;
  for (int t = 0; t < 200; ++t) {
    const GridMap m{random_tensor({kGridSize, kGridSize, 3}, rng, 0, 1), kGridSize};
    const double radius = rng.uniform(0.02, 0.2);
    const auto pts = decode_points(m, 0.3, radius, 16);
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b)
        antichain = antichain && std::hypot(pts[a].x - pts[b].x, pts[a].y - pts[b].y) >= radius;
  }
  check(antichain, "NMS antichain");

  bool convex = true;
  for (int t = 0; t < 200; ++t) {
    const Tensor map = random_tensor({kGridSize, kGridSize, 1}, rng, -3, 3);
    const double x = rng.uniform(), y = rng.uniform();
    const double s = bilinear_sample(map, Tensor({1, 2}, {x, y}))[0];
    const auto c0 = std::min<std::size_t>(static_cast<std::size_t>(x * 15.0), 14);
    const auto r0 = std::min<std::size_t>(static_cast<std::size_t>(y * 15.0), 14);
    double lo = 1e300, hi = -1e300;
    for (std::size_t r : {r0, r0 + 1})
      for (std::size_t c : {c0, c0 + 1}) {
        lo = std::min(lo, map[r * kGridSize + c]);
        hi = std::max(hi, map[r * kGridSize + c]);
      }
    convex = convex && s >= lo - 1e-12 && s <= hi + 1e-12;
  }
  check(convex, "bilinear bounds");

  std::vector<SceneRecord> records;
  for (std::uint64_t s = 0; s < 5; ++s) records.push_back(generate_scene(SceneConfig{}, 900 + s));
  write_dataset(records, ws / "roundtrip.psgd");
  const auto back = read_dataset(ws / "roundtrip.psgd");
  bool same = back.size() == records.size();
  for (std::size_t i = 0; same && i < back.size(); ++i) same = identical(back[i], records[i]);
  write_dataset(back, ws / "roundtrip2.psgd");
  check(same && file_bytes(ws / "roundtrip.psgd") == file_bytes(ws / "roundtrip2.psgd"), "dataset round-trip");

  save_checkpoint(p, ws / "rt.ckpt");
  save_checkpoint(load_checkpoint(ws / "rt.ckpt"), ws / "rt2.ckpt");
  check(file_bytes(ws / "rt.ckpt") == file_bytes(ws / "rt2.ckpt"), "checkpoint round-trip");

  std::string detail = fmt("softmax %.1e, attention rows %.1e, permutation %.1e", softmax_err, rows_err, perm_err);
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {failed.empty(), detail};
}

Outcome determinism(Workspace& ws) {
  ws.datasets();
  const fs::path a = ws.trained("attentional", "");
  const fs::path b = ws.trained("attentional_repeat", "");
  ws.cli("eval --ckpt " + a.string() + " --data " + (ws / "test.psgd").string() + " --json", "a.json");
  ws.cli("eval --ckpt " + b.string() + " --data " + (ws / "test.psgd").string() + " --json", "b.json");
  const bool ckpt_same = file_bytes(a) == file_bytes(b);
  const bool eval_same = file_bytes(ws / "a.json") == file_bytes(ws / "b.json");
  return {ckpt_same && eval_same, fmt("checkpoints identical: %s; eval reports identical: %s", ckpt_same ? "yes" : "no",
                                     eval_same ? "yes" : "no")};
}

Outcome loss_weight(Workspace& ws) {
  ws.datasets();
  const EvalReport high = eval_on_test(ws, ws.trained("attentional", ""));
  const EvalReport low = eval_on_test(ws, ws.trained("lambda1_1", " --lambda1 1"));
  return {low.precision <= high.precision,
          fmt("lambda1=1 precision %.4f, lambda1=100 precision %.4f", low.precision, high.precision)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance criteria 1-8"};
  std::string workdir = PSGNN_ACCEPTANCE_DIR;
  std::string cli = PSGNN_CLI_PATH;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for datasets and checkpoints");
  app.add_option("--cli", cli, "Path to the psgnn executable");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  Workspace ws(workdir, cli);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", [] { return gradients(); }},
      {"detection quality", [&] { return detection_quality(ws); }},
      {"attention vs fcn-baseline", [&] { return ablation(ws); }},
      {"similarity direction", [&] { return similarity(ws); }},
      {"matching boundaries", [] { return matching_boundaries(); }},
      {"structural invariants", [&] { return structural_invariants(ws); }},
      {"training determinism", [&] { return determinism(ws); }},
      {"point loss weight", [&] { return loss_weight(ws); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    std::cout << "criterion " << id << ": " << criteria[i].first << std::endl;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
