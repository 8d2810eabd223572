// Command-line front end: dataset generation, training, evaluation,
// inference with overlay rendering and feature-similarity diagnostics.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "psgnn/evaluate.hpp"
#include "psgnn/model.hpp"
#include "psgnn/params.hpp"
#include "psgnn/render.hpp"
#include "psgnn/runtime.hpp"
#include "psgnn/scene.hpp"
#include "psgnn/train.hpp"

using nlohmann::json;
using namespace psgnn;

namespace {

json report_json(const EvalReport& r, const MatchOptions& opts) {
  json scenes = json::array();
  for (const auto& s : r.scenes) {
    json matches = json::array();
    for (const auto& m : s.matches) {
      matches.push_back({{"detection", m.detection}, {"ground_truth", m.ground_truth}, {"distance_px", m.distance_px}});
    }
    scenes.push_back({{"scene", s.scene},
                      {"true_positives", s.true_positives},
                      {"false_positives", s.false_positives},
                      {"false_negatives", s.false_negatives},
                      {"matches", matches}});
  }
  return {{"true_positives", r.true_positives},
          {"false_positives", r.false_positives},
          {"false_negatives", r.false_negatives},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1()},
          {"threshold_px", opts.threshold_px},
          {"reference_px", opts.reference_px},
          {"threshold_px_at_image_size", opts.threshold_px / opts.reference_px * static_cast<double>(kImageSize)},
          {"image_size_px", kImageSize},
          {"ordered", opts.ordered},
          {"scenes", scenes}};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Attentional graph parking-slot detection on synthetic around-view scenes"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic labelled dataset file");
  std::string gen_out;
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  SceneConfig scene_cfg;
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  gen->add_option("--count", gen_count, "Number of scenes")->required();
  gen->add_option("--seed", gen_seed, "Base seed")->required();
  gen->add_option("--slots-min", scene_cfg.slots_min, "Minimum slots per scene");
  gen->add_option("--slots-max", scene_cfg.slots_max, "Maximum slots per scene");
  gen->add_option("--distractors", scene_cfg.distractors, "Distractor shapes per scene");
  gen->add_option("--noise", scene_cfg.noise_sigma, "Gaussian pixel noise sigma");
  gen->add_option("--gap-probability", scene_cfg.gap_probability, "Chance of a gap between neighbouring slots");
  gen->add_option("--rotation-jitter", scene_cfg.rotation_jitter, "Heading jitter in radians");

  // train
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string tr_data, tr_out;
  TrainOptions tr_opts;
  ModelConfig model_cfg;
  std::string variant = "attentional";
  bool no_pos = false, quiet = false;
  tr->add_option("--data", tr_data, "Training dataset")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--epochs", tr_opts.epochs, "Epochs")->required();
  tr->add_option("--seed", tr_opts.seed, "Seed")->required();
  tr->add_option("--variant", variant, "attentional | fcn-baseline")
      ->check(CLI::IsMember({"attentional", "fcn-baseline"}));
  tr->add_option("--layers", model_cfg.gnn.layers, "Graph layers");
  tr->add_option("--heads", model_cfg.gnn.heads, "Attention heads");
  tr->add_option("--lambda1", model_cfg.loss.lambda1, "Point loss weight");
  tr->add_option("--lambda2", model_cfg.loss.lambda2, "Line loss weight");
  tr->add_flag("--no-pos-encoder", no_pos, "Disable the positional encoder");
  tr->add_option("--batch-size", tr_opts.batch_size, "Minibatch size");
  tr->add_option("--lr", tr_opts.learning_rate, "Adam learning rate");
  tr->add_option("--max-scenes", tr_opts.max_scenes, "Use only the first N scenes (0 = all)");
  tr->add_option("--conf-threshold", model_cfg.decode.conf_threshold, "Point confidence threshold");
  tr->add_option("--nms-radius", model_cfg.decode.nms_radius, "NMS radius (normalised)");
  tr->add_option("--pair-threshold", model_cfg.pair_threshold, "Entrance probability threshold");
  tr->add_flag("--quiet", quiet, "Suppress per-epoch logging");

  // eval
  auto* ev = app.add_subcommand("eval", "Precision/recall of a checkpoint on a dataset");
  std::string ev_ckpt, ev_data;
  MatchOptions match_opts;
  bool ev_json = false, unordered = false;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset")->required();
  ev->add_option("--threshold-px", match_opts.threshold_px, "Match threshold in 600 px reference pixels");
  ev->add_flag("--json", ev_json, "Emit the report as JSON");
  ev->add_flag("--unordered", unordered, "Accept detections with swapped endpoints");

  // infer
  auto* inf = app.add_subcommand("infer", "Detect slots in one image and draw an overlay");
  std::string inf_ckpt, inf_image, inf_data, inf_out;
  std::size_t inf_index = 0;
  inf->add_option("--ckpt", inf_ckpt, "Checkpoint")->required();
  auto* image_opt = inf->add_option("--image", inf_image, "Input PPM image (256 x 256)");
  auto* data_opt = inf->add_option("--data", inf_data, "Dataset to take the image from");
  inf->add_option("--index", inf_index, "Scene index within --data");
  inf->add_option("--out", inf_out, "Overlay PPM path")->required();
  image_opt->excludes(data_opt);

  // similarity
  auto* sim = app.add_subcommand("similarity", "Paired vs unpaired node feature similarity");
  std::string sim_ckpt, sim_data;
  bool sim_json = false;
  sim->add_option("--ckpt", sim_ckpt, "Checkpoint")->required();
  sim->add_option("--data", sim_data, "Dataset")->required();
  sim->add_flag("--json", sim_json, "Emit JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      validate(scene_cfg);
      DatasetWriter writer(gen_out);
      for (std::size_t i = 0; i < gen_count; ++i) writer.append(generate_scene(scene_cfg, mix_seed(gen_seed, i)));
      writer.finish();
      std::cout << "wrote " << gen_count << " scenes to " << gen_out << "\n";
    } else if (*tr) {
      model_cfg.gnn.variant = parse_variant(variant);
      model_cfg.use_pos_encoder = !no_pos;
      validate(model_cfg);
      if (!quiet) tr_opts.log = &std::cerr;
      const TrainResult result = train(tr_data, model_cfg, tr_opts);
      save_checkpoint(result.params, tr_out);
      std::cout << "wrote checkpoint " << tr_out << " (" << result.params.parameter_count() << " parameters, final loss "
                << (result.epochs.empty() ? 0.0 : result.epochs.back().total) << ")\n";
    } else if (*ev) {
      match_opts.ordered = !unordered;
      const ModelParams params = load_checkpoint(ev_ckpt);
      const EvalReport report = evaluate(params, ev_data, match_opts);
      if (ev_json) {
        std::cout << report_json(report, match_opts).dump(2) << "\n";
      } else {
        std::printf("TP %zu  FP %zu  FN %zu  precision %.4f  recall %.4f  F1 %.4f\n", report.true_positives,
                    report.false_positives, report.false_negatives, report.precision, report.recall, report.f1());
      }
    } else if (*inf) {
      const ModelParams params = load_checkpoint(inf_ckpt);
      Tensor image;
      if (!inf_image.empty()) {
        image = read_ppm(inf_image);
      } else if (!inf_data.empty()) {
        DatasetReader reader(inf_data);
        image = reader.read(inf_index).image;
      } else {
        throw CLI::ValidationError("infer", "one of --image or --data is required");
      }
      const Inference result = infer(params, image);
      render_overlay(image, result.slots, inf_out, result.points);
      std::printf("%zu marking-points, %zu entrance lines\n", result.points.size(), result.slots.size());
      for (const auto& s : result.slots) {
        std::printf("  (%.4f, %.4f) -> (%.4f, %.4f)  t=%.4f\n", s.x1, s.y1, s.x2, s.y2, s.t);
      }
    } else if (*sim) {
      const ModelParams params = load_checkpoint(sim_ckpt);
      const SimilarityReport r = similarity_report(params, sim_data);
      if (sim_json) {
        std::cout << json{{"paired_before", r.paired_before},   {"unpaired_before", r.unpaired_before},
                          {"paired_after", r.paired_after},     {"unpaired_after", r.unpaired_after},
                          {"paired_count", r.paired_count},     {"unpaired_count", r.unpaired_count},
                          {"scenes_used", r.scenes_used}}
                         .dump(2)
                  << "\n";
      } else {
        std::printf("before GNN: paired %.4f  unpaired %.4f  gap %.4f\n", r.paired_before, r.unpaired_before,
                    r.gap_before());
        std::printf("after GNN:  paired %.4f  unpaired %.4f  gap %.4f\n", r.paired_after, r.unpaired_after,
                    r.gap_after());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
