// facepipe command-line front end. Exit codes: 0 ok, 1 partial failure,
// 2 configuration error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "facepipe/annotations.hpp"
#include "facepipe/image_io.hpp"
#include "facepipe/metrics.hpp"
#include "facepipe/pipeline.hpp"
#include "facepipe/service.hpp"
#include "facepipe/synthetic.hpp"
#include "facepipe/transformer.hpp"

namespace fs = std::filesystem;
using namespace facepipe;

namespace {

constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

PoseService* g_service = nullptr;

void add_pipeline_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--renderer", cfg.renderer, "warp or identity")->capture_default_str();
  cmd->add_option("--iterations", cfg.iterations, "reenactment steps per view")->capture_default_str();
  cmd->add_option("--transformer", cfg.transformer_checkpoint, "landmark transformer checkpoint");
  cmd->add_option("--prune-radius", cfg.prune_radius, "degrees")->capture_default_str();
  cmd->add_option("--blur-threshold", cfg.blur_threshold, "variance-of-Laplacian floor, 0 disables")
      ->capture_default_str();
  cmd->add_option("--crop-size", cfg.crop_size, "face crop resolution")->capture_default_str();
  cmd->add_option("--smooth-min-weight", cfg.smoothing.min_weight)->capture_default_str();
  cmd->add_option("--smooth-motion-scale", cfg.smoothing.motion_scale, "px/frame")->capture_default_str();
  cmd->add_option("--smooth-window", cfg.smoothing.window, "frames, odd")->capture_default_str();
  cmd->add_flag("!--no-smooth", cfg.smooth, "disable temporal smoothing");
  cmd->add_option("--seed", cfg.seed)->capture_default_str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

void report_failures(const std::vector<FrameFailure>& failures) {
  for (const auto& f : failures)
    std::cerr << "frame " << f.frame << " (" << f.file << "): " << f.message << "\n";
}

// Row-wise pairing of two embedding sets; with pairs > 0 rows of `b` are
// drawn at random for each sampled row of `a`.
std::vector<std::pair<Eigen::Index, Eigen::Index>> pairing(const EmbeddingSet& a, const EmbeddingSet& b, int pairs,
                                                           std::uint64_t seed) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  if (pairs <= 0) {
    if (a.count() != b.count()) throw ConfigError("row-wise metrics need equally many vectors");
    for (Eigen::Index i = 0; i < a.count(); ++i) out.emplace_back(i, i);
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> ra(0, a.count() - 1), rb(0, b.count() - 1);
  for (int k = 0; k < pairs; ++k) out.emplace_back(ra(rng), rb(rng));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facepipe: face reenactment and swapping geometry toolkit"};
  app.require_subcommand(1);

  // build-map
  PipelineConfig map_cfg;
  fs::path map_out;
  auto* build = app.add_subcommand("build-map", "build the appearance map of a source frame directory");
  build->add_option("--source", map_cfg.source_dir)->required();
  build->add_option("--out", map_out, "map JSON file")->required();
  add_pipeline_flags(build, map_cfg);

  // curate
  fs::path curate_in, curate_out;
  std::size_t curate_max = 100;
  auto* curate = app.add_subcommand("curate", "keep the frames with the most landmark variance");
  curate->add_option("--input", curate_in)->required();
  curate->add_option("--out", curate_out)->required();
  curate->add_option("--max-frames", curate_max)->capture_default_str();

  // swap
  PipelineConfig swap_cfg;
  auto* swap = app.add_subcommand("swap", "swap the source face onto every target frame");
  swap->add_option("--source", swap_cfg.source_dir)->required();
  swap->add_option("--target", swap_cfg.target_dir)->required();
  swap->add_option("--out", swap_cfg.output_dir)->required();
  swap->add_option("--blend-tol", swap_cfg.blend_tolerance, "Poisson relative residual")->capture_default_str();
  swap->add_option("--erode-width", swap_cfg.erode_width, "soft-erosion ramp, px")->capture_default_str();
  add_pipeline_flags(swap, swap_cfg);

  // reenact-path
  PipelineConfig path_cfg;
  fs::path path_file;
  auto* path = app.add_subcommand("reenact-path", "pose-only reenactment along a list of poses");
  path->add_option("--source", path_cfg.source_dir)->required();
  path->add_option("--path", path_file, "JSON pose list")->required();
  path->add_option("--out", path_cfg.output_dir)->required();
  add_pipeline_flags(path, path_cfg);

  // reenact-expression
  PipelineConfig expr_cfg;
  auto* expr = app.add_subcommand("reenact-expression", "transfer source mouth shapes onto target frames");
  expr->add_option("--source", expr_cfg.source_dir)->required();
  expr->add_option("--target", expr_cfg.target_dir)->required();
  expr->add_option("--out", expr_cfg.output_dir)->required();
  expr->add_option("--erode-width", expr_cfg.erode_width)->capture_default_str();
  add_pipeline_flags(expr, expr_cfg);

  // metrics
  std::vector<fs::path> fid_files, id_files, fec_files, l1_dirs;
  fs::path metrics_out, metrics_csv;
  int id_pairs = 0;
  std::uint64_t metrics_seed = 0;
  auto* metrics = app.add_subcommand("metrics", "evaluation metrics over images and supplied embeddings");
  metrics->add_option("--fid", fid_files, "two embedding CSVs")->expected(2);
  metrics->add_option("--id", id_files, "two identity-embedding CSVs")->expected(2);
  metrics->add_option("--fec", fec_files, "two 16-d expression-embedding CSVs")->expected(2);
  metrics->add_option("--l1", l1_dirs, "two directories of equally named PNGs")->expected(2);
  metrics->add_option("--id-pairs", id_pairs, "random identity pairs (0: row-wise)")->capture_default_str();
  metrics->add_option("--seed", metrics_seed)->capture_default_str();
  metrics->add_option("--out", metrics_out, "report JSON (stdout when omitted)");
  metrics->add_option("--csv", metrics_csv, "report CSV");

  // serve
  PipelineConfig serve_cfg;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP service for interactive pose exploration");
  serve->add_option("--source", serve_cfg.source_dir)->required();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  add_pipeline_flags(serve, serve_cfg);

  // train-transformer
  RotationCorpusSpec corpus;
  TrainConfig train_cfg;
  fs::path ckpt_out, loss_csv;
  auto* train_cmd = app.add_subcommand("train-transformer", "train the landmark transformer on synthetic rotations");
  train_cmd->add_option("--out", ckpt_out, "checkpoint file")->required();
  train_cmd->add_option("--loss-csv", loss_csv);
  train_cmd->add_option("--samples", corpus.samples)->capture_default_str();
  train_cmd->add_option("--iterations", train_cfg.iterations)->capture_default_str();
  train_cmd->add_option("--batch", train_cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--lr-halving-steps", train_cfg.lr_halving_steps)->capture_default_str();
  train_cmd->add_option("--seed", train_cfg.seed)->capture_default_str();

  // synth-data
  SyntheticSequenceSpec seq_spec;
  fs::path synth_out, synth_corpus;
  int corpus_samples = 256;
  auto* synth = app.add_subcommand("synth-data", "write a synthetic face sequence and landmark corpus");
  synth->add_option("--out", synth_out, "frame directory")->required();
  synth->add_option("--frames", seq_spec.frames)->capture_default_str();
  synth->add_option("--width", seq_spec.width)->capture_default_str();
  synth->add_option("--height", seq_spec.height)->capture_default_str();
  synth->add_option("--seed", seq_spec.seed)->capture_default_str();
  synth->add_option("--corpus", synth_corpus, "also write a transformer corpus JSON");
  synth->add_option("--corpus-samples", corpus_samples)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*build) {
      const SourceModel model = build_source_model(map_cfg);
      write_text(map_out, map_to_json(model.map).dump(2) + "\n");
      std::cout << model.map.views.size() << " views, " << model.map.triangles.size() << " triangles\n";
    } else if (*curate) {
      const FrameDirectory dir = load_frame_directory(curate_in, false);
      if (dir.sequence.empty()) throw ConfigError("no frames in " + curate_in.string());
      const FrameSequence kept = curate_sequence(dir.sequence, curate_max);
      fs::create_directories(curate_out);
      for (const auto& f : kept) {
        FrameRecord rec = f;
        const fs::path image = fs::path(f.image_path);
        fs::copy_file(image, curate_out / image.filename(), fs::copy_options::overwrite_existing);
        rec.image_path = (curate_out / image.filename()).string();
        if (f.mask_path) {
          const fs::path mask(*f.mask_path);
          fs::copy_file(mask, curate_out / mask.filename(), fs::copy_options::overwrite_existing);
          rec.mask_path = (curate_out / mask.filename()).string();
        }
        write_annotation(rec, curate_out / (image.stem().string() + ".json"));
      }
      std::cout << kept.size() << " of " << dir.sequence.size() << " frames kept\n";
      report_failures([&] {
        std::vector<FrameFailure> v;
        for (const auto& e : dir.errors) v.push_back({-1, e.file.string(), e.message});
        return v;
      }());
      return dir.errors.empty() ? 0 : kExitPartial;
    } else if (*swap) {
      const SwapResult r = run_swap(swap_cfg);
      report_failures(r.failures);
      std::cout << r.frames.size() << " frames written, " << r.failures.size() << " failed\n";
      return r.exit_code();
    } else if (*path) {
      const auto poses = load_pose_path(path_file);
      const auto views = run_pose_reenact(path_cfg, poses);
      std::cout << views.size() << " frames written\n";
    } else if (*expr) {
      const ExpressionResult r = run_expression_reenact(expr_cfg);
      report_failures(r.failures);
      std::cout << r.outputs.size() << " frames written, " << r.failures.size() << " failed\n";
      return r.failures.empty() ? 0 : kExitPartial;
    } else if (*metrics) {
      MetricReport report;
      if (!fid_files.empty())
        report.global["fid"] = frechet_distance(load_embeddings_csv(fid_files[0]), load_embeddings_csv(fid_files[1]));
      if (!id_files.empty()) {
        const EmbeddingSet a = load_embeddings_csv(id_files[0]), b = load_embeddings_csv(id_files[1]);
        for (auto [i, j] : pairing(a, b, id_pairs, metrics_seed))
          report.add("id", identity_similarity(a.vectors.row(i).transpose(), b.vectors.row(j).transpose()));
      }
      if (!fec_files.empty()) {
        const EmbeddingSet a = load_embeddings_csv(fec_files[0]), b = load_embeddings_csv(fec_files[1]);
        for (auto [i, j] : pairing(a, b, 0, 0))
          report.add("fec", fec_distance(a.vectors.row(i).transpose(), b.vectors.row(j).transpose()));
      }
      if (!l1_dirs.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(l1_dirs[0]))
          if (e.path().extension() == ".png" && !e.path().stem().string().ends_with("_mask"))
            files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
          report.add("l1", l1_distance(load_image(f), load_image(l1_dirs[1] / f.filename())));
      }
      const std::string json = report.to_json().dump(2) + "\n";
      if (metrics_out.empty())
        std::cout << json;
      else
        write_text(metrics_out, json);
      if (!metrics_csv.empty()) write_text(metrics_csv, report.to_csv());
    } else if (*serve) {
      auto model = std::make_shared<const SourceModel>(build_source_model(serve_cfg));
      PoseService service(model);
      const int bound = service.bind(host, port);
      g_service = &service;
      std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
      });
      std::cout << "serving " << model->map.views.size() << " views on http://" << host << ":" << bound << "\n"
                << std::flush;
      service.listen();
      g_service = nullptr;
    } else if (*train_cmd) {
      const auto data = rotation_corpus(corpus);
      const TrainResult r = train(data, train_cfg);
      save_checkpoint(r.model, ckpt_out);
      if (!loss_csv.empty()) write_loss_csv(r.loss_curve, loss_csv);
      std::vector<TransformerSample> held = rotation_corpus({.samples = 256, .seed = corpus.seed + 1});
      Eigen::MatrixXd X(kTransformerInputDim, static_cast<Eigen::Index>(held.size()));
      Eigen::MatrixXd Y(kTransformerOutputDim, static_cast<Eigen::Index>(held.size()));
      for (std::size_t i = 0; i < held.size(); ++i) {
        X.col(static_cast<Eigen::Index>(i)) = encode_input(held[i].source, held[i].target_pose);
        Y.col(static_cast<Eigen::Index>(i)) = encode_output(held[i].target);
      }
      std::cout << "held-out mse " << inference_loss(r.model, X, Y) << " (identity baseline "
                << identity_baseline_mse(held) << ")\n";
    } else if (*synth) {
      const FrameSequence seq = synthetic_sequence(seq_spec);
      write_sequence(seq, synth_out);
      if (!synth_corpus.empty()) {
        const auto samples = rotation_corpus({.samples = corpus_samples, .seed = seq_spec.seed});
        nlohmann::json j = {{"version", kSchemaVersion}, {"samples", nlohmann::json::array()}};
        for (const auto& s : samples)
          j["samples"].push_back(
              {{"source", to_json(s.source)}, {"target_pose", to_json(s.target_pose)}, {"target", to_json(s.target)}});
        write_text(synth_corpus, j.dump() + "\n");
      }
      std::cout << seq.size() << " frames written to " << synth_out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return 0;
}
