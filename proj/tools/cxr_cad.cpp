// cxr-cad: preprocess | run | ablate | report | phantom
#include <iostream>

#include "CLI11.hpp"
#include "cxr/error.hpp"
#include "cxr/pipeline.hpp"

namespace {

int exit_code(cxr::ErrorKind k) {
  switch (k) {
    case cxr::ErrorKind::usage: return 1;
    case cxr::ErrorKind::data: return 2;
    case cxr::ErrorKind::numerical: return 3;
  }
  return 2;
}

void log_line(const std::string& msg) { std::cerr << msg << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chest X-ray three-class CAD pipeline"};
  app.require_subcommand(1);

  std::string config_path, mode_text = "full", manifest, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<int> freeze_below;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--manifest", manifest, "manifest CSV (overrides paths.manifest)");
    sub->add_option("--seed", seed, "seed for splitting, init, shuffling and augmentation");
    sub->add_option("--out", out, "output directory (overrides paths.reports, or paths.samples for preprocess)");
  };

  auto* pre = app.add_subcommand("preprocess", "write per-mode multi-channel samples");
  add_common(pre);
  pre->add_option("--mode", mode_text, "simple | filter-base | full")->capture_default_str();

  auto* run = app.add_subcommand("run", "split, train, evaluate and report one mode");
  add_common(run);
  run->add_option("--mode", mode_text, "simple | filter-base | full")->capture_default_str();
  run->add_option("--epochs", epochs, "maximum epochs");
  run->add_option("--freeze-below", freeze_below, "freeze conv blocks 1..N");
  std::string pretrained;
  run->add_option("--pretrained", pretrained, "checkpoint whose conv-block weights are imported");

  auto* abl = app.add_subcommand("ablate", "run all three modes and tabulate");
  add_common(abl);
  abl->add_option("--epochs", epochs, "maximum epochs");
  abl->add_option("--freeze-below", freeze_below, "freeze conv blocks 1..N");

  auto* rep = app.add_subcommand("report", "metrics for a given confusion matrix");
  std::string matrix, positive = "covid19";
  bool kv = false;
  rep->add_option("--matrix", matrix, "rows true, columns predicted: a,b,c;d,e,f;g,h,i")->required();
  rep->add_option("--positive", positive, "positive class for the binary collapse")->capture_default_str();
  rep->add_flag("--kv", kv, "machine-readable name=value output");

  auto* ph = app.add_subcommand("phantom", "generate synthetic chest-like images");
  cxr::PhantomOptions popts;
  std::string cls_text = "all";
  ph->add_option("--class", cls_text, "normal | pneumonia | covid19 | all")->capture_default_str();
  ph->add_option("--count", popts.count, "images per class")->capture_default_str();
  ph->add_option("--seed", popts.seed)->capture_default_str();
  ph->add_option("--size", popts.size, "image side in pixels")->capture_default_str();
  ph->add_option("--out", popts.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*ph) {
      if (cls_text != "all") {
        popts.cls = cxr::parse_class(cls_text);
        if (!popts.cls) cxr::fail_usage("unknown class '" + cls_text + "'");
      }
      std::cout << cxr::cmd_phantom(popts).string() << "\n";
      return 0;
    }
    if (*rep) {
      const auto pos = cxr::parse_class(positive);
      if (!pos) cxr::fail_usage("unknown class '" + positive + "'");
      const auto r = cxr::cmd_report(cxr::parse_matrix(matrix), *pos);
      std::cout << (kv ? cxr::render_report_kv(r) : cxr::render_report_text(r));
      return 0;
    }

    cxr::PipelineConfig cfg = config_path.empty() ? cxr::PipelineConfig{} : cxr::load_config(config_path);
    if (!manifest.empty()) cfg.paths.manifest = manifest;
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.max_epochs = *epochs;
    if (freeze_below) cfg.net.freeze_below = *freeze_below;
    const auto parsed = cxr::parse_mode(mode_text);
    if (!parsed) cxr::fail_usage("unknown mode '" + mode_text + "'");
    const cxr::PreprocessMode mode = *parsed;

    if (*pre) {
      if (!out.empty()) cfg.paths.samples = out;
      const auto summary = cxr::cmd_preprocess(cfg, mode, log_line);
      std::cout << summary.render();
      if (summary.too_many_failures()) cxr::fail_data("more than 10% of the images failed to preprocess");
      return 0;
    }
    if (!out.empty()) cfg.paths.reports = out;
    if (*run) {
      cxr::RunOptions ro;
      if (!pretrained.empty()) ro.pretrained = pretrained;
      const auto r = cxr::cmd_run(cfg, mode, ro, log_line);
      std::cout << "mode: " << cxr::mode_name(mode) << "\nbest epoch: " << r.best_epoch << "\n\n"
                << cxr::render_report_text(r.report);
      return 0;
    }
    if (*abl) {
      std::cout << cxr::cmd_ablate(cfg, log_line).table;
      return 0;
    }
  } catch (const cxr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
