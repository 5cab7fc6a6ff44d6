#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "cxr/error.hpp"
#include "cxr/nn/checkpoint.hpp"
#include "cxr/pipeline.hpp"
#include "cxr/random.hpp"

namespace cxr {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_data("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot write " + path.string());
  out << text;
  if (!out) fail_data("cannot write " + path.string());
}

void emit(const std::function<void(const std::string&)>& log, const std::string& msg) {
  if (log) log(msg);
}

Manifest manifest_for(const PipelineConfig& cfg) {
  if (cfg.paths.manifest.empty()) fail_usage("no manifest given (paths.manifest or --manifest)");
  return load_manifest(cfg.paths.manifest);
}

}  // namespace

// ---- phantom --------------------------------------------------------------------

fs::path cmd_phantom(const PhantomOptions& opts) {
  if (opts.out_dir.empty()) fail_usage("phantom needs an output directory");
  if (opts.count == 0) fail_usage("phantom count must be >= 1");
  ensure_dir(opts.out_dir);
  const fs::path manifest_path = opts.out_dir / "manifest.csv";

  Manifest m;
  if (fs::exists(manifest_path)) m = load_manifest(manifest_path);
  std::set<std::string> existing;
  for (const auto& r : m.records) existing.insert(r.path);

  std::vector<ClassLabel> classes;
  if (opts.cls) {
    classes.push_back(*opts.cls);
  } else {
    classes.assign(kAllClasses.begin(), kAllClasses.end());
  }
  for (ClassLabel cls : classes) {
    for (std::size_t i = 0; i < opts.count; ++i) {
      const std::string name = std::string(class_name(cls)) + "_s" + std::to_string(opts.seed) + "_" +
                               std::to_string(i) + ".pgm";
      const std::uint64_t image_seed = mix_seed(opts.seed * 1000003ULL + i);
      save_image(generate_phantom(cls, image_seed, opts.size), opts.out_dir / name);
      if (existing.insert(name).second) m.records.push_back({name, cls});
    }
  }
  save_manifest(m, manifest_path);
  return manifest_path;
}

// ---- preprocess -------------------------------------------------------------------

fs::path sample_path(const PipelineConfig& cfg, const ManifestRecord& r, PreprocessMode mode) {
  const std::string stem = fs::path(r.path).stem().string();
  return cfg.paths.samples / (stem + "." + std::string(mode_name(mode)) + ".mcs");
}

std::string PreprocessSummary::render() const {
  std::ostringstream out;
  out << "processed " << (images.size() - failed) << " of " << images.size() << " images ("
      << failed << " failed)\n";
  for (ClassLabel c : kAllClasses) out << "  " << class_name(c) << ": " << class_counts[class_index(c)] << "\n";
  std::size_t removed = 0;
  for (const auto& s : images) removed += s.removed ? 1 : 0;
  out << "  diaphragm removed: " << removed << "\n";
  for (const auto& s : images) {
    if (!s.ok) out << "  failed: " << s.path << ": " << s.error << "\n";
  }
  return out.str();
}

PreprocessSummary cmd_preprocess(const PipelineConfig& cfg, PreprocessMode mode,
                                 const std::function<void(const std::string&)>& log) {
  cfg.preprocess.validate();
  const Manifest m = manifest_for(cfg);
  ensure_dir(cfg.paths.samples);

  std::set<fs::path> targets;
  for (const auto& r : m.records) {
    if (!targets.insert(sample_path(cfg, r, mode)).second) {
      fail_data("two manifest records map to the same sample file: " + sample_path(cfg, r, mode).string());
    }
  }

  PreprocessSummary summary;
  summary.images.resize(m.records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < m.records.size(); i = next++) {
      const ManifestRecord& r = m.records[i];
      ImageStatus& st = summary.images[i];
      st.path = r.path;
      st.label = r.label;
      try {
        const GrayImage img = load_image(m.resolve(r));
        PreprocessResult res = preprocess_image(img, cfg.preprocess, mode);
        res.sample.label = r.label;
        save_sample(res.sample, sample_path(cfg, r, mode));
        st.removed = res.removed;
        st.ok = true;
      } catch (const std::exception& e) {
        st.error = e.what();
      }
    }
  };
  unsigned n_threads = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, m.records.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string csv = "path,label,status,removed\n";
  for (const auto& st : summary.images) {
    if (st.ok) {
      ++summary.class_counts[class_index(st.label)];
    } else {
      ++summary.failed;
      emit(log, "skipped " + st.path + ": " + st.error);
    }
    csv += st.path + "," + std::string(class_name(st.label)) + "," + (st.ok ? "ok" : "failed") + "," +
           (st.removed ? "true" : "false") + "\n";
  }
  write_text(cfg.paths.samples / ("summary." + std::string(mode_name(mode)) + ".csv"), csv);
  return summary;
}

// ---- run ------------------------------------------------------------------------

namespace {

nn::Example load_example(const PipelineConfig& cfg, const ManifestRecord& r, PreprocessMode mode) {
  const MultiChannelSample s = load_sample(sample_path(cfg, r, mode));
  if (s.label && *s.label != r.label) fail_data("label mismatch between manifest and sample for " + r.path);
  const std::size_t side = cfg.net.input_size;
  nn::Example ex{nn::Tensor({3, side, side}), static_cast<int>(class_index(r.label))};
  for (std::size_t c = 0; c < 3; ++c) {
    const GrayImage plane = resize_area(s.channels[c], static_cast<int>(side), static_cast<int>(side));
    std::copy(plane.pixels().begin(), plane.pixels().end(), ex.input.data() + c * side * side);
  }
  return ex;
}

void require_samples(const PipelineConfig& cfg, const Manifest& m, PreprocessMode mode) {
  std::size_t missing = 0;
  std::string first;
  for (const auto& r : m.records) {
    if (!fs::exists(sample_path(cfg, r, mode))) {
      if (missing++ == 0) first = sample_path(cfg, r, mode).string();
    }
  }
  if (missing > 0) {
    fail_data("missing samples for mode " + std::string(mode_name(mode)) + ": " + std::to_string(missing) +
              " file(s), e.g. " + first + " (run `preprocess --mode " + std::string(mode_name(mode)) + "`)");
  }
}

}  // namespace

RunResult cmd_run(const PipelineConfig& cfg, PreprocessMode mode, const RunOptions& opts,
                  const std::function<void(const std::string&)>& log) {
  cfg.validate();
  const Manifest m = manifest_for(cfg);
  require_samples(cfg, m, mode);
  const SplitResult split = stratified_split(m, cfg.split.test_fraction, cfg.split.val_fraction, cfg.seed);

  auto load_all = [&](const std::vector<ManifestRecord>& recs) {
    std::vector<nn::Example> out;
    out.reserve(recs.size());
    for (const auto& r : recs) out.push_back(load_example(cfg, r, mode));
    return out;
  };
  const auto train_set = load_all(split.train);
  const auto val_set = load_all(split.validation);
  const auto test_set = load_all(split.test);
  emit(log, std::string(mode_name(mode)) + ": train " + std::to_string(train_set.size()) + ", validation " +
                std::to_string(val_set.size()) + ", test " + std::to_string(test_set.size()));

  const nn::NetworkSpec net = cfg.net.build();
  nn::Parameters params = nn::init_parameters(net, cfg.seed);
  if (opts.pretrained) {
    // Only the convolutional base is transferred; the head is always fresh.
    std::vector<nn::NamedTensor> base;
    for (auto& t : nn::load_checkpoint(*opts.pretrained)) {
      if (t.name.starts_with("block")) base.push_back(std::move(t));
    }
    const std::size_t n = nn::import_parameters(params, base, false);
    emit(log, "imported " + std::to_string(n) + " tensors from " + opts.pretrained->string());
  }

  nn::TrainConfig tc;
  tc.batch_size = cfg.batch_size;
  tc.max_epochs = cfg.max_epochs;
  tc.adam = cfg.optimizer;
  tc.schedule = cfg.schedule;
  tc.augment = cfg.augment_enabled;
  tc.augment_cfg = cfg.augment;
  tc.augment_cfg.seed = cfg.seed;
  tc.seed = cfg.seed;

  nn::TrainResult tr = nn::train(net, std::move(params), train_set, val_set, tc, [&](const nn::EpochRecord& r) {
    if (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == tc.max_epochs) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %zu: train loss %.4f acc %.3f | val loss %.4f acc %.3f | lr %.3g",
                    r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr);
      emit(log, buf);
    }
  });

  std::vector<nn::Tensor> inputs;
  std::vector<int> truth;
  for (const auto& ex : test_set) {
    inputs.push_back(ex.input);
    truth.push_back(ex.label);
  }
  const auto preds = nn::predict(net, tr.best, inputs);
  std::vector<int> predicted;
  for (const auto& p : preds) predicted.push_back(p.label);

  RunResult result{build_report(confusion(truth, predicted)), tr.history, tr.best_epoch,
                   cfg.paths.reports / std::string(mode_name(mode))};
  ensure_dir(result.out_dir);
  const fs::path ckpt_dir =
      cfg.paths.checkpoints.empty() ? result.out_dir : cfg.paths.checkpoints / std::string(mode_name(mode));
  ensure_dir(ckpt_dir);

  nn::write_history_csv(result.out_dir / "history.csv", tr.history);
  nn::save_checkpoint(tr.best, ckpt_dir / "best.ckpt");
  std::string pcsv = "path,label,predicted,p_normal,p_pneumonia,p_covid19\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", preds[i].probs[0], preds[i].probs[1], preds[i].probs[2]);
    pcsv += split.test[i].path + "," + std::string(class_name(split.test[i].label)) + "," +
            std::string(class_name(class_from_index(static_cast<std::size_t>(preds[i].label)))) + buf;
  }
  write_text(result.out_dir / "predictions.csv", pcsv);
  std::string text = "mode: " + std::string(mode_name(mode)) + "\nbest epoch: " + std::to_string(tr.best_epoch) +
                     "\n\n" + render_report_text(result.report);
  write_text(result.out_dir / "report.txt", text);
  write_text(result.out_dir / "report.kv", "mode=" + std::string(mode_name(mode)) + "\nbest_epoch=" +
                                               std::to_string(tr.best_epoch) + "\n" +
                                               render_report_kv(result.report));
  return result;
}

AblationResult cmd_ablate(const PipelineConfig& cfg, const std::function<void(const std::string&)>& log) {
  cfg.validate();
  const Manifest m = manifest_for(cfg);
  const PreprocessMode modes[] = {PreprocessMode::simple, PreprocessMode::filter_base, PreprocessMode::full};
  for (PreprocessMode mode : modes) require_samples(cfg, m, mode);

  AblationResult out;
  std::string kv;
  for (PreprocessMode mode : modes) {
    const RunResult r = cmd_run(cfg, mode, {}, log);
    out.rows.push_back({std::string(mode_name(mode)), r.report.matrix});
    const std::string prefix = std::string(mode_name(mode)) + ".";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%saccuracy=%.17g\n%skappa=%.17g\n%sci_low=%.17g\n%sci_high=%.17g\n",
                  prefix.c_str(), r.report.accuracy, prefix.c_str(), r.report.kappa, prefix.c_str(),
                  r.report.accuracy_ci.low, prefix.c_str(), r.report.accuracy_ci.high);
    kv += buf;
  }
  out.table = render_ablation_table(out.rows);
  ensure_dir(cfg.paths.reports);
  write_text(cfg.paths.reports / "ablation.txt", out.table);
  write_text(cfg.paths.reports / "ablation.kv", kv);
  return out;
}

ClassificationReport cmd_report(const ConfusionMatrix3& m, ClassLabel positive) {
  return build_report(m, positive);
}

}  // namespace cxr
