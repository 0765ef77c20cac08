#include "laid/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "laid/error.hpp"
#include "laid/fft.hpp"
#include "laid/profiler.hpp"
#include "laid/trend.hpp"

namespace laid {

namespace fs = std::filesystem;

std::vector<PredictionRecord> predict_records(const nn::NetworkGraph& spatial_model,
                                              const nn::NetworkGraph& spectral_model,
                                              const TensorCache& spatial,
                                              const TensorCache& spectral) {
  if (spatial.size() != spectral.size() || spatial.labels != spectral.labels) {
    throw Error(ErrorKind::Data, "spatial and spectral test sets are not aligned");
  }
  const auto sp = nn::predict_scores(spatial_model, spatial.tensors);
  const auto sf = nn::predict_scores(spectral_model, spectral.tensors);
  std::vector<PredictionRecord> records;
  records.reserve(sp.size());
  for (std::size_t i = 0; i < sp.size(); ++i) {
    records.push_back(PredictionRecord::from_scores(sp[i], sf[i], spatial.labels[i]));
  }
  return records;
}

std::uint64_t attack_seed(std::uint64_t run_seed, AttackKind kind) {
  return mix_seed(run_seed, 100 + static_cast<std::uint64_t>(kind));
}

std::pair<TensorCache, std::vector<AttackSpec>> attack_cache(const TensorCache& clean,
                                                             AttackKind kind, std::uint64_t seed) {
  if (clean.domain != DomainTag::Spatial) {
    throw Error(ErrorKind::Data, "attacks apply to spatial caches");
  }
  TensorCache out;
  out.height = clean.height;
  out.width = clean.width;
  out.channels = clean.channels;
  out.range = clean.range;
  out.domain = DomainTag::Spatial;
  std::vector<AttackSpec> specs;
  specs.reserve(clean.size());
  const Rng root(seed);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    Rng rng = root.child(i);
    const AttackSpec spec = sample_attack(kind, rng);
    out.push_back(apply_attack(clean.tensors[i], spec), clean.labels[i]);
    specs.push_back(spec);
  }
  return {std::move(out), std::move(specs)};
}

std::string format_attack_log(const std::vector<AttackSpec>& specs) {
  std::string out = attack_log_header() + "\n";
  for (std::size_t i = 0; i < specs.size(); ++i) out += format_attack_record(i, specs[i]) + "\n";
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
}

std::string format_train_log(const nn::TrainLog& log) {
  std::string out = "epoch\ttrain_loss\tval_accuracy\tlr\n";
  char line[160];
  for (const auto& e : log.epochs) {
    std::snprintf(line, sizeof line, "%d\t%.9g\t%.6f\t%.9g\n", e.epoch, e.train_loss,
                  e.val_accuracy, e.lr);
    out += line;
  }
  std::snprintf(line, sizeof line, "# best_epoch=%d best_val_accuracy=%.6f stopped_early=%d\n",
                log.best_epoch, log.best_val_accuracy, log.stopped_early ? 1 : 0);
  out += line;
  return out;
}

struct Splits {
  TensorCache train, val, test;
};

Splits load_data(const RunConfig& c, const fs::path& out, const Rng& root) {
  Splits s;
  if (!c.train_cache.empty()) {
    s.train = read_cache(c.train_cache);
    s.val = read_cache(c.val_cache);
    s.test = read_cache(c.test_cache);
    for (const TensorCache* t : {&s.train, &s.val, &s.test}) {
      if (t->domain != DomainTag::Spatial) {
        throw Error(ErrorKind::Data, "input caches must be spatial");
      }
    }
    return s;
  }
  if (!c.image_root.empty()) {
    const DatasetManifest all = scan_image_tree(c.image_root);
    DatasetManifest train, held_out;
    for (const auto& e : all.entries) (e.split == Split::Train ? train : held_out).entries.push_back(e);
    if (train.entries.empty() || held_out.entries.empty()) {
      throw Error(ErrorKind::Data, "image tree needs both training and val/test images");
    }
    if (c.subsample_total > 0) {
      Rng sub_rng = root.child(7);
      train = stratified_subsample(train, c.subsample_total, sub_rng);
    }
    Rng split_rng = root.child(6);
    auto [val, test] = split_val_test(held_out, split_rng);
    DatasetManifest listed = train;
    listed.entries.insert(listed.entries.end(), val.entries.begin(), val.entries.end());
    listed.entries.insert(listed.entries.end(), test.entries.begin(), test.entries.end());
    write_text(out / "manifest.tsv", format_manifest(listed));
    s.train = preprocess_images(train, c.image_size);
    s.val = preprocess_images(val, c.image_size);
    s.test = preprocess_images(test, c.image_size);
    return s;
  }
  SynthOptions opts;
  opts.train_per_class = c.synth_train_per_class;
  opts.val_per_class = c.synth_val_per_class;
  opts.test_per_class = c.synth_test_per_class;
  opts.size = c.image_size;
  auto ds = synth_dataset(opts, root.child(1));
  return {std::move(ds.train), std::move(ds.val), std::move(ds.test)};
}

nn::TrainedModel train_domain(const RunConfig& c, const TensorCache& train,
                              const TensorCache& val, const Rng& init_rng, std::uint64_t seed,
                              const std::string& name, const ProgressFn& progress) {
  nn::NetworkGraph net = nn::tiny_detector_arch();
  Rng r = init_rng;
  net.init(r);
  nn::TrainConfig tc;
  tc.max_epochs = c.epochs;
  tc.batch_size = c.batch;
  tc.lr = c.lr;
  tc.seed = seed;
  if (progress) {
    tc.on_epoch = [&](int epoch, double loss, double acc, double lr) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "[%s] epoch %3d loss %.5f val_acc %.2f lr %.1e", name.c_str(),
                    epoch, loss, acc, lr);
      progress(buf);
    };
  }
  return nn::train(std::move(net), {train.tensors, train.labels}, {val.tensors, val.labels}, tc);
}

void emit_training_panel(const fs::path& path, const nn::TrainLog& log, const std::string& title) {
  std::vector<Point> pts;
  for (const auto& e : log.epochs) pts.push_back({static_cast<double>(e.epoch), e.val_accuracy});
  if (pts.size() < 2) return;
  const TrendFit fit = linear_fit(pts);
  write_text(path, emit_scatter_svg(pts, fit, {title, "Epoch", "Validation accuracy (%)"}));
}

class RunLock {
 public:
  explicit RunLock(fs::path path) : path_(std::move(path)) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error(ErrorKind::Config, "run directory is locked: " + path_.string());
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

}  // namespace

RunResult run_pipeline(const RunConfig& config, const ProgressFn& progress) {
  config.validate();
  const fs::path out(config.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorKind::Config, "cannot create output directory " + out.string());
  RunLock lock(out / ".lock");
  fs::remove(out / "FAILED", ec);

  std::string stage = "config";
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  try {
    write_text(out / "config.ini", config.to_text());
    const Rng root(config.seed);
    RunResult result;

    stage = "preprocess";
    note("preprocess");
    Splits spatial = load_data(config, out, root);
    if (config.keep_caches) {
      write_cache(spatial.train, (out / "train_spatial.cache").string());
      write_cache(spatial.val, (out / "val_spatial.cache").string());
      write_cache(spatial.test, (out / "test_spatial.cache").string());
    }

    stage = "spectral";
    note("spectral transform");
    const TensorCache train_f = build_spectral_cache(spatial.train);
    const TensorCache val_f = build_spectral_cache(spatial.val);
    const TensorCache test_f = build_spectral_cache(spatial.test);

    stage = "train";
    auto mp = train_domain(config, spatial.train, spatial.val, root.child(2), mix_seed(config.seed, 3),
                           "spatial", progress);
    auto mf = train_domain(config, train_f, val_f, root.child(4), mix_seed(config.seed, 5),
                           "spectral", progress);
    nn::save_checkpoint(mp.net, (out / "model_spatial.ckpt").string());
    nn::save_checkpoint(mf.net, (out / "model_spectral.ckpt").string());
    write_text(out / "train_spatial.tsv", format_train_log(mp.log));
    write_text(out / "train_spectral.tsv", format_train_log(mf.log));
    result.spatial_log = mp.log;
    result.spectral_log = mf.log;

    stage = "profile";
    result.cost = count_flops(mp.net, {spatial.test.channels, spatial.test.height, spatial.test.width});
    write_text(out / "profile.txt", format_cost_report(result.cost));

    if (!config.candidates.empty()) {
      stage = "select";
      std::ifstream in(config.candidates);
      std::stringstream ss;
      ss << in.rdbuf();
      const auto pool = constraint_filter(parse_candidate_pool(ss.str()));
      write_text(out / "selection.txt",
                 format_ranking(rank_and_dedupe(pool, config.lambda, config.top_k)));
    }

    stage = "evaluate-clean";
    note("clean evaluation");
    const auto clean = predict_records(mp.net, mf.net, spatial.test, test_f);
    for (Setting s : {Setting::CleanSpatial, Setting::CleanSpectral}) {
      auto r = evaluate_protocol(clean, s, &result.cost);
      r.label = "clean";
      result.reports.push_back(r);
    }
    if (config.fusion_clean) {
      auto r = evaluate_protocol(clean, Setting::CleanFusion);
      r.label = "clean";
      result.reports.push_back(r);
    }

    stage = "evaluate-adversarial";
    for (AttackKind kind : config.attacks) {
      note("adversarial evaluation: " + std::string(to_string(kind)));
      auto [attacked, specs] = attack_cache(spatial.test, kind, attack_seed(config.seed, kind));
      write_text(out / ("attacks_" + std::string(to_string(kind)) + ".log"), format_attack_log(specs));
      const TensorCache attacked_f = build_spectral_cache(attacked);
      const auto recs = predict_records(mp.net, mf.net, attacked, attacked_f);
      for (Setting s : {Setting::AdvSpatial, Setting::AdvSpectral, Setting::AdvFusion}) {
        auto r = evaluate_protocol(recs, s, is_fusion(s) ? nullptr : &result.cost);
        r.label = std::string(to_string(kind));
        result.reports.push_back(r);
      }
    }

    stage = "report";
    write_text(out / "metrics.txt", format_reports_text(result.reports));
    write_text(out / "metrics.json", format_reports_json(result.reports));
    emit_training_panel(out / "panel_training_spatial.svg", mp.log, "Spatial detector");
    emit_training_panel(out / "panel_training_spectral.svg", mf.log, "Spectral detector");
    note("done");
    return result;
  } catch (const Error& e) {
    std::ofstream failed(out / "FAILED");
    failed << stage << "\n" << e.what() << "\n";
    throw StageError(stage, e);
  }
}

}  // namespace laid
