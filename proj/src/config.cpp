#include "laid/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "laid/error.hpp"

namespace laid {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used != v.size() || v[0] == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Config, "'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Config, "'" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::Config, "'" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace

std::vector<AttackKind> parse_attack_list(std::string_view text) {
  std::vector<AttackKind> out;
  if (trim(text).empty()) return out;
  for (const auto& name : split_list(text)) {
    const auto k = parse_attack_kind(name);
    if (!k) throw Error(ErrorKind::Config, "unknown attack '" + name + "'");
    out.push_back(*k);
  }
  return out;
}

EfficiencyWeights parse_lambda(std::string_view text) {
  const auto parts = split_list(text);
  if (parts.size() != 3) throw Error(ErrorKind::Config, "lambda expects three comma-separated values");
  EfficiencyWeights w{to_double("lambda", parts[0]), to_double("lambda", parts[1]),
                      to_double("lambda", parts[2])};
  try {
    w.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return w;
}

void apply_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "seed") c.seed = to_u64(key, value);
  else if (key == "out") c.out_dir = value;
  else if (key == "train_cache") c.train_cache = value;
  else if (key == "val_cache") c.val_cache = value;
  else if (key == "test_cache") c.test_cache = value;
  else if (key == "image_root") c.image_root = value;
  else if (key == "subsample_total") c.subsample_total = to_u64(key, value);
  else if (key == "image_size") c.image_size = to_u64(key, value);
  else if (key == "synth_train_per_class") c.synth_train_per_class = to_u64(key, value);
  else if (key == "synth_val_per_class") c.synth_val_per_class = to_u64(key, value);
  else if (key == "synth_test_per_class") c.synth_test_per_class = to_u64(key, value);
  else if (key == "attacks") c.attacks = parse_attack_list(value);
  else if (key == "epochs") c.epochs = static_cast<int>(to_u64(key, value));
  else if (key == "batch") c.batch = to_u64(key, value);
  else if (key == "lr") c.lr = to_double(key, value);
  else if (key == "lambda") c.lambda = parse_lambda(value);
  else if (key == "candidates") c.candidates = value;
  else if (key == "top_k") c.top_k = to_u64(key, value);
  else if (key == "fusion_clean") c.fusion_clean = to_bool(key, value);
  else if (key == "keep_caches") c.keep_caches = to_bool(key, value);
  else throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(line_no) + " lacks '='");
    }
    apply_config_value(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c;
  apply_config_text(c, ss.str());
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
  if (out_dir.empty()) fail("output directory is empty");
  if (epochs < 1 || epochs > 100) fail("epochs must be in [1, 100]");
  if (batch < 1) fail("batch must be >= 1");
  if (!(lr > 0)) fail("lr must be positive");
  if (top_k < 1) fail("top_k must be >= 1");
  if (image_size < 16) fail("image_size must be >= 16");
  if (lambda.lambda1 < 0 || lambda.lambda2 < 0 || lambda.lambda3 < 0) fail("lambda must be >= 0");
  const bool any_cache = !train_cache.empty() || !val_cache.empty() || !test_cache.empty();
  if (any_cache && (train_cache.empty() || val_cache.empty() || test_cache.empty())) {
    fail("train_cache, val_cache and test_cache must be given together");
  }
  for (const auto* p : {&train_cache, &val_cache, &test_cache, &image_root, &candidates}) {
    if (!p->empty() && !std::filesystem::exists(*p)) fail("path does not exist: " + *p);
  }
  if (!any_cache && image_root.empty()) {
    if (synth_train_per_class < 8 || synth_val_per_class < 8 || synth_test_per_class < 8) {
      fail("synthetic splits need at least 8 samples per class");
    }
    if (image_size % 2 != 0) fail("synthetic image_size must be even");
  }
}

std::string RunConfig::to_text() const {
  std::string attacks_text;
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    if (i) attacks_text += ',';
    attacks_text += std::string(to_string(attacks[i]));
  }
  char buf[2048];
  std::snprintf(buf, sizeof buf,
                "seed = %llu\nout = %s\ntrain_cache = %s\nval_cache = %s\ntest_cache = %s\n"
                "image_root = %s\nsubsample_total = %zu\nimage_size = %zu\n"
                "synth_train_per_class = %zu\nsynth_val_per_class = %zu\n"
                "synth_test_per_class = %zu\nattacks = %s\nepochs = %d\nbatch = %zu\n"
                "lr = %.17g\nlambda = %.17g,%.17g,%.17g\ncandidates = %s\ntop_k = %zu\n"
                "fusion_clean = %s\nkeep_caches = %s\n",
                static_cast<unsigned long long>(seed), out_dir.c_str(), train_cache.c_str(),
                val_cache.c_str(), test_cache.c_str(), image_root.c_str(), subsample_total,
                image_size, synth_train_per_class, synth_val_per_class, synth_test_per_class,
                attacks_text.c_str(), epochs, batch, lr, lambda.lambda1, lambda.lambda2,
                lambda.lambda3, candidates.c_str(), top_k, fusion_clean ? "true" : "false",
                keep_caches ? "true" : "false");
  return buf;
}

}  // namespace laid
