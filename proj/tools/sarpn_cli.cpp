// Command-line front end over the C interface.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sarpn/sarpn.h"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 2 configuration, 3 data/format/io, 4 divergence, 1 internal.
int exit_code(sarpn_status s) {
  switch (s) {
    case SARPN_OK: return 0;
    case SARPN_ERR_CONFIG: return 2;
    case SARPN_ERR_DATA:
    case SARPN_ERR_IO: return 3;
    case SARPN_ERR_DIVERGENCE: return 4;
    default: return 1;
  }
}

struct Failure {
  sarpn_status status;
  std::string message;
};

[[noreturn]] void fail(sarpn_status status, std::string message) {
  throw Failure{status, std::move(message)};
}

void check(sarpn_status s) {
  if (s != SARPN_OK) fail(s, sarpn_last_error());
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

struct ConfigDeleter {
  void operator()(sarpn_config* c) const { sarpn_config_destroy(c); }
};
struct ModelDeleter {
  void operator()(sarpn_model* m) const { sarpn_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<sarpn_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<sarpn_model, ModelDeleter>;

std::string config_text(const sarpn_config* c) {
  std::size_t needed = 0;
  check(sarpn_config_text(c, nullptr, 0, &needed));
  std::string buf(needed, '\0');
  check(sarpn_config_text(c, buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Manifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> paths;
  std::string seed;
  std::string config;  // key = value lines

  void write(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir.empty() ? fs::path(".") : dir, ec);
    const fs::path path = (dir.empty() ? fs::path(".") : dir) / "run_manifest.txt";
    std::ofstream out(path, std::ios::binary);
    out << "command = " << command << "\n";
    for (const auto& [k, v] : paths) out << k << " = " << v << "\n";
    out << "seed = " << seed << "\n";
    out << "timestamp = " << timestamp() << "\n";
    out << "[config]\n" << config;
    if (!out) fail(SARPN_ERR_IO, "cannot write run manifest: " + path.string());
  }
};

std::uint64_t parse_seed(const std::string& text, const char* origin) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size() || text.front() == '-') throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(SARPN_ERR_CONFIG, std::string("invalid seed from ") + origin + ": '" + text + "'");
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("SARPN_SEED");
  if (!v || !*v) return std::nullopt;
  return parse_seed(v, "SARPN_SEED");
}

std::pair<int, int> parse_size(const std::string& text) {
  int h = 0, w = 0;
  char x = 0, tail = 0;
  // HxW
  if (std::sscanf(text.c_str(), "%d%c%d%c", &h, &x, &w, &tail) != 3 || (x != 'x' && x != 'X')) {
    fail(SARPN_ERR_CONFIG, "--size must look like HxW, got '" + text + "'");
  }
  return {h, w};
}

fs::path parent_or_cwd(const fs::path& p) {
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

// ---- subcommands ----

struct GenArgs {
  std::string out;
  int count = 200;
  std::optional<std::uint64_t> seed;
  std::string size = "64x64";
  int objects = 4;
  int levels = 5;
  int val_count = 0;
  std::string split = "train";
  double min_depth = 1.0;
  double max_depth = 5.0;
};

void run_gen(const GenArgs& a) {
  const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(0);
  const auto [h, w] = parse_size(a.size);
  std::ostringstream cfg;
  cfg << "count = " << a.count << "\nheight = " << h << "\nwidth = " << w
      << "\nobjects = " << a.objects << "\nlevels = " << a.levels << "\nsplit = " << a.split
      << "\nval_count = " << a.val_count << "\nmin_depth = " << a.min_depth
      << "\nmax_depth = " << a.max_depth << "\n";
  Manifest{"gen", {{"out", a.out}}, std::to_string(seed), cfg.str()}.write(a.out);

  sarpn_generate_options o;
  sarpn_generate_options_init(&o);
  o.seed = seed;
  o.count = a.count;
  o.height = h;
  o.width = w;
  o.n_objects = a.objects;
  o.levels = a.levels;
  o.min_depth = a.min_depth;
  o.max_depth = a.max_depth;
  o.split = a.split.c_str();
  check(sarpn_generate(a.out.c_str(), &o));
  if (a.val_count > 0) {
    o.count = a.val_count;
    o.split = "val";
    check(sarpn_generate(a.out.c_str(), &o));
  }
  std::printf("generated %d %s scene(s)", a.count, a.split.c_str());
  if (a.val_count > 0) std::printf(" and %d val scene(s)", a.val_count);
  std::printf(" in %s\n", a.out.c_str());
}

struct ConfigArgs {
  std::string preset = "default";
  std::string config_file;
  std::string ablation;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::vector<std::string> overrides;  // key=value

  // Whether any flag that can change the model shape was given.
  bool shapes_model() const {
    return preset != "default" || !config_file.empty() || !ablation.empty() || !overrides.empty();
  }
};

// Precedence: explicit flags, then the config file, then SARPN_SEED (seed
// only), then preset defaults.
ConfigPtr build_config(const ConfigArgs& a) {
  sarpn_config* raw = nullptr;
  check(sarpn_config_create(a.preset.c_str(), &raw));
  ConfigPtr cfg(raw);
  if (auto s = env_seed()) check(sarpn_config_set(cfg.get(), "seed", std::to_string(*s).c_str()));
  if (!a.config_file.empty()) check(sarpn_config_load(cfg.get(), a.config_file.c_str()));
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(SARPN_ERR_CONFIG, "--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    check(sarpn_config_set(cfg.get(), trim(kv.substr(0, eq)).c_str(),
                           trim(kv.substr(eq + 1)).c_str()));
  }
  if (!a.ablation.empty()) check(sarpn_config_set(cfg.get(), "ablation", a.ablation.c_str()));
  if (a.seed) check(sarpn_config_set(cfg.get(), "seed", std::to_string(*a.seed).c_str()));
  if (a.epochs) check(sarpn_config_set(cfg.get(), "epochs", std::to_string(*a.epochs).c_str()));
  check(sarpn_config_validate(cfg.get()));
  return cfg;
}

std::string seed_of(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("seed = ", 0) == 0) return line.substr(7);
  }
  return "";
}

struct TrainArgs {
  ConfigArgs config;
  std::string data;
  std::string out;
  std::string resume;
};

void run_train(const TrainArgs& a) {
  ConfigPtr cfg = build_config(a.config);
  const std::string text = config_text(cfg.get());
  Manifest{"train",
           {{"data", a.data}, {"out", a.out}, {"resume", a.resume}, {"config_file", a.config.config_file}},
           seed_of(text),
           text}
      .write(a.out);
  if (!fs::is_directory(a.data)) fail(SARPN_ERR_IO, "dataset directory not found: " + a.data);
  auto report = [](const sarpn_epoch_stats* s, void*) {
    std::printf("epoch=%d lr=%.3g total_loss=%.6f l_depth=%.6f l_grad=%.6f l_normal=%.6f\n",
                s->epoch, s->lr, s->total_loss, s->l_depth, s->l_grad, s->l_normal);
    std::fflush(stdout);
  };
  check(sarpn_train(cfg.get(), a.data.c_str(), a.out.c_str(),
                    a.resume.empty() ? nullptr : a.resume.c_str(), report, nullptr));
  std::printf("checkpoint: %s\n", (fs::path(a.out) / "checkpoint.ckpt").string().c_str());
}

struct EvalArgs {
  ConfigArgs config;
  std::string data;
  std::string ckpt;
  std::string report;
  std::string split = "val";
  bool oracle = false;
};

void run_eval(const EvalArgs& a) {
  if (a.oracle == !a.ckpt.empty()) fail(SARPN_ERR_CONFIG, "eval needs exactly one of --ckpt or --oracle");
  ModelPtr model;
  ConfigPtr cfg;
  if (!a.ckpt.empty()) {
    sarpn_model* m = nullptr;
    check(sarpn_model_load(a.ckpt.c_str(), &m));
    model.reset(m);
    if (a.config.shapes_model()) {
      // checked against the checkpoint by sarpn_evaluate
      cfg = build_config(a.config);
    } else {
      sarpn_config* c = nullptr;
      check(sarpn_model_config(model.get(), &c));
      cfg.reset(c);
    }
  } else {
    cfg = build_config(a.config);
  }
  const std::string text = config_text(cfg.get());
  Manifest{"eval",
           {{"data", a.data}, {"ckpt", a.ckpt}, {"report", a.report}, {"split", a.split},
            {"oracle", a.oracle ? "true" : "false"}},
           seed_of(text),
           text}
      .write(parent_or_cwd(a.report));
  check(sarpn_evaluate(model.get(), cfg.get(), a.data.c_str(), a.split.c_str(), a.report.c_str()));
  std::ifstream table(a.report + ".table", std::ios::binary);
  std::printf("%s", std::string(std::istreambuf_iterator<char>(table), {}).c_str());
}

struct PredictArgs {
  std::string ckpt;
  std::string in;
  std::string out;
  bool pyramid = false;
  bool pointcloud = false;
  std::string intrinsics;
};

void run_predict(const PredictArgs& a) {
  sarpn_predict_options o;
  sarpn_predict_options_init(&o);
  o.pyramid = a.pyramid;
  o.pointcloud = a.pointcloud;
  if (!a.intrinsics.empty()) {
    char tail = 0;
    if (std::sscanf(a.intrinsics.c_str(), "%lf,%lf,%lf,%lf%c", &o.fx, &o.fy, &o.cx, &o.cy, &tail) != 4) {
      fail(SARPN_ERR_CONFIG, "--intrinsics expects fx,fy,cx,cy, got '" + a.intrinsics + "'");
    }
    o.has_intrinsics = 1;
  }
  sarpn_model* m = nullptr;
  check(sarpn_model_load(a.ckpt.c_str(), &m));
  ModelPtr model(m);
  sarpn_config* c = nullptr;
  check(sarpn_model_config(model.get(), &c));
  ConfigPtr cfg(c);
  const std::string text = config_text(cfg.get());
  Manifest{"predict",
           {{"ckpt", a.ckpt}, {"in", a.in}, {"out", a.out},
            {"pyramid", a.pyramid ? "true" : "false"},
            {"pointcloud", a.pointcloud ? "true" : "false"}, {"intrinsics", a.intrinsics}},
           seed_of(text),
           text}
      .write(parent_or_cwd(a.out));
  check(sarpn_predict(model.get(), a.in.c_str(), a.out.c_str(), &o));
  std::printf("wrote %s.dep\n", a.out.c_str());
}

struct PlotArgs {
  std::string report;
  std::string dep;
  std::string out;
};

void run_plot(const PlotArgs& a) {
  if (a.report.empty() == a.dep.empty()) fail(SARPN_ERR_CONFIG, "plot needs exactly one of --report or --dep");
  Manifest{"plot", {{"report", a.report}, {"dep", a.dep}, {"out", a.out}}, "", ""}.write(
      parent_or_cwd(a.out));
  if (!a.report.empty()) {
    check(sarpn_plot_losses(a.report.c_str(), a.out.c_str()));
  } else {
    check(sarpn_plot_depth(a.dep.c_str(), a.out.c_str()));
  }
  std::printf("wrote %s\n", a.out.c_str());
}

void add_config_flags(CLI::App* cmd, ConfigArgs& c) {
  cmd->add_option("--config", c.config_file, "key = value configuration file");
  cmd->add_option("--preset", c.preset, "base configuration: default or desk");
  cmd->add_option("--ablation", c.ablation, "baseline, baseline_rpd or full");
  cmd->add_option("--seed", c.seed, "run seed (falls back to SARPN_SEED)");
  cmd->add_option("--epochs", c.epochs, "number of epochs");
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular depth estimation with a residual pyramid decoder"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic RGBD dataset");
  g->add_option("--out", gen.out, "dataset root")->required();
  g->add_option("--count", gen.count, "number of scenes");
  g->add_option("--seed", gen.seed, "dataset seed (falls back to SARPN_SEED)");
  g->add_option("--size", gen.size, "scene size HxW");
  g->add_option("--objects", gen.objects, "objects per scene");
  g->add_option("--levels", gen.levels, "pyramid levels the size must support");
  g->add_option("--split", gen.split, "split directory name");
  g->add_option("--val-count", gen.val_count, "also write this many scenes to the val split");
  g->add_option("--min-depth", gen.min_depth, "nearest depth in meters");
  g->add_option("--max-depth", gen.max_depth, "farthest depth in meters");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--data", train.data, "dataset root")->required();
  t->add_option("--out", train.out, "output directory")->required();
  t->add_option("--resume", train.resume, "checkpoint to resume from");
  add_config_flags(t, train.config);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--data", eval.data, "dataset root")->required();
  e->add_option("--ckpt", eval.ckpt, "checkpoint file");
  e->add_option("--report", eval.report, "report file")->required();
  e->add_option("--split", eval.split, "split to evaluate");
  e->add_flag("--oracle", eval.oracle, "score the ground truth itself instead of a model");
  add_config_flags(e, eval.config);

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "predict depth for one image");
  p->add_option("--ckpt", pred.ckpt, "checkpoint file")->required();
  p->add_option("--in", pred.in, "input .rgb raster")->required();
  p->add_option("--out", pred.out, "output prefix")->required();
  p->add_flag("--pyramid", pred.pyramid, "write every level and residual");
  p->add_flag("--pointcloud", pred.pointcloud, "write PREFIX.xyz");
  p->add_option("--intrinsics", pred.intrinsics, "fx,fy,cx,cy in input pixels");

  PlotArgs plot;
  auto* pl = app.add_subcommand("plot", "render a loss curve or a depth map");
  pl->add_option("--report", plot.report, "epoch CSV");
  pl->add_option("--dep", plot.dep, "depth raster");
  pl->add_option("--out", plot.out, "output image (PPM)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::fprintf(stderr, "error: kind=config_error message=%s\n", one_line(ex.what()).c_str());
    return 2;
  }

  try {
    if (*g) run_gen(gen);
    else if (*t) run_train(train);
    else if (*e) run_eval(eval);
    else if (*p) run_predict(pred);
    else if (*pl) run_plot(plot);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: kind=%s message=%s\n", sarpn_status_name(f.status),
                 one_line(f.message).c_str());
    return exit_code(f.status);
  }
  return 0;
}
