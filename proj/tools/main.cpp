// Command-line front end: synthetic data generation, training, evaluation,
// metrics on external maps, model description and sampling-grid dumps.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "spheregan/spheregan.hpp"

namespace fs = std::filesystem;

namespace {

// Distinct exit codes per error category; errors print a single
// machine-parsable line on stderr.
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;
constexpr int kExitData = 5;
constexpr int kExitNumeric = 6;

int fail(const char* category, const std::string& msg, int code) {
  std::cerr << "error: " << category << ": " << msg << '\n';
  return code;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw sgan::IoError("cannot write " + path);
  out << content;
}

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw sgan::IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

sgan::TrainConfig config_from_checkpoint(const sgan::LoadedCheckpoint& ck) {
  return sgan::TrainConfig::from_flat_json(ck.manifest.at("config"));
}

struct LoadedModel {
  std::unique_ptr<sgan::Generator<float>> gen;
  std::unique_ptr<sgan::Discriminator<float>> disc;
  sgan::TrainConfig cfg;
};

LoadedModel load_model(const std::string& checkpoint_dir) {
  LoadedModel m;
  sgan::LoadedCheckpoint ck = sgan::load_checkpoint(checkpoint_dir);
  m.cfg = config_from_checkpoint(ck);
  m.gen = std::make_unique<sgan::Generator<float>>(m.cfg.generator_config());
  m.disc = std::make_unique<sgan::Discriminator<float>>(m.cfg.discriminator_config());
  sgan::restore_models(ck, *m.gen, *m.disc);
  return m;
}

sgan::MapSink make_dump_sink(const std::string& dir) {
  fs::create_directories(dir);
  return [dir](const std::string& video, int t, const sgan::Tensor<float>& map) {
    fs::create_directories(fs::path(dir) / video);
    char name[16];
    std::snprintf(name, sizeof name, "%06d.png", t);
    sgan::write_png_gray((fs::path(dir) / video / name).string(), map);
  };
}

std::string describe_text(const sgan::TrainConfig& cfg) {
  sgan::Generator<float> gen(cfg.generator_config());
  sgan::Discriminator<float> disc(cfg.discriminator_config());
  std::ostringstream os;
  auto table = [&os](const char* title, const std::vector<sgan::LayerInfo>& rows) {
    os << title << '\n';
    os << "  " << std::left << std::setw(8) << "layer" << std::setw(28) << "kind" << std::right
       << std::setw(16) << "output" << std::setw(12) << "params" << '\n';
    for (const auto& r : rows) {
      std::ostringstream shape;
      shape << r.out_c << 'x' << r.out_h << 'x' << r.out_w;
      os << "  " << std::left << std::setw(8) << r.name << std::setw(28) << r.kind << std::right
         << std::setw(16) << shape.str() << std::setw(12) << r.param_count << '\n';
    }
    os << "  total params: " << sgan::total_params(rows) << '\n';
  };
  os << "model " << cfg.height << 'x' << cfg.width() << ", conv mode "
     << sgan::conv_mode_name(cfg.conv_mode) << "\n\n";
  table("generator", gen.describe());
  os << '\n';
  table("discriminator", disc.describe());
  return os.str();
}

// Parses "N" or "A..B" into an inclusive range.
std::pair<int, int> parse_n_range(const std::string& s) {
  auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      int n = std::stoi(s);
      return {n, n};
    }
    int a = std::stoi(s.substr(0, dots));
    int b = std::stoi(s.substr(dots + 2));
    return {a, b};
  } catch (const std::exception&) {
    throw sgan::ConfigError("--n expects N or A..B, got '" + s + "'");
  }
}

int run(int argc, char** argv) {
  CLI::App app{"spherical-convolution GAN for 360-degree video saliency"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  sgan::SynthConfig synth_cfg;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--videos", synth_cfg.num_videos, "number of videos");
  synth->add_option("--frames", synth_cfg.frames_per_video, "frames per video");
  synth->add_option("--height", synth_cfg.height, "frame height (width = 2*height)");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");

  // train
  auto* train = app.add_subcommand("train", "train the GAN");
  std::string train_config;
  std::vector<std::string> overrides;
  train->add_option("--config", train_config, "JSON config file")->required();
  train->add_option("--override", overrides, "key=value config overrides");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (gt hint at t-k)");
  std::string eval_ckpt, eval_data, eval_out = ".", eval_dump;
  int eval_threads = 0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "report output directory");
  eval->add_option("--dump-maps", eval_dump, "write predicted maps as PNGs here");
  eval->add_option("--threads", eval_threads, "worker threads (0 = all cores)");

  // eval-feedback
  auto* evfb = app.add_subcommand("eval-feedback",
                                  "autoregressive evaluation, gt refresh every N frames");
  std::string fb_ckpt, fb_data, fb_out = ".", fb_n = "1", fb_dump;
  int fb_threads = 0;
  evfb->add_option("--checkpoint", fb_ckpt, "checkpoint directory")->required();
  evfb->add_option("--data", fb_data, "dataset directory")->required();
  evfb->add_option("--n", fb_n, "refresh interval N, or a sweep A..B")->required();
  evfb->add_option("--out", fb_out, "report output directory");
  evfb->add_option("--dump-maps", fb_dump, "write predicted maps as PNGs here");
  evfb->add_option("--threads", fb_threads, "worker threads (0 = all cores)");

  // metrics
  auto* met = app.add_subcommand("metrics", "score externally produced maps");
  std::string met_pred, met_gt, met_fix, met_out = ".";
  met->add_option("--pred", met_pred, "directory of predicted PNG maps")->required();
  met->add_option("--gt", met_gt, "directory of ground-truth PNG maps")->required();
  met->add_option("--fixations", met_fix, "directory of fixation CSVs")->required();
  met->add_option("--out", met_out, "report output directory");

  // describe
  auto* desc = app.add_subcommand("describe", "print the layer table and parameter counts");
  std::string desc_config;
  desc->add_option("--config", desc_config, "JSON config file")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "dump a sampling grid as CSV");
  int grid_height = 64;
  bool grid_pool = false;
  std::string grid_out;
  grid->add_option("--height", grid_height, "grid height (width = 2*height)");
  grid->add_flag("--pool", grid_pool, "dump the 2x2 pooling grid instead of the 3x3 conv grid");
  grid->add_option("--out", grid_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return kExitUsage;
  }

  if (*synth) {
    sgan::synth_generate(synth_cfg, synth_out);
    std::cout << "wrote " << synth_cfg.num_videos << " videos to " << synth_out << '\n';
    return 0;
  }

  if (*train) {
    sgan::TrainConfig cfg = sgan::load_train_config(train_config, overrides);
    std::vector<sgan::VideoSequence> dataset = sgan::load_dataset(cfg.data_dir);
    sgan::TrainResult res = sgan::train(cfg, dataset);
    std::cout << "trained " << res.steps << " steps; final checkpoint at "
              << res.final_checkpoint << '\n';
    return 0;
  }

  if (*eval) {
    if (eval_threads != 0) sgan::set_thread_count(eval_threads);
    LoadedModel m = load_model(eval_ckpt);
    auto dataset = sgan::load_dataset(eval_data);
    sgan::MapSink sink = eval_dump.empty() ? sgan::MapSink() : make_dump_sink(eval_dump);
    sgan::MetricsReport report =
        sgan::evaluate(dataset, sgan::make_generator_predictor(*m.gen), m.cfg.k, sink);
    fs::create_directories(eval_out);
    write_json_file((fs::path(eval_out) / "report.json").string(), report.to_json());
    write_text_file((fs::path(eval_out) / "report.txt").string(), report.to_table());
    std::cout << report.to_table();
    return 0;
  }

  if (*evfb) {
    if (fb_threads != 0) sgan::set_thread_count(fb_threads);
    LoadedModel m = load_model(fb_ckpt);
    auto dataset = sgan::load_dataset(fb_data);
    auto predictor = sgan::make_generator_predictor(*m.gen);
    auto [n_lo, n_hi] = parse_n_range(fb_n);
    if (n_lo < 1 || n_hi < n_lo) throw sgan::ConfigError("--n range must satisfy 1 <= A <= B");
    fs::create_directories(fb_out);
    if (n_lo == n_hi) {
      sgan::MapSink sink = fb_dump.empty() ? sgan::MapSink() : make_dump_sink(fb_dump);
      sgan::MetricsReport report = sgan::evaluate_feedback(dataset, predictor, n_lo, sink);
      write_json_file((fs::path(fb_out) / "report.json").string(), report.to_json());
      write_text_file((fs::path(fb_out) / "report.txt").string(), report.to_table());
      std::cout << report.to_table();
      return 0;
    }
    // sweep: one row per N
    nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
    std::ostringstream table;
    table << std::left << std::setw(12) << "N" << std::right << std::setw(10) << "CC"
          << std::setw(10) << "NSS" << std::setw(10) << "KL" << std::setw(12) << "AUC_JUDD"
          << '\n';
    for (int n = n_lo; n <= n_hi; ++n) {
      sgan::MetricsReport report = sgan::evaluate_feedback(dataset, predictor, n);
      nlohmann::ordered_json row;
      row["n"] = n;
      row["cc"] = report.mean_cc;
      row["nss"] = report.mean_nss;
      row["kl"] = report.mean_kl;
      row["auc_judd"] = report.mean_auc;
      row["gt_feeds"] = report.gt_feeds;
      sweep.push_back(std::move(row));
      table << std::left << std::setw(12) << n << std::right << std::fixed
            << std::setprecision(4) << std::setw(10) << report.mean_cc << std::setw(10)
            << report.mean_nss << std::setw(10) << report.mean_kl << std::setw(12)
            << report.mean_auc << '\n';
    }
    write_json_file((fs::path(fb_out) / "feedback_sweep.json").string(), sweep);
    write_text_file((fs::path(fb_out) / "feedback_sweep.txt").string(), table.str());
    std::cout << table.str();
    return 0;
  }

  if (*met) {
    auto list_pngs = [](const std::string& dir) {
      if (!fs::is_directory(dir)) throw sgan::IoError("missing directory " + dir);
      std::vector<std::string> names;
      for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") names.push_back(e.path().stem().string());
      std::sort(names.begin(), names.end());
      return names;
    };
    std::vector<std::string> names = list_pngs(met_pred);
    if (names.empty()) throw sgan::DataError("no PNG maps in " + met_pred);
    std::vector<sgan::Tensor<float>> preds, gts;
    std::vector<sgan::FixationSet> fixes;
    for (const auto& n : names) {
      sgan::Image8 pi = sgan::read_png((fs::path(met_pred) / (n + ".png")).string());
      fs::path gp = fs::path(met_gt) / (n + ".png");
      fs::path xp = fs::path(met_fix) / (n + ".csv");
      if (!fs::exists(gp)) throw sgan::DataError("missing ground-truth map " + gp.string());
      if (!fs::exists(xp)) throw sgan::DataError("missing fixation file " + xp.string());
      sgan::Image8 gi = sgan::read_png(gp.string());
      preds.push_back(sgan::gray_to_tensor(pi));
      gts.push_back(sgan::gray_to_tensor(gi));
      fixes.push_back(sgan::detail::read_fixation_csv(xp, pi.height, pi.width));
    }
    sgan::MetricsReport report = sgan::evaluate_frames(preds, gts, fixes);
    fs::create_directories(met_out);
    write_json_file((fs::path(met_out) / "report.json").string(), report.to_json());
    write_text_file((fs::path(met_out) / "report.txt").string(), report.to_table());
    std::cout << report.to_table();
    return 0;
  }

  if (*desc) {
    nlohmann::json j = sgan::load_json_file(desc_config);
    sgan::TrainConfig cfg = sgan::TrainConfig::from_flat_json(j);
    std::cout << describe_text(cfg);
    return 0;
  }

  if (*grid) {
    if (grid_height < 4) throw sgan::ConfigError("grid height must be >= 4");
    sgan::SamplingGrid g = grid_pool ? sgan::build_pool_grid(grid_height, 2 * grid_height)
                                     : sgan::build_conv_grid(grid_height, 2 * grid_height);
    std::ostringstream csv;
    csv << "out_row,out_col,tap_index,src_row,src_col\n";
    csv << std::setprecision(12);
    for (int r = 0; r < g.out_height; ++r)
      for (int c = 0; c < g.out_width; ++c)
        for (int t = 0; t < g.taps_per_pixel; ++t)
          csv << r << ',' << c << ',' << t << ',' << g.coord_row(r, c, t) << ','
              << g.coord_col(r, c, t) << '\n';
    if (grid_out.empty())
      std::cout << csv.str();
    else
      write_text_file(grid_out, csv.str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sgan::ConfigError& e) {
    return fail("config", e.what(), kExitConfig);
  } catch (const sgan::IoError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const sgan::DataError& e) {
    return fail("data", e.what(), kExitData);
  } catch (const sgan::NumericError& e) {
    return fail("numeric", e.what(), kExitNumeric);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
