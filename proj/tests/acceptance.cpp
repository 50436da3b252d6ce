// Acceptance suite: runs the full property/oracle battery end to end and
// prints one PASS/FAIL line per criterion. Exit code = number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "spheregan/spheregan.hpp"

using namespace sgan;
namespace fs = std::filesystem;

namespace {

struct Checker {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void require_near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream os;
      os << what << " (got " << got << ", want " << want << " +- " << tol << ")";
      failures.push_back(os.str());
    }
  }
  void note(const std::string& msg) { notes.push_back(msg); }
};

int g_failures = 0;

void run_criterion(int number, const std::string& title,
                   const std::function<void(Checker&)>& body) {
  Checker c;
  auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (c.failures.empty()) {
    std::printf("[PASS] %d. %s (%.1f s)\n", number, title.c_str(), secs);
  } else {
    std::printf("[FAIL] %d. %s (%.1f s)\n", number, title.c_str(), secs);
    for (const auto& f : c.failures) std::printf("       - %s\n", f.c_str());
    ++g_failures;
  }
  for (const auto& n : c.notes) std::printf("       note: %s\n", n.c_str());
  std::fflush(stdout);
}

fs::path work_dir() {
  fs::path p = fs::temp_directory_path() / "spheregan_acceptance";
  return p;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path p = work_dir() / tag;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<VideoSequence> synth_videos(int n, int frames, int h, uint64_t seed) {
  SynthConfig cfg;
  cfg.num_videos = n;
  cfg.frames_per_video = frames;
  cfg.height = h;
  cfg.seed = seed;
  std::vector<VideoSequence> out;
  for (int v = 0; v < n; ++v) out.push_back(synth_sequence(cfg, v));
  return out;
}

std::vector<nlohmann::json> read_log(const std::string& path) {
  std::ifstream in(path);
  std::vector<nlohmann::json> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

Tensor<float> smooth_field(int c, int h, int w) {
  Tensor<float> t({c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col) {
        double u = 2.0 * kPi * col / w, v = kPi * r / h;
        t(ci, r, col) = static_cast<float>(0.5 + 0.2 * std::sin(u + ci) * std::cos(v) +
                                           0.05 * std::sin(2 * u - v));
      }
  return t;
}

// ---------------------------------------------------------------------------

void criterion1_geometry(Checker& c) {
  // center-tap identity, exact
  SamplingGrid g64 = build_conv_grid(64, 128);
  for (int r : {0, 31, 63})
    for (int col : {0, 64, 127})
      c.require(g64.coord_row(r, col, 4) == r && g64.coord_col(r, col, 4) == col,
                "center tap identity at (" + std::to_string(r) + "," + std::to_string(col) + ")");

  // equator taps land one pixel apart within 1e-4. The H=64 grid has no row
  // at latitude 0 (centers sit at +-1.4 deg), so the check runs on the
  // exactly-equatorial row of an H=65 grid and on the tap pattern evaluated
  // at latitude 0; the H=64 near-equator deviation is reported as a note.
  SamplingGrid g65 = build_conv_grid(65, 130);
  int eq_row = 32;
  double worst65 = 0.0;
  for (int t = 0; t < 9; ++t) {
    double dr = g65.coord_row(eq_row, 50, t) - (eq_row + t / 3 - 1);
    double dc = g65.coord_col(eq_row, 50, t) - (50 + t % 3 - 1);
    worst65 = std::max(worst65, std::max(std::abs(dr), std::abs(dc)));
  }
  c.require(worst65 <= 1e-4, "equator-row taps one pixel apart (H=65 lat-0 row)");

  TapPattern pat = conv_tap_pattern(2.0 * kPi / 128.0);
  double worst_pat = 0.0;
  for (int t = 0; t < 9; ++t) {
    SphereCoord tap = (t == 4) ? SphereCoord{0.0, 0.0}
                               : gnomonic_inverse({0.0, 0.0}, pat.x[t], pat.y[t]);
    double want_dlat = -(t / 3 - 1) * (kPi / 64.0);  // one pixel pitch north/south
    double want_dlon = (t % 3 - 1) * (kPi / 64.0);
    worst_pat = std::max(worst_pat, std::abs(tap.lat - want_dlat) / (kPi / 64.0));
    worst_pat = std::max(worst_pat, std::abs(wrap_lon(tap.lon - want_dlon)) / (kPi / 64.0));
  }
  c.require(worst_pat <= 1e-4, "tap pattern on the lattice at latitude 0 (H=64 pitch)");

  double worst64 = 0.0;
  for (int r : {31, 32})
    for (int t = 0; t < 9; ++t) {
      worst64 = std::max(worst64, std::abs(g64.coord_row(r, 0, t) - (r + t / 3 - 1)));
      worst64 = std::max(worst64, std::abs(g64.coord_col(r, 0, t) - (t % 3 - 1)));
    }
  {
    std::ostringstream os;
    os << "H=64 rows 31/32 sit at lat +-1.4 deg; max tap deviation there is " << worst64
       << " px (intrinsic gnomonic distortion; 1e-4 holds at lat 0, see ledger)";
    c.note(os.str());
  }
  c.require(worst64 <= 2e-3, "H=64 near-equator taps inside the documented 2e-3 envelope");

  // longitude independence, exact
  bool li = true;
  for (int r = 0; r < 64 && li; ++r)
    for (int t = 0; t < 9 && li; ++t) {
      double row0 = g64.coord_row(r, 0, t);
      double off0 = g64.coord_col(r, 0, t);
      for (int col = 1; col < 128; ++col) {
        double d = g64.coord_col(r, col, t) - col - off0;
        d -= 128.0 * std::round(d / 128.0);
        if (g64.coord_row(r, col, t) != row0 || d != 0.0) {
          li = false;
          break;
        }
      }
    }
  c.require(li, "longitude independence of grid offsets (exact)");
}

void criterion2_kernel_equivalence(Checker& c) {
  // equator rows vs planar conv
  const int h = 64, w = 128;
  SamplingGrid grid = build_conv_grid(h, w);
  Tensor<float> img = smooth_field(2, h, w);
  Rng rng(7);
  Tensor<float> wt({3, 2, 9});
  for (int64_t i = 0; i < wt.size(); ++i) wt[i] = static_cast<float>(0.4 * (rng.uniform() - 0.5));
  Tensor<float> b({3});
  Tape<float> tape;
  Var<float>* out = ops::sphere_conv2d(tape, tape.make(img.reshaped({1, 2, h, w})),
                                       tape.make(wt), tape.make(b), grid);
  double worst = 0.0;
  for (int64_t co = 0; co < 3; ++co)
    for (int r = h / 2 - 4; r < h / 2 + 4; ++r)
      for (int col = 2; col < w - 2; ++col) {
        double acc = b[co];
        for (int64_t ci = 0; ci < 2; ++ci)
          for (int kr = 0; kr < 3; ++kr)
            for (int kc = 0; kc < 3; ++kc)
              acc += static_cast<double>(wt(co, ci, kr * 3 + kc)) * img(ci, r - 1 + kr, col - 1 + kc);
        worst = std::max(worst, std::abs(acc - out->value(0, co, r, col)));
      }
  c.require(worst <= 1e-3, "sphere conv matches planar conv on equator rows (<= 1e-3), got " +
                               std::to_string(worst));

  // random small instances vs brute-force summation
  SamplingGrid small = build_conv_grid(8, 16);
  Rng rng2(8);
  Tensor<float> x({2, 2, 8, 16});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng2.uniform());
  Tensor<float> w2({3, 2, 9});
  for (int64_t i = 0; i < w2.size(); ++i) w2[i] = static_cast<float>(rng2.uniform() - 0.5);
  Tensor<float> b2({3});
  for (int64_t i = 0; i < b2.size(); ++i) b2[i] = static_cast<float>(0.2 * rng2.uniform());
  Tape<float> tape2;
  Var<float>* out2 =
      ops::sphere_conv2d(tape2, tape2.make(x), tape2.make(w2), tape2.make(b2), small);
  double worst2 = 0.0;
  for (int64_t n = 0; n < 2; ++n) {
    Tensor<float> plane({2, 8, 16});
    std::copy(x.data() + n * 2 * 128, x.data() + (n + 1) * 2 * 128, plane.data());
    for (int64_t co = 0; co < 3; ++co)
      for (int r = 0; r < 8; ++r)
        for (int col = 0; col < 16; ++col) {
          double acc = b2[co];
          for (int t = 0; t < 9; ++t) {
            auto vals =
                ops::bilinear_sample(plane, small.coord_row(r, col, t), small.coord_col(r, col, t));
            for (int64_t ci = 0; ci < 2; ++ci) acc += w2(co, ci, t) * vals[static_cast<size_t>(ci)];
          }
          worst2 = std::max(worst2, std::abs(acc - out2->value(n, co, r, col)));
        }
  }
  c.require(worst2 <= 1e-4, "sphere conv matches brute-force summation (<= 1e-4), got " +
                                std::to_string(worst2));
}

void criterion3_equivariance(Checker& c) {
  const int h = 64, w = 128, s = 16;
  GeneratorConfig cfg;
  cfg.height = h;
  cfg.width = w;
  Generator<float> gen(cfg);
  Rng rng(9);
  gen.init_params(rng);
  Tensor<float> frame({3, h, w}), sal({1, h, w});
  Rng rin(10);
  for (int64_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<float>(rin.uniform());
  for (int64_t i = 0; i < sal.size(); ++i) sal[i] = static_cast<float>(rin.uniform());
  Tensor<float> fs({3, h, w}), ss({1, h, w});
  for (int ci = 0; ci < 3; ++ci)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col) fs(ci, r, (col + s) % w) = frame(ci, r, col);
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) ss(0, r, (col + s) % w) = sal(0, r, col);
  Tensor<float> a = gen.predict(frame, sal);
  Tensor<float> b = gen.predict(fs, ss);
  double worst = 0.0;
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col)
      worst = std::max(worst,
                       std::abs(static_cast<double>(b(0, r, (col + s) % w)) - a(0, r, col)));
  c.require(worst <= 1e-4,
            "generator output shifts with column-shifted input (<= 1e-4), got " +
                std::to_string(worst));
}

void criterion4_gradients(Checker& c) {
  using gradcheck::check;
  using gradcheck::project;
  using gradcheck::random_tensor;
  Rng rng(11);
  auto expect_ok = [&c](const gradcheck::Result& r, const std::string& what) {
    std::ostringstream os;
    os << what << " (max abs err " << r.max_abs_err << ")";
    c.require(r.ok, os.str());
  };

  SamplingGrid cgrid = build_conv_grid(4, 8);
  SamplingGrid pgrid = build_pool_grid(4, 8);
  auto x = random_tensor({2, 2, 4, 8}, rng, 0.0, 1.0);
  auto wt = random_tensor({2, 2, 9}, rng, -0.5, 0.5);
  auto bias = random_tensor({2}, rng, -0.1, 0.1);

  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::sphere_conv2d(t, in[0], in[1], in[2], cgrid));
                },
                {x, wt, bias}, 200),
            "sphere_conv2d gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::conv2d(t, in[0], in[1], in[2], 2));
                },
                {x, wt, bias}, 200),
            "conv2d gradients");
  Tensor<double> pool_in({1, 1, 4, 8});
  {
    std::vector<int> perm(32);
    for (int i = 0; i < 32; ++i) perm[static_cast<size_t>(i)] = i;
    Rng prng(12);
    prng.shuffle(perm);
    for (int i = 0; i < 32; ++i) pool_in[i] = 0.05 * perm[static_cast<size_t>(i)];
  }
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::sphere_maxpool(t, in[0], pgrid));
                },
                {pool_in}, 32),
            "sphere_maxpool gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::maxpool2x2(t, in[0]));
                },
                {pool_in}, 32),
            "maxpool2x2 gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::upsample_bilinear_x2(t, in[0]));
                },
                {random_tensor({1, 2, 3, 4}, rng)}, 24),
            "upsample gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  auto rm = std::make_shared<Tensor<double>>(std::vector<int64_t>{2});
                  auto rv = std::make_shared<Tensor<double>>(std::vector<int64_t>{2}, 1.0);
                  Var<double>* out =
                      ops::batchnorm(t, in[0], in[1], in[2], rm.get(), rv.get(), Mode::kTrain);
                  t.record([rm, rv] {});
                  return project(t, out);
                },
                {random_tensor({2, 2, 2, 4}, rng), random_tensor({2}, rng, 0.5, 1.5),
                 random_tensor({2}, rng, -0.5, 0.5)},
                36),
            "batchnorm gradients");
  auto act_in = random_tensor({40}, rng, -2.0, 2.0);
  for (int64_t i = 0; i < act_in.size(); ++i)
    if (std::abs(act_in[i]) < 1e-2) act_in[i] = 0.5;
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::relu(t, in[0]));
                },
                {act_in}, 40),
            "relu gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::sigmoid(t, in[0]));
                },
                {act_in}, 40),
            "sigmoid gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return project(t, ops::linear(t, in[0], in[1], in[2]));
                },
                {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng, -0.5, 0.5),
                 random_tensor({2}, rng, -0.1, 0.1)},
                26),
            "linear gradients");
  // dropout (train mode, fixed mask via fixed seed per evaluation)
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  Rng drng(13);
                  return project(t, ops::dropout(t, in[0], 0.5, drng, Mode::kTrain));
                },
                {random_tensor({64}, rng)}, 64),
            "dropout gradients");

  // losses
  auto gt = random_tensor({2, 4, 8}, rng, 0.0, 1.0);
  auto pred = random_tensor({2, 4, 8}, rng, 0.1, 0.9);
  auto wmap = spherical_weights<double>(4, 8);
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return losses::cc_loss(t, gt, in[0]);
                },
                {pred}, 64),
            "cc_loss gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return losses::kl_loss(t, gt, in[0], 1e-7);
                },
                {pred}, 64),
            "kl_loss gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return losses::smse_loss(t, gt, in[0], wmap);
                },
                {pred}, 64),
            "smse_loss gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return losses::g_bce_loss(t, in[0], 1e-7);
                },
                {random_tensor({4}, rng, 0.2, 0.8)}, 4),
            "g_bce_loss gradients");
  expect_ok(check(
                [&](Tape<double>& t, std::vector<Var<double>*>& in) {
                  return losses::discriminator_loss_with_labels(
                      t, in[0], in[1], {0.91, 0.95, 0.99}, {0.01, 0.05, 0.09}, 1e-7);
                },
                {random_tensor({3}, rng, 0.2, 0.8), random_tensor({3}, rng, 0.2, 0.8)}, 6),
            "discriminator_loss gradients");
}

void criterion5_metric_oracles(Checker& c) {
  // KL 2-pixel hand case
  Tensor<float> gt({1, 2}), pr({1, 2});
  gt(0, 0) = 0.75f;
  gt(0, 1) = 0.25f;
  pr(0, 0) = 0.5f;
  pr(0, 1) = 0.5f;
  c.require_near(metrics::metric_kl(pr, gt), 0.1308, 1e-3, "KL two-pixel hand value");

  // NSS 2x2 hand case
  Tensor<float> m({2, 2});
  m(0, 0) = 1.0f;
  c.require_near(metrics::metric_nss(m, {{0, 0}}), 1.732, 1e-3, "NSS 2x2 hand value");

  // constant-map AUC exactly 0.5
  Tensor<float> flat({4, 8}, 0.3f);
  c.require(metrics::metric_auc_judd(flat, {{1, 2}, {3, 4}}) == 0.5,
            "constant-map AUC exactly 0.5");

  // AUC vs brute-force ROC on random 16x32 instances
  Rng rng(14);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<float> pred({16, 32});
    for (int64_t i = 0; i < pred.size(); ++i) pred[i] = static_cast<float>(rng.uniform());
    FixationSet fix;
    int nf = 5 + static_cast<int>(rng.uniform_int(15));
    for (int i = 0; i < nf; ++i)
      fix.push_back(
          {static_cast<int>(rng.uniform_int(16)), static_cast<int>(rng.uniform_int(32))});
    // brute force: direct counting at every fixation threshold
    std::set<int64_t> fixpix;
    for (const auto& f : fix) fixpix.insert(static_cast<int64_t>(f.row) * 32 + f.col);
    std::vector<double> taus;
    for (int64_t p : fixpix) taus.push_back(pred[p]);
    std::sort(taus.begin(), taus.end(), std::greater<double>());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    double auc = 0.0, ptpr = 0.0, pfpr = 0.0;
    int64_t npix = pred.size(), nfix = static_cast<int64_t>(fixpix.size());
    for (double tau : taus) {
      int64_t tp = 0, ge = 0;
      for (int64_t p = 0; p < npix; ++p)
        if (pred[p] >= tau) {
          ++ge;
          if (fixpix.count(p)) ++tp;
        }
      double tpr = static_cast<double>(tp) / nfix;
      double fpr = static_cast<double>(ge - tp) / static_cast<double>(npix - nfix);
      auc += (fpr - pfpr) * (tpr + ptpr) / 2.0;
      ptpr = tpr;
      pfpr = fpr;
    }
    auc += (1.0 - pfpr) * (1.0 + ptpr) / 2.0;
    worst = std::max(worst, std::abs(metrics::metric_auc_judd(pred, fix) - auc));
  }
  c.require(worst <= 1e-6, "AUC matches brute-force ROC (<= 1e-6), got " + std::to_string(worst));

  // CC oracle
  Rng rng2(15);
  Tensor<float> a({8, 16}), b({8, 16});
  for (int64_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<float>(rng2.uniform());
    b[i] = static_cast<float>(rng2.uniform());
  }
  double ma = 0, mb = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  c.require_near(metrics::metric_cc(a, b), sab / std::sqrt(saa * sbb), 1e-9, "CC scalar oracle");
}

void criterion6_loss_composition(Checker& c) {
  // Eq-2 style total = sum of terms
  Rng rng(16);
  Tensor<float> gt({2, 8, 16}), pred_t({2, 8, 16});
  for (int64_t i = 0; i < gt.size(); ++i) {
    gt[i] = static_cast<float>(rng.uniform());
    pred_t[i] = static_cast<float>(0.1 + 0.8 * rng.uniform());
  }
  Tensor<float> d({2});
  d[0] = 0.4f;
  d[1] = 0.6f;
  auto wmap = spherical_weights<float>(8, 16);

  struct Ablation {
    const char* name;
    std::set<std::string> terms;
  };
  std::vector<Ablation> ablations = {
      {"cc+g_bce", {"cc", "g_bce"}},
      {"kl+g_bce", {"kl", "g_bce"}},
      {"kl+smse+g_bce", {"kl", "smse", "g_bce"}},
      {"cc+kl+g_bce", {"cc", "kl", "g_bce"}},
      {"cc+kl+smse+g_bce", {"cc", "kl", "smse", "g_bce"}},
  };

  std::printf("       ablation harness (loss composition on a fixed pair + toy training):\n");
  std::printf("       %-20s %10s %10s %10s %10s %12s %10s\n", "loss", "cc", "kl", "smse", "g_bce",
              "total", "toy L_G");
  auto data = synth_videos(1, 8, 32, 300);
  for (const auto& ab : ablations) {
    LossConfig lcfg = LossConfig::from_terms(ab.terms);
    Tape<float> tape;
    auto res =
        losses::generator_loss(tape, gt, tape.make(pred_t), tape.make(d), wmap, lcfg);
    double sum = res.breakdown.cc_loss + res.breakdown.kl_loss + res.breakdown.smse_loss +
                 res.breakdown.g_bce_loss;
    c.require(std::abs(res.breakdown.total - sum) <= 1e-6,
              std::string("total = sum of terms for ") + ab.name);

    // toy-scale training smoke per configuration
    TrainConfig tcfg;
    tcfg.height = 32;
    tcfg.gen_channels = {8, 12, 16, 24};
    tcfg.disc_channels = {8, 12, 16, 16};
    tcfg.epochs = 2;
    tcfg.batch_size = 2;
    tcfg.k = 2;
    tcfg.seed = 17;
    tcfg.checkpoint_interval = 0;
    tcfg.loss = lcfg;
    tcfg.data_dir = "unused";
    tcfg.out_dir = fresh_dir(std::string("ablate_") + ab.name).string();
    TrainResult tr = train(tcfg, data);
    c.require(std::isfinite(tr.last.gen.total),
              std::string("toy training finite for ") + ab.name);
    std::printf("       %-20s %10.4f %10.4f %10.4f %10.4f %12.6f %10.4f\n", ab.name,
                res.breakdown.cc_loss, res.breakdown.kl_loss, res.breakdown.smse_loss,
                res.breakdown.g_bce_loss, res.breakdown.total, tr.last.gen.total);
  }

  // label smoothing/noise ranges over 1e4 draws
  Rng lrng(18);
  bool ranges_ok = true;
  for (int i = 0; i < 10000; ++i) {
    double yr = 0.9 + 0.1 * lrng.uniform();
    double yf = 0.1 * lrng.uniform();
    ranges_ok &= (yr >= 0.9 && yr <= 1.0 && yf >= 0.0 && yf <= 0.1);
  }
  // and through the loss op itself (it validates internally and throws)
  Tape<float> tape;
  Tensor<float> dr({1}, 0.6f), df({1}, 0.4f);
  for (int i = 0; i < 10000; ++i)
    losses::discriminator_loss(tape, tape.make(dr), tape.make(df), lrng, 1e-7);
  c.require(ranges_ok, "label ranges [0.9,1.0] / [0,0.1] over 1e4 draws");
}

// shared between criteria 7 and 8
struct ToyRun {
  TrainConfig cfg;
  std::string checkpoint;
  std::vector<VideoSequence> train_data;
  std::vector<nlohmann::json> log;
};

ToyRun g_toy;

void criterion7_overfit(Checker& c) {
  // one synthetic 20-frame video at 64x128, 500 generator steps, seeded
  g_toy.train_data = synth_videos(1, 20, 64, 400);
  TrainConfig cfg;
  cfg.height = 64;
  cfg.epochs = 125;  // 15 pairs / batch 4 -> 4 steps per epoch -> 500 steps
  cfg.batch_size = 4;
  cfg.k = 5;
  cfg.seed = 20240501;
  cfg.checkpoint_interval = 0;
  cfg.data_dir = "unused";
  cfg.out_dir = fresh_dir("overfit").string();
  g_toy.cfg = cfg;
  TrainResult res = train(cfg, g_toy.train_data);
  g_toy.checkpoint = res.final_checkpoint;
  g_toy.log = read_log(res.log_path);
  c.require(res.steps == 500, "ran exactly 500 generator steps, got " + std::to_string(res.steps));

  // final generator loss below its initial value
  c.require(res.last.gen.total < res.first.gen.total,
            "final L_G (" + std::to_string(res.last.gen.total) + ") below initial (" +
                std::to_string(res.first.gen.total) + ")");

  // training-set CC >= 0.8
  LoadedCheckpoint ck = load_checkpoint(res.final_checkpoint);
  Generator<float> gen(cfg.generator_config());
  Discriminator<float> disc(cfg.discriminator_config());
  restore_models(ck, gen, disc);
  MetricsReport report = evaluate(g_toy.train_data, make_generator_predictor(gen), cfg.k);
  std::ostringstream os;
  os << "training-set CC = " << report.mean_cc;
  c.note(os.str());
  c.require(report.mean_cc >= 0.8, "training CC >= 0.8, got " + std::to_string(report.mean_cc));
}

void criterion8_feedback(Checker& c) {
  if (g_toy.checkpoint.empty()) {
    c.require(false, "criterion 7 toy model unavailable");
    return;
  }
  LoadedCheckpoint ck = load_checkpoint(g_toy.checkpoint);
  Generator<float> gen(g_toy.cfg.generator_config());
  Discriminator<float> disc(g_toy.cfg.discriminator_config());
  restore_models(ck, gen, disc);
  Predictor pred = make_generator_predictor(gen);

  // held-out synthetic test set
  auto test_data = synth_videos(2, 25, 64, 555);

  // N=1 bit-matches the plain evaluation
  MetricsReport plain = evaluate(test_data, pred, 5);
  MetricsReport fb1 = evaluate_feedback(test_data, pred, 1);
  c.require(plain.to_json().dump() == fb1.to_json().dump(),
            "eval-feedback N=1 bit-matches eval");

  // ground-truth consumption = ceil(T/N) (identity stub isolates the scheduler)
  Predictor identity = [](const Tensor<float>&, const Tensor<float>& hint) { return hint; };
  for (int n = 1; n <= 10; ++n) {
    MetricsReport r = evaluate_feedback(test_data, identity, n);
    int64_t t_per_video = 20;  // 25 frames, first 5 skipped
    int64_t expect = 2 * ((t_per_video + n - 1) / n);
    c.require(r.gt_feeds == expect, "gt consumption ceil(T/N) at N=" + std::to_string(n) +
                                        " (got " + std::to_string(r.gt_feeds) + ", want " +
                                        std::to_string(expect) + ")");
  }

  // monotone trend on the toy-trained model
  MetricsReport n1 = fb1;
  MetricsReport n5 = evaluate_feedback(test_data, pred, 5);
  MetricsReport n10 = evaluate_feedback(test_data, pred, 10);
  std::ostringstream os;
  os << "mean CC: N=1 " << n1.mean_cc << ", N=5 " << n5.mean_cc << ", N=10 " << n10.mean_cc;
  c.note(os.str());
  c.require(n1.mean_cc >= n5.mean_cc && n5.mean_cc >= n10.mean_cc,
            "mean CC non-increasing across N in {1, 5, 10}");
}

void criterion9_determinism(Checker& c) {
  auto data = synth_videos(1, 15, 32, 600);  // 10 pairs with k=5
  auto make_cfg = [&](const std::string& tag) {
    TrainConfig cfg;
    cfg.height = 32;
    cfg.gen_channels = {8, 12, 16, 24};
    cfg.disc_channels = {8, 12, 16, 16};
    cfg.epochs = 20;  // 10 pairs / batch 2 -> 5 steps per epoch -> 100 steps
    cfg.batch_size = 2;
    cfg.k = 5;
    cfg.seed = 777;
    cfg.checkpoint_interval = 50;
    cfg.data_dir = "unused";
    cfg.out_dir = fresh_dir(tag).string();
    return cfg;
  };
  TrainConfig cfg_a = make_cfg("det_a");
  TrainResult a = train(cfg_a, data);
  TrainResult b = train(make_cfg("det_b"), data);
  auto log_a = read_log(a.log_path);
  auto log_b = read_log(b.log_path);
  c.require(log_a.size() == 100 && log_b.size() == 100, "both runs did 100 steps");
  bool identical = log_a.size() == log_b.size();
  for (size_t i = 0; identical && i < log_a.size(); ++i)
    identical = log_a[i].dump() == log_b[i].dump();
  c.require(identical, "repeated training with identical seed gives identical per-step losses");
  c.require(log_a.back()["step"] == 100 &&
                log_a.back()["loss_g_total"] == log_b.back()["loss_g_total"],
            "step-100 loss values identical");

  // checkpoint resume is bit-identical
  TrainConfig rcfg = make_cfg("det_resume");
  rcfg.resume = (fs::path(cfg_a.out_dir) / "checkpoints" / "step_000050").string();
  TrainResult r = train(rcfg, data);
  auto log_r = read_log(r.log_path);
  c.require(log_r.size() == 50, "resumed run covers steps 51..100");
  bool tail_ok = log_r.size() == 50;
  for (size_t i = 0; tail_ok && i < log_r.size(); ++i)
    tail_ok = log_r[i].dump() == log_a[i + 50].dump();
  c.require(tail_ok, "resumed per-step losses match the uninterrupted run");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  };
  c.require(slurp(fs::path(a.final_checkpoint) / "params.bin") ==
                slurp(fs::path(r.final_checkpoint) / "params.bin"),
            "resumed final parameters bit-identical");
}

}  // namespace

int main() {
  std::printf("spheregan acceptance suite\n");
  fs::create_directories(work_dir());
  run_criterion(1, "geometry oracle: center-tap identity, equator taps, longitude independence",
                criterion1_geometry);
  run_criterion(2, "kernel equivalence: equator planar match + brute-force summation",
                criterion2_kernel_equivalence);
  run_criterion(3, "equivariance: generator output shifts with column-shifted input",
                criterion3_equivariance);
  run_criterion(4, "gradient suite: finite-difference checks for every op and loss",
                criterion4_gradients);
  run_criterion(5, "metric oracles: CC/KL/NSS/AUC hand values and brute-force ROC",
                criterion5_metric_oracles);
  run_criterion(6, "loss composition: term sums, label ranges, five-row ablation harness",
                criterion6_loss_composition);
  run_criterion(7, "learning sanity: 500-step overfit reaches CC >= 0.8 with decreasing L_G",
                criterion7_overfit);
  run_criterion(8, "feedback protocol: N=1 bit-match, gt consumption, monotone CC trend",
                criterion8_feedback);
  run_criterion(9, "determinism: identical seeds and bit-identical checkpoint resume",
                criterion9_determinism);
  if (g_failures == 0)
    std::printf("all acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  return g_failures;
}
