#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "unifi/csi.hpp"
#include "unifi/error.hpp"
#include "unifi/features.hpp"
#include "unifi/simulator.hpp"

using namespace unifi;
using unifi::testing::all_occupied;
using unifi::testing::quiet_radio;
using unifi::testing::scalar_frames;
using unifi::testing::straight_line;

namespace {

std::vector<CsiFrame> frames_from(const std::vector<Eigen::MatrixXcd>& hs, double f_s = 100.0) {
  std::vector<CsiFrame> out(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) out[i] = {static_cast<double>(i) / f_s, hs[i]};
  return out;
}

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += a[i] * b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

}  // namespace

TEST_CASE("subcarrier_correlation") {
  SUBCASE("identical non-constant series") {
    std::vector<Eigen::MatrixXcd> hs;
    for (int t = 0; t < 20; ++t) hs.push_back(Eigen::MatrixXcd::Constant(6, 2, 1.0 + 0.1 * std::sin(0.7 * t)));
    CHECK(subcarrier_correlation(frames_from(hs)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("3-frame toy window against a covariance oracle") {
    const std::vector<double> a{1.0, 2.0, 4.0}, b{3.0, 1.5, 2.0};
    std::vector<Eigen::MatrixXcd> hs;
    for (int t = 0; t < 3; ++t) {
      Eigen::MatrixXcd m(2, 1);
      m(0, 0) = std::polar(a[t], 0.3 * t);
      m(1, 0) = std::polar(b[t], -1.1 * t);
      hs.push_back(m);
    }
    CHECK(std::abs(subcarrier_correlation(frames_from(hs)) - std::abs(pearson_oracle(a, b))) < 1e-12);
  }
  SUBCASE("constant subcarrier contributes zero") {
    std::vector<Eigen::MatrixXcd> hs;
    for (int t = 0; t < 10; ++t) {
      Eigen::MatrixXcd m(2, 1);
      m(0, 0) = 1.0 + 0.2 * t;
      m(1, 0) = 2.0;
      hs.push_back(m);
    }
    CHECK(subcarrier_correlation(frames_from(hs)) == 0.0);
  }
  SUBCASE("independent white noise is weakly correlated") {
    double sum = 0, sum2 = 0;
    const int reps = 30;
    for (int seed = 0; seed < reps; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> g(0, 1);
      std::vector<Eigen::MatrixXcd> hs;
      for (int t = 0; t < 200; ++t) {
        Eigen::MatrixXcd m(30, 3);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = {g(rng), g(rng)};
        hs.push_back(m);
      }
      const double c = subcarrier_correlation(frames_from(hs));
      sum += c;
      sum2 += c * c;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt(std::max(0.0, sum2 / reps - mean * mean));
    CHECK(mean + 3 * sd < 0.3);
  }
  SUBCASE("window too short") {
    CHECK_THROWS_AS(subcarrier_correlation(scalar_frames(1, 100, [](double) { return 1.0; })), WindowError);
  }
}

TEST_CASE("dser") {
  SUBCASE("equal residual and static power gives zero") {
    const auto f = scalar_frames(10, 100, [](double t) {
      return std::complex<double>(1.0 + (std::lround(t * 100) % 2 ? 1.0 : -1.0), 0.0);
    });
    CHECK(std::abs(dser(f)) < 1e-12);
  }
  SUBCASE("constant window hits the floor") {
    CHECK(dser(scalar_frames(10, 100, [](double) { return std::complex<double>(0.3, 0.4); })) == -10.0);
  }
  SUBCASE("zero static part is degenerate") {
    const auto f = scalar_frames(10, 100, [](double t) { return std::lround(t * 100) % 2 ? 1.0 : -1.0; });
    CHECK_THROWS_AS(dser(f), DataError);
  }
  SUBCASE("monotone in the dynamic amplitude") {
    RadioConfig cfg;
    const auto traj = straight_line({1, 1}, {0.8, 0.5}, 50, 100.0);
    double prev = -std::numeric_limits<double>::infinity();
    for (double a : {0.0, 0.01, 0.03, 0.1, 0.3, 0.6, 1.0}) {
      cfg.dyn_amplitude = a;
      const double v = dser(synthesize_csi(traj, cfg, all_occupied(50)));
      CHECK(v >= prev);
      prev = v;
    }
  }
  SUBCASE("absence trace lands in the absence row") {
    RadioConfig cfg;
    const auto traj = straight_line({1, 1}, {0, 0}, 50, 100.0, false);
    const auto frames = synthesize_csi(traj, cfg, std::vector<std::uint8_t>(50, 0));
    const double v = dser(frames);
    CHECK(v >= -6.0);
    CHECK(v <= -4.0);
  }
}

TEST_CASE("plcr") {
  const double lambda = 299792458.0 / 5.32e9;
  SUBCASE("pure tone") {
    const double f_d = -21.3, rate = 1000.0;
    const std::size_t n = 100;
    const auto f = scalar_frames(n, rate, [&](double t) {
      return 1.0 + 0.1 * std::polar(1.0, 2.0 * std::numbers::pi * f_d * t);
    });
    const double bin = rate / static_cast<double>(n);
    CHECK(std::abs(plcr(f, lambda) - 1.20032) <= bin * lambda);
    CHECK(plcr(f, lambda) == doctest::Approx(-f_d * lambda).epsilon(0.01));
  }
  SUBCASE("static occupied target") {
    const RadioConfig cfg = quiet_radio(500);
    const auto traj = straight_line({2, 1.5}, {0, 0}, 50, 500.0);
    CHECK(plcr(synthesize_csi(traj, cfg, all_occupied(50)), wavelength(cfg)) == 0.0);
  }
  SUBCASE("synthesized 1.2 m/s target at 500 Hz") {
    RadioConfig cfg;
    cfg.sample_rate = 500;
    // Window centered on (2, 1.5) moving along +y.
    const auto traj = straight_line({2, 1.5 - 0.025}, {0, 1}, 50, 500.0);
    const auto frames = synthesize_csi(traj, cfg, all_occupied(50));
    CHECK(std::abs(plcr(frames, wavelength(cfg), plcr_options_for(cfg)) - 1.2) <= 0.1);
  }
  SUBCASE("sign flips with the velocity") {
    const RadioConfig cfg = quiet_radio(500);
    const auto fwd = synthesize_csi(straight_line({1.0, 1.0}, {0.6, 0.8}, 50, 500.0), cfg, all_occupied(50));
    const auto bwd = synthesize_csi(straight_line({1.06, 1.08}, {-0.6, -0.8}, 50, 500.0), cfg, all_occupied(50));
    const double a = plcr(fwd, wavelength(cfg)), b = plcr(bwd, wavelength(cfg));
    CHECK(a > 0.5);
    CHECK(b == doctest::Approx(-a).epsilon(0.02));
  }
  SUBCASE("too few frames") {
    CHECK_THROWS_AS(plcr(scalar_frames(2, 100, [](double) { return 1.0; }), lambda), WindowError);
  }
}

TEST_CASE("features are invariant to a complex gain") {
  RadioConfig cfg;
  const auto traj = straight_line({1, 1}, {0.7, 0.6}, 200, 100.0);
  const auto frames = synthesize_csi(traj, cfg, all_occupied(200));
  const auto opts = plcr_options_for(cfg);
  for (std::complex<double> c : {std::complex<double>(2.0, 0.0), std::complex<double>(-0.3, 1.7),
                                 std::complex<double>(1e-3, -4e-3)}) {
    auto scaled = frames;
    for (auto& f : scaled) f.h *= c;
    CHECK(std::abs(subcarrier_correlation(scaled) - subcarrier_correlation(frames)) < 1e-9);
    CHECK(std::abs(dser(scaled) - dser(frames)) < 1e-9);
    const std::span<const CsiFrame> w(frames.data() + 100, 10), ws(scaled.data() + 100, 10);
    CHECK(std::abs(plcr(ws, wavelength(cfg)) - plcr(w, wavelength(cfg))) < 1e-12);
    (void)opts;
  }
}

TEST_CASE("extract_sequence") {
  RadioConfig cfg;
  const WindowConfig win;
  SUBCASE("10 s at 100 Hz") {
    const auto traj = straight_line({1, 1}, {0.2, 0.1}, 1000, 100.0);
    const auto feats = extract_sequence(synthesize_csi(traj, cfg, all_occupied(1000)), win, cfg);
    REQUIRE(feats.size() == 100);
    for (std::size_t k = 0; k < 100; ++k) {
      CHECK(std::isnan(feats[k][Slot::CorrLong]) == (k < 20));
      CHECK(std::isnan(feats[k][Slot::DserLong]) == (k < 20));
      CHECK(std::isnan(feats[k][Slot::CorrShort]) == (k < 5));
      CHECK(feats[k].ts == doctest::Approx(k * 0.1));
    }
    CHECK(extract_sequence(synthesize_csi(traj, cfg, all_occupied(1000)), win, cfg) == feats);
  }
  SUBCASE("empty trace") { CHECK(extract_sequence({}, win, cfg).empty()); }
  SUBCASE("bad window falls back to sentinel with a warning") {
    auto frames = scalar_frames(300, 100, [](double t) { return std::lround(t * 100) % 2 ? 1.0 : -1.0; });
    RadioConfig one = cfg;
    one.n_subcarriers = 1;
    one.n_rx_antennas = 1;
    int warnings = 0;
    const auto feats = extract_sequence(frames, win, one, [&](const std::string&) { ++warnings; });
    CHECK(warnings > 0);
    CHECK(std::isnan(feats.back()[Slot::DserLong]));
  }
  SUBCASE("walking trace follows the trajectory range rate") {
    RadioConfig walk = cfg;
    KinematicParams kin;
    RoomSpec room;
    walk.tx_pos = room.tx;
    walk.rx_pos = room.rx;
    const std::vector<SimEvent> sim(1000, SimEvent::WalkWithinRoom);
    double sq = 0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto traj = expand_kinematics(sim, room, kin, 100.0, seed);
      const auto feats = extract_sequence(synthesize_csi(traj, walk, all_occupied(1000)), win, walk);
      const std::size_t len = window_samples(win.plcr_s, 100.0);
      for (std::size_t k = 1; k < feats.size(); ++k) {
        const std::size_t end = k * 10;
        double truth = 0;
        for (std::size_t j = end + 1 - len; j <= end; ++j) {
          truth += range_rate(room.tx, room.rx, traj.pos[j], traj.velocity(j));
        }
        truth /= static_cast<double>(len);
        sq += std::pow(feats[k][Slot::Plcr] - truth, 2);
        ++n;
      }
    }
    MESSAGE("walking plcr rmse " << std::sqrt(sq / n) << " over " << n);
    CHECK(std::sqrt(sq / static_cast<double>(n)) < 0.15);
  }
}

TEST_CASE("window config") {
  WindowConfig w;
  CHECK_NOTHROW(w.validate());
  CHECK(w.window_of(Slot::Plcr) == 0.1);
  CHECK(w.window_of(Slot::CorrLong) == 2.0);
  w.short_s = 3.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  CHECK(window_samples(0.5, 100.0) == 50);
}
