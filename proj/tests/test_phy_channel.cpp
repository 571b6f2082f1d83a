#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "muvis/phy_channel.hpp"

using namespace muvis;

namespace {

// Noise floor of |corr| between independent complex Gaussian vectors:
// |corr|^2 ~ Beta(1, D-1), so E|corr| = Gamma(1.5)*Gamma(D)/Gamma(D+0.5).
double independent_corr_mean(int dim) {
  return std::exp(std::lgamma(1.5) + std::lgamma(dim) - std::lgamma(dim + 0.5));
}

}  // namespace

TEST_CASE("synthesize_csi: zero speed is the exact identity") {
  Rng rng(1);
  const CsiSnapshot h = make_initial_csi(16, 0.0, rng);
  const CsiSnapshot h2 = synthesize_csi(h, 0.0, 250.0, 5.18, rng);
  REQUIRE(h2.timestamp_ms == 250.0);
  for (std::size_t i = 0; i < h.coeffs.size(); ++i) REQUIRE(h2.coeffs[i] == h.coeffs[i]);
}

TEST_CASE("synthesize_csi: coherence distance and decorrelation constant") {
  // lambda/2 at 5.18 GHz
  const double d_c = (2.998e8 / 5.18e9) / 2.0;
  REQUIRE(coherence_distance_m(5.18) == Catch::Approx(d_c).epsilon(1e-12));
  REQUIRE(d_c == Catch::Approx(0.02894).margin(5e-6));
  // rho for a 1 m/s walker over one 100 ms sounding period
  const double rho = std::exp(-0.1 / d_c);
  REQUIRE(rho == Catch::Approx(0.0316).margin(5e-4));
}

TEST_CASE("synthesize_csi: same seed reproduces bit-identical snapshots") {
  Rng a(77), b(77);
  CsiSnapshot ha = make_initial_csi(16, 0.0, a);
  CsiSnapshot hb = make_initial_csi(16, 0.0, b);
  for (int step = 0; step < 5; ++step) {
    ha = synthesize_csi(ha, 0.7, 100.0, 5.18, a);
    hb = synthesize_csi(hb, 0.7, 100.0, 5.18, b);
    for (std::size_t i = 0; i < ha.coeffs.size(); ++i) REQUIRE(ha.coeffs[i] == hb.coeffs[i]);
  }
}

TEST_CASE("synthesize_csi rejects negative dt") {
  Rng rng(1);
  const CsiSnapshot h = make_initial_csi(4, 0.0, rng);
  REQUIRE_THROWS_AS(synthesize_csi(h, 1.0, -1.0, 5.18, rng), std::invalid_argument);
}

TEST_CASE("csi_correlation: identity, orthogonality, symmetry, range") {
  CsiSnapshot a, b;
  a.coeffs = {{1, 0}, {0, 1}, {2, -1}};
  REQUIRE(csi_correlation(a, a) == Catch::Approx(1.0).epsilon(1e-12));

  a.coeffs = {{1, 0}, {0, 0}};
  b.coeffs = {{0, 0}, {1, 0}};
  REQUIRE(csi_correlation(a, b) == 0.0);

  Rng rng(3);
  const CsiSnapshot x = make_initial_csi(16, 0.0, rng);
  const CsiSnapshot y = make_initial_csi(16, 0.0, rng);
  const double xy = csi_correlation(x, y);
  REQUIRE(xy == csi_correlation(y, x));
  REQUIRE(xy >= 0.0);
  REQUIRE(xy <= 1.0);
}

TEST_CASE("csi_correlation error paths") {
  CsiSnapshot a, b, z;
  a.coeffs = {{1, 0}, {0, 1}};
  b.coeffs = {{1, 0}};
  z.coeffs = {{0, 0}, {0, 0}};
  REQUIRE_THROWS_AS(csi_correlation(a, b), std::invalid_argument);
  REQUIRE_THROWS_AS(csi_correlation(a, z), std::invalid_argument);
}

TEST_CASE("csi_correlation: Monte-Carlo mean tracks rho at high dimension") {
  // At small D the |corr| estimator has an O(1/sqrt(D)) noise floor, so the
  // rho-recovery check runs at D=4096 where the floor is ~0.014.
  const int dim = 4096;
  const double d_c = coherence_distance_m(5.18);
  const double rho = std::exp(-0.1 / d_c);
  double sum = 0.0;
  const int n_seeds = 1000;
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng rng(seed);
    const CsiSnapshot h = make_initial_csi(dim, 0.0, rng);
    const CsiSnapshot h2 = synthesize_csi(h, 1.0, 100.0, 5.18, rng);
    sum += csi_correlation(h, h2);
  }
  const double mean = sum / n_seeds;
  REQUIRE(mean == Catch::Approx(rho).margin(0.05));
}

TEST_CASE("csi_correlation: D=16 noise floor matches the Beta oracle") {
  // Fast motion fully decorrelates consecutive snapshots; the sample mean of
  // |corr| must sit on the independent-vector expectation.
  const int dim = 16;
  double sum = 0.0;
  const int n_seeds = 2000;
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng rng(seed + 10000);
    const CsiSnapshot h = make_initial_csi(dim, 0.0, rng);
    const CsiSnapshot h2 = synthesize_csi(h, 50.0, 100.0, 5.18, rng);  // rho ~ e^-173
    sum += csi_correlation(h, h2);
  }
  REQUIRE(sum / n_seeds == Catch::Approx(independent_corr_mean(dim)).margin(0.01));
}

TEST_CASE("effective_snr: SU identity and MU loss examples") {
  LossModel loss;
  UserProfile u;
  u.base_snr_db = 30.0;
  u.n_streams = 1;
  u.n_rx_antennas = 1;

  SECTION("k=1 returns base exactly, even for fast movers at large t") {
    u.speed_mps = 3.0;
    REQUIRE(effective_snr(u, 1, 1, 500.0, loss) == 30.0);
  }
  SECTION("two static single-stream users") {
    u.speed_mps = 0.0;
    const double expect = 30.0 - 10.0 * std::log10(2.0) - 1.0;
    REQUIRE(effective_snr(u, 2, 2, 0.0, loss) == Catch::Approx(expect).epsilon(1e-12));
    REQUIRE(expect == Catch::Approx(25.99).margin(0.005));
  }
  SECTION("staleness term: 1 m/s at 50 ms hits 10 dB") {
    u.speed_mps = 1.0;
    const double expect = 30.0 - 10.0 * std::log10(2.0) - 1.0 - 10.0;
    REQUIRE(effective_snr(u, 2, 2, 50.0, loss) == Catch::Approx(expect).epsilon(1e-12));
    REQUIRE(expect == Catch::Approx(15.99).margin(0.005));
  }
  SECTION("staleness is capped") {
    u.speed_mps = 10.0;
    const double uncapped = effective_snr(u, 2, 2, 50.0, loss);  // would be 100 dB of loss
    REQUIRE(uncapped == Catch::Approx(30.0 - 10.0 * std::log10(2.0) - 1.0 - 30.0));
  }
  SECTION("k < 1 is an error") {
    REQUIRE_THROWS_AS(effective_snr(u, 0, 1, 0.0, loss), std::invalid_argument);
  }
}

TEST_CASE("effective_snr is non-increasing in k, S_tot and t") {
  LossModel loss;
  UserProfile u;
  u.base_snr_db = 40.0;
  u.speed_mps = 0.5;
  u.n_streams = 2;
  u.n_rx_antennas = 2;
  double prev = effective_snr(u, 1, 2, 0.0, loss);
  for (int k = 2; k <= 4; ++k) {
    const double v = effective_snr(u, k, 2 * k, 0.0, loss);
    REQUIRE(v <= prev);
    prev = v;
  }
  for (int s_tot = 2; s_tot <= 8; ++s_tot) {
    const double lo = effective_snr(u, 2, s_tot, 0.0, loss);
    const double hi = effective_snr(u, 2, s_tot + 1, 0.0, loss);
    REQUIRE(hi <= lo);
  }
  for (double t = 0.0; t < 200.0; t += 10.0) {
    REQUIRE(effective_snr(u, 2, 4, t + 10.0, loss) <= effective_snr(u, 2, 4, t, loss));
  }
}

TEST_CASE("select_mcs: saturation, NO_TX, inclusive boundary, monotone") {
  const McsTable table = McsTable::standard();
  REQUIRE(select_mcs(1000.0, table, 1.0) == 9);
  REQUIRE(select_mcs(table.entries.front().snr_req_db + 1.0 - 0.001, table, 1.0) == kNoTx);
  // exactly snr_req(4) + margin selects index 4
  REQUIRE(select_mcs(table.entries[4].snr_req_db + 1.0, table, 1.0) == 4);
  int prev = kNoTx;
  for (double snr = -10.0; snr <= 60.0; snr += 0.25) {
    const int m = select_mcs(snr, table, 1.0);
    REQUIRE(m >= prev);
    prev = m;
  }
}

TEST_CASE("phy_rate: standard-formula values") {
  const McsTable table = McsTable::standard();
  // MCS7 = 64-QAM 5/6 at 20 MHz, 1 stream, long GI
  REQUIRE(phy_rate(7, 20, 1, Guard::Long, table) == 65.0);
  // two streams double the rate exactly
  for (int m = 0; m <= 9; ++m)
    REQUIRE(phy_rate(m, 40, 2, Guard::Short, table) ==
            2.0 * phy_rate(m, 40, 1, Guard::Short, table));
  // MCS9 = 256-QAM 5/6 at 80 MHz, 4 streams, short GI: the 1733 Mbps ceiling
  REQUIRE(phy_rate(9, 80, 4, Guard::Short, table) == Catch::Approx(1733.3333333).epsilon(1e-9));
  // NO_TX carries nothing
  REQUIRE(phy_rate(kNoTx, 20, 1, Guard::Long, table) == 0.0);
}

TEST_CASE("phy_rate: strictly increasing in MCS at fixed bandwidth/streams") {
  const McsTable table = McsTable::standard();
  for (int bw : {20, 40, 80, 160}) {
    double prev = 0.0;
    for (int m = 0; m <= 9; ++m) {
      const double r = phy_rate(m, bw, 1, Guard::Long, table);
      REQUIRE(r > prev);
      prev = r;
    }
  }
}

TEST_CASE("phy_rate error paths") {
  const McsTable table = McsTable::standard();
  REQUIRE_THROWS_AS(phy_rate(10, 20, 1, Guard::Long, table), std::invalid_argument);
  REQUIRE_THROWS_AS(phy_rate(3, 30, 1, Guard::Long, table), std::invalid_argument);
  REQUIRE_THROWS_AS(phy_rate(3, 20, 0, Guard::Long, table), std::invalid_argument);
}

TEST_CASE("packet_error_rate: midpoint, gap=0 value, monotone, bounded") {
  const McsTable table = McsTable::standard();
  LossModel loss;
  const double req3 = table.entries[3].snr_req_db;
  // gap = g50 = -1 is the logistic midpoint
  REQUIRE(packet_error_rate(req3 - 1.0, 3, table, loss) == Catch::Approx(0.5).epsilon(1e-12));
  // gap = 0 with defaults: 1/(1+e^2)
  REQUIRE(packet_error_rate(req3, 3, table, loss) ==
          Catch::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-12));
  // range where the logistic tails stay resolvable in doubles
  double prev = 1.0;
  for (double gap = -15.0; gap <= 30.0; gap += 0.5) {
    const double p = packet_error_rate(req3 + gap, 3, table, loss);
    REQUIRE(p < prev);
    REQUIRE(p > 0.0);
    REQUIRE(p < 1.0);
    prev = p;
  }
  REQUIRE(packet_error_rate(100.0, kNoTx, table, loss) == 1.0);
}

TEST_CASE("McsTable validation catches broken tables") {
  McsTable t = McsTable::standard();
  t.entries[5].snr_req_db = t.entries[4].snr_req_db;  // not strictly increasing
  REQUIRE_THROWS_AS(t.validate(), std::invalid_argument);
  t = McsTable::standard();
  t.entries[2].coding_rate = 0.1;  // bits*rate dips
  REQUIRE_THROWS_AS(t.validate(), std::invalid_argument);
  REQUIRE_NOTHROW(McsTable::standard().validate());
}
