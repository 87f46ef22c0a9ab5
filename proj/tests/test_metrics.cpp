#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numeric>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "lass/metrics.hpp"
#include "lass/rng.hpp"

using namespace lass;
using namespace lass::metrics;

namespace {

std::vector<double> random_signal(size_t n, uint64_t seed) {
  std::vector<double> x(n);
  Rng rng(seed);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

// All L-delayed copies of both references, truncated to length n. A vector of
// length n orthogonal to these truncated copies is orthogonal to the padded
// copies as well, because its zero tail never meets the padded region.
std::vector<std::vector<double>> delayed_span_truncated(const std::vector<double>& a,
                                                        const std::vector<double>& b,
                                                        size_t L) {
  const size_t n = a.size();
  std::vector<std::vector<double>> basis;
  for (const auto* src : {&a, &b})
    for (size_t d = 0; d < L; ++d) {
      std::vector<double> v(n, 0.0);
      for (size_t i = 0; i + d < n; ++i) v[i + d] = (*src)[i];
      basis.push_back(std::move(v));
    }
  return basis;
}

// Modified Gram-Schmidt projection of x onto the orthogonal complement.
std::vector<double> orthogonalize(std::vector<double> x,
                                  std::vector<std::vector<double>> basis) {
  for (size_t k = 0; k < basis.size(); ++k) {
    auto& b = basis[k];
    for (size_t j = 0; j < k; ++j) {
      const auto& prev = basis[j];
      const double d = std::inner_product(prev.begin(), prev.end(), b.begin(), 0.0);
      for (size_t i = 0; i < b.size(); ++i) b[i] -= d * prev[i];
    }
    const double nrm = std::sqrt(energy(b));
    REQUIRE(nrm > 1e-12);
    for (auto& v : b) v /= nrm;
    const double d = std::inner_product(b.begin(), b.end(), x.begin(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) x[i] -= d * b[i];
  }
  // One refinement pass keeps the residual projections at roundoff.
  for (const auto& b : basis) {
    const double d = std::inner_product(b.begin(), b.end(), x.begin(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) x[i] -= d * b[i];
  }
  return x;
}

}  // namespace

TEST_CASE("projecting the reference onto its own span is exact") {
  const size_t n = 4000, L = 10;
  auto t = random_signal(n, 1);
  auto b = random_signal(n, 2);
  auto d = bss_decompose(t, t, b, L);
  const double et = energy(d.s_target);
  CHECK(energy(d.e_interf) < 1e-18 * et);
  CHECK(energy(d.e_artif) < 1e-18 * et);
  CHECK(std::isinf(sdr(d)));
  CHECK(std::isinf(sir(d)));
  CHECK(std::isinf(sar(d)));
}

TEST_CASE("decomposition telescopes exactly") {
  const size_t n = 3000, L = 16;
  auto est = random_signal(n, 3);
  auto t = random_signal(n, 4);
  auto b = random_signal(n, 5);
  auto d = bss_decompose(est, t, b, L);
  double worst = 0.0;
  for (size_t i = 0; i < d.s_target.size(); ++i)
    worst = std::max(worst, std::abs(d.s_target[i] + d.e_interf[i] + d.e_artif[i] -
                                     d.estimate_padded[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("constructed orthogonal noise lands entirely in e_artif") {
  const size_t n = 2000, L = 8;
  auto t = random_signal(n, 6);
  auto b = random_signal(n, 7);

  auto noise = orthogonalize(random_signal(n, 8), delayed_span_truncated(t, b, L));
  std::vector<double> est(n);
  for (size_t i = 0; i < n; ++i) est[i] = t[i] + 0.1 * noise[i];
  auto d = bss_decompose(est, t, b, L);

  const double e_noise = 0.01 * energy(noise);
  CHECK(energy(d.e_artif) == doctest::Approx(e_noise).epsilon(1e-6));
  CHECK(energy(d.e_interf) < 1e-9 * energy(d.s_target));
  // e_artif is 0.1 * noise itself, sample for sample
  for (size_t i = 0; i < n; i += 97)
    CHECK(d.e_artif[i] == doctest::Approx(0.1 * noise[i]).epsilon(1e-6));

  const double expect_sdr = 10.0 * std::log10(energy(t) / e_noise);
  CHECK(std::abs(sdr(d) - expect_sdr) < 0.01);
}

TEST_CASE("SDR is invariant to a pure gain on the estimate") {
  const size_t n = 2500, L = 12;
  auto t = random_signal(n, 9);
  auto b = random_signal(n, 10);
  std::vector<double> est(n);
  Rng rng(11);
  for (size_t i = 0; i < n; ++i) est[i] = t[i] + 0.2 * b[i] + 0.05 * rng.uniform(-1, 1);
  auto d1 = bss_decompose(est, t, b, L);
  std::vector<double> est2(n);
  for (size_t i = 0; i < n; ++i) est2[i] = 2.0 * est[i];
  auto d2 = bss_decompose(est2, t, b, L);
  CHECK(sdr(d1) == doctest::Approx(sdr(d2)).epsilon(1e-9));
  CHECK(sir(d1) == doctest::Approx(sir(d2)).epsilon(1e-9));
  CHECK(sar(d1) == doctest::Approx(sar(d2)).epsilon(1e-9));
}

TEST_CASE("SIR >= SDR on random estimates") {
  for (uint64_t seed = 20; seed < 40; ++seed) {
    const size_t n = 1500, L = 10;
    auto t = random_signal(n, seed);
    auto b = random_signal(n, seed + 100);
    std::vector<double> est(n);
    Rng rng(seed + 200);
    for (size_t i = 0; i < n; ++i)
      est[i] = 0.8 * t[i] + 0.3 * b[i] + 0.1 * rng.uniform(-1, 1);
    auto d = bss_decompose(est, t, b, L);
    CHECK(sir(d) >= sdr(d));
  }
}

TEST_CASE("L = 1 with orthogonal unit references reduces to 2-vector least squares") {
  const size_t n = 1024;
  // Orthonormal by construction.
  std::vector<double> t(n, 0.0), b(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    t[i] = std::sin(2.0 * M_PI * 8.0 * i / n) * std::sqrt(2.0 / n);
    b[i] = std::cos(2.0 * M_PI * 16.0 * i / n) * std::sqrt(2.0 / n);
  }
  auto est = random_signal(n, 13);
  auto d = bss_decompose(est, t, b, 1);
  // Hand-rolled least squares with the same 1e-10 * mean-diagonal floor.
  const double et = energy(t), eb = energy(b);
  const double ct =
      std::inner_product(t.begin(), t.end(), est.begin(), 0.0) / (et + 1e-10 * et);
  const double lam2 = 1e-10 * (et + eb) / 2.0;
  const double ct2 =
      std::inner_product(t.begin(), t.end(), est.begin(), 0.0) / (et + lam2);
  const double cb2 =
      std::inner_product(b.begin(), b.end(), est.begin(), 0.0) / (eb + lam2);
  for (size_t i = 0; i < n; ++i) {
    CHECK(std::abs(d.s_target[i] - ct * t[i]) < 1e-12);
    CHECK(std::abs((d.s_target[i] + d.e_interf[i]) - (ct2 * t[i] + cb2 * b[i])) < 1e-12);
  }
}

TEST_CASE("zero target projection is an undefined-metric error") {
  const size_t n = 1000;
  std::vector<double> t(n, 0.0), b = random_signal(n, 14), est = random_signal(n, 15);
  // Zero reference makes the Gram matrix singular beyond regularization.
  CHECK_THROWS(bss_decompose(est, t, b, 4));
}

TEST_CASE("input validation") {
  auto x = random_signal(100, 16);
  auto y = random_signal(90, 17);
  CHECK_THROWS(bss_decompose(x, y, x, 8));   // length mismatch
  CHECK_THROWS(bss_decompose(x, x, x, 512)); // shorter than the filter
}

TEST_CASE("si_sdr basics") {
  auto s = random_signal(5000, 18);
  CHECK(std::isinf(si_sdr(s, s)));

  // exact scale invariance of the estimate
  std::vector<double> est(s.size());
  Rng rng(19);
  for (size_t i = 0; i < s.size(); ++i) est[i] = s[i] + 0.3 * rng.uniform(-1, 1);
  const double base = si_sdr(est, s);
  for (double c : {0.1, 3.0, 10.0}) {
    std::vector<double> scaled(est.size());
    for (size_t i = 0; i < est.size(); ++i) scaled[i] = c * est[i];
    CHECK(std::abs(si_sdr(scaled, s) - base) < 1e-10);
  }

  std::vector<double> zero(100, 0.0);
  CHECK_THROWS(si_sdr(random_signal(100, 20), zero));
}

TEST_CASE("si_sdr of signal plus orthogonal noise matches the closed form") {
  const size_t n = 8192;
  // Zero-mean orthogonal pair on the DFT basis.
  std::vector<double> s(n), noise(n);
  for (size_t i = 0; i < n; ++i) {
    s[i] = std::sin(2.0 * M_PI * 5.0 * i / n);
    noise[i] = std::sin(2.0 * M_PI * 11.0 * i / n) * 0.2;
  }
  std::vector<double> est(n);
  for (size_t i = 0; i < n; ++i) est[i] = s[i] + noise[i];
  const double expect = 10.0 * std::log10(energy(s) / energy(noise));
  CHECK(std::abs(si_sdr(est, s) - expect) < 1e-9);
}

TEST_CASE("aggregation: sorted-middle median, quartiles, inf handling") {
  std::vector<double> vals = {3.0, 1.0, 2.0, 5.0, 4.0};
  auto a = aggregate(vals);
  CHECK(a.median == 3.0);
  CHECK(a.mean == 3.0);
  CHECK(a.q1 == 2.0);
  CHECK(a.q3 == 4.0);
  CHECK(a.count == 5);
  CHECK(a.inf_count == 0);

  vals.push_back(std::numeric_limits<double>::infinity());
  a = aggregate(vals);
  CHECK(a.inf_count == 1);
  CHECK(a.count == 5);
  CHECK(a.median == 3.0);

  CHECK(median_of({7.0}) == 7.0);
}

TEST_CASE("report CSV has the standard column order") {
  MetricsReport rep;
  ReportRow row;
  row.name = "unprocessed";
  row.examples.push_back({"x", {1.0, 2.0, 3.0, 4.0}, true, ""});
  row.recompute_aggregates();
  rep.rows.push_back(row);
  const auto csv = report_csv(rep);
  CHECK(csv.find("system,stat,SDR,SIR,SAR,SI-SDR") == 0);
  CHECK(csv.find("unprocessed,median,1.0000,2.0000,3.0000,4.0000") != std::string::npos);
}

TEST_CASE("report JSON serializes infinities as strings") {
  MetricsReport rep;
  ReportRow row;
  row.name = "model";
  row.examples.push_back(
      {"p", {std::numeric_limits<double>::infinity(), 2.0, 3.0, 4.0}, true, ""});
  row.recompute_aggregates();
  rep.rows.push_back(row);
  write_report_json("rep_test.json", rep);
  std::ifstream in("rep_test.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"inf\"") != std::string::npos);
  std::remove("rep_test.json");
}
