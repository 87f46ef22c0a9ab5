#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "lass/fft.hpp"
#include "lass/kernels.hpp"
#include "lass/metrics.hpp"
#include "lass/wav_io.hpp"

namespace lass::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

// Correlations c(d) = sum_u a[u] * b[u + d] for |d| < L, via one FFT product.
// Returns c indexed c[d + L - 1], d in (-L, L).
std::vector<double> correlations(const std::vector<double>& a, const std::vector<double>& b,
                                 size_t L) {
  const size_t n = a.size();
  size_t N = 1;
  while (N < n + L) N <<= 1;
  dsp::Fft fft(N);
  std::vector<std::complex<double>> fa(N), fb(N);
  for (size_t i = 0; i < n; ++i) {
    fa[i] = a[i];
    fb[i] = b[i];
  }
  fft.forward(fa);
  fft.forward(fb);
  for (size_t i = 0; i < N; ++i) fa[i] = std::conj(fa[i]) * fb[i];
  fft.inverse(fa);
  std::vector<double> c(2 * L - 1);
  for (size_t d = 0; d < L; ++d) c[L - 1 + d] = fa[d].real();
  for (size_t d = 1; d < L; ++d) c[L - 1 - d] = fa[N - d].real();
  return c;
}

// In-place Cholesky solve of (G + lambda I) x = rhs for symmetric positive
// definite G. Throws if a pivot collapses.
void cholesky_solve(std::vector<double>& G, size_t n, std::vector<double>& rhs,
                    const std::string& what) {
  for (size_t j = 0; j < n; ++j) {
    const double* rowj = &G[j * n];
    const double d = G[j * n + j] - ad::dot_n(rowj, rowj, j);
    if (!(d > 0.0))
      throw std::runtime_error("bss_decompose: singular Gram matrix (" + what +
                               ") beyond regularization");
    const double sj = std::sqrt(d);
    G[j * n + j] = sj;
    for (size_t i = j + 1; i < n; ++i)
      G[i * n + j] = (G[i * n + j] - ad::dot_n(&G[i * n], rowj, j)) / sj;
  }
  for (size_t i = 0; i < n; ++i)  // L y = rhs
    rhs[i] = (rhs[i] - ad::dot_n(&G[i * n], rhs.data(), i)) / G[i * n + i];
  for (size_t i = n; i-- > 0;) {  // L^T x = y
    double v = rhs[i];
    for (size_t k = i + 1; k < n; ++k) v -= G[k * n + i] * rhs[k];
    rhs[i] = v / G[i * n + i];
  }
}

// y[t] += sum_i coef[i] * x[t - i], over the padded length.
void filter_add(const std::vector<double>& x, const std::vector<double>& coef,
                std::vector<double>& y) {
  const size_t n = x.size(), L = coef.size();
  for (size_t i = 0; i < L; ++i) {
    const double c = coef[i];
    if (c == 0.0) continue;
    for (size_t u = 0; u < n; ++u) y[u + i] += c * x[u];
  }
}

}  // namespace

Decomposition bss_decompose(const std::vector<double>& estimate,
                            const std::vector<double>& ref_target,
                            const std::vector<double>& ref_interf, size_t L) {
  const size_t n = estimate.size();
  if (L == 0) throw std::invalid_argument("bss_decompose: filter length must be positive");
  if (n < L || ref_target.size() != n || ref_interf.size() != n)
    throw std::invalid_argument("bss_decompose: signals must share a length >= filter_len");

  const size_t padded = n + L - 1;
  // Zero-padded estimate; all projections live in this space.
  std::vector<double> est_pad(padded, 0.0);
  std::copy(estimate.begin(), estimate.end(), est_pad.begin());

  const auto ctt = correlations(ref_target, ref_target, L);
  const auto cbb = correlations(ref_interf, ref_interf, L);
  const auto ctb = correlations(ref_target, ref_interf, L);
  const auto cte = correlations(ref_target, estimate, L);
  const auto cbe = correlations(ref_interf, estimate, L);
  auto cval = [&](const std::vector<double>& c, long long d) { return c[L - 1 + d]; };

  // Projection onto the target's delayed copies alone.
  {
    std::vector<double> G(L * L);
    std::vector<double> rhs(L);
    double trace = 0.0;
    for (size_t i = 0; i < L; ++i) {
      for (size_t j = 0; j < L; ++j)
        G[i * L + j] = cval(ctt, static_cast<long long>(i) - static_cast<long long>(j));
      rhs[i] = cval(cte, static_cast<long long>(i));
      trace += G[i * L + i];
    }
    const double lam = 1e-10 * trace / static_cast<double>(L);
    for (size_t i = 0; i < L; ++i) G[i * L + i] += lam;
    cholesky_solve(G, L, rhs, "ref_target");

    Decomposition d;
    d.filter_len = L;
    d.estimate_padded = est_pad;
    d.s_target.assign(padded, 0.0);
    filter_add(ref_target, rhs, d.s_target);

    // Projection onto both references' delayed copies.
    const size_t M = 2 * L;
    std::vector<double> G2(M * M);
    std::vector<double> rhs2(M);
    double trace2 = 0.0;
    for (size_t i = 0; i < L; ++i)
      for (size_t j = 0; j < L; ++j) {
        const long long dd = static_cast<long long>(i) - static_cast<long long>(j);
        G2[i * M + j] = cval(ctt, dd);
        G2[(L + i) * M + (L + j)] = cval(cbb, dd);
        G2[i * M + (L + j)] = cval(ctb, dd);
        G2[(L + j) * M + i] = cval(ctb, dd);
      }
    for (size_t i = 0; i < L; ++i) {
      rhs2[i] = cval(cte, static_cast<long long>(i));
      rhs2[L + i] = cval(cbe, static_cast<long long>(i));
    }
    for (size_t i = 0; i < M; ++i) trace2 += G2[i * M + i];
    const double lam2 = 1e-10 * trace2 / static_cast<double>(M);
    for (size_t i = 0; i < M; ++i) G2[i * M + i] += lam2;
    cholesky_solve(G2, M, rhs2, "ref_target + ref_interf");

    std::vector<double> p_all(padded, 0.0);
    filter_add(ref_target, {rhs2.begin(), rhs2.begin() + L}, p_all);
    filter_add(ref_interf, {rhs2.begin() + L, rhs2.end()}, p_all);

    d.e_interf.resize(padded);
    d.e_artif.resize(padded);
    for (size_t i = 0; i < padded; ++i) {
      d.e_interf[i] = p_all[i] - d.s_target[i];
      d.e_artif[i] = est_pad[i] - p_all[i];
    }
    return d;
  }
}

namespace {

double db_ratio(double num, double den, double floor_ref) {
  if (den < 1e-12 * floor_ref) return kInf;
  return 10.0 * std::log10(num / den);
}

}  // namespace

double sdr(const Decomposition& d) {
  const double st = energy(d.s_target);
  if (st <= 0.0) throw std::runtime_error("sdr: projection onto the target span is zero");
  std::vector<double> e(d.e_interf.size());
  for (size_t i = 0; i < e.size(); ++i) e[i] = d.e_interf[i] + d.e_artif[i];
  return db_ratio(st, energy(e), st);
}

double sir(const Decomposition& d) {
  const double st = energy(d.s_target);
  if (st <= 0.0) throw std::runtime_error("sir: projection onto the target span is zero");
  return db_ratio(st, energy(d.e_interf), st);
}

double sar(const Decomposition& d) {
  std::vector<double> si(d.s_target.size());
  for (size_t i = 0; i < si.size(); ++i) si[i] = d.s_target[i] + d.e_interf[i];
  const double num = energy(si);
  if (num <= 0.0) throw std::runtime_error("sar: target-plus-interference energy is zero");
  return db_ratio(num, energy(d.e_artif), num);
}

double si_sdr(const std::vector<double>& estimate, const std::vector<double>& reference) {
  if (estimate.size() != reference.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  const size_t n = estimate.size();
  if (n == 0) throw std::invalid_argument("si_sdr: empty signals");
  double me = 0.0, mr = 0.0;
  for (size_t i = 0; i < n; ++i) {
    me += estimate[i];
    mr += reference[i];
  }
  me /= n;
  mr /= n;
  double dot = 0.0, rr = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = estimate[i] - me, r = reference[i] - mr;
    dot += e * r;
    rr += r * r;
  }
  if (rr <= 0.0) throw std::invalid_argument("si_sdr: zero reference");
  const double alpha = dot / rr;
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = alpha * (reference[i] - mr);
    const double d = t - (estimate[i] - me);
    num += t * t;
    den += d * d;
  }
  return db_ratio(num, den, num);
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values) {
    if (std::isinf(v))
      ++a.inf_count;
    else
      finite.push_back(v);
  }
  a.count = finite.size();
  if (finite.empty()) return a;
  std::sort(finite.begin(), finite.end());
  double sum = 0.0;
  for (double v : finite) sum += v;
  a.mean = sum / static_cast<double>(finite.size());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(finite.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, finite.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return finite[lo] * (1.0 - frac) + finite[hi] * frac;
  };
  a.q1 = quantile(0.25);
  a.median = quantile(0.5);
  a.q3 = quantile(0.75);
  return a;
}

double median_of(std::vector<double> values) { return aggregate(values).median; }

void ReportRow::recompute_aggregates() {
  std::vector<double> vs, vi, va, vsi;
  for (const auto& e : examples) {
    if (!e.ok) continue;
    vs.push_back(e.values.sdr);
    vi.push_back(e.values.sir);
    va.push_back(e.values.sar);
    vsi.push_back(e.values.si_sdr);
  }
  sdr = aggregate(vs);
  sir = aggregate(vi);
  sar = aggregate(va);
  si_sdr = aggregate(vsi);
}

const ReportRow* MetricsReport::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return &r;
  return nullptr;
}

namespace {

MetricValues compute_metrics(const std::vector<double>& est, const std::vector<double>& ref_t,
                             const std::vector<double>& ref_b, size_t taps) {
  MetricValues v;
  const auto d = bss_decompose(est, ref_t, ref_b, taps);
  v.sdr = sdr(d);
  v.sir = sir(d);
  v.sar = sar(d);
  v.si_sdr = si_sdr(est, ref_t);
  return v;
}

std::string join_path(const std::string& dir, const std::string& rel) {
  if (dir.empty()) return rel;
  return dir.back() == '/' ? dir + rel : dir + "/" + rel;
}

int heldout_paraphrase_id(const data::MixtureRecord& rec) {
  const auto seen = data::seen_paraphrase_count();
  const auto total = data::paraphrase_count();
  return static_cast<int>(seen + rec.seed % (total - seen));
}

}  // namespace

MetricsReport evaluate_testset(model::LassNet<float>& net,
                               const std::vector<data::MixtureRecord>& manifest,
                               const EvalOptions& opt) {
  MetricsReport report;
  switch (opt.caption_mode) {
    case CaptionMode::Manifest: report.caption_mode = "manifest"; break;
    case CaptionMode::Heldout: report.caption_mode = "heldout"; break;
    case CaptionMode::Average: report.caption_mode = "average"; break;
  }
  if (opt.use_tags) report.caption_mode = "tags";
  ReportRow unprocessed{"unprocessed", {}, {}, {}, {}, {}};
  ReportRow modeled{"model", {}, {}, {}, {}, {}};

  for (const auto& rec_in : manifest) {
    data::MixtureRecord rec = rec_in;
    ExampleResult ru, rm;
    ru.id = rec.id;
    rm.id = rec.id;
    bool unprocessed_done = false;
    try {
      if (!rec.mixture_wav.empty() && !rec.target_wav.empty()) {
        auto mix = dsp::read_wav(join_path(opt.audio_dir, rec.mixture_wav));
        auto tgt = dsp::read_wav(join_path(opt.audio_dir, rec.target_wav));
        if (mix.sample_rate != dsp::kCanonicalSampleRate ||
            tgt.sample_rate != dsp::kCanonicalSampleRate)
          throw std::runtime_error("evaluate: sample rate mismatch in " + rec.id);
        rec.mixture = std::move(mix);
        rec.target = std::move(tgt);
      } else {
        data::realize_record(rec, rec.snr_db);
      }
      // The interference reference is the mixture minus the target, exact in
      // the evaluation domain.
      std::vector<double> ref_b(rec.mixture.samples.size());
      for (size_t i = 0; i < ref_b.size(); ++i)
        ref_b[i] = rec.mixture.samples[i] - rec.target.samples[i];

      ru.values =
          compute_metrics(rec.mixture.samples, rec.target.samples, ref_b, opt.bss_taps);
      unprocessed.examples.push_back(ru);
      unprocessed_done = true;

      auto run_model = [&](const std::string* text) {
        model::PredictOptions popt;
        return opt.use_tags
                   ? model::predict_source_tags(net, rec.mixture, rec.target_tags, popt)
                   : model::predict_source(net, rec.mixture, *text, popt);
      };
      if (opt.use_tags) {
        auto est = run_model(nullptr);
        rm.values = compute_metrics(est.samples, rec.target.samples, ref_b, opt.bss_taps);
      } else if (opt.caption_mode == CaptionMode::Average) {
        MetricValues acc;
        const int k = static_cast<int>(data::paraphrase_count());
        for (int p = 0; p < k; ++p) {
          const std::string cap = data::render_caption(rec.target_spec, p);
          auto est = run_model(&cap);
          const auto v =
              compute_metrics(est.samples, rec.target.samples, ref_b, opt.bss_taps);
          acc.sdr += v.sdr / k;
          acc.sir += v.sir / k;
          acc.sar += v.sar / k;
          acc.si_sdr += v.si_sdr / k;
        }
        rm.values = acc;
      } else {
        std::string cap = rec.caption;
        if (opt.caption_mode == CaptionMode::Heldout)
          cap = data::render_caption(rec.target_spec, heldout_paraphrase_id(rec));
        auto est = run_model(&cap);
        rm.values = compute_metrics(est.samples, rec.target.samples, ref_b, opt.bss_taps);
      }
      modeled.examples.push_back(rm);
    } catch (const std::exception& ex) {
      if (!unprocessed_done) {
        ru.ok = false;
        ru.error = ex.what();
        unprocessed.examples.push_back(ru);
      }
      rm.ok = false;
      rm.error = ex.what();
      modeled.examples.push_back(rm);
    }
  }

  unprocessed.recompute_aggregates();
  modeled.recompute_aggregates();
  report.rows.push_back(std::move(unprocessed));
  report.rows.push_back(std::move(modeled));
  return report;
}

namespace {

using nlohmann::json;

json num_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json agg_to_json(const Aggregate& a) {
  return {{"mean", a.mean},     {"median", a.median},       {"q1", a.q1},
          {"q3", a.q3},         {"inf_count", a.inf_count}, {"count", a.count}};
}

}  // namespace

void write_report_json(const std::string& path, const MetricsReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json examples = json::array();
    for (const auto& e : r.examples) {
      json je = {{"id", e.id}, {"ok", e.ok}};
      if (e.ok) {
        je["sdr"] = num_or_inf(e.values.sdr);
        je["sir"] = num_or_inf(e.values.sir);
        je["sar"] = num_or_inf(e.values.sar);
        je["si_sdr"] = num_or_inf(e.values.si_sdr);
      } else {
        je["error"] = e.error;
      }
      examples.push_back(std::move(je));
    }
    rows.push_back({{"name", r.name},
                    {"aggregates",
                     {{"sdr", agg_to_json(r.sdr)},
                      {"sir", agg_to_json(r.sir)},
                      {"sar", agg_to_json(r.sar)},
                      {"si_sdr", agg_to_json(r.si_sdr)}}},
                    {"per_example", std::move(examples)}});
  }
  json doc = {{"manifest", report.manifest_path},
              {"checkpoint", report.checkpoint_path},
              {"caption_mode", report.caption_mode},
              {"rows", std::move(rows)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_json: cannot open " + path);
  out << doc.dump(2) << "\n";
}

std::string report_csv(const MetricsReport& report) {
  std::string csv = "system,stat,SDR,SIR,SAR,SI-SDR\n";
  char line[256];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof(line), "%s,median,%.4f,%.4f,%.4f,%.4f\n", r.name.c_str(),
                  r.sdr.median, r.sir.median, r.sar.median, r.si_sdr.median);
    csv += line;
    std::snprintf(line, sizeof(line), "%s,mean,%.4f,%.4f,%.4f,%.4f\n", r.name.c_str(),
                  r.sdr.mean, r.sir.mean, r.sar.mean, r.si_sdr.mean);
    csv += line;
  }
  return csv;
}

}  // namespace lass::metrics
