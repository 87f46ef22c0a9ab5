#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "lass/datagen.hpp"

namespace lass::data {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kSr = dsp::kCanonicalSampleRate;

const std::vector<std::string> kTags = {
    "am_tone",    "chirp_down", "chirp_up",    "click_train",
    "pink_noise", "square_wave", "tone",       "white_noise",
};

const char* tag_of(SoundClass c) {
  switch (c) {
    case SoundClass::Tone: return "tone";
    case SoundClass::ChirpUp: return "chirp_up";
    case SoundClass::ChirpDown: return "chirp_down";
    case SoundClass::WhiteNoise: return "white_noise";
    case SoundClass::PinkNoise: return "pink_noise";
    case SoundClass::AmTone: return "am_tone";
    case SoundClass::ClickTrain: return "click_train";
    case SoundClass::SquareWave: return "square_wave";
  }
  throw std::invalid_argument("unknown sound class");
}

}  // namespace

const std::string& class_tag(SoundClass c) {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (size_t i = 0; i < kNumClasses; ++i) v.push_back(tag_of(static_cast<SoundClass>(i)));
    return v;
  }();
  return names[static_cast<size_t>(c)];
}

SoundClass class_from_tag(const std::string& tag) {
  for (size_t i = 0; i < kNumClasses; ++i)
    if (tag == tag_of(static_cast<SoundClass>(i))) return static_cast<SoundClass>(i);
  throw std::invalid_argument("unknown sound class tag '" + tag + "'");
}

const std::vector<std::string>& all_tags() { return kTags; }

std::vector<std::string> SourceSpec::tags() const {
  std::vector<std::string> out;
  for (const auto& e : events) {
    std::string t = class_tag(e.cls);
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  }
  return out;
}

// --- synthesis ---

namespace {

std::vector<double> synth_event(const EventSpec& e, size_t n, Rng& rng) {
  std::vector<double> x(n, 0.0);
  const double dt = 1.0 / kSr;
  switch (e.cls) {
    case SoundClass::Tone: {
      const double phase0 = rng.uniform(0.0, kTwoPi);
      for (size_t i = 0; i < n; ++i) x[i] = std::sin(phase0 + kTwoPi * e.freq_hz * i * dt);
      break;
    }
    case SoundClass::ChirpUp:
    case SoundClass::ChirpDown: {
      const double dur = n * dt;
      const double k = (e.freq2_hz - e.freq_hz) / dur;  // linear sweep rate
      const double phase0 = rng.uniform(0.0, kTwoPi);
      for (size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        x[i] = std::sin(phase0 + kTwoPi * (e.freq_hz * t + 0.5 * k * t * t));
      }
      break;
    }
    case SoundClass::WhiteNoise: {
      for (size_t i = 0; i < n; ++i) x[i] = rng.uniform(-1.0, 1.0);
      break;
    }
    case SoundClass::PinkNoise: {
      // Kellet's 1/f filter bank over white noise.
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (size_t i = 0; i < n; ++i) {
        const double w = rng.uniform(-1.0, 1.0);
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        x[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
      }
      break;
    }
    case SoundClass::AmTone: {
      const double phase0 = rng.uniform(0.0, kTwoPi);
      for (size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        const double env = 0.5 * (1.0 - std::cos(kTwoPi * e.rate_hz * t));
        x[i] = env * std::sin(phase0 + kTwoPi * e.freq_hz * t);
      }
      break;
    }
    case SoundClass::ClickTrain: {
      const auto interval = static_cast<size_t>(kSr / e.rate_hz);
      const size_t click_len = 128;  // 4 ms burst
      for (size_t start = 0; start < n; start += std::max<size_t>(interval, 1)) {
        for (size_t i = 0; i < click_len && start + i < n; ++i)
          x[start + i] += rng.uniform(-1.0, 1.0) * std::exp(-static_cast<double>(i) / 24.0);
      }
      break;
    }
    case SoundClass::SquareWave: {
      // Band-limited: odd harmonics kept below 12 kHz.
      const double phase0 = rng.uniform(0.0, kTwoPi);
      for (int k = 1; k * e.freq_hz < 12000.0; k += 2) {
        const double a = 1.0 / k;
        for (size_t i = 0; i < n; ++i)
          x[i] += a * std::sin(k * (phase0 + kTwoPi * e.freq_hz * i * dt));
      }
      break;
    }
  }
  return x;
}

}  // namespace

dsp::Waveform synthesize_source(const SourceSpec& spec) {
  if (spec.duration_s <= 0.0)
    throw std::invalid_argument("synthesize_source: duration must be positive");
  if (spec.events.empty() || spec.events.size() > 2)
    throw std::invalid_argument("synthesize_source: expected 1 or 2 events");
  const auto n = static_cast<size_t>(std::llround(spec.duration_s * kSr));

  std::vector<double> out;
  if (spec.events.size() == 1) {
    Rng rng = Rng::fold(spec.seed, 0);
    out = synth_event(spec.events[0], n, rng);
  } else {
    // Two events joined with a 50 ms crossfade.
    const size_t xf = std::min<size_t>(static_cast<size_t>(0.05 * kSr), n / 2);
    const size_t m = (n + xf + 1) / 2;
    Rng r0 = Rng::fold(spec.seed, 0), r1 = Rng::fold(spec.seed, 1);
    const auto e0 = synth_event(spec.events[0], m, r0);
    const auto e1 = synth_event(spec.events[1], m, r1);
    out.assign(2 * m - xf, 0.0);
    for (size_t i = 0; i < m; ++i) out[i] += e0[i];
    for (size_t i = 0; i < m; ++i) out[m - xf + i] += e1[i];
    for (size_t i = 0; i < xf; ++i) {
      const double fade = static_cast<double>(i + 1) / (xf + 1);
      out[m - xf + i] = e0[m - xf + i] * (1.0 - fade) + e1[i] * fade;
    }
    out.resize(n);
  }

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double s = 0.5 / peak;
    for (double& v : out) v *= s;
  }
  dsp::Waveform w;
  w.sample_rate = kSr;
  w.samples = std::move(out);
  return w;
}

// --- captions ---

namespace {

// Ten paraphrases per class; ids 0..7 appear in training captions, 8..9 are
// held out for the unseen-template evaluation. Held-out templates reuse only
// words that occur somewhere in the seen templates, so the robustness
// experiment measures sentence-structure generalization, not untrained
// embeddings. "{p}" is a pitch slot filled from the event's frequency.
const char* kTemplates[kNumClasses][10] = {
    // Tone
    {"a steady pure tone is playing", "a continuous electronic beep sounds",
     "an unbroken {p} tone hums along", "a single sustained note rings out",
     "a {p} beep goes on and on", "one pure note holds steady",
     "a plain tone sounds without a break", "the steady hum of a {p} tone continues",
     "a sustained {p} tone sounds steadily", "one continuous beep goes on"},
    // ChirpUp
    {"a tone sweeps up from low to high", "a rising chirp climbs in pitch",
     "a siren like sweep goes upward", "the pitch of a tone rises steadily",
     "an upward sweep keeps climbing higher", "a chirp glides up to a higher pitch",
     "a climbing tone moves from low to high", "the sweep rises up and up",
     "a chirp rises from low pitch to high", "an upward climbing sweep goes higher"},
    // ChirpDown
    {"a tone sweeps down from high to low", "a falling chirp drops in pitch",
     "a descending sweep slides downward", "the pitch of a tone falls steadily",
     "a downward sweep keeps dropping lower", "a chirp glides down to a lower pitch",
     "a dropping tone moves from high to low", "the sweep falls down and down",
     "a chirp falls from high pitch to low", "a downward falling sweep goes lower"},
    // WhiteNoise
    {"steady white noise hisses in the background", "a constant static hiss fills the air",
     "harsh broadband noise rushes along", "an even hiss of random noise continues",
     "white static noise keeps on hissing", "a flat noisy hiss stays constant",
     "random white static rushes on", "the harsh hiss of white noise carries on",
     "constant white noise hisses along", "a steady hiss of white static continues"},
    // PinkNoise
    {"deep pink noise rumbles softly", "a low heavy noise washes like a waterfall",
     "warm broadband rumble rolls on", "a soft deep roar of noise continues",
     "pink noise keeps rumbling down low", "a deep wash of noise rolls steadily",
     "the soft roar of pink noise carries on", "heavy pink rumble washes along",
     "a deep pink rumble rolls along", "soft heavy noise rumbles on and on"},
    // AmTone
    {"a pulsing tone wobbles on and off", "a tremolo tone beats rhythmically",
     "a {p} tone throbs in waves", "an oscillating beep swells and fades",
     "a wobbling tone pulses over and over", "a beep throbs with a steady beat",
     "the pulsing beat of a {p} tone continues", "a tone swells and fades in waves",
     "a {p} tone pulses and throbs steadily", "a wobbling beep beats over and over"},
    // ClickTrain
    {"sharp clicks tick over and over", "a rapid series of clicks taps along",
     "dry clicking pulses repeat steadily", "a ticking clatter of clicks continues",
     "clicks keep ticking one after another", "a steady train of taps clicks on",
     "the rapid ticking of sharp clicks carries on", "dry taps click again and again",
     "sharp ticking clicks repeat along", "a steady series of dry clicks continues"},
    // SquareWave
    {"a harsh buzzing square wave drones", "a {p} buzzer drones steadily",
     "a raspy electronic buzz holds its pitch", "a rough droning buzz carries on",
     "a buzzing drone keeps on sounding", "an electric buzz drones without stopping",
     "the rough buzz of a square wave continues", "a raspy {p} drone buzzes along",
     "a harsh electronic drone buzzes on", "the droning buzz of a {p} buzzer continues"},
};

// Short noun phrases for the two-event connective templates.
const char* kPhrases[kNumClasses] = {
    "a pure tone",        "a rising sweep", "a falling sweep", "hissing white noise",
    "a deep noise rumble", "a pulsing tone", "a run of clicks", "a buzzing drone",
};

// Every two-event template joins the phrases with "followed by".
const char* kTwoEvent[10] = {
    "{a} followed by {b}",             "first {a} followed by {b}",
    "{a} closely followed by {b}",     "{a} followed by {b} soon after",
    "{a} followed at once by {b}",     "{a} followed right away by {b}",
    "first comes {a} followed by {b}", "{a} followed by {b} right after",
    "{a} soon followed by {b}",        "first comes {a} closely followed by {b}",
};

std::string pitch_word(double freq) {
  if (freq < 700.0) return "low";
  if (freq <= 1800.0) return "mid";
  return "high";
}

std::string substitute(std::string s, const std::string& slot, const std::string& value) {
  for (size_t pos = s.find(slot); pos != std::string::npos; pos = s.find(slot, pos))
    s.replace(pos, slot.size(), value);
  return s;
}

}  // namespace

size_t paraphrase_count() { return 10; }
size_t seen_paraphrase_count() { return 8; }

std::string render_caption(const SourceSpec& spec, int paraphrase_id) {
  if (paraphrase_id < 0 || static_cast<size_t>(paraphrase_id) >= paraphrase_count())
    throw std::invalid_argument("render_caption: unknown paraphrase id " +
                                std::to_string(paraphrase_id));
  if (spec.events.size() == 2) {
    std::string s = kTwoEvent[paraphrase_id];
    s = substitute(s, "{a}", kPhrases[static_cast<size_t>(spec.events[0].cls)]);
    s = substitute(s, "{b}", kPhrases[static_cast<size_t>(spec.events[1].cls)]);
    return s;
  }
  const auto& e = spec.events.at(0);
  std::string s = kTemplates[static_cast<size_t>(e.cls)][paraphrase_id];
  return substitute(s, "{p}", pitch_word(e.freq_hz));
}

query::Vocabulary build_vocabulary() {
  std::set<std::string> words;
  const std::vector<std::string> pitches = {"low", "mid", "high"};
  for (size_t c = 0; c < kNumClasses; ++c)
    for (size_t p = 0; p < paraphrase_count(); ++p)
      for (const auto& pv : pitches)
        for (const auto& w : query::split_words(substitute(kTemplates[c][p], "{p}", pv)))
          words.insert(w);
  for (const auto* t : kTwoEvent)
    for (const auto& w : query::split_words(t)) words.insert(w);
  for (const auto* p : kPhrases)
    for (const auto& w : query::split_words(p)) words.insert(w);
  return query::Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

// --- mixing ---

namespace {

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace

dsp::Waveform loop_to_length(const dsp::Waveform& w, size_t length, double crossfade_s) {
  if (w.samples.empty()) throw std::invalid_argument("loop_to_length: empty signal");
  dsp::Waveform out;
  out.sample_rate = w.sample_rate;
  if (w.samples.size() >= length) {
    out.samples.assign(w.samples.begin(), w.samples.begin() + length);
    return out;
  }
  const size_t xf =
      std::min(static_cast<size_t>(crossfade_s * w.sample_rate), w.samples.size() / 2);
  out.samples = w.samples;
  while (out.samples.size() < length) {
    const size_t base = out.samples.size() - xf;
    for (size_t i = 0; i < xf; ++i) {
      const double fade = static_cast<double>(i + 1) / (xf + 1);
      out.samples[base + i] = out.samples[base + i] * (1.0 - fade) + w.samples[i] * fade;
    }
    out.samples.insert(out.samples.end(), w.samples.begin() + xf, w.samples.end());
  }
  out.samples.resize(length);
  return out;
}

std::pair<dsp::Waveform, dsp::Waveform> make_mixture(const dsp::Waveform& target,
                                                     const dsp::Waveform& background,
                                                     double snr_db) {
  dsp::Waveform bg = background.samples.size() == target.samples.size()
                         ? background
                         : loop_to_length(background, target.samples.size());
  const double et = energy(target.samples);
  const double eb = energy(bg.samples);
  if (et <= 0.0 || eb <= 0.0)
    throw std::invalid_argument("make_mixture: zero-energy source");
  const double alpha = std::sqrt(et / eb) * std::pow(10.0, -snr_db / 20.0);
  dsp::Waveform mix;
  mix.sample_rate = target.sample_rate;
  mix.samples.resize(target.samples.size());
  for (size_t i = 0; i < mix.samples.size(); ++i) {
    bg.samples[i] *= alpha;
    mix.samples[i] = target.samples[i] + bg.samples[i];
  }
  return {std::move(mix), std::move(bg)};
}

// --- corpus ---

Corpus::Corpus(CorpusConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.classes.empty()) throw std::invalid_argument("corpus: no classes configured");
  if (cfg_.duration_s <= 0.0) throw std::invalid_argument("corpus: duration must be positive");
}

namespace {

EventSpec sample_event(SoundClass cls, Rng& rng) {
  EventSpec e;
  e.cls = cls;
  switch (cls) {
    case SoundClass::Tone:
      e.freq_hz = std::exp(rng.uniform(std::log(250.0), std::log(3200.0)));
      break;
    case SoundClass::ChirpUp:
      e.freq_hz = rng.uniform(200.0, 1000.0);
      e.freq2_hz = rng.uniform(2000.0, 6000.0);
      break;
    case SoundClass::ChirpDown:
      e.freq_hz = rng.uniform(2000.0, 6000.0);
      e.freq2_hz = rng.uniform(200.0, 1000.0);
      break;
    case SoundClass::WhiteNoise:
    case SoundClass::PinkNoise:
      break;
    case SoundClass::AmTone:
      e.freq_hz = std::exp(rng.uniform(std::log(300.0), std::log(2500.0)));
      e.rate_hz = rng.uniform(2.0, 12.0);
      break;
    case SoundClass::ClickTrain:
      e.rate_hz = rng.uniform(5.0, 25.0);
      break;
    case SoundClass::SquareWave:
      e.freq_hz = std::exp(rng.uniform(std::log(120.0), std::log(800.0)));
      break;
  }
  return e;
}

}  // namespace

SourceSpec Corpus::sample_target(Rng& rng) const {
  SourceSpec spec;
  spec.duration_s = cfg_.duration_s;
  spec.seed = rng.next_u64();
  const bool two = cfg_.two_event_fraction > 0.0 && rng.uniform() < cfg_.two_event_fraction &&
                   cfg_.classes.size() >= 2;
  const size_t ci = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(cfg_.classes.size()) - 1));
  spec.events.push_back(sample_event(cfg_.classes[ci], rng));
  if (two) {
    size_t cj = ci;
    while (cj == ci)
      cj = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(cfg_.classes.size()) - 1));
    spec.events.push_back(sample_event(cfg_.classes[cj], rng));
  }
  return spec;
}

SourceSpec Corpus::sample_background(Rng& rng, const std::vector<std::string>& taken) const {
  std::vector<SoundClass> eligible;
  for (SoundClass c : cfg_.classes)
    if (std::find(taken.begin(), taken.end(), class_tag(c)) == taken.end())
      eligible.push_back(c);
  if (eligible.empty())
    throw std::runtime_error("corpus: no class with tags disjoint from the target; "
                             "need at least two distinct classes");
  const size_t ci =
      static_cast<size_t>(rng.uniform_int(0, static_cast<int>(eligible.size()) - 1));
  SourceSpec spec;
  spec.duration_s = cfg_.duration_s;
  spec.seed = rng.next_u64();
  spec.events.push_back(sample_event(eligible[ci], rng));
  return spec;
}

void realize_record(MixtureRecord& rec, double snr_db) {
  rec.target = synthesize_source(rec.target_spec);
  const auto bg = synthesize_source(rec.background_spec);
  auto [mix, scaled] = make_mixture(rec.target, bg, snr_db);
  rec.mixture = std::move(mix);
}

std::vector<MixtureRecord> Corpus::next_training_batch(size_t batch_size, Rng& rng,
                                                       bool heldout_captions) const {
  std::vector<MixtureRecord> out;
  out.reserve(batch_size);
  for (size_t i = 0; i < batch_size; ++i) {
    MixtureRecord rec;
    rec.seed = rng.next_u64();
    rec.snr_db = cfg_.snr_db;
    rec.target_spec = sample_target(rng);
    rec.target_tags = rec.target_spec.tags();
    rec.background_spec = sample_background(rng, rec.target_tags);
    rec.background_tags = rec.background_spec.tags();
    const int lo = heldout_captions ? static_cast<int>(seen_paraphrase_count()) : 0;
    const int hi = heldout_captions ? static_cast<int>(paraphrase_count()) - 1
                                    : static_cast<int>(seen_paraphrase_count()) - 1;
    rec.paraphrase_id = rng.uniform_int(lo, hi);
    rec.caption = render_caption(rec.target_spec, rec.paraphrase_id);
    realize_record(rec, rec.snr_db);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<MixtureRecord> Corpus::build_test_set(size_t n_targets,
                                                  size_t backgrounds_per_target,
                                                  uint64_t seed) const {
  std::vector<MixtureRecord> out;
  out.reserve(n_targets * backgrounds_per_target);
  for (size_t ti = 0; ti < n_targets; ++ti) {
    Rng rng = Rng::fold(seed, ti);
    MixtureRecord base;
    base.target_spec = sample_target(rng);
    base.target_tags = base.target_spec.tags();
    base.paraphrase_id = rng.uniform_int(0, static_cast<int>(seen_paraphrase_count()) - 1);
    base.caption = render_caption(base.target_spec, base.paraphrase_id);
    for (size_t bi = 0; bi < backgrounds_per_target; ++bi) {
      MixtureRecord rec = base;
      rec.seed = rng.next_u64();
      rec.snr_db = cfg_.snr_db;
      rec.background_spec = sample_background(rng, rec.target_tags);
      rec.background_tags = rec.background_spec.tags();
      char buf[48];
      std::snprintf(buf, sizeof(buf), "t%04zu_b%zu", ti, bi);
      rec.id = buf;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// --- manifest ---

namespace {

using nlohmann::json;

json spec_to_json(const SourceSpec& s) {
  json events = json::array();
  for (const auto& e : s.events) {
    events.push_back({{"class", class_tag(e.cls)},
                      {"freq_hz", e.freq_hz},
                      {"freq2_hz", e.freq2_hz},
                      {"rate_hz", e.rate_hz}});
  }
  return {{"events", events}, {"duration_s", s.duration_s}, {"seed", s.seed}};
}

SourceSpec spec_from_json(const json& j) {
  SourceSpec s;
  s.duration_s = j.at("duration_s").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  for (const auto& je : j.at("events")) {
    EventSpec e;
    e.cls = class_from_tag(je.at("class").get<std::string>());
    e.freq_hz = je.at("freq_hz").get<double>();
    e.freq2_hz = je.at("freq2_hz").get<double>();
    e.rate_hz = je.at("rate_hz").get<double>();
    s.events.push_back(e);
  }
  return s;
}

}  // namespace

void write_manifest(const std::string& path, const std::vector<MixtureRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  for (const auto& r : records) {
    json j = {{"id", r.id},
              {"target_spec", spec_to_json(r.target_spec)},
              {"background_spec", spec_to_json(r.background_spec)},
              {"caption", r.caption},
              {"paraphrase_id", r.paraphrase_id},
              {"target_tags", r.target_tags},
              {"background_tags", r.background_tags},
              {"seed", r.seed},
              {"snr_db", r.snr_db}};
    if (!r.mixture_wav.empty()) j["mixture_wav"] = r.mixture_wav;
    if (!r.target_wav.empty()) j["target_wav"] = r.target_wav;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write_manifest: write failed: " + path);
}

std::vector<MixtureRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  std::vector<MixtureRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    MixtureRecord r;
    r.id = j.at("id").get<std::string>();
    r.target_spec = spec_from_json(j.at("target_spec"));
    r.background_spec = spec_from_json(j.at("background_spec"));
    r.caption = j.at("caption").get<std::string>();
    r.paraphrase_id = j.at("paraphrase_id").get<int>();
    r.target_tags = j.at("target_tags").get<std::vector<std::string>>();
    r.background_tags = j.at("background_tags").get<std::vector<std::string>>();
    r.seed = j.at("seed").get<uint64_t>();
    r.snr_db = j.at("snr_db").get<double>();
    if (j.contains("mixture_wav")) r.mixture_wav = j["mixture_wav"].get<std::string>();
    if (j.contains("target_wav")) r.target_wav = j["target_wav"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lass::data
