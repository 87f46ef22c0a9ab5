#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lass/trainer.hpp"

namespace lass::train {

using namespace lass::ad;

namespace {

std::string join_sizes(const std::vector<size_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<size_t> parse_sizes(const std::string& s) {
  std::vector<size_t> out;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) out.push_back(static_cast<size_t>(std::stoull(part)));
  }
  return out;
}

}  // namespace

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "batch_size=" << batch_size << "\n";
  out << "checkpoint_interval=" << checkpoint_interval << "\n";
  out << "clip_seconds=" << clip_seconds << "\n";
  out << "d_q=" << d_q << "\n";
  out << "encoder_channels=" << join_sizes(encoder_channels) << "\n";
  out << "final_channels=" << final_channels << "\n";
  out << "grad_clip=" << grad_clip << "\n";
  out << "iterations=" << iterations << "\n";
  out << "leaky_slope=" << leaky_slope << "\n";
  out << "log_every=" << log_every << "\n";
  out << "lr=" << lr << "\n";
  out << "mode=" << mode << "\n";
  out << "out_dir=" << out_dir << "\n";
  out << "overfit_one_batch=" << (overfit_one_batch ? 1 : 0) << "\n";
  out << "query_blocks=" << query_blocks << "\n";
  out << "query_dim=" << query_dim << "\n";
  out << "query_ffn_mult=" << query_ffn_mult << "\n";
  out << "query_heads=" << query_heads << "\n";
  out << "query_max_len=" << query_max_len << "\n";
  out << "seed=" << seed << "\n";
  out << "snr_db=" << snr_db << "\n";
  out << "stft_frame=" << stft_frame << "\n";
  out << "stft_hop=" << stft_hop << "\n";
  out << "two_event_fraction=" << two_event_fraction << "\n";
  return out.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "batch_size") cfg.batch_size = std::stoull(val);
    else if (key == "checkpoint_interval") cfg.checkpoint_interval = std::stoull(val);
    else if (key == "clip_seconds") cfg.clip_seconds = std::stod(val);
    else if (key == "d_q") cfg.d_q = std::stoull(val);
    else if (key == "encoder_channels") cfg.encoder_channels = parse_sizes(val);
    else if (key == "final_channels") cfg.final_channels = std::stoull(val);
    else if (key == "grad_clip") cfg.grad_clip = std::stod(val);
    else if (key == "iterations") cfg.iterations = std::stoull(val);
    else if (key == "leaky_slope") cfg.leaky_slope = std::stod(val);
    else if (key == "log_every") cfg.log_every = std::stoull(val);
    else if (key == "lr") cfg.lr = std::stod(val);
    else if (key == "mode") cfg.mode = val;
    else if (key == "out_dir") cfg.out_dir = val;
    else if (key == "overfit_one_batch") cfg.overfit_one_batch = val != "0";
    else if (key == "query_blocks") cfg.query_blocks = std::stoull(val);
    else if (key == "query_dim") cfg.query_dim = std::stoull(val);
    else if (key == "query_ffn_mult") cfg.query_ffn_mult = std::stoull(val);
    else if (key == "query_heads") cfg.query_heads = std::stoull(val);
    else if (key == "query_max_len") cfg.query_max_len = std::stoull(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "snr_db") cfg.snr_db = std::stod(val);
    else if (key == "stft_frame") cfg.stft_frame = std::stoull(val);
    else if (key == "stft_hop") cfg.stft_hop = std::stoull(val);
    else if (key == "two_event_fraction") cfg.two_event_fraction = std::stod(val);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void TrainConfig::validate() const {
  if (mode != "language" && mode != "tag")
    throw std::invalid_argument("config: mode must be 'language' or 'tag'");
  if (batch_size == 0 || iterations == 0 || lr <= 0.0 || clip_seconds <= 0.0)
    throw std::invalid_argument("config: sizes and rates must be positive");
  if (encoder_channels.empty())
    throw std::invalid_argument("config: encoder_channels must be non-empty");
}

model::ModelConfig TrainConfig::to_model_config() const {
  model::ModelConfig mc;
  mc.mode = mode == "tag" ? model::QueryMode::Tag : model::QueryMode::Language;
  mc.query.dim = query_dim;
  mc.query.blocks = query_blocks;
  mc.query.heads = query_heads;
  mc.query.ffn_mult = query_ffn_mult;
  mc.query.max_len = query_max_len;
  mc.query.out_dim = d_q;
  mc.separator.encoder_channels = encoder_channels;
  mc.separator.decoder_channels =
      std::vector<size_t>(encoder_channels.rbegin(), encoder_channels.rend());
  mc.separator.final_channels = final_channels;
  mc.separator.leaky_slope = leaky_slope;
  mc.stft_frame = stft_frame;
  mc.stft_hop = stft_hop;
  return mc;
}

data::CorpusConfig TrainConfig::to_corpus_config() const {
  data::CorpusConfig cc;
  cc.duration_s = clip_seconds;
  cc.snr_db = snr_db;
  cc.two_event_fraction = two_event_fraction;
  return cc;
}

TrainerState TrainerState::fresh(const TrainConfig& cfg) {
  cfg.validate();
  TrainerState st;
  st.cfg = cfg;
  st.net = std::make_unique<model::LassNet<float>>(cfg.to_model_config(),
                                                   data::build_vocabulary(),
                                                   data::all_tags(), cfg.seed);
  st.adam.lr = static_cast<float>(cfg.lr);
  st.adam.init(st.net->parameters());
  st.step = 0;
  return st;
}

void TrainerState::save(const std::string& path) const {
  std::vector<TensorRecord> recs;
  auto push_tensor = [&](const std::string& name, const Tensor<float>& t) {
    TensorRecord r;
    r.name = name;
    r.dtype = 0;
    r.shape = t.shape;
    r.f32 = t.data;
    recs.push_back(std::move(r));
  };
  auto params = const_cast<model::LassNet<float>&>(*net).parameters();
  for (const auto& p : params) push_tensor(p.name, *p.tensor);
  for (const auto& b : const_cast<model::LassNet<float>&>(*net).buffers())
    push_tensor(b.first, *b.second);
  for (size_t i = 0; i < params.size(); ++i) {
    TensorRecord m;
    m.name = "adam/m/" + params[i].name;
    m.dtype = 0;
    m.shape = params[i].tensor->shape;
    m.f32 = adam.m[i];
    recs.push_back(std::move(m));
    TensorRecord v;
    v.name = "adam/v/" + params[i].name;
    v.dtype = 0;
    v.shape = params[i].tensor->shape;
    v.f32 = adam.v[i];
    recs.push_back(std::move(v));
  }
  recs.push_back(scalar_record("meta/adam_t", static_cast<double>(adam.t)));
  recs.push_back(scalar_record("meta/step", static_cast<double>(step)));
  recs.push_back(text_record("meta/config_text", cfg.to_text()));
  recs.push_back(text_record("meta/vocab_text", net->vocab().to_text()));
  std::string tags_text;
  for (const auto& t : net->tags()) tags_text += t + "\n";
  recs.push_back(text_record("meta/tags_text", tags_text));
  write_checkpoint(path, recs);
}

TrainerState TrainerState::from_checkpoint(const std::string& path) {
  auto recs = read_checkpoint(path);
  std::map<std::string, TensorRecord*> by_name;
  for (auto& r : recs) {
    if (!by_name.emplace(r.name, &r).second)
      throw std::runtime_error("checkpoint: duplicate tensor name '" + r.name + "'");
  }
  auto take = [&](const std::string& name) -> TensorRecord& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing tensor '" + name + "' in " + path);
    TensorRecord* r = it->second;
    by_name.erase(it);
    return *r;
  };

  TrainerState st;
  st.cfg = TrainConfig::from_text(record_text(take("meta/config_text")));
  const auto vocab = query::Vocabulary::from_text(record_text(take("meta/vocab_text")));
  std::vector<std::string> tags;
  {
    std::istringstream in(record_text(take("meta/tags_text")));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) tags.push_back(line);
  }
  st.step = static_cast<uint64_t>(record_scalar(take("meta/step")));
  const auto adam_t = static_cast<uint64_t>(record_scalar(take("meta/adam_t")));

  st.net = std::make_unique<model::LassNet<float>>(st.cfg.to_model_config(), vocab, tags,
                                                   st.cfg.seed);
  auto assign = [&](const std::string& name, Tensor<float>& dst) {
    TensorRecord& r = take(name);
    if (r.dtype != 0)
      throw std::runtime_error("checkpoint: tensor '" + name + "' has dtype " +
                               std::to_string(r.dtype) + ", expected f32");
    if (r.shape != dst.shape)
      throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " +
                               shape_str(r.shape) + ", model expects " +
                               shape_str(dst.shape));
    dst.data = r.f32;
  };
  auto params = st.net->parameters();
  st.adam.lr = static_cast<float>(st.cfg.lr);
  st.adam.init(params);
  st.adam.t = adam_t;
  for (size_t i = 0; i < params.size(); ++i) {
    assign(params[i].name, *params[i].tensor);
    const std::string mname = "adam/m/" + params[i].name;
    const std::string vname = "adam/v/" + params[i].name;
    if (by_name.count(mname)) {
      st.adam.m[i] = take(mname).f32;
      st.adam.v[i] = take(vname).f32;
      if (st.adam.m[i].size() != params[i].tensor->numel() ||
          st.adam.v[i].size() != params[i].tensor->numel())
        throw std::runtime_error("checkpoint: Adam state shape mismatch for '" +
                                 params[i].name + "'");
    }
  }
  for (auto& b : st.net->buffers()) assign(b.first, *b.second);
  if (!by_name.empty())
    throw std::runtime_error("checkpoint: unused tensor '" + by_name.begin()->first +
                             "' in " + path + " (model layout mismatch)");
  return st;
}

namespace {

// Transposes an [F, T] magnitude into the [t, f] plane of a batch tensor.
void fill_magnitude(const dsp::ComplexSpectrogram& spec, float* dst) {
  const size_t F = spec.bins(), T = spec.frames();
  for (size_t f = 0; f < F; ++f)
    for (size_t t = 0; t < T; ++t) dst[t * F + f] = static_cast<float>(spec.magnitude[f * T + t]);
}

}  // namespace

double train_step(TrainerState& state, const std::vector<data::MixtureRecord>& batch) {
  const auto& cfg = state.cfg;
  const size_t N = batch.size();
  const auto probe = dsp::stft(batch[0].mixture, cfg.stft_frame, cfg.stft_hop);
  const size_t F = probe.bins(), T = probe.frames();

  auto mix_mag = make_tensor<float>(Shape{N, 1, T, F});
  auto tgt_mag = make_tensor<float>(Shape{N, 1, T, F});
  std::vector<std::vector<int>> tokens;
  auto multihot = make_tensor<float>(Shape{N, state.net->tags().size()});
  for (size_t n = 0; n < N; ++n) {
    const auto ms = dsp::stft(batch[n].mixture, cfg.stft_frame, cfg.stft_hop);
    const auto ts = dsp::stft(batch[n].target, cfg.stft_frame, cfg.stft_hop);
    if (ms.frames() != T || ts.frames() != T)
      throw std::invalid_argument("train_step: clips in a batch must share a length");
    fill_magnitude(ms, &mix_mag->data[n * T * F]);
    fill_magnitude(ts, &tgt_mag->data[n * T * F]);
    if (cfg.mode == "tag") {
      const auto hot = state.net->tags_to_multihot(batch[n].target_tags);
      std::copy(hot.begin(), hot.end(), &multihot->data[n * state.net->tags().size()]);
    } else {
      tokens.push_back(query::tokenize(batch[n].caption, state.net->vocab()).ids);
    }
  }

  auto params = state.net->parameters();
  for (auto& p : params) p.tensor->zero_grad();

  Tape<float> tape;
  model::LassNet<float>::Output out;
  if (cfg.mode == "tag")
    out = state.net->forward_tags(tape, mix_mag, multihot, BnMode::Train);
  else
    out = state.net->forward_text(tape, mix_mag, tokens, BnMode::Train);
  auto estimate = mul(tape, out.mask, mix_mag);
  auto loss = mae_loss(tape, estimate, tgt_mag);
  const double loss_value = loss->data[0];
  tape.backward(loss);

  if (cfg.grad_clip > 0.0) {
    double norm_sq = 0.0;
    for (auto& p : params)
      for (float g : p.tensor->grad) norm_sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(norm_sq);
    if (norm > cfg.grad_clip) {
      const float s = static_cast<float>(cfg.grad_clip / norm);
      for (auto& p : params)
        for (float& g : p.tensor->grad) g *= s;
    }
  }
  state.adam.lr = static_cast<float>(cfg.lr);
  adam_step(params, state.adam);
  state.step += 1;
  return loss_value;
}

TrainResult train_loop(TrainerState& state, std::ostream* log) {
  const auto& cfg = state.cfg;
  std::filesystem::create_directories(cfg.out_dir);
  const data::Corpus corpus(cfg.to_corpus_config());
  const std::string final_path = cfg.out_dir + "/checkpoint.lassckpt";
  std::string last_good;

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  while (state.step < cfg.iterations) {
    const uint64_t batch_index = cfg.overfit_one_batch ? 0 : state.step;
    Rng rng = Rng::fold(cfg.seed, batch_index);
    const auto batch = corpus.next_training_batch(cfg.batch_size, rng);
    double loss;
    try {
      loss = train_step(state, batch);
      if (!std::isfinite(loss)) throw std::runtime_error("loss is not finite");
    } catch (const std::exception& ex) {
      throw std::runtime_error(
          "train: aborted at step " + std::to_string(state.step) + " (" + ex.what() + ")" +
          (last_good.empty() ? "; no checkpoint written yet"
                             : "; last good checkpoint: " + last_good));
    }
    result.losses.push_back(loss);
    if (log && (state.step % cfg.log_every == 0 || state.step == cfg.iterations)) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      (*log) << state.step << "\t" << loss << "\t" << secs << "\n";
      log->flush();
    }
    if (cfg.checkpoint_interval && state.step % cfg.checkpoint_interval == 0 &&
        state.step < cfg.iterations) {
      const std::string path =
          cfg.out_dir + "/checkpoint_step" + std::to_string(state.step) + ".lassckpt";
      state.save(path);
      last_good = path;
    }
  }
  state.save(final_path);
  result.checkpoint_path = final_path;
  return result;
}

}  // namespace lass::train
