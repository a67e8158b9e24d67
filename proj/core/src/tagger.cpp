#include "groundlab/tagger.hpp"

#include <cmath>
#include <limits>

#include "groundlab/error.hpp"
#include "groundlab/io.hpp"
#include "groundlab/neural/crf.hpp"

namespace groundlab {

using nlohmann::json;
using nn::Tape;
using nn::Tensor;
using nn::Var;

std::vector<int> spans_to_bio(int length, const std::vector<Span>& spans) {
  std::vector<int> tags(static_cast<std::size_t>(std::max(length, 0)), kTagO);
  for (const auto& [s, e] : spans) {
    if (s < 0 || e > length || s >= e) throw InvalidArgument("span out of range");
    for (int t = s; t < e; ++t) {
      if (tags[static_cast<std::size_t>(t)] != kTagO) throw InvalidArgument("overlapping spans");
      tags[static_cast<std::size_t>(t)] = t == s ? kTagB : kTagI;
    }
  }
  return tags;
}

std::vector<Span> bio_to_spans(const std::vector<int>& tags) {
  std::vector<Span> spans;
  int open = -1;
  for (int t = 0; t < static_cast<int>(tags.size()); ++t) {
    const int tag = tags[static_cast<std::size_t>(t)];
    if (tag == kTagI && open >= 0) continue;
    if (open >= 0) spans.emplace_back(open, t);
    open = tag == kTagO ? -1 : t;
  }
  if (open >= 0) spans.emplace_back(open, static_cast<int>(tags.size()));
  return spans;
}

void TaggerConfig::validate() const {
  if (token_dim == 0 || hidden_dim == 0) throw InvalidArgument("tagger dimensions must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0, 1)");
  if (adam.lr <= 0.0 || clip <= 0.0) throw InvalidArgument("learning rate and clip must be positive");
  if (epochs < 1 || batch_size < 1 || patience < 1) throw InvalidArgument("epochs, batch size and patience must be >= 1");
}

json to_json(const TaggerConfig& c) {
  return {{"token_dim", c.token_dim},
          {"hidden_dim", c.hidden_dim},
          {"dropout", c.dropout},
          {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
          {"clip", c.clip},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"seed", c.seed}};
}

TaggerConfig tagger_config_from_json(const json& j) {
  try {
    TaggerConfig c;
    c.token_dim = j.at("token_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    const auto& a = j.at("adam");
    c.adam = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
              a.at("epsilon").get<double>()};
    c.clip = j.at("clip").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("tagger config: ") + e.what());
  }
}

std::vector<TaggerExample> tagger_examples(const AnnotatedCorpus& corpus, const std::vector<std::string>& dialogue_ids,
                                           const Vocabulary& vocab) {
  std::vector<TaggerExample> out;
  for (const auto& did : dialogue_ids) {
    const auto messages = corpus.dialogues.at(did).messages();
    std::vector<std::vector<Span>> spans(messages.size());
    for (const auto& mid : corpus.markables_of(did)) {
      const auto& m = corpus.markables.at(mid);
      spans.at(static_cast<std::size_t>(m.utterance_index)).emplace_back(m.start_token, m.end_token);
    }
    for (std::size_t u = 0; u < messages.size(); ++u) {
      if (messages[u]->tokens.empty()) continue;
      TaggerExample ex;
      ex.dialogue_id = did;
      ex.utterance_index = static_cast<int>(u);
      for (const auto& t : messages[u]->tokens) ex.tokens.push_back(vocab.id(t));
      ex.tags = spans_to_bio(static_cast<int>(ex.tokens.size()), spans[u]);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

MarkableTagger::MarkableTagger(TaggerConfig config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)), store_(config.seed) {
  config_.validate();
  embed_ = &store_.add("embed", {vocab_.size(), config_.token_dim});
  forward_ = nn::GruParams::create(store_, "gru_fwd", config_.token_dim, config_.hidden_dim);
  backward_ = nn::GruParams::create(store_, "gru_bwd", config_.token_dim, config_.hidden_dim);
  out_ = nn::LinearParams::create(store_, "emit", 2 * config_.hidden_dim, kTagCount);
  transitions_ = &store_.add("transitions", {kTagCount, kTagCount}, nn::Init::Zeros);
}

std::vector<Var> MarkableTagger::emissions(Tape& tape, const std::vector<int>& tokens, Rng* dropout) const {
  if (dropout && config_.dropout <= 0.0) dropout = nullptr;
  const auto emb = tape.param(*embed_);
  std::vector<Var> xs;
  for (int tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_.size()) throw InvalidArgument("token id out of range");
    auto x = tape.row(emb, static_cast<std::size_t>(tok));
    if (dropout) x = tape.dropout(x, config_.dropout, *dropout);
    xs.push_back(x);
  }
  const std::size_t n = xs.size();
  std::vector<Var> fwd(n), bwd(n);
  auto h = tape.constant(Tensor({config_.hidden_dim}));
  for (std::size_t t = 0; t < n; ++t) fwd[t] = h = nn::gru_cell(tape, forward_, xs[t], h);
  h = tape.constant(Tensor({config_.hidden_dim}));
  for (std::size_t t = n; t-- > 0;) bwd[t] = h = nn::gru_cell(tape, backward_, xs[t], h);
  std::vector<Var> out;
  for (std::size_t t = 0; t < n; ++t) {
    const Var both[] = {fwd[t], bwd[t]};
    auto z = tape.concat(both);
    if (dropout) z = tape.dropout(z, config_.dropout, *dropout);
    out.push_back(nn::linear(tape, out_, z));
  }
  return out;
}

Var MarkableTagger::nll(Tape& tape, const TaggerExample& ex, Rng* dropout) const {
  if (ex.tokens.empty() || ex.tags.size() != ex.tokens.size()) throw InvalidArgument("tagger example is malformed");
  const auto em = emissions(tape, ex.tokens, dropout);
  return tape.crf_nll(em, tape.param(*transitions_), ex.tags);
}

std::vector<int> MarkableTagger::decode(const std::vector<int>& tokens) const {
  if (tokens.empty()) return {};
  Tape tape;
  const auto em = emissions(tape, tokens);
  Tensor e({tokens.size(), kTagCount});
  for (std::size_t t = 0; t < tokens.size(); ++t)
    for (std::size_t k = 0; k < kTagCount; ++k) e.at(t, k) = tape.value(em[t])[k];
  Tensor tr = transitions_->value;
  constexpr double kForbidden = -std::numeric_limits<double>::infinity();
  tr.at(kTagO, kTagI) = kForbidden;
  const double start[kTagCount] = {0.0, kForbidden, 0.0};
  return nn::crf_viterbi(e, tr, start).tags;
}

std::vector<Span> MarkableTagger::tag_utterance(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  for (const auto& t : tokens) ids.push_back(vocab_.id(t));
  return bio_to_spans(decode(ids));
}

void MarkableTagger::save(const std::filesystem::path& stem, const json& history) const {
  auto params = stem;
  params += ".params";
  auto sidecar = stem;
  sidecar += ".json";
  store_.save(params);
  write_json(sidecar, {{"format", "groundlab-tagger"},
                       {"version", 1},
                       {"config", to_json(config_)},
                       {"vocabulary", to_json(vocab_)},
                       {"history", history}});
}

MarkableTagger MarkableTagger::load(const std::filesystem::path& stem) {
  auto params = stem;
  params += ".params";
  auto sidecar = stem;
  sidecar += ".json";
  const auto j = read_json(sidecar);
  if (j.value("format", "") != "groundlab-tagger") throw SchemaError(sidecar.string() + ": not a tagger sidecar");
  MarkableTagger t(tagger_config_from_json(j.at("config")), vocabulary_from_json(j.at("vocabulary")));
  t.store_.copy_values_from(nn::ParamStore::load(params));
  return t;
}

json to_json(const TaggerMetrics& m) {
  return {{"token_accuracy", m.token_accuracy}, {"span_precision", m.span_precision},
          {"span_recall", m.span_recall},       {"span_f1", m.span_f1},
          {"tokens", m.tokens},                 {"gold_spans", m.gold_spans},
          {"predicted_spans", m.predicted_spans}};
}

TaggerMetrics evaluate_tagger(const MarkableTagger& tagger, const std::vector<TaggerExample>& examples) {
  TaggerMetrics m;
  std::size_t correct = 0, matched = 0;
  for (const auto& ex : examples) {
    const auto pred = tagger.decode(ex.tokens);
    for (std::size_t t = 0; t < pred.size(); ++t) correct += pred[t] == ex.tags[t];
    m.tokens += pred.size();
    const auto ps = bio_to_spans(pred);
    const auto gs = bio_to_spans(ex.tags);
    m.predicted_spans += ps.size();
    m.gold_spans += gs.size();
    for (const auto& s : ps) matched += std::find(gs.begin(), gs.end(), s) != gs.end();
  }
  const auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  m.token_accuracy = ratio(correct, m.tokens);
  m.span_precision = ratio(matched, m.predicted_spans);
  m.span_recall = ratio(matched, m.gold_spans);
  const double pr = m.span_precision + m.span_recall;
  m.span_f1 = pr > 0.0 ? 2.0 * m.span_precision * m.span_recall / pr : 0.0;
  return m;
}

TaggerTrainResult train_tagger(MarkableTagger& tagger, const std::vector<TaggerExample>& train_set,
                               const std::vector<TaggerExample>& valid_set,
                               const std::function<void(const TaggerEpoch&)>& on_epoch) {
  if (train_set.empty()) throw InvalidArgument("tagger training set is empty");
  const auto& cfg = tagger.config();
  auto& store = tagger.params();
  nn::Adam opt(cfg.adam);
  Rng order_rng(Rng::derive_seed(cfg.seed, 1));
  Rng dropout_rng(Rng::derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  TaggerTrainResult result;
  result.best_accuracy = -1.0;
  std::string best = store.serialize();
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      store.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const auto& ex = train_set[order[k]];
        Tape tape;
        const auto loss = tagger.nll(tape, ex, &dropout_rng);
        const double v = tape.scalar(loss);
        if (!std::isfinite(v))
          throw NumericError("non-finite tagger loss at epoch " + std::to_string(epoch) + " on dialogue " +
                             ex.dialogue_id + " utterance " + std::to_string(ex.utterance_index));
        total += v;
        tape.backward(tape.scale(loss, 1.0 / static_cast<double>(end - b)));
      }
      store.clip_grad_norm(cfg.clip);
      opt.step(store);
    }
    TaggerEpoch e;
    e.epoch = epoch;
    e.train_loss = total / static_cast<double>(train_set.size());
    e.valid = evaluate_tagger(tagger, valid_set.empty() ? train_set : valid_set);
    result.history.push_back(e);
    if (on_epoch) on_epoch(e);
    if (e.valid.token_accuracy > result.best_accuracy) {
      result.best_accuracy = e.valid.token_accuracy;
      result.best_epoch = epoch;
      best = store.serialize();
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  store.copy_values_from(nn::ParamStore::deserialize(best));
  return result;
}

std::vector<Markable> tag_dialogue(const MarkableTagger& tagger, const Dialogue& dialogue) {
  std::vector<Markable> out;
  const auto messages = dialogue.messages();
  int n = 0;
  for (std::size_t u = 0; u < messages.size(); ++u)
    for (const auto& [s, e] : tagger.tag_utterance(messages[u]->tokens)) {
      Markable m;
      m.id = dialogue.id + "_auto_" + std::to_string(n++);
      m.dialogue_id = dialogue.id;
      m.utterance_index = static_cast<int>(u);
      m.start_token = s;
      m.end_token = e;
      m.speaker = messages[u]->speaker;
      out.push_back(std::move(m));
    }
  return out;
}

}  // namespace groundlab
