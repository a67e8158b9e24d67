#include "groundlab/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "groundlab/error.hpp"
#include "groundlab/io.hpp"

namespace groundlab {

using nlohmann::json;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

const std::array<std::pair<Variant, const char*>, 5> kVariantNames{{
    {Variant::Tsel, "TSEL"},
    {Variant::Ref, "REF"},
    {Variant::TselRef, "TSEL-REF"},
    {Variant::TselDial, "TSEL-DIAL"},
    {Variant::TselRefDial, "TSEL-REF-DIAL"},
}};

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [k, name] : kVariantNames)
    if (k == v) return name;
  throw InvalidArgument("unknown variant");
}

Variant variant_from_string(const std::string& s) {
  for (const auto& [k, name] : kVariantNames)
    if (s == name) return k;
  throw InvalidArgument("unknown model variant '" + s + "'");
}

bool uses_tsel(Variant v) { return v != Variant::Ref; }
bool uses_ref(Variant v) { return v == Variant::Ref || v == Variant::TselRef || v == Variant::TselRefDial; }
bool uses_dial(Variant v) { return v == Variant::TselDial || v == Variant::TselRefDial; }

void ModelConfig::validate() const {
  if (token_dim == 0 || hidden_dim == 0 || attribute_dim == 0 || relational_dim == 0 || attention_dim == 0)
    throw InvalidArgument("model dimensions must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0, 1)");
  if (tsel_weight < 0.0 || ref_weight < 0.0 || dial_weight < 0.0) throw InvalidArgument("loss weights must be >= 0");
  if (adam.lr <= 0.0) throw InvalidArgument("learning rate must be positive");
  if (clip <= 0.0) throw InvalidArgument("gradient clip must be positive");
  if (epochs < 1 || batch_size < 1 || patience < 1) throw InvalidArgument("epochs, batch size and patience must be >= 1");
}

json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"token_dim", c.token_dim},
          {"hidden_dim", c.hidden_dim},
          {"attribute_dim", c.attribute_dim},
          {"relational_dim", c.relational_dim},
          {"attention_dim", c.attention_dim},
          {"dropout", c.dropout},
          {"loss_weights", {{"tsel", c.tsel_weight}, {"ref", c.ref_weight}, {"dial", c.dial_weight}}},
          {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
          {"clip", c.clip},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"seed", c.seed},
          {"ranges", {{"size_min", c.ranges.size_min}, {"size_max", c.ranges.size_max}, {"color_max", c.ranges.color_max}}}};
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.token_dim = j.at("token_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.attribute_dim = j.at("attribute_dim").get<std::size_t>();
    c.relational_dim = j.at("relational_dim").get<std::size_t>();
    c.attention_dim = j.at("attention_dim").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    const auto& w = j.at("loss_weights");
    c.tsel_weight = w.at("tsel").get<double>();
    c.ref_weight = w.at("ref").get<double>();
    c.dial_weight = w.at("dial").get<double>();
    const auto& a = j.at("adam");
    c.adam = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
              a.at("epsilon").get<double>()};
    c.clip = j.at("clip").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& r = j.at("ranges");
    c.ranges = {r.at("size_min").get<double>(), r.at("size_max").get<double>(), r.at("color_max").get<double>()};
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model config: ") + e.what());
  }
}

Vocabulary::Vocabulary() {
  for (const auto* t : {&tokens::kUnk, &tokens::kYou, &tokens::kThem, &tokens::kEos, &tokens::kSelection}) add(*t);
}

int Vocabulary::add(const std::string& token) {
  if (const auto it = index_.find(token); it != index_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  words_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? unk() : it->second;
}

Vocabulary Vocabulary::build(const AnnotatedCorpus& corpus, const std::vector<std::string>& dialogue_ids) {
  std::set<std::string> seen;
  for (const auto& id : dialogue_ids)
    for (const auto* m : corpus.dialogues.at(id).messages()) seen.insert(m->tokens.begin(), m->tokens.end());
  Vocabulary v;
  for (const auto& t : seen) v.add(t);
  return v;
}

json to_json(const Vocabulary& v) { return v.words(); }

Vocabulary vocabulary_from_json(const json& j) {
  Vocabulary v;
  const auto words = j.get<std::vector<std::string>>();
  if (words.size() < v.size() || !std::equal(v.words().begin(), v.words().end(), words.begin()))
    throw SchemaError("vocabulary must start with the special tokens");
  for (const auto& w : words) v.add(w);
  if (v.size() != words.size()) throw SchemaError("vocabulary has duplicate tokens");
  return v;
}

ViewFeatures view_features(const Scenario& s, Player p, const AttributeRanges& ranges) {
  const auto& view = s.view(p);
  if (view.visible.size() != static_cast<std::size_t>(kViewSize))
    throw InvalidArgument("view of scenario " + s.id + " does not hold 7 entities");
  ViewFeatures f;
  for (std::size_t i = 0; i < kViewSize; ++i) {
    const auto& ei = s.entity(view.visible[i]);
    const auto n = normalize_entity(ei, view, ranges);
    f.attributes[i] = {n.x, n.y, n.size, n.color};
    for (std::size_t j = 0; j < kViewSize; ++j)
      if (i != j) f.pairs[i][j] = pair_features(ei, s.entity(view.visible[j]), view, ranges);
  }
  return f;
}

GroundingExample make_example(const AnnotatedCorpus& corpus, const GoldMap& gold, const std::string& dialogue_id,
                              Player perspective, const Vocabulary& vocab, const AttributeRanges& ranges) {
  const auto& d = corpus.dialogues.at(dialogue_id);
  const auto& s = corpus.scenario_of(d);
  GroundingExample ex;
  ex.dialogue_id = dialogue_id;
  ex.perspective = perspective;
  ex.features = view_features(s, perspective, ranges);

  const auto speaker_token = [&](Player p) { return p == perspective ? vocab.you() : vocab.them(); };
  std::vector<int> offsets;
  for (const auto* m : d.messages()) {
    offsets.push_back(static_cast<int>(ex.stream.size()));
    ex.stream.push_back(speaker_token(m->speaker));
    for (const auto& t : m->tokens) {
      ex.dial_targets.push_back(static_cast<int>(ex.stream.size()));
      ex.stream.push_back(vocab.id(t));
    }
    ex.dial_targets.push_back(static_cast<int>(ex.stream.size()));
    ex.stream.push_back(vocab.eos());
  }
  ex.stream.push_back(speaker_token(d.first_selector().value_or(perspective)));
  ex.dial_targets.push_back(static_cast<int>(ex.stream.size()));
  ex.stream.push_back(vocab.selection());

  if (const auto sel = d.selection(perspective)) ex.selection = s.view(perspective).index_of(sel->entity_id);

  const auto messages = d.messages();
  for (const auto& mid : corpus.markables_of(dialogue_id)) {
    const auto& m = corpus.markables.at(mid);
    if (m.speaker != perspective) continue;
    const auto it = gold.find(mid);
    if (it == gold.end() || it->second.dropped) continue;
    const int base = offsets.at(static_cast<std::size_t>(m.utterance_index)) + 1;
    const int len = static_cast<int>(messages[static_cast<std::size_t>(m.utterance_index)]->tokens.size());
    ex.refs.push_back({mid, base + m.start_token, base + m.end_token - 1, base + len, it->second.referents});
  }
  return ex;
}

std::vector<GroundingExample> make_examples(const AnnotatedCorpus& corpus, const GoldMap& gold,
                                            const std::vector<std::string>& dialogue_ids, const Vocabulary& vocab,
                                            const AttributeRanges& ranges) {
  std::vector<GroundingExample> out;
  out.reserve(2 * dialogue_ids.size());
  for (const auto& id : dialogue_ids)
    for (Player p : {Player::A, Player::B}) out.push_back(make_example(corpus, gold, id, p, vocab, ranges));
  return out;
}

GroundingModel::GroundingModel(ModelConfig config, Vocabulary vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)), store_(config_.seed) {
  config_.validate();
  const auto& c = config_;
  embed_ = &store_.add("embed", {vocab_.size(), c.token_dim});
  attr_ = nn::LinearParams::create(store_, "entity.attr", kAttributeDim, c.attribute_dim);
  rel_ = nn::LinearParams::create(store_, "entity.rel", kPairFeatureDim, c.relational_dim);
  gru_ = nn::GruParams::create(store_, "gru", c.token_dim, c.hidden_dim);
  att_entity_ = &store_.add("attn.w_entity", {c.attention_dim, c.entity_dim()});
  att_query_ = &store_.add("attn.w_query", {c.attention_dim, c.hidden_dim});
  att_bias_ = &store_.add("attn.b", {c.attention_dim}, nn::Init::Zeros);
  v_tsel_ = &store_.add("attn.v_tsel", {1, c.attention_dim});
  v_ref_ = &store_.add("attn.v_ref", {1, c.attention_dim});
  v_dial_ = &store_.add("attn.v_dial", {1, c.attention_dim});
  mlp_hidden_ = nn::LinearParams::create(store_, "dial.hidden", c.hidden_dim + c.entity_dim(), c.hidden_dim);
  mlp_out_ = nn::LinearParams::create(store_, "dial.out", c.hidden_dim, vocab_.size());
}

std::vector<Var> GroundingModel::encode_entities(Tape& tape, const ViewFeatures& f, Rng* dropout) const {
  std::vector<Var> out;
  out.reserve(kViewSize);
  for (std::size_t i = 0; i < kViewSize; ++i) {
    const auto a = tape.tanh(nn::linear(tape, attr_, tape.constant(std::vector<double>(f.attributes[i].begin(),
                                                                                       f.attributes[i].end()))));
    std::vector<Var> rels;
    for (std::size_t j = 0; j < kViewSize; ++j) {
      if (i == j) continue;
      rels.push_back(tape.tanh(
          nn::linear(tape, rel_, tape.constant(std::vector<double>(f.pairs[i][j].begin(), f.pairs[i][j].end())))));
    }
    const Var parts[] = {a, tape.add(rels)};
    auto e = tape.concat(parts);
    if (dropout) e = tape.dropout(e, config_.dropout, *dropout);
    out.push_back(e);
  }
  return out;
}

std::vector<Var> GroundingModel::project_entities(Tape& tape, std::span<const Var> entities) const {
  if (entities.size() != static_cast<std::size_t>(kViewSize)) throw ShapeError("attention expects 7 entities");
  const auto w = tape.param(*att_entity_);
  std::vector<Var> out;
  for (const auto e : entities) out.push_back(tape.matvec(w, e));
  return out;
}

Var GroundingModel::entity_query_scores(Tape& tape, std::span<const Var> projected, Var query, Head head) const {
  const auto q = tape.affine(tape.param(*att_query_), query, tape.param(*att_bias_));
  nn::Param* v = head == Head::Tsel ? v_tsel_ : head == Head::Ref ? v_ref_ : v_dial_;
  const auto vv = tape.param(*v);
  std::vector<Var> scores;
  for (const auto p : projected) scores.push_back(tape.matvec(vv, tape.tanh(tape.add(p, q))));
  return tape.concat(scores);
}

Var GroundingModel::attention_scores(Tape& tape, std::span<const Var> entities, Var query, Head head) const {
  const auto projected = project_entities(tape, entities);
  return entity_query_scores(tape, projected, query, head);
}

std::vector<Var> GroundingModel::encode_dialogue(Tape& tape, const std::vector<int>& stream, Rng* dropout) const {
  const auto emb = tape.param(*embed_);
  auto h = tape.constant(Tensor({config_.hidden_dim}));
  std::vector<Var> hs;
  hs.reserve(stream.size());
  for (int tok : stream) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_.size()) throw InvalidArgument("token id out of range");
    auto x = tape.row(emb, static_cast<std::size_t>(tok));
    if (dropout) x = tape.dropout(x, config_.dropout, *dropout);
    h = nn::gru_cell(tape, gru_, x, h);
    hs.push_back(h);
  }
  return hs;
}

Var GroundingModel::dial_logits(Tape& tape, std::span<const Var> entities, Var h) const {
  const auto projected = project_entities(tape, entities);
  const auto weights = tape.softmax(entity_query_scores(tape, projected, h, Head::Dial));
  const Var parts[] = {h, tape.weighted_sum(weights, entities)};
  const auto z = tape.tanh(nn::linear(tape, mlp_hidden_, tape.concat(parts)));
  return nn::linear(tape, mlp_out_, z);
}

LossParts GroundingModel::loss(Tape& tape, const GroundingExample& ex, Rng* dropout) const {
  if (dropout && config_.dropout <= 0.0) dropout = nullptr;
  const auto entities = encode_entities(tape, ex.features, dropout);
  const auto projected = project_entities(tape, entities);
  const auto hs = encode_dialogue(tape, ex.stream, dropout);
  LossParts parts;
  std::vector<Var> weighted;

  if (uses_tsel(config_.variant) && ex.selection >= 0) {
    const auto scores = entity_query_scores(tape, projected, hs.back(), Head::Tsel);
    parts.tsel = tape.cross_entropy(scores, static_cast<std::size_t>(ex.selection));
    weighted.push_back(tape.scale(*parts.tsel, config_.tsel_weight));
  }
  if (uses_ref(config_.variant) && !ex.refs.empty()) {
    std::vector<Var> losses;
    for (const auto& r : ex.refs) {
      if (r.start < 0 || r.utt_end >= static_cast<int>(hs.size()) || r.end < r.start)
        throw InvalidArgument("markable " + r.markable_id + " lies outside the encoded stream");
      const Var q3[] = {hs[static_cast<std::size_t>(r.start)], hs[static_cast<std::size_t>(r.end)],
                        hs[static_cast<std::size_t>(r.utt_end)]};
      const auto logits = entity_query_scores(tape, projected, tape.mean(q3), Head::Ref);
      std::array<double, kViewSize> targets{};
      for (std::size_t i = 0; i < kViewSize; ++i) targets[i] = r.gold[i] ? 1.0 : 0.0;
      losses.push_back(tape.bce_with_logits(logits, targets));
    }
    parts.ref = tape.mean(losses);
    weighted.push_back(tape.scale(*parts.ref, config_.ref_weight));
  }
  if (uses_dial(config_.variant) && !ex.dial_targets.empty()) {
    std::vector<Var> losses;
    for (int t : ex.dial_targets) {
      const auto logits = dial_logits(tape, entities, hs[static_cast<std::size_t>(t - 1)]);
      losses.push_back(tape.cross_entropy(logits, static_cast<std::size_t>(ex.stream[static_cast<std::size_t>(t)])));
    }
    parts.dial = tape.mean(losses);
    weighted.push_back(tape.scale(*parts.dial, config_.dial_weight));
  }
  parts.total = weighted.empty() ? tape.constant({0.0}) : tape.add(weighted);
  return parts;
}

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::array<double, kViewSize> to_array(const Tensor& t) {
  std::array<double, kViewSize> a{};
  for (std::size_t i = 0; i < kViewSize; ++i) a[i] = t[i];
  return a;
}

}  // namespace

ExamplePrediction GroundingModel::predict(const GroundingExample& ex) const {
  Tape tape;
  const auto entities = encode_entities(tape, ex.features);
  const auto projected = project_entities(tape, entities);
  const auto hs = encode_dialogue(tape, ex.stream);
  ExamplePrediction p;
  const auto probs = tape.value(tape.softmax(entity_query_scores(tape, projected, hs.back(), Head::Tsel)));
  p.tsel = to_array(probs);
  p.tsel_argmax = static_cast<int>(std::max_element(p.tsel.begin(), p.tsel.end()) - p.tsel.begin());
  for (const auto& r : ex.refs) {
    const Var q3[] = {hs[static_cast<std::size_t>(r.start)], hs[static_cast<std::size_t>(r.end)],
                      hs[static_cast<std::size_t>(r.utt_end)]};
    const auto& logits = tape.value(entity_query_scores(tape, projected, tape.mean(q3), Head::Ref));
    std::array<double, kViewSize> pr{};
    EntityMask m;
    for (std::size_t i = 0; i < kViewSize; ++i) {
      pr[i] = sigmoid(logits[i]);
      m[i] = pr[i] > 0.5;
    }
    p.ref.push_back(pr);
    p.ref_mask.push_back(m);
  }
  if (uses_dial(config_.variant)) {
    for (int t : ex.dial_targets) {
      const auto logits = dial_logits(tape, entities, hs[static_cast<std::size_t>(t - 1)]);
      p.dial_nll += tape.scalar(tape.cross_entropy(logits, static_cast<std::size_t>(ex.stream[static_cast<std::size_t>(t)])));
      ++p.dial_tokens;
    }
  }
  return p;
}

DialogueState GroundingModel::start(const ViewFeatures& f) const {
  Tape tape;
  const auto entities = encode_entities(tape, f);
  const auto projected = project_entities(tape, entities);
  DialogueState s;
  s.entities = Tensor({static_cast<std::size_t>(kViewSize), config_.entity_dim()});
  s.projected = Tensor({static_cast<std::size_t>(kViewSize), config_.attention_dim});
  for (std::size_t i = 0; i < kViewSize; ++i) {
    const auto& e = tape.value(entities[i]);
    std::copy(e.values().begin(), e.values().end(), s.entities.values().begin() + static_cast<std::ptrdiff_t>(i * e.size()));
    const auto& p = tape.value(projected[i]);
    std::copy(p.values().begin(), p.values().end(), s.projected.values().begin() + static_cast<std::ptrdiff_t>(i * p.size()));
  }
  s.h.assign(config_.hidden_dim, 0.0);
  return s;
}

void GroundingModel::feed(DialogueState& state, int token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_.size()) throw InvalidArgument("token id out of range");
  Tape tape;
  const auto x = tape.row(tape.param(*embed_), static_cast<std::size_t>(token));
  const auto h = nn::gru_cell(tape, gru_, x, tape.constant(state.h));
  const auto& v = tape.value(h);
  state.h.assign(v.values().begin(), v.values().end());
  ++state.steps;
}

namespace {

std::vector<Var> state_rows(Tape& tape, const Tensor& m) {
  const auto all = tape.constant(m);
  std::vector<Var> rows;
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(tape.row(all, i));
  return rows;
}

}  // namespace

std::vector<double> GroundingModel::next_token_distribution(const DialogueState& state) const {
  Tape tape;
  const auto entities = state_rows(tape, state.entities);
  const auto logits = dial_logits(tape, entities, tape.constant(state.h));
  const auto& p = tape.value(tape.softmax(logits));
  return {p.values().begin(), p.values().end()};
}

std::array<double, kViewSize> GroundingModel::selection_distribution(const DialogueState& state) const {
  Tape tape;
  const auto projected = state_rows(tape, state.projected);
  return to_array(tape.value(tape.softmax(entity_query_scores(tape, projected, tape.constant(state.h), Head::Tsel))));
}

std::array<double, kViewSize> GroundingModel::resolve(const DialogueState& state, const std::vector<double>& h_start,
                                                      const std::vector<double>& h_end,
                                                      const std::vector<double>& h_utt_end) const {
  Tape tape;
  const auto projected = state_rows(tape, state.projected);
  const Var q3[] = {tape.constant(h_start), tape.constant(h_end), tape.constant(h_utt_end)};
  const auto& logits = tape.value(entity_query_scores(tape, projected, tape.mean(q3), Head::Ref));
  std::array<double, kViewSize> out{};
  for (std::size_t i = 0; i < kViewSize; ++i) out[i] = sigmoid(logits[i]);
  return out;
}

void GroundingModel::save(const std::filesystem::path& stem, const json& history) const {
  auto params = stem;
  params += ".params";
  auto sidecar = stem;
  sidecar += ".json";
  store_.save(params);
  write_json(sidecar, {{"format", "groundlab-model"},
                       {"version", 1},
                       {"config", to_json(config_)},
                       {"vocabulary", to_json(vocab_)},
                       {"history", history}});
}

GroundingModel GroundingModel::load(const std::filesystem::path& stem) {
  auto params = stem;
  params += ".params";
  auto sidecar = stem;
  sidecar += ".json";
  const auto j = read_json(sidecar);
  if (j.value("format", "") != "groundlab-model") throw SchemaError(sidecar.string() + ": not a model sidecar");
  GroundingModel m(model_config_from_json(j.at("config")), vocabulary_from_json(j.at("vocabulary")));
  m.store_.copy_values_from(nn::ParamStore::load(params));
  return m;
}

json to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"train_loss", m.train_loss},
          {"valid_loss", m.valid_loss},
          {"valid_tsel_accuracy", m.valid_tsel_accuracy},
          {"valid_ref_accuracy", m.valid_ref_accuracy},
          {"valid_ref_exact", m.valid_ref_exact},
          {"seconds", m.seconds}};
}

double mean_loss(const GroundingModel& model, const std::vector<GroundingExample>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) {
    Tape tape;
    total += tape.scalar(model.loss(tape, ex).total);
  }
  return total / static_cast<double>(examples.size());
}

namespace {

void validation_metrics(const GroundingModel& model, const std::vector<GroundingExample>& examples, EpochMetrics& m) {
  std::size_t tsel = 0, tsel_n = 0, ent = 0, ent_n = 0, exact = 0, exact_n = 0;
  for (const auto& ex : examples) {
    const auto p = model.predict(ex);
    if (ex.selection >= 0) {
      tsel += p.tsel_argmax == ex.selection;
      ++tsel_n;
    }
    for (std::size_t r = 0; r < ex.refs.size(); ++r) {
      const auto diff = p.ref_mask[r] ^ ex.refs[r].gold;
      ent += kViewSize - diff.count();
      ent_n += kViewSize;
      exact += diff.none();
      ++exact_n;
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  m.valid_tsel_accuracy = ratio(tsel, tsel_n);
  m.valid_ref_accuracy = ratio(ent, ent_n);
  m.valid_ref_exact = ratio(exact, exact_n);
}

}  // namespace

TrainResult train(GroundingModel& model, const std::vector<GroundingExample>& train_set,
                  const std::vector<GroundingExample>& valid_set, const TrainOptions& options) {
  if (train_set.empty()) throw InvalidArgument("training set is empty");
  const auto& cfg = model.config();
  auto& store = model.params();
  nn::Adam opt(cfg.adam);
  Rng order_rng(Rng::derive_seed(cfg.seed, 1));
  Rng dropout_rng(Rng::derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.best_valid_loss = std::numeric_limits<double>::infinity();
  std::string best = store.serialize();
  std::string metrics_lines;
  int stale = 0;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    order_rng.shuffle(order.begin(), order.end());
    double train_total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      store.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const auto& ex = train_set[order[k]];
        Tape tape;
        const auto parts = model.loss(tape, ex, &dropout_rng);
        const double value = tape.scalar(parts.total);
        if (!std::isfinite(value))
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " on dialogue " + ex.dialogue_id +
                             " (" + to_string(ex.perspective) + ")");
        train_total += value;
        if (!parts.tsel && !parts.ref && !parts.dial) continue;
        tape.backward(tape.scale(parts.total, 1.0 / static_cast<double>(end - b)));
      }
      store.clip_grad_norm(cfg.clip);
      opt.step(store);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = train_total / static_cast<double>(train_set.size());
    const auto& selection_set = valid_set.empty() ? train_set : valid_set;
    m.valid_loss = mean_loss(model, selection_set);
    if (!std::isfinite(m.valid_loss)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    validation_metrics(model, selection_set, m);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(m);
    if (options.on_epoch) options.on_epoch(m);

    const bool improved = m.valid_loss < result.best_valid_loss;
    if (improved) {
      result.best_valid_loss = m.valid_loss;
      result.best_epoch = epoch;
      best = store.serialize();
      stale = 0;
    } else {
      ++stale;
    }
    if (!options.metrics_path.empty()) {
      metrics_lines += to_json(m).dump() + "\n";
      write_file_atomic(options.metrics_path, metrics_lines);
    }
    if (improved && !options.checkpoint_stem.empty()) {
      json history = json::array();
      for (const auto& h : result.history) history.push_back(to_json(h));
      model.save(options.checkpoint_stem, history);
    }
    if (stale >= cfg.patience) break;
  }
  store.copy_values_from(nn::ParamStore::deserialize(best));
  return result;
}

}  // namespace groundlab
