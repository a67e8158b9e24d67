#include "groundlab/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "groundlab/error.hpp"

namespace groundlab {

namespace {

constexpr double kPanel = 300.0;
constexpr double kRadius = 140.0;
constexpr double kCharWidth = 7.2;
constexpr double kLineHeight = 18.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n"
         "<rect x=\"0\" y=\"0\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" fill=\"#ffffff\"/>\n";
}

/// Group for one view whose top-left corner is (ox, oy).
std::string view_group(const Scenario& s, Player p, const std::vector<Highlight>& highlights, double ox, double oy,
                       const std::string& title) {
  const auto& view = s.view(p);
  const double cx = ox + kPanel / 2, cy = oy + kPanel / 2 + (title.empty() ? 0.0 : 10.0);
  const double scale = kRadius / view.radius;
  std::string out = std::string("<g class=\"view\" data-player=\"") + to_string(p) + "\">\n";
  if (!title.empty())
    out += "<text x=\"" + num(ox + 8) + "\" y=\"" + num(oy + 16) +
           "\" font-family=\"monospace\" font-size=\"12\">" + escape(title) + "</text>\n";
  out += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(kRadius) +
         "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  std::vector<int> ring_count(view.visible.size(), 0);
  for (const auto& h : highlights)
    for (int id : h.entity_ids)
      if (view.index_of(id) < 0)
        throw InvalidArgument("entity " + std::to_string(id) + " is not in " + std::string(to_string(p)) + "'s view");
  for (std::size_t i = 0; i < view.visible.size(); ++i) {
    const auto& e = s.entity(view.visible[i]);
    const double x = cx + (e.x - view.center_x) * scale;
    const double y = cy - (e.y - view.center_y) * scale;
    const double r = e.size * scale;
    out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"" + num(r) + "\" fill=\"" + gray_hex(e.color) +
           "\" data-entity=\"" + std::to_string(e.id) + "\"/>\n";
    for (const auto& h : highlights) {
      if (std::find(h.entity_ids.begin(), h.entity_ids.end(), e.id) == h.entity_ids.end()) continue;
      const double rr = r + 3.0 + 3.0 * ring_count[i]++;
      out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"" + num(rr) + "\" fill=\"none\" stroke=\"" +
             h.color + "\" stroke-width=\"2\"/>\n";
    }
  }
  out += "</g>\n";
  return out;
}

}  // namespace

const std::vector<std::string>& highlight_palette() {
  static const std::vector<std::string> p{"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
                                          "#f032e6", "#9a6324"};
  return p;
}

std::string gray_hex(double color) {
  const int g = std::clamp(static_cast<int>(std::lround(color)), 0, 255);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", g, g, g);
  return buf;
}

std::string render_view(const Scenario& scenario, Player player, const std::vector<Highlight>& highlights) {
  return header(kPanel, kPanel) + view_group(scenario, player, highlights, 0.0, 0.0, "") + "</svg>\n";
}

std::string render_panels(const Scenario& scenario, const std::vector<Panel>& panels) {
  const double w = kPanel * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  std::string out = header(w, kPanel + 20.0);
  for (std::size_t i = 0; i < panels.size(); ++i)
    out += view_group(scenario, panels[i].player, panels[i].highlights, kPanel * static_cast<double>(i), 0.0,
                      panels[i].title);
  return out + "</svg>\n";
}

std::string render_dialogue(const Scenario& scenario, const std::vector<Message>& messages,
                            const std::vector<RenderedMarkable>& markables) {
  const auto& palette = highlight_palette();
  std::vector<Highlight> hl[2];
  for (std::size_t k = 0; k < markables.size(); ++k) {
    const auto& m = markables[k];
    if (m.utterance_index < 0 || m.utterance_index >= static_cast<int>(messages.size()))
      throw InvalidArgument("markable utterance " + std::to_string(m.utterance_index) + " out of range");
    const auto& msg = messages[static_cast<std::size_t>(m.utterance_index)];
    if (m.start_token < 0 || m.end_token > static_cast<int>(msg.tokens.size()) || m.start_token >= m.end_token)
      throw InvalidArgument("markable span out of range in utterance " + std::to_string(m.utterance_index));
    if (!m.referents.empty())
      hl[m.speaker == Player::A ? 0 : 1].push_back({m.referents, palette[k % palette.size()]});
  }
  const double top = kPanel + 20.0;
  const double height = top + 20.0 + kLineHeight * static_cast<double>(messages.size());
  std::size_t longest = 0;
  for (const auto& msg : messages) {
    std::size_t chars = 3;
    for (const auto& t : msg.tokens) chars += t.size() + 1;
    longest = std::max(longest, chars);
  }
  const double width = std::max(2 * kPanel, 16.0 + kCharWidth * static_cast<double>(longest));
  std::string out = header(width, height);
  out += view_group(scenario, Player::A, hl[0], 0.0, 0.0, "A");
  out += view_group(scenario, Player::B, hl[1], kPanel, 0.0, "B");
  out += "<g class=\"transcript\" font-family=\"monospace\" font-size=\"12\">\n";
  for (std::size_t u = 0; u < messages.size(); ++u) {
    const double y = top + 14.0 + kLineHeight * static_cast<double>(u);
    std::vector<double> starts;
    std::string line = std::string(to_string(messages[u].speaker)) + ": ";
    for (const auto& t : messages[u].tokens) {
      starts.push_back(8.0 + kCharWidth * static_cast<double>(line.size()));
      line += t + " ";
    }
    out += "<text x=\"8.00\" y=\"" + num(y) + "\" xml:space=\"preserve\">" + escape(line) + "</text>\n";
    for (std::size_t k = 0; k < markables.size(); ++k) {
      const auto& m = markables[k];
      if (m.utterance_index != static_cast<int>(u)) continue;
      const auto& last = messages[u].tokens[static_cast<std::size_t>(m.end_token - 1)];
      const double x1 = starts[static_cast<std::size_t>(m.start_token)];
      const double x2 = starts[static_cast<std::size_t>(m.end_token - 1)] + kCharWidth * static_cast<double>(last.size());
      out += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y + 3) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y + 3) +
             "\" stroke=\"" + palette[k % palette.size()] + "\" stroke-width=\"2\"/>\n";
    }
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::vector<RenderedMarkable> gold_markables(const AnnotatedCorpus& corpus, const std::string& dialogue_id,
                                             const GoldMap& gold) {
  std::vector<RenderedMarkable> out;
  for (const auto& mid : corpus.markables_of(dialogue_id)) {
    const auto& m = corpus.markables.at(mid);
    RenderedMarkable r{m.utterance_index, m.start_token, m.end_token, m.speaker, {}};
    if (const auto it = gold.find(mid); it != gold.end() && !it->second.dropped)
      r.referents = ids_from_mask(corpus.speaker_view(m), it->second.referents);
    out.push_back(r);
  }
  return out;
}

std::string render_judgements(const AnnotatedCorpus& corpus, const std::string& markable_id) {
  const auto it = corpus.markables.find(markable_id);
  if (it == corpus.markables.end()) throw InvalidArgument("unknown markable " + markable_id);
  const auto& m = it->second;
  const auto& s = corpus.scenario_of(corpus.dialogues.at(m.dialogue_id));
  std::vector<Panel> panels;
  for (auto idx : corpus.judgements_of(markable_id)) {
    const auto& j = corpus.judgements[idx];
    panels.push_back({j.annotator_id, m.speaker, {{j.referents, highlight_palette()[0]}}});
  }
  return render_panels(s, panels);
}

}  // namespace groundlab
