#include "groundlab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "groundlab/error.hpp"

namespace groundlab {

const char* to_string(Player p) { return p == Player::A ? "A" : "B"; }

Player player_from_string(const std::string& s) {
  if (s == "A") return Player::A;
  if (s == "B") return Player::B;
  throw SchemaError("unknown player '" + s + "'");
}

int View::index_of(int entity_id) const {
  const auto it = std::find(visible.begin(), visible.end(), entity_id);
  return it == visible.end() ? -1 : static_cast<int>(it - visible.begin());
}

const Entity& Scenario::entity(int id) const {
  for (const auto& e : entities)
    if (e.id == id) return e;
  throw IntegrityError("scenario " + this->id + " has no entity " + std::to_string(id));
}

std::vector<Entity> Scenario::visible_entities(Player p) const {
  std::vector<Entity> out;
  for (int id : view(p).visible) out.push_back(entity(id));
  return out;
}

std::vector<int> Scenario::shared_ids() const {
  std::vector<int> out;
  for (int id : view_a.visible)
    if (view_b.index_of(id) >= 0) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

void ScenarioConfig::validate() const {
  if (!(world_max > world_min)) throw InvalidArgument("world bounds are degenerate");
  if (!(view_radius > 0)) throw InvalidArgument("view radius must be positive");
  if (!(size_max > size_min) || size_min <= 0) throw InvalidArgument("size range is degenerate");
  if (!(min_separation > 0)) throw InvalidArgument("min_separation must be positive");
  if (max_attempts <= 0) throw InvalidArgument("max_attempts must be positive");
  for (double d : center_distance)
    if (!(d > 0 && d < 2 * view_radius)) throw InvalidArgument("view center distance out of range");
}

namespace {

struct Candidate {
  double x, y, size;
};

double dist(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

bool inside_disk(const Candidate& c, double cx, double cy, double r) {
  return dist(c.x, c.y, cx, cy) + c.size <= r;
}

bool outside_disk(const Candidate& c, double cx, double cy, double r) {
  return dist(c.x, c.y, cx, cy) - c.size > r;
}

bool entity_order(const Entity& a, const Entity& b) {
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& config, int num_shared, Rng& rng, std::string id) {
  if (num_shared < 4 || num_shared > 6)
    throw InvalidArgument("num_shared must be 4, 5 or 6, got " + std::to_string(num_shared));
  config.validate();

  const double r = config.view_radius;
  const double half = config.distance_for(num_shared) / 2.0;
  const double ax = -half, bx = half, cy = 0.0;

  std::vector<Candidate> placed;
  std::vector<int> owner;  // 0 shared, 1 A only, 2 B only

  auto in_world = [&](const Candidate& c) {
    return c.x >= config.world_min && c.x <= config.world_max && c.y >= config.world_min &&
           c.y <= config.world_max;
  };
  auto separated = [&](const Candidate& c) {
    for (const auto& p : placed)
      if (dist(c.x, c.y, p.x, p.y) < config.min_separation) return false;
    return true;
  };
  auto place = [&](int kind, double box_x0, double box_x1, auto&& accept) {
    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
      Candidate c{rng.uniform(box_x0, box_x1), rng.uniform(cy - r, cy + r),
                  rng.uniform(config.size_min, config.size_max)};
      if (in_world(c) && accept(c) && separated(c)) {
        placed.push_back(c);
        owner.push_back(kind);
        return;
      }
    }
    std::ostringstream msg;
    msg << "could not place entity " << placed.size() << " after " << config.max_attempts
        << " attempts (num_shared=" << num_shared << ")";
    throw GenerationError(msg.str());
  };

  for (int i = 0; i < num_shared; ++i)
    place(0, bx - r, ax + r, [&](const Candidate& c) {
      return inside_disk(c, ax, cy, r) && inside_disk(c, bx, cy, r);
    });
  for (int i = 0; i < kViewSize - num_shared; ++i)
    place(1, ax - r, ax + r, [&](const Candidate& c) {
      return inside_disk(c, ax, cy, r) && outside_disk(c, bx, cy, r);
    });
  for (int i = 0; i < kViewSize - num_shared; ++i)
    place(2, bx - r, bx + r, [&](const Candidate& c) {
      return inside_disk(c, bx, cy, r) && outside_disk(c, ax, cy, r);
    });

  struct Tagged {
    Entity e;
    int kind;
  };
  std::vector<Tagged> tagged;
  for (std::size_t i = 0; i < placed.size(); ++i)
    tagged.push_back({Entity{0, placed[i].x, placed[i].y, placed[i].size, rng.uniform(0.0, 256.0)},
                      owner[i]});
  std::sort(tagged.begin(), tagged.end(),
            [](const Tagged& a, const Tagged& b) { return entity_order(a.e, b.e); });

  Scenario s;
  s.id = id.empty() ? "scenario" : std::move(id);
  s.num_shared = num_shared;
  s.view_a = View{Player::A, ax, cy, r, {}};
  s.view_b = View{Player::B, bx, cy, r, {}};
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    tagged[i].e.id = static_cast<int>(i);
    s.entities.push_back(tagged[i].e);
    if (tagged[i].kind != 2) s.view_a.visible.push_back(tagged[i].e.id);
    if (tagged[i].kind != 1) s.view_b.visible.push_back(tagged[i].e.id);
  }
  return s;
}

void validate_scenario(const Scenario& s, const ScenarioConfig& config) {
  auto fail = [&](const std::string& what) {
    throw IntegrityError("scenario " + s.id + ": " + what);
  };
  if (s.num_shared < 4 || s.num_shared > 6) fail("num_shared not in {4,5,6}");
  for (const auto& e : s.entities) {
    if (!(e.color >= 0.0 && e.color < 256.0)) fail("entity " + std::to_string(e.id) + " color out of range");
    if (e.size < config.size_min || e.size > config.size_max)
      fail("entity " + std::to_string(e.id) + " size out of range");
    if (e.x < config.world_min || e.x > config.world_max || e.y < config.world_min ||
        e.y > config.world_max)
      fail("entity " + std::to_string(e.id) + " outside world bounds");
  }
  for (std::size_t i = 0; i < s.entities.size(); ++i)
    for (std::size_t j = i + 1; j < s.entities.size(); ++j)
      if (dist(s.entities[i].x, s.entities[i].y, s.entities[j].x, s.entities[j].y) <
          config.min_separation)
        fail("entities " + std::to_string(s.entities[i].id) + " and " +
             std::to_string(s.entities[j].id) + " closer than min_separation");
  for (const View* v : {&s.view_a, &s.view_b}) {
    if (v->visible.size() != static_cast<std::size_t>(kViewSize)) fail("view does not hold 7 entities");
    for (int id : v->visible) {
      const auto& e = s.entity(id);
      if (dist(e.x, e.y, v->center_x, v->center_y) + e.size > v->radius + 1e-12)
        fail("entity " + std::to_string(id) + " not inside view " + to_string(v->agent));
    }
  }
  if (static_cast<int>(s.shared_ids().size()) != s.num_shared) fail("shared count mismatch");
}

NormalizedEntity normalize_entity(const Entity& e, const View& view, const AttributeRanges& ranges) {
  if (view.index_of(e.id) < 0)
    throw InvalidArgument("entity " + std::to_string(e.id) + " not in view " + to_string(view.agent));
  NormalizedEntity n;
  n.x = (e.x - view.center_x) / view.radius;
  n.y = (e.y - view.center_y) / view.radius;
  n.size = 2.0 * (e.size - ranges.size_min) / (ranges.size_max - ranges.size_min) - 1.0;
  n.color = 2.0 * e.color / ranges.color_max - 1.0;
  return n;
}

Entity denormalize_entity(const NormalizedEntity& n, const View& view, int id,
                          const AttributeRanges& ranges) {
  Entity e;
  e.id = id;
  e.x = n.x * view.radius + view.center_x;
  e.y = n.y * view.radius + view.center_y;
  e.size = (n.size + 1.0) / 2.0 * (ranges.size_max - ranges.size_min) + ranges.size_min;
  e.color = (n.color + 1.0) / 2.0 * ranges.color_max;
  return e;
}

std::array<double, kPairFeatureDim> pair_features(const Entity& ei, const Entity& ej,
                                                  const View& view, const AttributeRanges& ranges) {
  if (ei.id == ej.id) throw InvalidArgument("pair_features needs two distinct entities");
  const auto a = normalize_entity(ei, view, ranges);
  const auto b = normalize_entity(ej, view, ranges);
  const double dx = b.x - a.x, dy = b.y - a.y;
  return {dx, dy, std::hypot(dx, dy), b.size - a.size, b.color - a.color};
}

nlohmann::json to_json(const Scenario& s) {
  nlohmann::json entities = nlohmann::json::array();
  for (const auto& e : s.entities)
    entities.push_back({{"id", e.id}, {"x", e.x}, {"y", e.y}, {"size", e.size}, {"color", e.color}});
  auto view = [](const View& v) {
    return nlohmann::json{{"center", {v.center_x, v.center_y}}, {"radius", v.radius}, {"visible", v.visible}};
  };
  return {{"id", s.id},
          {"entities", entities},
          {"views", {{"A", view(s.view_a)}, {"B", view(s.view_b)}}},
          {"num_shared", s.num_shared}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.id = j.at("id").get<std::string>();
    for (const auto& je : j.at("entities")) {
      Entity e;
      e.id = je.at("id").get<int>();
      if (e.id < 0) throw SchemaError("scenario " + s.id + ": negative entity id");
      e.x = je.at("x").get<double>();
      e.y = je.at("y").get<double>();
      e.size = je.at("size").get<double>();
      e.color = je.at("color").get<double>();
      s.entities.push_back(e);
    }
    auto view = [&](const nlohmann::json& jv, Player p) {
      View v;
      v.agent = p;
      v.center_x = jv.at("center").at(0).get<double>();
      v.center_y = jv.at("center").at(1).get<double>();
      v.radius = jv.at("radius").get<double>();
      v.visible = jv.at("visible").get<std::vector<int>>();
      return v;
    };
    s.view_a = view(j.at("views").at("A"), Player::A);
    s.view_b = view(j.at("views").at("B"), Player::B);
    s.num_shared = j.at("num_shared").get<int>();
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError(std::string("malformed scenario: ") + ex.what());
  }
}

}  // namespace groundlab
