#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundlab/random.hpp"

namespace groundlab {

inline constexpr int kViewSize = 7;

enum class Player { A = 0, B = 1 };

inline Player other(Player p) { return p == Player::A ? Player::B : Player::A; }
const char* to_string(Player p);
Player player_from_string(const std::string& s);

struct Entity {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double size = 0.0;
  double color = 0.0;  ///< grayscale intensity in [0, 256), lower is darker

  bool operator==(const Entity&) const = default;
};

struct View {
  Player agent = Player::A;
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 1.0;
  std::vector<int> visible;  ///< entity ids, sorted by (y, x)

  /// Position of `entity_id` in `visible`, or -1.
  int index_of(int entity_id) const;
  bool operator==(const View&) const = default;
};

struct Scenario {
  std::string id;
  std::vector<Entity> entities;
  View view_a;
  View view_b;
  int num_shared = 0;

  const View& view(Player p) const { return p == Player::A ? view_a : view_b; }
  const Entity& entity(int id) const;
  /// Entities of `p`'s view, in view order.
  std::vector<Entity> visible_entities(Player p) const;
  /// Entity ids visible to both players, ascending.
  std::vector<int> shared_ids() const;

  bool operator==(const Scenario&) const = default;
};

struct ScenarioConfig {
  double world_min = -1.0;
  double world_max = 1.0;
  double view_radius = 1.0;
  /// Distance between the two view centers for num_shared = 4, 5, 6.
  std::array<double, 3> center_distance{0.9, 0.7, 0.5};
  double size_min = 0.02;
  double size_max = 0.06;
  double min_separation = 0.08;
  int max_attempts = 10000;
  std::uint64_t seed = 0;

  double distance_for(int num_shared) const { return center_distance.at(num_shared - 4); }
  void validate() const;
};

/// Constructive rejection sampler: shared entities land in the lens where both
/// disks overlap, private ones inside their own view and fully outside the
/// other. Throws GenerationError when an entity cannot be placed.
Scenario generate_scenario(const ScenarioConfig& config, int num_shared, Rng& rng,
                           std::string id = {});

/// Checks every Scenario/View invariant; throws IntegrityError on violation.
void validate_scenario(const Scenario& s, const ScenarioConfig& config);

/// Attribute ranges used to map raw attributes onto [-1, 1].
struct AttributeRanges {
  double size_min = 0.02;
  double size_max = 0.06;
  double color_max = 256.0;
};

struct NormalizedEntity {
  double x = 0.0;
  double y = 0.0;
  double size = 0.0;
  double color = 0.0;
};

NormalizedEntity normalize_entity(const Entity& e, const View& view,
                                  const AttributeRanges& ranges = {});
Entity denormalize_entity(const NormalizedEntity& n, const View& view, int id,
                          const AttributeRanges& ranges = {});

inline constexpr int kPairFeatureDim = 5;
inline constexpr int kAttributeDim = 4;

/// (dx, dy, distance, dsize, dcolor) on normalized attributes, j minus i.
std::array<double, kPairFeatureDim> pair_features(const Entity& ei, const Entity& ej,
                                                  const View& view,
                                                  const AttributeRanges& ranges = {});

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

}  // namespace groundlab
