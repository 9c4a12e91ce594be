#ifndef TKGQA_IDS_H_
#define TKGQA_IDS_H_

#include <cstddef>
#include <cstdint>
#include <type_traits>

namespace tkgqa {

// Dense vocabulary indices. Distinct enum types keep entity, relation and
// time ids from being mixed up at call sites.
enum class EntityId : std::int32_t {};
enum class RelationId : std::int32_t {};
enum class TimeId : std::int32_t {};

template <typename Id>
constexpr std::size_t idx(Id id) {
  return static_cast<std::size_t>(static_cast<std::underlying_type_t<Id>>(id));
}

template <typename Id>
constexpr Id make_id(std::size_t i) {
  return static_cast<Id>(static_cast<std::underlying_type_t<Id>>(i));
}

// One timestamped fact. Point-in-time facts have t_start == t_end.
struct Quadruple {
  EntityId subject{};
  RelationId relation{};
  EntityId object{};
  TimeId t_start{};
  TimeId t_end{};

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

}  // namespace tkgqa

#endif  // TKGQA_IDS_H_
