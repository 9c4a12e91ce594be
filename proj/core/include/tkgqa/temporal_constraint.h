#ifndef TKGQA_TEMPORAL_CONSTRAINT_H_
#define TKGQA_TEMPORAL_CONSTRAINT_H_

#include <optional>
#include <string>
#include <string_view>

#include "tkgqa/ids.h"

namespace tkgqa {

enum class ConstraintKind { kNone, kAt, kBefore, kAfter, kBetween };

std::string_view to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(std::string_view name);

// Temporal restriction mined from a question. Because TimeId order is
// chronological, all comparisons happen on ids.
struct TemporalConstraint {
  ConstraintKind kind = ConstraintKind::kNone;
  std::optional<TimeId> t1;
  std::optional<TimeId> t2;

  static TemporalConstraint none() { return {}; }
  static TemporalConstraint at(TimeId t) { return {ConstraintKind::kAt, t, std::nullopt}; }
  static TemporalConstraint before(TimeId t) {
    return {ConstraintKind::kBefore, t, std::nullopt};
  }
  static TemporalConstraint after(TimeId t) {
    return {ConstraintKind::kAfter, t, std::nullopt};
  }
  static TemporalConstraint between(TimeId a, TimeId b) {
    return {ConstraintKind::kBetween, a, b};
  }

  // Throws ValidationError when the time fields do not match the kind.
  void validate() const;

  friend bool operator==(const TemporalConstraint&, const TemporalConstraint&) = default;
};

// none -> true; at(t) -> t in [start, end]; before(t) -> start < t;
// after(t) -> end > t; between(a, b) -> [start, end] overlaps [a, b].
bool constraint_satisfied(const Quadruple& fact, const TemporalConstraint& c);

}  // namespace tkgqa

#endif  // TKGQA_TEMPORAL_CONSTRAINT_H_
