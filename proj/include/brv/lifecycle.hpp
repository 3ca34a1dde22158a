// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "brv/entry.hpp"
#include "brv/timeutil.hpp"

/// Adaptive knowledge lifecycle: importance bonuses and decay, maturity
/// tiers with hysteresis, recency, and the compound retrieval score.
namespace brv::akl {

inline constexpr double kAccessBonus = 3.0;
inline constexpr double kUpdateBonus = 5.0;
inline constexpr double kDailyDecayBase = 0.995;
inline constexpr double kRecencyTauDays = 30.0;
inline constexpr double kInitialImportance = 50.0;

// Maturity thresholds. Promotion and demotion are deliberately apart
// (gaps 30 and 25) so a single event can never promote then demote.
inline constexpr double kPromoteToValidated = 65.0;
inline constexpr double kDemoteToDraft = 35.0;
inline constexpr double kPromoteToCore = 85.0;
inline constexpr double kDemoteToValidated = 60.0;

enum class EventKind { Access, Update };

struct LifecycleEvent {
    EventKind kind = EventKind::Access;
    UtcSeconds at = 0;
};

/// Weights of the compound retrieval score. Must sum to 1.
struct ScoreWeights {
    double relevance = 0.7;
    double importance = 0.2;
    double recency = 0.1;
};

/// importance x 0.995^elapsed_days, clamped to [0, 100].
/// Throws Error{negative_elapsed} for elapsed_days < 0.
double decay_importance(double importance, double elapsed_days);

/// One hysteresis step: draft->validated at 65, validated->draft below 35,
/// validated->core at 85, core->validated below 60. Never skips a tier.
Maturity evaluate_maturity(Maturity current, double importance);

/// exp(-days/30). Throws Error{now_before_update} when now < updated_at.
double recency(UtcSeconds updated_at, UtcSeconds now);

/// w_r * bm25_normalized + w_i * importance/100 + w_t * recency_value.
/// Throws Error{weights_not_normalized} unless the weights sum to 1
/// within 1e-9.
double compound_score(double bm25_normalized, double importance, double recency_value,
                      const ScoreWeights& weights = {});

/// Applies one access/update event: decays importance from the last touch
/// to event.at, adds the bonus, bumps the counter, advances updated_at for
/// updates, refreshes the cached recency, and re-evaluates maturity.
/// Throws Error{event_before_creation, negative_elapsed}.
LifecycleState apply_event(const LifecycleState& state, const LifecycleEvent& event,
                           UtcSeconds now);

/// State for a freshly created entry: importance 50, draft, recency 1.
LifecycleState initial_state(UtcSeconds now);

} // namespace brv::akl
