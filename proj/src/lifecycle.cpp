// SPDX-License-Identifier: Apache-2.0

#include "brv/lifecycle.hpp"

#include <algorithm>
#include <cmath>

#include "brv/errors.hpp"

namespace brv::akl {

double decay_importance(double importance, double elapsed_days) {
    if (elapsed_days < 0.0) {
        raise(Errc::negative_elapsed, "cannot decay across negative elapsed time");
    }
    double decayed = importance * std::pow(kDailyDecayBase, elapsed_days);
    return std::clamp(decayed, 0.0, 100.0);
}

Maturity evaluate_maturity(Maturity current, double importance) {
    switch (current) {
    case Maturity::Draft:
        return importance >= kPromoteToValidated ? Maturity::Validated : Maturity::Draft;
    case Maturity::Validated:
        if (importance >= kPromoteToCore) return Maturity::Core;
        if (importance < kDemoteToDraft) return Maturity::Draft;
        return Maturity::Validated;
    case Maturity::Core:
        return importance < kDemoteToValidated ? Maturity::Validated : Maturity::Core;
    }
    return current;
}

double recency(UtcSeconds updated_at, UtcSeconds now) {
    if (now < updated_at) {
        raise(Errc::now_before_update, "recency asked for a time before the last update");
    }
    return std::exp(-days_between(updated_at, now) / kRecencyTauDays);
}

double compound_score(double bm25_normalized, double importance, double recency_value,
                      const ScoreWeights& weights) {
    double sum = weights.relevance + weights.importance + weights.recency;
    if (weights.relevance < 0.0 || weights.importance < 0.0 || weights.recency < 0.0 ||
        std::abs(sum - 1.0) > 1e-9) {
        raise(Errc::weights_not_normalized, "score weights must be nonnegative and sum to 1");
    }
    return weights.relevance * bm25_normalized + weights.importance * (importance / 100.0) +
           weights.recency * recency_value;
}

LifecycleState apply_event(const LifecycleState& state, const LifecycleEvent& event,
                           UtcSeconds now) {
    if (event.at < state.created_at) {
        raise(Errc::event_before_creation, "event predates the entry");
    }
    if (event.at > now) {
        raise(Errc::negative_elapsed, "event is in the future");
    }
    LifecycleState next = state;
    double elapsed = days_between(state.last_touch, event.at);
    double bonus = event.kind == EventKind::Access ? kAccessBonus : kUpdateBonus;
    next.importance = std::clamp(decay_importance(state.importance, elapsed) + bonus, 0.0, 100.0);
    if (event.kind == EventKind::Access) {
        next.access_count++;
    } else {
        next.update_count++;
        next.updated_at = event.at;
    }
    next.last_touch = event.at;
    next.recency = recency(next.updated_at, event.at);
    next.maturity = evaluate_maturity(state.maturity, next.importance);
    return next;
}

LifecycleState initial_state(UtcSeconds now) {
    LifecycleState state;
    state.importance = kInitialImportance;
    state.maturity = Maturity::Draft;
    state.recency = 1.0;
    state.created_at = now;
    state.updated_at = now;
    state.last_touch = now;
    return state;
}

} // namespace brv::akl
