#pragma once

#include "poprec/evaluation.hpp"
#include "poprec/scoring.hpp"

namespace poprec {

// Reference scorers. BPRMF itself is not a separate code path: it is the
// trainer with gamma = 0, scored by pd_score (elu_prime is monotone, so
// the ranking equals the raw inner-product ranking).

enum class BaselineKind { MostPop, MostRecent, Bprmf, BprmfA };

// score(u, i) = interaction count of i over the whole training horizon
ScoreFn most_pop_scorer(const EvalSplit& split);

// score(u, i) = interaction count of i in the last training stage
ScoreFn most_recent_scorer(const EvalSplit& split);

// Forecast adjustment wrapped around a confounded-trained matcher:
// score(u, i) = elu_prime(match(u, i)) * (m~_i)^gamma_tilde.
// The model is expected to come from BPRMF training (gamma = 0).
ScoreFn bprmf_a_scorer(const FactorModel& model, const PopularityForecast& forecast,
                       double gamma_tilde);

}  // namespace poprec
