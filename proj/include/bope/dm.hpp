#ifndef BOPE_DM_HPP
#define BOPE_DM_HPP

#include <cstdint>
#include <string>
#include <string_view>

#include "bope/random.hpp"

namespace bope {

enum class DmModel { Noiseless, Gaussian, BradleyTerry, LiveHuman };

std::string to_string(DmModel m);
DmModel dm_model_from_string(std::string_view name);

struct DmConfig {
  DmModel model = DmModel::Gaussian;
  double sigma = 0.1;  // utility-noise standard deviation (Gaussian)
  double beta = 1.0;   // logistic scale (Bradley-Terry)

  void validate() const;
};

struct PreferenceResponse {
  int label = 1;        // +1 first preferred, −1 second, 0 tie (human only)
  double gap = 0.0;     // true utility gap g1 − g2
  bool was_error = false;
};

/// Simulated answer to "first or second?". An exact tie in the noiseless
/// decision resolves to +1. Only simulated models are accepted.
PreferenceResponse respond(double g1, double g2, const DmConfig& cfg, Rng& rng);

/// P(label = +1 | δ): Φ(δ/σ) for Gaussian noise (a step at σ = 0 with value
/// ½ at δ = 0), the logistic 1/(1 + e^{−βδ}) for Bradley-Terry.
double preference_probability(double delta, const DmConfig& cfg);

/// Label contradicts the sign of the true gap. A zero gap is never an error.
bool is_preference_error(int label, double gap);

}  // namespace bope

#endif  // BOPE_DM_HPP
