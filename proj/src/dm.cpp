#include "bope/dm.hpp"

#include <cmath>

#include "bope/errors.hpp"

namespace bope {

std::string to_string(DmModel m) {
  switch (m) {
    case DmModel::Noiseless: return "Noiseless";
    case DmModel::Gaussian: return "Gaussian";
    case DmModel::BradleyTerry: return "BradleyTerry";
    case DmModel::LiveHuman: return "LiveHuman";
  }
  return "Gaussian";
}

DmModel dm_model_from_string(std::string_view name) {
  if (name == "Noiseless") return DmModel::Noiseless;
  if (name == "Gaussian") return DmModel::Gaussian;
  if (name == "BradleyTerry") return DmModel::BradleyTerry;
  if (name == "LiveHuman") return DmModel::LiveHuman;
  throw InputError("unknown decision-maker model '" + std::string(name) + "'");
}

void DmConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("dm sigma must be finite and non-negative");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InputError("dm beta must be finite and positive");
}

bool is_preference_error(int label, double gap) {
  if (gap == 0.0 || label == 0) return false;
  return (gap > 0.0) != (label > 0);
}

PreferenceResponse respond(double g1, double g2, const DmConfig& cfg, Rng& rng) {
  if (!std::isfinite(g1) || !std::isfinite(g2)) throw InputError("respond needs finite utilities");
  PreferenceResponse r;
  r.gap = g1 - g2;
  switch (cfg.model) {
    case DmModel::Noiseless:
      r.label = r.gap >= 0.0 ? 1 : -1;
      break;
    case DmModel::Gaussian: {
      const double eps = cfg.sigma > 0.0 ? cfg.sigma * std::normal_distribution<double>(0.0, 1.0)(rng) : 0.0;
      r.label = r.gap + eps >= 0.0 ? 1 : -1;
      break;
    }
    case DmModel::BradleyTerry: {
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      r.label = u < preference_probability(r.gap, cfg) ? 1 : -1;
      break;
    }
    case DmModel::LiveHuman:
      throw StateError("a live human decision maker cannot be simulated");
  }
  r.was_error = is_preference_error(r.label, r.gap);
  return r;
}

double preference_probability(double delta, const DmConfig& cfg) {
  switch (cfg.model) {
    case DmModel::Noiseless:
      return delta > 0.0 ? 1.0 : (delta < 0.0 ? 0.0 : 0.5);
    case DmModel::Gaussian:
      if (cfg.sigma == 0.0) return delta > 0.0 ? 1.0 : (delta < 0.0 ? 0.0 : 0.5);
      return normal_cdf(delta / cfg.sigma);
    case DmModel::BradleyTerry: {
      // Split on sign so exp never overflows.
      const double z = cfg.beta * delta;
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      const double e = std::exp(z);
      return e / (1.0 + e);
    }
    case DmModel::LiveHuman:
      break;
  }
  throw StateError("no preference probability for a live human decision maker");
}

}  // namespace bope
