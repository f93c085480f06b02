#pragma once

#include <string>
#include <string_view>

#include "hetgp/kernels.hpp"

namespace hetgp {

enum class ModelKind {
  gp,                // homoscedastic GP, exact inference
  ep_n,              // input-dependent noise variance
  ep_mn,             // input-dependent noise and signal variance, coupled (f~, phi) sites
  ep_mn_factorized,  // diagnostic: separate f~ and phi sites
};

std::string to_string(ModelKind kind);
// Accepts gp, ep-n, ep-mn, ep-mn-factorized. Throws InputError otherwise.
ModelKind parse_model_kind(std::string_view name);

inline bool has_signal_process(ModelKind k) {
  return k == ModelKind::ep_mn || k == ModelKind::ep_mn_factorized;
}
inline bool is_ep(ModelKind k) { return k != ModelKind::gp; }

// Hyperparameters of all latent processes. Unused members are ignored by
// tiers that do not have the corresponding process.
struct HyperParams {
  KernelParams f;      // f, or f~ with unit magnitude for the m+n tiers
  KernelParams theta;  // theta = log noise variance
  KernelParams phi;    // phi = log signal variance
  double log_noise_variance = 0.0;  // gp tier only
};

}  // namespace hetgp
