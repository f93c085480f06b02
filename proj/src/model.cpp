#include "hetgp/model.hpp"

#include "hetgp/errors.hpp"

namespace hetgp {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gp: return "gp";
    case ModelKind::ep_n: return "ep-n";
    case ModelKind::ep_mn: return "ep-mn";
    case ModelKind::ep_mn_factorized: return "ep-mn-factorized";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gp") return ModelKind::gp;
  if (name == "ep-n") return ModelKind::ep_n;
  if (name == "ep-mn") return ModelKind::ep_mn;
  if (name == "ep-mn-factorized") return ModelKind::ep_mn_factorized;
  throw InputError("unknown model kind '" + std::string(name) + "'");
}

}  // namespace hetgp
