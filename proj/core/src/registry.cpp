#include <algorithm>
#include <functional>

#include "heurevo/error.hpp"
#include "heurevo/predictors.hpp"

namespace heurevo {

namespace {

using PredictFn = std::function<PredictionSet(const TrajTensor&, std::size_t, std::size_t,
                                              std::uint64_t, const ParamMap&)>;

struct Entry {
  std::string_view name;
  bool deterministic;
  ParamMap defaults;
  PredictFn fn;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> kEntries = [] {
    std::vector<Entry> e;
    e.push_back({"cvm", true, {},
                 [](const TrajTensor& h, std::size_t k, std::size_t t, std::uint64_t,
                    const ParamMap&) { return cvm(h, k, t); }});
    e.push_back({"cvm_s", false, {{"angle_sigma", kCvmSAngleSigma}},
                 [](const TrajTensor& h, std::size_t k, std::size_t t, std::uint64_t seed,
                    const ParamMap& p) { return cvm_s(h, k, t, p.at("angle_sigma"), seed); }});
    e.push_back({"const_acc", true, {},
                 [](const TrajTensor& h, std::size_t k, std::size_t t, std::uint64_t,
                    const ParamMap&) { return constant_acc(h, k, t); }});
    e.push_back({"ctrv", true, {{"omega_eps", kCtrvOmegaEps}},
                 [](const TrajTensor& h, std::size_t k, std::size_t t, std::uint64_t,
                    const ParamMap& p) { return ctrv(h, k, t, p.at("omega_eps")); }});
    e.push_back({"linreg", true, {},
                 [](const TrajTensor& h, std::size_t k, std::size_t t, std::uint64_t,
                    const ParamMap&) { return linreg(h, k, t); }});
    const SocialForceParams sf;
    e.push_back({"social_force", false,
                 {{"A", sf.strength},
                  {"B", sf.range},
                  {"r", sf.radius},
                  {"vmax_factor", sf.vmax_factor},
                  {"tau", sf.tau},
                  {"dt", sf.dt},
                  {"A_jitter", sf.strength_jitter}},
                 [](const TrajTensor& h, std::size_t k, std::size_t t, std::uint64_t seed,
                    const ParamMap& p) {
                   SocialForceParams params;
                   params.strength = p.at("A");
                   params.range = p.at("B");
                   params.radius = p.at("r");
                   params.vmax_factor = p.at("vmax_factor");
                   params.tau = p.at("tau");
                   params.dt = p.at("dt");
                   params.strength_jitter = p.at("A_jitter");
                   return social_force(h, k, t, params, seed);
                 }});
    e.push_back({"trajevo_zara1", false, {},
                 [](const TrajTensor& h, std::size_t k, std::size_t t, std::uint64_t seed,
                    const ParamMap&) { return reference_zara1(h, k, t, seed); }});
    return e;
  }();
  return kEntries;
}

class RegisteredPredictor final : public Predictor {
 public:
  RegisteredPredictor(PredictorSpec spec, PredictFn fn)
      : spec_(std::move(spec)), fn_(std::move(fn)) {}

  const PredictorSpec& spec() const override { return spec_; }

  PredictionSet predict(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                        std::uint64_t seed) const override {
    return fn_(history, k, t_pred, spec_.deterministic ? 0 : seed, spec_.params);
  }

 private:
  PredictorSpec spec_;
  PredictFn fn_;
};

}  // namespace

std::vector<std::string> registered_predictors() {
  std::vector<std::string> names;
  for (const auto& e : entries()) names.emplace_back(e.name);
  return names;
}

bool is_registered_predictor(std::string_view name) {
  const auto& e = entries();
  return std::any_of(e.begin(), e.end(), [&](const Entry& x) { return x.name == name; });
}

std::unique_ptr<Predictor> make_predictor(std::string_view name, const ParamMap& overrides) {
  for (const auto& e : entries()) {
    if (e.name != name) continue;
    PredictorSpec spec{std::string(e.name), e.defaults, e.deterministic};
    for (const auto& [key, value] : overrides) {
      auto it = spec.params.find(key);
      if (it == spec.params.end()) {
        throw ValidationError("predictor '" + spec.name + "' has no parameter '" + key + "'");
      }
      it->second = value;
    }
    return std::make_unique<RegisteredPredictor>(std::move(spec), e.fn);
  }
  std::string known;
  for (const auto& n : registered_predictors()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown heuristic '" + std::string(name) + "' (registered: " + known +
                        ")");
}

}  // namespace heurevo
