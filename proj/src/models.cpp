#include "modaff/models.hpp"

namespace modaff {

namespace {

ParamMap resolve(const std::string& model, ParamMap defaults, const ParamMap& overrides) {
  for (const auto& [k, v] : overrides) {
    auto it = defaults.find(k);
    if (it == defaults.end()) throw StructuralError("model " + model + " has no parameter '" + k + "'");
    it->second = v;
  }
  return defaults;
}

Mat two_state_q(double q01, double q10) {
  Mat Q(2, 2);
  Q << -q01, q01, q10, -q10;
  return Q;
}

const ParamMap kJacobiHeston = {
    {"kappa", 1.0},    {"theta", 0.5},   {"sigma", 0.3},    {"x0", 0.5},
    {"alpha_r", 0.02}, {"bbar_r", 0.01}, {"b_r", 0.02},     {"beta_r", -0.5},
    {"alpha_g", 0.01}, {"bbar_g", 0.005}, {"b_g", 0.02},    {"beta_g", -0.5},
    {"alpha_v", 0.125}, {"bbar_v", 0.02}, {"b_v", 0.04},    {"beta_v", -2.0},
    {"rho", -0.5},     {"r0", 0.03},     {"g0", 0.02},      {"v0", 0.04},
    {"p0", 0.0}};

const ParamMap kRegimeCir = {{"q01", 0.5}, {"q10", 1.0},   {"b_0", 0.01}, {"b_1", 0.04},
                             {"alpha", 0.02}, {"beta", -0.5}, {"r0", 0.03}, {"x0", 0.0}};

const ParamMap kMmCgmy = {{"q01", 1.0},   {"q10", 2.0},  {"sigma_0", 0.1}, {"sigma_1", 0.2}, {"C", 0.5},
                          {"G_0", 5.0},   {"G_1", 3.0},  {"M_0", 10.0},    {"M_1", 6.0},     {"Y", 0.5},
                          {"r", 0.02},    {"y0", 0.0},   {"x0", 0.0}};

const ParamMap kMmHawkes = {{"q01", 1.0},  {"q10", 1.0},    {"b_0", 0.5}, {"b_1", 1.5},   {"beta", -2.0},
                            {"delta", 0.8}, {"lambda0", 1.0}, {"N0", 0.0},  {"x0", 0.0}};

const ParamMap kPerturbedHeat = {{"x0", 1.0}, {"y0", 0.0}};

}  // namespace

int ModelSpec::index_of(const std::string& component) const {
  for (std::size_t i = 0; i < component_names.size(); ++i) {
    if (component_names[i] == component) return static_cast<int>(i);
  }
  throw StructuralError("model " + name + " has no component '" + component + "'");
}

std::vector<std::string> builtin_model_names() {
  return {"jacobi-heston-credit", "regime-cir", "mm-cgmy", "mm-hawkes", "perturbed-heat"};
}

ParamMap builtin_defaults(const std::string& name) {
  if (name == "jacobi-heston-credit") return kJacobiHeston;
  if (name == "regime-cir") return kRegimeCir;
  if (name == "mm-cgmy") return kMmCgmy;
  if (name == "mm-hawkes") return kMmHawkes;
  if (name == "perturbed-heat") return kPerturbedHeat;
  throw StructuralError("unknown built-in model '" + name + "'");
}

ModelSpec build_model(const std::string& name, const ParamMap& overrides) {
  if (name == "jacobi-heston-credit") return make_jacobi_heston_credit(overrides);
  if (name == "regime-cir") return make_regime_cir(overrides);
  if (name == "mm-cgmy") return make_mm_cgmy(overrides);
  if (name == "mm-hawkes") return make_mm_hawkes(overrides);
  if (name == "perturbed-heat") return make_perturbed_heat(overrides);
  throw StructuralError("unknown built-in model '" + name + "'");
}

void require_admissible(const ModelSpec& model) {
  const auto report = validate_params(model.params, model.params.shape, probe_states(model.modulator));
  if (!report.ok()) throw AdmissibilityError(report);
}

ModelSpec make_jacobi_heston_credit(const ParamMap& overrides) {
  const ParamMap s = resolve("jacobi-heston-credit", kJacobiHeston, overrides);
  auto g = [&](const char* k) { return s.at(k); };
  ModelSpec model;
  model.name = "jacobi-heston-credit";
  model.settings = s;
  model.component_names = {"r", "gamma", "v", "p"};
  auto& p = model.params;
  p = XAdmissibleParams::zero(StateSpaceShape(3, 4));

  Mat a1 = Mat::Zero(4, 4);
  a1(0, 0) = g("alpha_r");
  Mat a2 = Mat::Zero(4, 4);
  a2(1, 1) = g("alpha_g");
  Mat a3 = Mat::Zero(4, 4);
  const double av = g("alpha_v");
  a3(2, 2) = av;
  a3(2, 3) = a3(3, 2) = std::sqrt(av) * g("rho");
  a3(3, 3) = 0.5;
  p.alpha = {a1, a2, a3};

  // b(x) = (bbar_r + b_r x, bbar_g + b_g (1 - x), bbar_v + b_v (1 - x), 0)
  Vec level(4), slope(4);
  level << g("bbar_r"), g("bbar_g") + g("b_g"), g("bbar_v") + g("b_v"), 0.0;
  slope << g("b_r"), -g("b_g"), -g("b_v"), 0.0;
  p.b = VectorField::affine(level, slope);

  p.beta = Mat::Zero(4, 4);
  p.beta(0, 0) = g("beta_r");
  p.beta(1, 1) = g("beta_g");
  p.beta(2, 2) = g("beta_v");
  p.beta(3, 0) = 1.0;
  p.beta(3, 1) = 1.0;
  p.beta(3, 2) = -0.5;

  model.modulator = make_jacobi(g("kappa"), g("theta"), g("sigma"));
  model.x0 = g("x0");
  model.y0 = Vec(4);
  model.y0 << g("r0"), g("g0"), g("v0"), g("p0");
  Vec lam = Vec::Zero(4);
  lam(0) = -1.0;
  lam(1) = -1.0;
  model.discount = {0.0, lam};
  model.instruments = {"bond", "survival-bond", "call", "put", "digital"};
  require_admissible(model);
  return model;
}

ModelSpec make_regime_cir(const ParamMap& overrides) {
  const ParamMap s = resolve("regime-cir", kRegimeCir, overrides);
  ModelSpec model;
  model.name = "regime-cir";
  model.settings = s;
  model.component_names = {"r"};
  auto& p = model.params;
  p = XAdmissibleParams::zero(StateSpaceShape(1, 1));
  p.alpha = {Mat::Constant(1, 1, s.at("alpha"))};
  p.beta = Mat::Constant(1, 1, s.at("beta"));
  p.b = VectorField::tabulated({0.0, 1.0}, {Vec::Constant(1, s.at("b_0")), Vec::Constant(1, s.at("b_1"))});
  model.modulator = make_chain({0.0, 1.0}, two_state_q(s.at("q01"), s.at("q10")), {"low", "high"});
  model.x0 = s.at("x0");
  model.y0 = Vec::Constant(1, s.at("r0"));
  model.discount = {0.0, Vec::Constant(1, -1.0)};
  model.instruments = {"bond"};
  require_admissible(model);
  return model;
}

ModelSpec make_mm_cgmy(const ParamMap& overrides) {
  const ParamMap s = resolve("mm-cgmy", kMmCgmy, overrides);
  ModelSpec model;
  model.name = "mm-cgmy";
  model.settings = s;
  model.component_names = {"p"};
  auto& p = model.params;
  p = XAdmissibleParams::zero(StateSpaceShape(0, 1));
  const std::vector<double> states{0.0, 1.0};
  const double sig0 = s.at("sigma_0"), sig1 = s.at("sigma_1");
  p.a = MatrixField::tabulated(states, {Mat::Constant(1, 1, 0.5 * sig0 * sig0), Mat::Constant(1, 1, 0.5 * sig1 * sig1)});
  CgmyComponent comp;
  comp.index = 0;
  comp.C = s.at("C");
  comp.G = ScalarField::tabulated(states, {s.at("G_0"), s.at("G_1")});
  comp.M = ScalarField::tabulated(states, {s.at("M_0"), s.at("M_1")});
  comp.Y = s.at("Y");
  p.m_kernel.parts.push_back(CgmyKernel{{comp}});

  // Drift making e^{-r t + p_t} a martingale: F(x, 1) = r.
  const double r = s.at("r");
  std::vector<Vec> drift;
  for (double x : states) {
    if (!(comp.M(x) > 1.0)) throw StructuralError("mm-cgmy needs M > 1 in every regime for a finite forward price");
    const double jump = compensated_integral(p.m_kernel, x, CVec::Ones(1), IndexMask{true}).real();
    drift.push_back(Vec::Constant(1, r - p.a(x)(0, 0) - jump));
  }
  p.b = VectorField::tabulated(states, drift);

  model.modulator = make_chain(states, two_state_q(s.at("q01"), s.at("q10")), {"calm", "stressed"});
  model.x0 = s.at("x0");
  model.y0 = Vec::Constant(1, s.at("y0"));
  model.discount = {-r, Vec::Zero(1)};
  model.instruments = {"call", "put", "digital"};
  require_admissible(model);
  return model;
}

ModelSpec make_mm_hawkes(const ParamMap& overrides) {
  const ParamMap s = resolve("mm-hawkes", kMmHawkes, overrides);
  ModelSpec model;
  model.name = "mm-hawkes";
  model.settings = s;
  model.component_names = {"N", "lambda"};
  auto& p = model.params;
  p = XAdmissibleParams::zero(StateSpaceShape(2, 2));
  const double delta = s.at("delta");
  const std::vector<double> states{0.0, 1.0};
  p.b = VectorField::tabulated(states, {(Vec(2) << 0.0, s.at("b_0")).finished(), (Vec(2) << 0.0, s.at("b_1")).finished()});
  // The lambda-jump is compensated inside the generator (lambda belongs to
  // J(lambda)), which removes min(delta, 1) lambda of drift; add it back so the
  // intensity follows d lambda = (b + beta lambda) dt + delta dN.
  p.beta = Mat::Zero(2, 2);
  p.beta(1, 1) = s.at("beta") + std::min(delta, 1.0);
  Vec jump(2);
  jump << 1.0, delta;
  p.mu = {JumpMeasure::none(), JumpMeasure::dirac(jump, 1.0)};
  model.modulator = make_chain(states, two_state_q(s.at("q01"), s.at("q10")), {"quiet", "busy"});
  model.x0 = s.at("x0");
  model.y0 = (Vec(2) << s.at("N0"), s.at("lambda0")).finished();
  model.discount = DiscountSpec::none(2);
  model.instruments = {"moment"};
  require_admissible(model);
  return model;
}

ModelSpec make_perturbed_heat(const ParamMap& overrides) {
  const ParamMap s = resolve("perturbed-heat", kPerturbedHeat, overrides);
  ModelSpec model;
  model.name = "perturbed-heat";
  model.settings = s;
  model.component_names = {"y"};
  auto& p = model.params;
  p = XAdmissibleParams::zero(StateSpaceShape(0, 1));
  p.a = MatrixField::callable([](double x) { return Mat::Constant(1, 1, x >= 0.0 ? 0.5 : 0.0); }, Mat::Zero(1, 1));
  DiracKernel k;
  k.atoms.push_back({ScalarField::callable([](double x) { return x < 0.0 ? 1.0 / (x * x) : 0.0; }, 0.0),
                     VectorField::callable([](double x) { return Vec::Constant(1, x); }, Vec::Zero(1))});
  p.m_kernel.parts.push_back(k);
  model.modulator = make_brownian(0.0, std::sqrt(2.0));
  model.x0 = s.at("x0");
  model.y0 = Vec::Constant(1, s.at("y0"));
  model.discount = DiscountSpec::none(1);
  require_admissible(model);
  return model;
}

}  // namespace modaff
