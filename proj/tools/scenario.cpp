#include "scenario.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace modaff::cli {

SchemaError::SchemaError(std::string field, int line, const std::string& what)
    : Error((line > 0 ? "line " + std::to_string(line) + ", " : std::string()) + "field '" + field + "': " + what),
      field_(std::move(field)),
      line_(line) {}

namespace {

int line_of(const YAML::Node& n) { return n.IsDefined() && n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

[[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& what) {
  throw SchemaError(field, line_of(n), what);
}

double as_number(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) fail(n, field, "expected a number");
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    fail(n, field, "expected a number, got '" + n.Scalar() + "'");
  }
}

long long as_integer(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) fail(n, field, "expected an integer");
  try {
    return n.as<long long>();
  } catch (const YAML::Exception&) {
    fail(n, field, "expected an integer, got '" + n.Scalar() + "'");
  }
}

std::string as_string(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) fail(n, field, "expected a string");
  return n.Scalar();
}

bool as_bool(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) fail(n, field, "expected true or false");
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    fail(n, field, "expected true or false, got '" + n.Scalar() + "'");
  }
}

Vec as_vector(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence()) fail(n, field, "expected a list of numbers");
  Vec v(static_cast<Eigen::Index>(n.size()));
  for (std::size_t i = 0; i < n.size(); ++i) v[i] = as_number(n[i], field + "[" + std::to_string(i) + "]");
  return v;
}

Mat as_matrix(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence() || n.size() == 0) fail(n, field, "expected a list of rows");
  Mat m;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const Vec row = as_vector(n[i], field + "[" + std::to_string(i) + "]");
    if (i == 0) m.resize(static_cast<Eigen::Index>(n.size()), row.size());
    if (row.size() != m.cols()) fail(n[i], field, "rows have different lengths");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

// A mapping whose keys are checked against the ones actually read.
class Block {
 public:
  Block(YAML::Node node, std::string field) : node_(std::move(node)), field_(std::move(field)) {
    if (!node_.IsMap()) fail(node_, field_, "expected a mapping");
  }

  const std::string& field() const { return field_; }
  const YAML::Node& node() const { return node_; }
  std::string path(const std::string& key) const { return field_.empty() ? key : field_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return static_cast<bool>(node_[key]);
  }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    const YAML::Node n = node_[key];
    if (!n) fail(node_, path(key), "missing required field");
    return n;
  }

  Block block(const std::string& key) { return Block(get(key), path(key)); }

  double number(const std::string& key) { return as_number(get(key), path(key)); }
  double number(const std::string& key, double dflt) { return has(key) ? number(key) : dflt; }
  std::optional<double> opt_number(const std::string& key) {
    return has(key) ? std::optional<double>(number(key)) : std::nullopt;
  }

  long long integer(const std::string& key) { return as_integer(get(key), path(key)); }
  long long integer(const std::string& key, long long dflt) { return has(key) ? integer(key) : dflt; }

  std::size_t count(const std::string& key, std::size_t dflt) {
    if (!has(key)) return dflt;
    const long long v = integer(key);
    if (v < 1) fail(node_[key], path(key), "must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  std::optional<std::size_t> opt_count(const std::string& key) {
    return has(key) ? std::optional<std::size_t>(count(key, 1)) : std::nullopt;
  }

  double positive(const std::string& key, double dflt) {
    if (!has(key)) return dflt;
    const double v = number(key);
    if (!(v > 0.0)) fail(node_[key], path(key), "must be positive");
    return v;
  }
  std::optional<double> opt_positive(const std::string& key) {
    return has(key) ? std::optional<double>(positive(key, 1.0)) : std::nullopt;
  }

  std::string string(const std::string& key) { return as_string(get(key), path(key)); }
  std::string string(const std::string& key, const std::string& dflt) { return has(key) ? string(key) : dflt; }

  bool boolean(const std::string& key, bool dflt) { return has(key) ? as_bool(get(key), path(key)) : dflt; }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& kv : node_) {
      const std::string key = kv.first.Scalar();
      if (!seen_.count(key)) fail(kv.first, path(key), "unknown field");
    }
  }

 private:
  YAML::Node node_;
  std::string field_;
  std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// x-fields

struct FieldContext {
  std::vector<double> chain_states;   // empty for diffusion modulators
};

template <class T, class Read>
XField<T> read_field(const YAML::Node& n, const std::string& field, const FieldContext& ctx, Read read) {
  if (!n.IsMap()) return XField<T>::constant(read(n, field));
  Block b(n, field);
  XField<T> out;
  if (b.has("affine")) {
    Block a = b.block("affine");
    out = XField<T>::affine(read(a.get("level"), a.path("level")), read(a.get("slope"), a.path("slope")));
    a.finish();
  } else if (b.has("tabulated")) {
    const YAML::Node t = b.get("tabulated");
    if (ctx.chain_states.empty()) fail(t, b.path("tabulated"), "tabulated fields need a chain modulator");
    if (!t.IsSequence() || t.size() != ctx.chain_states.size()) {
      fail(t, b.path("tabulated"), "expected one value per chain state (" + std::to_string(ctx.chain_states.size()) + ")");
    }
    std::vector<T> vals;
    for (std::size_t i = 0; i < t.size(); ++i) vals.push_back(read(t[i], b.path("tabulated") + "[" + std::to_string(i) + "]"));
    out = XField<T>::tabulated(ctx.chain_states, vals);
  } else {
    fail(n, field, "expected a value, {affine: ...} or {tabulated: ...}");
  }
  b.finish();
  return out;
}

ScalarField read_scalar_field(const YAML::Node& n, const std::string& f, const FieldContext& ctx) {
  return read_field<double>(n, f, ctx, as_number);
}
VectorField read_vector_field(const YAML::Node& n, const std::string& f, const FieldContext& ctx) {
  return read_field<Vec>(n, f, ctx, as_vector);
}
MatrixField read_matrix_field(const YAML::Node& n, const std::string& f, const FieldContext& ctx) {
  return read_field<Mat>(n, f, ctx, as_matrix);
}

JumpMeasure read_measure(const YAML::Node& n, const std::string& field, const FieldContext& ctx) {
  if (!n.IsSequence()) fail(n, field, "expected a list of jump parts");
  JumpMeasure out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    Block part(n[i], field + "[" + std::to_string(i) + "]");
    if (part.has("finite")) {
      Block f = part.block("finite");
      FiniteActivityKernel k;
      k.rate = read_scalar_field(f.get("rate"), f.path("rate"), ctx);
      k.direction = as_vector(f.get("direction"), f.path("direction"));
      const std::string law = f.string("law", "normal");
      if (law == "normal") {
        k.law = SizeLaw::normal;
      } else if (law == "exponential") {
        k.law = SizeLaw::exponential;
      } else {
        fail(f.get("law"), f.path("law"), "expected normal or exponential");
      }
      k.loc = f.number("loc", 0.0);
      k.scale = f.number("scale", 1.0);
      f.finish();
      out.parts.emplace_back(std::move(k));
    } else if (part.has("cgmy")) {
      const YAML::Node list = part.get("cgmy");
      if (!list.IsSequence()) fail(list, part.path("cgmy"), "expected a list of components");
      CgmyKernel k;
      for (std::size_t j = 0; j < list.size(); ++j) {
        Block c(list[j], part.path("cgmy") + "[" + std::to_string(j) + "]");
        CgmyComponent comp;
        comp.index = static_cast<int>(c.integer("index"));
        comp.C = c.number("C");
        comp.G = read_scalar_field(c.get("G"), c.path("G"), ctx);
        comp.M = read_scalar_field(c.get("M"), c.path("M"), ctx);
        comp.Y = c.number("Y");
        c.finish();
        k.components.push_back(std::move(comp));
      }
      out.parts.emplace_back(std::move(k));
    } else if (part.has("dirac")) {
      const YAML::Node list = part.get("dirac");
      if (!list.IsSequence()) fail(list, part.path("dirac"), "expected a list of atoms");
      DiracKernel k;
      for (std::size_t j = 0; j < list.size(); ++j) {
        Block a(list[j], part.path("dirac") + "[" + std::to_string(j) + "]");
        DiracAtom atom;
        atom.weight = a.has("weight") ? read_scalar_field(a.get("weight"), a.path("weight"), ctx)
                                      : ScalarField::constant(1.0);
        atom.location = read_vector_field(a.get("location"), a.path("location"), ctx);
        a.finish();
        k.atoms.push_back(std::move(atom));
      }
      out.parts.emplace_back(std::move(k));
    } else {
      fail(n[i], part.field(), "expected one of finite, cgmy, dirac");
    }
    part.finish();
  }
  return out;
}

Modulator read_modulator(Block b) {
  const std::string kind = b.string("kind");
  Modulator out;
  try {
    if (kind == "chain") {
      const Vec states = as_vector(b.get("states"), b.path("states"));
      const Mat Q = as_matrix(b.get("Q"), b.path("Q"));
      std::vector<std::string> labels;
      if (b.has("labels")) {
        const YAML::Node l = b.get("labels");
        if (!l.IsSequence()) fail(l, b.path("labels"), "expected a list of names");
        for (std::size_t i = 0; i < l.size(); ++i) labels.push_back(as_string(l[i], b.path("labels")));
      }
      out = make_chain(std::vector<double>(states.data(), states.data() + states.size()), Q, labels);
    } else if (kind == "jacobi") {
      out = make_jacobi(b.number("kappa"), b.number("theta"), b.number("sigma"));
    } else if (kind == "brownian") {
      out = make_brownian(b.number("mu", 0.0), b.number("sigma"));
    } else {
      fail(b.get("kind"), b.path("kind"), "expected chain, jacobi or brownian");
    }
  } catch (const StructuralError& e) {
    fail(b.node(), b.field(), e.what());
  }
  b.finish();
  return out;
}

DiscountSpec read_discount(Block b, int n) {
  DiscountSpec d = DiscountSpec::none(n);
  d.l = b.number("l", 0.0);
  if (b.has("lambda")) {
    d.lambda = as_vector(b.get("lambda"), b.path("lambda"));
    if (d.lambda.size() != n) fail(b.get("lambda"), b.path("lambda"), "expected " + std::to_string(n) + " entries");
  }
  b.finish();
  return d;
}

ModelSpec read_builtin(Block& b) {
  const YAML::Node name_node = b.get("builtin");
  const std::string name = as_string(name_node, b.path("builtin"));
  ParamMap overrides;
  if (b.has("overrides")) {
    Block o = b.block("overrides");
    for (const auto& kv : o.node()) {
      const std::string key = kv.first.Scalar();
      overrides[key] = o.number(key);
    }
    o.finish();
  }
  ModelSpec m;
  try {
    m = build_model(name, overrides);
  } catch (const StructuralError& e) {
    fail(name_node, b.path("builtin"), e.what());
  }
  if (b.has("x0")) m.x0 = b.number("x0");
  if (b.has("y0")) m.y0 = as_vector(b.get("y0"), b.path("y0"));
  return m;
}

ModelSpec read_explicit(Block& b) {
  ModelSpec m;
  m.name = b.string("name", "custom");
  Block shape = b.block("shape");
  const long long n = shape.integer("n");
  const long long mm = shape.integer("m", 0);
  shape.finish();
  StateSpaceShape sh;
  try {
    sh = StateSpaceShape(static_cast<int>(mm), static_cast<int>(n));
  } catch (const StructuralError& e) {
    fail(shape.node(), shape.field(), e.what());
  }
  m.modulator = read_modulator(b.block("modulator"));
  FieldContext ctx;
  if (const auto* chain = std::get_if<FiniteChainModulator>(&m.modulator)) ctx.chain_states = chain->states;

  if (b.has("components")) {
    const YAML::Node c = b.get("components");
    if (!c.IsSequence() || static_cast<int>(c.size()) != sh.n) {
      fail(c, b.path("components"), "expected " + std::to_string(sh.n) + " names");
    }
    for (std::size_t i = 0; i < c.size(); ++i) m.component_names.push_back(as_string(c[i], b.path("components")));
  } else {
    for (int i = 0; i < sh.n; ++i) m.component_names.push_back("y" + std::to_string(i + 1));
  }

  m.params = XAdmissibleParams::zero(sh);
  if (b.has("params")) {
    Block p = b.block("params");
    if (p.has("a")) m.params.a = read_matrix_field(p.get("a"), p.path("a"), ctx);
    if (p.has("alpha")) {
      const YAML::Node a = p.get("alpha");
      if (!a.IsSequence() || static_cast<int>(a.size()) != sh.m) {
        fail(a, p.path("alpha"), "expected " + std::to_string(sh.m) + " matrices");
      }
      for (std::size_t i = 0; i < a.size(); ++i) {
        m.params.alpha[i] = as_matrix(a[i], p.path("alpha") + "[" + std::to_string(i) + "]");
      }
    }
    if (p.has("b")) m.params.b = read_vector_field(p.get("b"), p.path("b"), ctx);
    if (p.has("beta")) m.params.beta = as_matrix(p.get("beta"), p.path("beta"));
    if (p.has("c")) m.params.c = read_scalar_field(p.get("c"), p.path("c"), ctx);
    if (p.has("gamma")) m.params.gamma = as_vector(p.get("gamma"), p.path("gamma"));
    if (p.has("m")) m.params.m_kernel = read_measure(p.get("m"), p.path("m"), ctx);
    if (p.has("mu")) {
      const YAML::Node mu = p.get("mu");
      if (!mu.IsSequence() || static_cast<int>(mu.size()) != sh.m) {
        fail(mu, p.path("mu"), "expected " + std::to_string(sh.m) + " jump lists");
      }
      for (std::size_t i = 0; i < mu.size(); ++i) {
        m.params.mu[i] = read_measure(mu[i], p.path("mu") + "[" + std::to_string(i) + "]", ctx);
      }
    }
    p.finish();
    try {
      check_dimensions(m.params, sh);
    } catch (const StructuralError& e) {
      fail(p.node(), p.field(), e.what());
    }
  }
  m.x0 = b.number("x0", 0.0);
  m.y0 = b.has("y0") ? as_vector(b.get("y0"), b.path("y0")) : Vec::Zero(sh.n);
  m.discount = b.has("discount") ? read_discount(b.block("discount"), sh.n) : DiscountSpec::none(sh.n);
  return m;
}

CVec read_complex(const YAML::Node& n, const std::string& field, int dim) {
  Block b(n, field);
  CVec u = CVec::Zero(dim);
  for (const char* part : {"re", "im"}) {
    if (!b.has(part)) continue;
    const Vec v = as_vector(b.get(part), b.path(part));
    if (v.size() != dim) fail(b.get(part), b.path(part), "expected " + std::to_string(dim) + " entries");
    if (std::string(part) == "re") {
      u.real() = v;
    } else {
      u.imag() = v;
    }
  }
  b.finish();
  return u;
}

UGrid read_grid(Block b, int dim) {
  UGrid g;
  if (b.has("points")) {
    const YAML::Node pts = b.get("points");
    if (!pts.IsSequence() || pts.size() == 0) fail(pts, b.path("points"), "expected a non-empty list");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      g.points.push_back(read_complex(pts[i], b.path("points") + "[" + std::to_string(i) + "]", dim));
      g.abscissa.push_back(static_cast<double>(i));
    }
  } else if (b.has("line")) {
    Block l = b.block("line");
    const CVec dir = read_complex(l.get("direction"), l.path("direction"), dim);
    const CVec base = l.has("base") ? read_complex(l.get("base"), l.path("base"), dim) : CVec::Zero(dim);
    const double from = l.number("from");
    const double to = l.number("to");
    const std::size_t count = l.count("count", 2);
    l.finish();
    for (std::size_t k = 0; k < count; ++k) {
      const double w = count == 1 ? from : from + (to - from) * static_cast<double>(k) / static_cast<double>(count - 1);
      g.points.push_back(base + w * dir);
      g.abscissa.push_back(w);
    }
  } else {
    fail(b.node(), b.field(), "expected points or line");
  }
  b.finish();
  return g;
}

DiscountChoice read_discount_choice(Block& b) {
  if (!b.has("discount")) return DiscountChoice::none;
  const std::string s = b.string("discount");
  if (s == "none") return DiscountChoice::none;
  if (s == "model") return DiscountChoice::model;
  if (s == "short-rate") return DiscountChoice::short_rate;
  if (s == "survival") return DiscountChoice::survival;
  fail(b.get("discount"), b.path("discount"), "expected none, model, short-rate or survival");
}

double read_horizon(Block& b) {
  const double T = b.number("T");
  if (!(T >= 0.0)) fail(b.get("T"), b.path("T"), "must be nonnegative");
  return T;
}

std::vector<InstrumentSpec> read_instruments(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence() || n.size() == 0) fail(n, field, "expected a non-empty list");
  static const std::set<std::string> kinds{"bond", "survival-bond", "call", "put", "digital", "moment"};
  std::vector<InstrumentSpec> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    Block b(n[i], field + "[" + std::to_string(i) + "]");
    InstrumentSpec ins;
    ins.kind = b.string("kind");
    if (!kinds.count(ins.kind)) fail(b.get("kind"), b.path("kind"), "unknown instrument '" + ins.kind + "'");
    ins.T = read_horizon(b);
    ins.component = b.string("component", "");
    ins.u = b.number("u", -1.0);
    ins.damping = b.opt_number("damping");
    ins.survival = b.boolean("survival", false);
    std::vector<double> strikes{b.number("strike", 1.0)};
    if (b.has("strikes")) {
      const Vec k = as_vector(b.get("strikes"), b.path("strikes"));
      if (k.size() == 0) fail(b.get("strikes"), b.path("strikes"), "expected at least one strike");
      strikes.assign(k.data(), k.data() + k.size());
    }
    b.finish();
    for (double K : strikes) {
      if (!(K > 0.0)) fail(n[i], b.field(), "strikes must be positive");
      ins.strike = K;
      out.push_back(ins);
    }
  }
  return out;
}

void read_numerics(Block b, Numerics& num) {
  auto& tn = num.transform;
  if (b.has("riccati")) {
    Block r = b.block("riccati");
    tn.riccati.tol.abs = r.positive("abs_tol", tn.riccati.tol.abs);
    tn.riccati.tol.rel = r.positive("rel_tol", tn.riccati.tol.rel);
    tn.riccati.max_step_fraction = r.positive("max_step_fraction", tn.riccati.max_step_fraction);
    r.finish();
  }
  if (b.has("cauchy")) {
    Block c = b.block("cauchy");
    tn.chain.tol.abs = c.positive("abs_tol", tn.chain.tol.abs);
    tn.chain.tol.rel = c.positive("rel_tol", tn.chain.tol.rel);
    c.finish();
  }
  if (b.has("pde")) {
    Block p = b.block("pde");
    tn.pde_grid.nx = static_cast<int>(p.count("nx", static_cast<std::size_t>(tn.pde_grid.nx)));
    tn.pde_grid.nt = static_cast<int>(p.count("nt", static_cast<std::size_t>(tn.pde_grid.nt)));
    tn.pde_grid.radius = p.positive("radius", tn.pde_grid.radius);
    tn.pde.rannacher_half_steps = static_cast<int>(p.integer("rannacher_half_steps", tn.pde.rannacher_half_steps));
    p.finish();
  }
  if (b.has("feynman_kac")) {
    Block f = b.block("feynman_kac");
    tn.feynman_kac = f.boolean("enabled", true);
    tn.fk.n_paths = f.count("paths", tn.fk.n_paths);
    tn.fk.dt = f.positive("dt", tn.fk.dt);
    f.finish();
  }
  if (b.has("simulation")) {
    Block s = b.block("simulation");
    num.paths = s.count("paths", num.paths);
    num.dt = s.positive("dt", num.dt);
    s.finish();
  }
  if (b.has("pricing")) {
    Block p = b.block("pricing");
    auto& pn = num.pricing;
    pn.decay_threshold = p.positive("decay_threshold", pn.decay_threshold);
    pn.v_start = p.positive("v_start", pn.v_start);
    pn.v_max = p.positive("v_max", pn.v_max);
    pn.abs_tol = p.positive("abs_tol", pn.abs_tol);
    pn.rel_tol = p.positive("rel_tol", pn.rel_tol);
    pn.max_depth = static_cast<int>(p.count("max_depth", static_cast<std::size_t>(pn.max_depth)));
    p.finish();
  }
  b.finish();
}

Task read_task(const YAML::Node& n, std::size_t index, const ModelSpec& model, const std::vector<Task>& earlier) {
  const std::string field = "tasks[" + std::to_string(index) + "]";
  Block b(n, field);
  Task t;
  t.line = line_of(n);
  t.type = b.string("task");
  char stem[16];
  std::snprintf(stem, sizeof stem, "%02zu_", index + 1);
  t.name = b.string("name", stem + t.type);
  static const std::regex name_re("[A-Za-z0-9_.-]+");
  if (!std::regex_match(t.name, name_re)) fail(n, b.path("name"), "names may use letters, digits, '_', '.', '-'");
  for (const auto& e : earlier) {
    if (e.name == t.name) fail(n, b.path("name"), "duplicate task name '" + t.name + "'");
  }
  const int dim = model.n();
  if (t.type == "validate") {
    ValidateTask v;
    v.export_model = b.boolean("export_model", true);
    t.body = v;
  } else if (t.type == "transform-grid") {
    TransformGridTask g;
    g.T = read_horizon(b);
    g.grid = read_grid(b.block("u"), dim);
    g.discount = read_discount_choice(b);
    t.body = g;
  } else if (t.type == "price") {
    PriceTask p;
    p.instruments = read_instruments(b.get("instruments"), b.path("instruments"));
    p.monte_carlo = b.boolean("monte_carlo", false);
    p.paths = b.opt_count("paths");
    p.dt = b.opt_positive("dt");
    t.body = p;
  } else if (t.type == "simulate") {
    SimulateTask s;
    s.T = read_horizon(b);
    s.paths = b.opt_count("paths");
    s.dt = b.opt_positive("dt");
    s.report_dt = b.number("report_dt", 0.0);
    if (s.report_dt < 0.0) fail(b.get("report_dt"), b.path("report_dt"), "must be nonnegative");
    s.write_paths = static_cast<std::size_t>(std::max(0LL, b.integer("write_paths", 20)));
    t.body = s;
  } else if (t.type == "compare") {
    CompareTask c;
    c.T = read_horizon(b);
    c.grid = read_grid(b.block("u"), dim);
    c.paths = b.opt_count("paths");
    c.dt = b.opt_positive("dt");
    c.z_max = b.positive("z_max", 3.0);
    c.discount = read_discount_choice(b);
    t.body = c;
  } else if (t.type == "plot") {
    PlotTask p;
    p.source = b.string("source");
    p.component = b.string("component", "");
    p.max_paths = b.count("max_paths", 20);
    const Task* src = nullptr;
    for (const auto& e : earlier) {
      if (e.name == p.source) src = &e;
    }
    if (!src) fail(b.get("source"), b.path("source"), "no earlier task named '" + p.source + "'");
    if (src->type == "validate" || src->type == "plot") {
      fail(b.get("source"), b.path("source"), "cannot plot a " + src->type + " task");
    }
    if (!p.component.empty()) {
      try {
        model.index_of(p.component);
      } catch (const StructuralError& e) {
        fail(b.get("component"), b.path("component"), e.what());
      }
    }
    t.body = p;
  } else {
    fail(b.get("task"), b.path("task"), "unknown task '" + t.type + "'");
  }
  b.finish();

  if (const auto* p = std::get_if<PriceTask>(&t.body)) {
    for (const auto& ins : p->instruments) {
      if (ins.component.empty()) continue;
      try {
        model.index_of(ins.component);
      } catch (const StructuralError& e) {
        fail(n, field + ".instruments", e.what());
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Writing explicit blocks

YAML::Node emit_vector(const Vec& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (Eigen::Index i = 0; i < v.size(); ++i) n.push_back(v[i]);
  return n;
}

YAML::Node emit_matrix(const Mat& m) {
  YAML::Node n(YAML::NodeType::Sequence);
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (Eigen::Index i = 0; i < m.rows(); ++i) n.push_back(emit_vector(m.row(i).transpose()));
  return n;
}

YAML::Node emit_value(double v) { return YAML::Node(v); }
YAML::Node emit_value(const Vec& v) { return emit_vector(v); }
YAML::Node emit_value(const Mat& m) { return emit_matrix(m); }

template <class T>
YAML::Node emit_field(const XField<T>& f, const std::string& what, const std::vector<double>& chain_states) {
  using Kind = typename XField<T>::Kind;
  switch (f.kind()) {
    case Kind::constant:
      return emit_value(f.level());
    case Kind::affine: {
      YAML::Node n;
      n["affine"]["level"] = emit_value(f.level());
      n["affine"]["slope"] = emit_value(f.slope());
      return n;
    }
    case Kind::tabulated: {
      YAML::Node list(YAML::NodeType::Sequence);
      for (double x : chain_states) list.push_back(emit_value(f(x)));
      YAML::Node n;
      n["tabulated"] = list;
      return n;
    }
    case Kind::callable:
      break;
  }
  throw RefusalError("field " + what + " is an arbitrary function and has no scenario representation");
}

YAML::Node emit_measure(const JumpMeasure& nu, const std::string& what, const std::vector<double>& cs) {
  YAML::Node list(YAML::NodeType::Sequence);
  if (nu.empty()) list.SetStyle(YAML::EmitterStyle::Flow);
  for (const auto& part : nu.parts) {
    YAML::Node n;
    if (const auto* f = std::get_if<FiniteActivityKernel>(&part)) {
      n["finite"]["rate"] = emit_field(f->rate, what + ".rate", cs);
      n["finite"]["direction"] = emit_vector(f->direction);
      n["finite"]["law"] = f->law == SizeLaw::normal ? "normal" : "exponential";
      n["finite"]["loc"] = f->loc;
      n["finite"]["scale"] = f->scale;
    } else if (const auto* c = std::get_if<CgmyKernel>(&part)) {
      YAML::Node comps(YAML::NodeType::Sequence);
      for (const auto& comp : c->components) {
        YAML::Node k;
        k["index"] = comp.index;
        k["C"] = comp.C;
        k["G"] = emit_field(comp.G, what + ".G", cs);
        k["M"] = emit_field(comp.M, what + ".M", cs);
        k["Y"] = comp.Y;
        comps.push_back(k);
      }
      n["cgmy"] = comps;
    } else {
      const auto& d = std::get<DiracKernel>(part);
      YAML::Node atoms(YAML::NodeType::Sequence);
      for (const auto& a : d.atoms) {
        YAML::Node k;
        k["weight"] = emit_field(a.weight, what + ".weight", cs);
        k["location"] = emit_field(a.location, what + ".location", cs);
        atoms.push_back(k);
      }
      n["dirac"] = atoms;
    }
    list.push_back(n);
  }
  return list;
}

}  // namespace

bool Task::stochastic() const {
  if (std::holds_alternative<SimulateTask>(body) || std::holds_alternative<CompareTask>(body)) return true;
  if (const auto* p = std::get_if<PriceTask>(&body)) return p->monte_carlo;
  return false;
}

bool Scenario::stochastic() const {
  const bool fk = numerics.transform.feynman_kac &&
                  std::holds_alternative<Diffusion1DModulator>(model.modulator);
  for (const auto& t : tasks) {
    if (t.stochastic()) return true;
    if (fk && (t.type == "transform-grid" || t.type == "price" || t.type == "compare")) return true;
  }
  return false;
}

YAML::Node model_to_yaml(const ModelSpec& m) {
  const auto& p = m.params;
  std::vector<double> cs;
  YAML::Node out;
  out["name"] = m.name;
  out["shape"]["m"] = p.shape.m;
  out["shape"]["n"] = p.shape.n;
  YAML::Node comps(YAML::NodeType::Sequence);
  comps.SetStyle(YAML::EmitterStyle::Flow);
  for (const auto& c : m.component_names) comps.push_back(c);
  out["components"] = comps;
  if (const auto* chain = std::get_if<FiniteChainModulator>(&m.modulator)) {
    cs = chain->states;
    out["modulator"]["kind"] = "chain";
    out["modulator"]["states"] = emit_vector(Eigen::Map<const Vec>(cs.data(), static_cast<Eigen::Index>(cs.size())));
    out["modulator"]["Q"] = emit_matrix(chain->Q);
    if (!chain->labels.empty()) {
      YAML::Node l(YAML::NodeType::Sequence);
      l.SetStyle(YAML::EmitterStyle::Flow);
      for (const auto& s : chain->labels) l.push_back(s);
      out["modulator"]["labels"] = l;
    }
  } else {
    const auto& d = std::get<Diffusion1DModulator>(m.modulator);
    if (d.kind != "jacobi" && d.kind != "brownian") {
      throw RefusalError("diffusion modulator '" + d.kind + "' has no scenario representation");
    }
    out["modulator"]["kind"] = d.kind;
    for (const auto& [k, v] : d.params) out["modulator"][k] = v;
  }
  out["x0"] = m.x0;
  out["y0"] = emit_vector(m.y0);
  if (!m.discount.is_zero()) {
    out["discount"]["l"] = m.discount.l;
    out["discount"]["lambda"] = emit_vector(m.discount.lambda.size() ? m.discount.lambda : Vec::Zero(p.shape.n));
  }
  YAML::Node pars;
  pars["a"] = emit_field(p.a, "a", cs);
  YAML::Node alpha(YAML::NodeType::Sequence);
  for (const auto& a : p.alpha) alpha.push_back(emit_matrix(a));
  pars["alpha"] = alpha;
  pars["b"] = emit_field(p.b, "b", cs);
  pars["beta"] = emit_matrix(p.beta);
  pars["c"] = emit_field(p.c, "c", cs);
  pars["gamma"] = emit_vector(p.gamma);
  pars["m"] = emit_measure(p.m_kernel, "m", cs);
  YAML::Node mu(YAML::NodeType::Sequence);
  for (std::size_t i = 0; i < p.mu.size(); ++i) mu.push_back(emit_measure(p.mu[i], "mu[" + std::to_string(i) + "]", cs));
  pars["mu"] = mu;
  out["params"] = pars;
  return out;
}

ModelSpec model_from_yaml(const YAML::Node& node, const std::string& field) {
  Block b(node, field);
  ModelSpec m = b.has("builtin") ? read_builtin(b) : read_explicit(b);
  b.finish();
  if (m.y0.size() != m.n()) fail(node, b.path("y0"), "expected " + std::to_string(m.n()) + " entries");
  for (int i = 0; i < m.params.shape.m; ++i) {
    if (m.y0[i] < 0.0) fail(node, b.path("y0"), "components in I must be nonnegative");
  }
  if (const auto* chain = std::get_if<FiniteChainModulator>(&m.modulator)) {
    try {
      chain->index_of(m.x0);
    } catch (const StructuralError& e) {
      fail(node, b.path("x0"), e.what());
    }
  } else if (!std::get<Diffusion1DModulator>(m.modulator).contains(m.x0)) {
    fail(node, b.path("x0"), "initial state outside the modulator's domain");
  }
  require_admissible(m);
  return m;
}

Scenario parse_scenario(const std::string& text, const std::string& origin, std::optional<std::uint64_t> seed) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw SchemaError("<document>", e.mark.line + 1, e.msg);
  }
  if (!root.IsMap()) throw SchemaError("<document>", line_of(root), "expected a mapping at the top level");
  Block b(root, "");
  Scenario s;
  s.origin = origin;
  s.text = text;
  s.version = static_cast<int>(b.integer("version"));
  if (s.version != kSchemaVersion) {
    fail(b.get("version"), "version", "unsupported schema version " + std::to_string(s.version));
  }
  {
    const YAML::Node mn = b.get("model");
    s.model_source = mn.IsMap() && mn["builtin"] ? mn["builtin"].Scalar() : "explicit";
    s.model = model_from_yaml(mn, "model");
  }
  if (b.has("numerics")) read_numerics(b.block("numerics"), s.numerics);
  if (b.has("seed")) {
    const long long seed = b.integer("seed");
    if (seed < 0) fail(b.get("seed"), "seed", "must be nonnegative");
    s.seed = static_cast<std::uint64_t>(seed);
  }
  if (seed) s.seed = seed;
  s.threads = static_cast<int>(b.integer("threads", 1));
  if (s.threads < 1) fail(b.get("threads"), "threads", "must be at least 1");
  s.output = b.string("output", "out");
  const YAML::Node tasks = b.get("tasks");
  if (!tasks.IsSequence() || tasks.size() == 0) fail(tasks, "tasks", "expected a non-empty list");
  for (std::size_t i = 0; i < tasks.size(); ++i) s.tasks.push_back(read_task(tasks[i], i, s.model, s.tasks));
  b.finish();
  if (s.stochastic() && !s.seed) fail(root, "seed", "a seed is required for stochastic tasks");
  return s;
}

Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("<file>", 0, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path, seed);
}

}  // namespace modaff::cli
