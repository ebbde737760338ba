#include "runner.hpp"

#include "manifest.hpp"
#include "svg.hpp"

#include "modaff/csv.hpp"
#include "modaff/simulate.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace modaff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t task_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finaliser of (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::optional<DiscountSpec> discount_for(const ModelSpec& m, DiscountChoice c) {
  switch (c) {
    case DiscountChoice::none:
      return std::nullopt;
    case DiscountChoice::model:
      return m.discount;
    case DiscountChoice::short_rate:
      return short_rate_discount(m);
    case DiscountChoice::survival:
      return survival_discount(m);
  }
  return std::nullopt;
}

std::vector<std::string> u_columns(int n) {
  std::vector<std::string> h;
  for (int i = 0; i < n; ++i) h.push_back("re_u" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) h.push_back("im_u" + std::to_string(i + 1));
  return h;
}

void append_u(std::vector<std::string>& row, const CVec& u) {
  for (Eigen::Index i = 0; i < u.size(); ++i) row.push_back(fmt(u[i].real()));
  for (Eigen::Index i = 0; i < u.size(); ++i) row.push_back(fmt(u[i].imag()));
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error("column " + name + " not found");
  }
  std::vector<double> numbers(const std::string& name) const {
    const std::size_t c = col(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(std::stod(r.at(c)));
    return out;
  }
};

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  Table t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

class Runner {
 public:
  Runner(const Scenario& s, const RunOptions& opt) : s_(s), opt_(opt) {
    threads_ = opt.threads.value_or(s.threads);
    if (threads_ < 1) throw StructuralError("threads must be at least 1");
    seed_ = opt.seed ? opt.seed : s.seed;
    if (s.stochastic() && !seed_) throw SchemaError("seed", 0, "a seed is required for stochastic tasks");
    out_ = opt.out_dir.value_or(s.output);
    fs::create_directories(out_);
  }

  RunResult run() {
    RunResult res;
    res.out_dir = out_.string();
    json tasks = json::array();
    std::string error;
    int exit_code = kExitOk;
    try {
      for (std::size_t i = 0; i < s_.tasks.size(); ++i) {
        const Task& t = s_.tasks[i];
        if (opt_.log) *opt_.log << "[" << i + 1 << "/" << s_.tasks.size() << "] " << t.type << " " << t.name << std::flush;
        current_ = json::object();
        current_["name"] = t.name;
        current_["type"] = t.type;
        current_["outputs"] = json::array();
        index_ = i;
        const bool passed = std::visit([&](const auto& body) { return exec(t, body); }, t.body);
        current_["status"] = passed ? "ok" : "failed";
        if (!passed) exit_code = kExitCompareFailed;
        tasks.push_back(current_);
        if (opt_.log) *opt_.log << (passed ? " ok" : " FAILED") << "\n";
      }
    } catch (const std::exception& e) {
      error = e.what();
      current_["status"] = "error";
      current_["error"] = error;
      tasks.push_back(current_);
      if (opt_.log) *opt_.log << " error\n";
      write_manifest(tasks, -1, error);
      throw;
    }
    res.exit_code = exit_code;
    res.artifacts = artifacts_;
    res.manifest_path = write_manifest(tasks, exit_code, error);
    return res;
  }

 private:
  std::string file(const std::string& name) const { return (out_ / name).string(); }

  void record(const std::string& task, const std::string& name) {
    Artifact a;
    a.task = task;
    a.file = name;
    a.sha256 = sha256_file(file(name));
    a.bytes = fs::file_size(file(name));
    artifacts_.push_back(a);
    current_["outputs"].push_back(name);
    outputs_[task].push_back(name);
  }

  TransformNumerics transform_numerics() const {
    TransformNumerics tn = s_.numerics.transform;
    tn.fk.threads = threads_;
    if (seed_) tn.fk.seed = task_seed(*seed_, index_);
    return tn;
  }

  SimulationOptions simulation(std::optional<std::size_t> paths, std::optional<double> dt, std::uint64_t salt = 0) const {
    SimulationOptions so;
    so.n_paths = paths.value_or(s_.numerics.paths);
    so.dt = dt.value_or(s_.numerics.dt);
    so.threads = threads_;
    so.seed = task_seed(*seed_, index_) ^ salt;
    return so;
  }

  bool exec(const Task& t, const ValidateTask& v) {
    const ModelSpec& m = s_.model;
    const auto probes = probe_states(m.modulator);
    const auto report = validate_params(m.params, m.params.shape, probes);
    const std::string csv = t.name + ".csv";
    {
      CsvWriter w(file(csv), {"bullet", "x", "detail"});
      for (const auto& viol : report.violations) w.row({viol.bullet, fmt(viol.x), viol.detail});
    }
    record(t.name, csv);
    current_["summary"] = {{"violations", report.violations.size()}, {"probe_states", probes.size()}};
    if (v.export_model) {
      try {
        YAML::Emitter e;
        e << model_to_yaml(m);
        const std::string yml = t.name + ".yaml";
        std::ofstream(file(yml), std::ios::binary) << e.c_str() << "\n";
        record(t.name, yml);
      } catch (const RefusalError& e) {
        current_["summary"]["export"] = e.what();
      }
    }
    return true;
  }

  bool exec(const Task& t, const TransformGridTask& g) {
    const ModelSpec& m = s_.model;
    TransformQuery base;
    base.T = g.T;
    base.x = m.x0;
    base.y = m.y0;
    base.discount = discount_for(m, g.discount);
    const auto res = transform_batch(m.params, m.modulator, g.grid.points, base, transform_numerics(), threads_);
    const std::string csv = t.name + ".csv";
    {
      std::vector<std::string> h{"k", "w"};
      for (auto& c : u_columns(m.n())) h.push_back(c);
      for (const char* c : {"re", "im", "err", "method"}) h.push_back(c);
      CsvWriter w(file(csv), h);
      for (std::size_t k = 0; k < res.size(); ++k) {
        std::vector<std::string> row{std::to_string(k), fmt(g.grid.abscissa[k])};
        append_u(row, g.grid.points[k]);
        row.push_back(fmt(res[k].value.real()));
        row.push_back(fmt(res[k].value.imag()));
        row.push_back(fmt(res[k].error_estimate));
        row.push_back(res[k].method);
        w.row(row);
      }
    }
    record(t.name, csv);
    current_["summary"] = {{"points", res.size()}, {"method", res.empty() ? "" : res.front().method}};
    return true;
  }

  bool exec(const Task& t, const PriceTask& p) {
    const ModelSpec& m = s_.model;
    PricingNumerics pn = s_.numerics.pricing;
    pn.transform = transform_numerics();
    pn.threads = threads_;
    const auto prices = price_instruments(m, p.instruments, pn);
    std::vector<PriceRow> rows;
    for (std::size_t i = 0; i < prices.size(); ++i) rows.push_back({p.instruments[i], prices[i]});
    const std::string csv = t.name + ".csv";
    write_price_csv(rows, file(csv));
    record(t.name, csv);
    current_["summary"] = {{"instruments", rows.size()}};
    if (!p.monte_carlo) return true;

    // One simulation per distinct (maturity, discount).
    struct Group {
      double T;
      DiscountSpec d;
      PathBundle bundle;
    };
    std::vector<Group> groups;
    const std::string mc_csv = t.name + "_mc.csv";
    CsvWriter w(file(mc_csv), {"instrument", "T", "K", "fourier", "mc", "stderr", "z"});
    double worst = 0.0;
    for (std::size_t i = 0; i < p.instruments.size(); ++i) {
      const auto& ins = p.instruments[i];
      const DiscountSpec d = instrument_discount(m, ins);
      Group* g = nullptr;
      for (auto& e : groups) {
        if (e.T == ins.T && e.d.l == d.l && e.d.lambda == d.lambda) g = &e;
      }
      if (!g) {
        SimulationOptions so = simulation(p.paths, p.dt, groups.size());
        so.discount = d;
        groups.push_back({ins.T, d, simulate_paths(m.params, m.modulator, m.x0, m.y0, ins.T, so)});
        g = &groups.back();
      }
      const auto mc = price_instrument_mc(m, ins, g->bundle);
      const double z = mc.error > 0.0 ? std::abs(prices[i].price - mc.price) / mc.error : 0.0;
      worst = std::max(worst, z);
      w.row({ins.kind, fmt(ins.T), fmt(ins.strike), fmt(prices[i].price), fmt(mc.price), fmt(mc.error), fmt(z)});
    }
    record(t.name, mc_csv);
    current_["summary"]["max_abs_z"] = worst;
    return true;
  }

  bool exec(const Task& t, const SimulateTask& st) {
    const ModelSpec& m = s_.model;
    SimulationOptions so = simulation(st.paths, st.dt);
    so.report_dt = st.report_dt;
    const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, st.T, so);
    if (st.write_paths > 0) {
      const std::string paths = t.name + "_paths.csv";
      write_paths_csv(b, file(paths), st.write_paths);
      record(t.name, paths);
    }
    const std::string summary = t.name + "_summary.csv";
    write_summary_csv(b, file(summary));
    record(t.name, summary);
    json meta = json::object();
    for (const auto& [k, v] : b.metadata) meta[k] = v;
    current_["summary"] = {{"paths", b.n_paths}, {"metadata", meta}};
    return true;
  }

  bool exec(const Task& t, const CompareTask& c) {
    const ModelSpec& m = s_.model;
    TransformQuery base;
    base.T = c.T;
    base.x = m.x0;
    base.y = m.y0;
    base.discount = discount_for(m, c.discount);
    const auto tr = transform_batch(m.params, m.modulator, c.grid.points, base, transform_numerics(), threads_);
    SimulationOptions so = simulation(c.paths, c.dt, 0x5eed);
    so.discount = base.discount;
    const auto b = simulate_paths(m.params, m.modulator, m.x0, m.y0, c.T, so);
    EmpiricalOptions eo;
    eo.discounted = base.discount.has_value();

    const std::string csv = t.name + ".csv";
    double worst = 0.0;
    {
      std::vector<std::string> h{"k", "w"};
      for (auto& col : u_columns(m.n())) h.push_back(col);
      for (const char* col : {"re_transform", "im_transform", "re_mc", "im_mc", "stderr", "z"}) h.push_back(col);
      CsvWriter w(file(csv), h);
      for (std::size_t k = 0; k < tr.size(); ++k) {
        const auto e = empirical_transform(b, c.grid.points[k], eo);
        const double diff = std::abs(tr[k].value - e.mean);
        const double z = e.stderr_ > 0.0 ? diff / e.stderr_ : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        worst = std::max(worst, z);
        std::vector<std::string> row{std::to_string(k), fmt(c.grid.abscissa[k])};
        append_u(row, c.grid.points[k]);
        for (double v : {tr[k].value.real(), tr[k].value.imag(), e.mean.real(), e.mean.imag(), e.stderr_, z}) {
          row.push_back(fmt(v));
        }
        w.row(row);
      }
    }
    record(t.name, csv);
    current_["summary"] = {{"points", tr.size()}, {"paths", b.n_paths}, {"max_abs_z", worst}, {"z_max", c.z_max}};
    return worst < c.z_max;
  }

  bool exec(const Task& t, const PlotTask& p) {
    const Task* src = nullptr;
    for (const auto& e : s_.tasks) {
      if (e.name == p.source) src = &e;
    }
    const auto& files = outputs_[p.source];
    if (!src || files.empty()) throw StructuralError("plot source '" + p.source + "' produced no output");
    Chart chart;
    if (src->type == "transform-grid") {
      const Table tb = read_csv(file(files.front()));
      chart.title = "Transform at T = " + fmt(std::get<TransformGridTask>(src->body).T);
      chart.xlabel = "w";
      chart.ylabel = "value";
      chart.series.push_back({"Re", tb.numbers("w"), tb.numbers("re")});
      chart.series.push_back({"Im", tb.numbers("w"), tb.numbers("im")});
    } else if (src->type == "compare") {
      const Table tb = read_csv(file(files.front()));
      chart.title = "Transform vs Monte Carlo";
      chart.xlabel = "w";
      chart.ylabel = "value";
      const auto w = tb.numbers("w");
      chart.series.push_back({"Re transform", w, tb.numbers("re_transform")});
      chart.series.push_back({"Re MC", w, tb.numbers("re_mc"), true});
      chart.series.push_back({"Im transform", w, tb.numbers("im_transform")});
      chart.series.push_back({"Im MC", w, tb.numbers("im_mc"), true});
    } else if (src->type == "price") {
      const Table tb = read_csv(file(files.front()));
      chart.title = "Price vs strike";
      chart.xlabel = "strike";
      chart.ylabel = "price";
      const std::size_t ki = tb.col("instrument"), ti = tb.col("T"), kk = tb.col("K"), pi = tb.col("price");
      std::vector<std::string> keys;
      for (const auto& r : tb.rows) {
        const std::string key = r[ki] + " T=" + r[ti];
        std::size_t g = 0;
        while (g < keys.size() && keys[g] != key) ++g;
        if (g == keys.size()) {
          keys.push_back(key);
          chart.series.push_back({key, {}, {}});
        }
        chart.series[g].x.push_back(std::stod(r[kk]));
        chart.series[g].y.push_back(std::stod(r[pi]));
      }
      for (auto& sr : chart.series) sr.markers = sr.x.size() < 2;
    } else if (src->type == "simulate") {
      std::string paths;
      for (const auto& f : files) {
        if (f.size() > 10 && f.compare(f.size() - 10, 10, "_paths.csv") == 0) paths = f;
      }
      if (paths.empty()) throw StructuralError("plot source '" + p.source + "' wrote no sample paths");
      const Table tb = read_csv(file(paths));
      const int c = p.component.empty() ? s_.model.n() - 1 : s_.model.index_of(p.component);
      const std::string cname = static_cast<std::size_t>(c) < s_.model.component_names.size()
                                    ? s_.model.component_names[static_cast<std::size_t>(c)]
                                    : "y" + std::to_string(c + 1);
      chart.title = "Sample paths of " + cname;
      chart.xlabel = "t";
      chart.ylabel = cname;
      chart.legend = false;
      const std::size_t pc = tb.col("path"), tc = tb.col("t"), yc = tb.col("y" + std::to_string(c + 1));
      std::string last;
      for (const auto& r : tb.rows) {
        if (r[pc] != last) {
          if (chart.series.size() == p.max_paths) break;
          chart.series.push_back({"path " + r[pc], {}, {}});
          last = r[pc];
        }
        chart.series.back().x.push_back(std::stod(r[tc]));
        chart.series.back().y.push_back(std::stod(r[yc]));
      }
    }
    const std::string svg = t.name + ".svg";
    write_svg(chart, file(svg));
    record(t.name, svg);
    return true;
  }

  std::string write_manifest(const json& tasks, int exit_code, const std::string& error) const {
    json j;
    j["schema_version"] = s_.version;
    j["scenario"] = {{"path", s_.origin}, {"sha256", sha256_hex(s_.text)}, {"bytes", s_.text.size()}};
    j["model"] = {{"source", s_.model_source}, {"name", s_.model.name}};
    json settings = json::object();
    for (const auto& [k, v] : s_.model.settings) settings[k] = v;
    j["model"]["settings"] = settings;
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    j["threads"] = threads_;
    j["versions"] = version_info();
    j["tasks"] = tasks;
    json outs = json::array();
    for (const auto& a : artifacts_) {
      outs.push_back({{"file", a.file}, {"task", a.task}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    }
    j["outputs"] = outs;
    if (exit_code >= 0) {
      j["exit_code"] = exit_code;
    } else {
      j["error"] = error;
    }
    const std::string path = file("manifest.json");
    std::ofstream(path, std::ios::binary) << j.dump(2) << "\n";
    return path;
  }

  const Scenario& s_;
  const RunOptions& opt_;
  int threads_ = 1;
  std::optional<std::uint64_t> seed_;
  fs::path out_;
  std::size_t index_ = 0;
  json current_;
  std::vector<Artifact> artifacts_;
  std::map<std::string, std::vector<std::string>> outputs_;
};

}  // namespace

RunResult run_scenario(const Scenario& s, const RunOptions& opt) { return Runner(s, opt).run(); }

int run_file(const std::string& path, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    const Scenario s = load_scenario(path, opt.seed);
    RunOptions o = opt;
    if (!o.log) o.log = &log;
    const RunResult r = run_scenario(s, o);
    log << "wrote " << r.artifacts.size() << " files and " << r.manifest_path << "\n";
    if (r.exit_code == kExitCompareFailed) err << "compare: |z| reached the limit (see manifest)\n";
    return r.exit_code;
  } catch (const SchemaError& e) {
    err << path << ": schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const AdmissibilityError& e) {
    err << path << ": " << e.what() << "\n";
    return kExitAdmissibility;
  } catch (const FiniteLifetimeError& e) {
    err << path << ": refused: " << e.what() << "\n";
    return kExitRefusal;
  } catch (const MomentConditionError& e) {
    err << path << ": refused: " << e.what() << "\n";
    return kExitRefusal;
  } catch (const RefusalError& e) {
    err << path << ": refused: " << e.what() << "\n";
    return kExitRefusal;
  } catch (const NumericalError& e) {
    err << path << ": refused: " << e.what() << "\n";
    return kExitRefusal;
  } catch (const StructuralError& e) {
    err << path << ": invalid input: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    err << path << ": internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace modaff::cli
