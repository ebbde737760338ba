#pragma once

// Scenario files: YAML, schema version 1 (documented in docs/scenarios.md).

#include "modaff/models.hpp"
#include "modaff/pricing.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <optional>

namespace modaff::cli {

inline constexpr int kSchemaVersion = 1;

/// The file does not match the schema. `field` is the dotted path of the
/// offending key, `line` is 1-based (0 when unknown).
class SchemaError : public Error {
 public:
  SchemaError(std::string field, int line, const std::string& what);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

/// A list of exponents u together with a plotting abscissa for each.
struct UGrid {
  std::vector<CVec> points;
  std::vector<double> abscissa;
};

/// Which discount a transform or simulation carries.
enum class DiscountChoice { none, model, short_rate, survival };

struct ValidateTask {
  bool export_model = true;   // write <name>.yaml with the explicit parameter blocks
};

struct TransformGridTask {
  double T = 1.0;
  UGrid grid;
  DiscountChoice discount = DiscountChoice::none;
};

struct PriceTask {
  std::vector<InstrumentSpec> instruments;
  bool monte_carlo = false;
  std::optional<std::size_t> paths;
  std::optional<double> dt;
};

struct SimulateTask {
  double T = 1.0;
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  double report_dt = 0.0;
  std::size_t write_paths = 20;
};

struct CompareTask {
  double T = 1.0;
  UGrid grid;
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  double z_max = 3.0;
  DiscountChoice discount = DiscountChoice::none;
};

struct PlotTask {
  std::string source;      // name of an earlier task
  std::string component;   // simulate sources: which component to draw
  std::size_t max_paths = 20;
};

using TaskBody = std::variant<ValidateTask, TransformGridTask, PriceTask, SimulateTask, CompareTask, PlotTask>;

struct Task {
  std::string type;
  std::string name;   // output file stem
  int line = 0;
  TaskBody body;

  bool stochastic() const;
};

struct Numerics {
  TransformNumerics transform;
  PricingNumerics pricing;
  std::size_t paths = 10000;
  double dt = 1.0 / 1024;
};

struct Scenario {
  int version = kSchemaVersion;
  std::string origin;   // file path or "<string>"
  std::string text;     // raw file content (hashed into the manifest)
  ModelSpec model;
  std::string model_source;   // builtin name or "explicit"
  Numerics numerics;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string output = "out";
  std::vector<Task> tasks;

  bool stochastic() const;
};

/// Parse and check a scenario. Throws SchemaError for schema violations and
/// AdmissibilityError when the model fails validation. `seed` replaces the
/// file's seed.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>",
                        std::optional<std::uint64_t> seed = std::nullopt);
Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed = std::nullopt);

// Explicit parameter blocks. Constant, affine and tabulated fields round-trip;
// callable fields cannot be written and raise RefusalError.
YAML::Node model_to_yaml(const ModelSpec& m);
ModelSpec model_from_yaml(const YAML::Node& node, const std::string& field = "model");

}  // namespace modaff::cli
