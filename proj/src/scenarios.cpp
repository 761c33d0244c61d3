#include "tsvsim/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "tsvsim/boseeinstein.hpp"
#include "tsvsim/branching.hpp"
#include "tsvsim/errors.hpp"
#include "tsvsim/pilotwave.hpp"
#include "tsvsim/tsvf.hpp"

namespace tsvsim {

using nlohmann::json;

namespace {

struct ScenarioEntry {
  ScenarioInfo info;
  json defaults;
  std::map<std::string, std::vector<std::string>> choices;
  std::function<ScenarioResult(const json&, unsigned)> run;
};

const std::vector<std::string> kPreparations{"up", "down", "x_plus", "x_minus"};

// --- parameter access -------------------------------------------------------------

std::uint64_t seed_of(const json& c) { return c.at("seed").get<std::uint64_t>(); }
std::size_t count(const json& c, const char* key) { return c.at(key).get<std::size_t>(); }
double real(const json& c, const char* key) { return c.at(key).get<double>(); }
std::string text(const json& c, const char* key) { return c.at(key).get<std::string>(); }
std::optional<double> maybe_real(const json& c, const char* key) {
  const auto& v = c.at(key);
  return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
}

State preparation(const std::string& name) {
  const BasisLabel qubit = BasisLabel::single("spin", 2);
  if (name == "up") return State::basis_state(qubit, 0);
  if (name == "down") return State::basis_state(qubit, 1);
  if (name == "x_plus") return x_plus<double>(qubit);
  return x_minus<double>(qubit);
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

CorrelationConfig correlation_config(const json& c, unsigned workers) {
  CorrelationConfig cfg;
  cfg.bins = count(c, "bins");
  cfg.q_max = real(c, "q_max");
  cfg.multiplicity = count(c, "multiplicity");
  cfg.mix_partners = count(c, "mix_partners");
  cfg.workers = workers;
  return cfg;
}

GuidingField hot_spots(const json& c, double delta) {
  return GuidingField::two_hot_spots(real(c, "separation"), real(c, "wavelength"), delta);
}

DetectorGeometry detector(const json& c, Arrangement a) {
  DetectorGeometry d;
  d.distance = real(c, "distance");
  d.aperture = real(c, "aperture");
  d.arrangement = a;
  return d;
}

HbtOptions hbt_options(const json& c, unsigned workers) {
  HbtOptions o;
  o.start_line = real(c, "start_line");
  o.dt = real(c, "dt");
  o.workers = workers;
  return o;
}

Arrangement arrangement(const std::string& s) {
  return s == "baseline" ? Arrangement::baseline : Arrangement::moved_back_twice;
}

json rate_row(const RateRecord& r) { return json::array({r.model, r.arrangement, r.delta, r.rate, r.error}); }

// --- scenarios ----------------------------------------------------------------------

ScenarioResult abl_demo(const json& c, unsigned workers) {
  const BasisLabel basis = BasisLabel::single("system", count(c, "dimension"));
  RandomStream rng(seed_of(c), "abl_demo/initial");
  const State initial = haar_state<double>(basis, rng);
  std::vector<Op> projectors;
  for (std::size_t k = 0; k < basis.dimension(); ++k) projectors.push_back(Op::projector_onto(State::basis_state(basis, k)));
  const MeasurementContext<double> family(projectors);
  const auto r = born_limit_check(initial, family, count(c, "trials"), seed_of(c), workers);

  ScenarioResult out;
  Table t{"abl_demo", {"outcome", "born", "abl_mixed_final", "selected_frequency", "mean_abl"}, {}};
  for (std::size_t k = 0; k < r.born.size(); ++k)
    t.rows.push_back({k, r.born[k], r.mixed_final[k], r.selected_frequency[k], r.mean_abl[k]});
  out.tables.push_back(std::move(t));
  out.summary = {{"trials", r.trials}, {"max_mixed_deviation", r.max_mixed_deviation}};
  return out;
}

ScenarioResult stern_gerlach(const json& c, unsigned workers) {
  std::optional<Matrix> agent;
  if (const auto a = maybe_real(c, "agent_angle")) agent = rotation_y<double>(*a);
  const auto model = text(c, "model") == "joint" ? FinalStateModel::joint_haar : FinalStateModel::product_haar;
  const auto r = stern_gerlach_ensemble(count(c, "runs"), seed_of(c), count(c, "witness_count"),
                                        preparation(text(c, "preparation")), model, agent, workers);
  ScenarioResult out;
  Table t{"stern_gerlach", {"run", "up_selected", "tie", "log2_weight_up", "log2_weight_down", "gap_log2"}, {}};
  for (std::size_t k = 0; k < r.outcomes.size(); ++k) {
    const auto& o = r.outcomes[k];
    t.rows.push_back({k, o.up_selected, o.tie, nullable(o.log2_weight_up), nullable(o.log2_weight_down),
                      nullable(o.gap_log2)});
  }
  out.tables.push_back(std::move(t));
  out.summary = {{"runs", r.runs},
                 {"up_fraction", r.up_fraction},
                 {"born_up", r.born_up},
                 {"binomial_sigma", r.binomial_sigma},
                 {"median_gap_log2", nullable(r.median_gap_log2)}};
  return out;
}

ScenarioResult decision_tree(const json& c, unsigned) {
  const std::size_t n = count(c, "decisions");
  if (n == 0 || n > 12) throw ConfigError("decisions: must be between 1 and 12");
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n; ++k) names.push_back("d" + std::to_string(k));
  const BasisLabel basis = BasisLabel::qubits(names);
  RandomStream rng(seed_of(c), "decision_tree/final");
  const State final = haar_state<double>(basis, rng);
  const auto r = run_tree(State::basis_state(basis, 0), DecisionTree::unbiased_qubits(basis, names), final);

  ScenarioResult out;
  Table t{"decision_tree", {"path", "weight", "log2_weight", "probability"}, {}};
  for (const auto& l : r.leaves) t.rows.push_back({l.path, l.weight, nullable(l.log2_weight), l.probability});
  out.tables.push_back(std::move(t));
  out.summary = {{"selected_path", r.selected_path}, {"tie", r.tie},
                 {"gap_log2", nullable(r.gap_log2)}, {"leaf_weight_sum", r.leaf_weight_sum},
                 {"coherent_overlap", r.coherent_overlap}, {"interference", r.interference}};
  return out;
}

ScenarioResult bidirectional(const json& c, unsigned workers) {
  const std::size_t w = count(c, "witness_count");
  auto s = stern_gerlach_bidirectional(seed_of(c), w, preparation(text(c, "preparation")));
  const BasisLabel& basis = s.bang.basis();
  if (const auto a = maybe_real(c, "agent_angle"))
    s = agent_insert(s, 0, embed<double>(basis, {"spin"}, Op::unitary(BasisLabel::single("q", 2), rotation_y<double>(*a))));
  Matrix up = Matrix::Zero(2, 2);
  up(0, 0) = 1;
  const auto family = MeasurementContext<double>::binary(Op::projector(basis, embed_matrix<double>(basis, {"spin"}, up)));
  const auto weights = branch_weights(s, family);
  const auto border = match_border(s);

  std::vector<std::size_t> dims = c.at("overlap_log2_dims").get<std::vector<std::size_t>>();
  const auto scaling = overlap_scaling(dims, count(c, "overlap_seeds"), seed_of(c), workers);

  ScenarioResult out;
  Table t{"overlap_scaling", {"log2_dim", "mean_log2_overlap_sq"}, {}};
  for (const auto& p : scaling.points) t.rows.push_back({p.log2_dim, p.mean_log2_overlap_sq});
  out.tables.push_back(std::move(t));
  out.summary = {{"branch_weight_up", weights[0]},
                 {"branch_weight_down", weights[1]},
                 {"selected", weights[0] >= weights[1] ? "up" : "down"},
                 {"border_overlap_sq", std::norm(border.overlap)},
                 {"border_dominance_ratio", nullable(border.dominance_ratio)},
                 {"border_variants_agree", border.variants_agree},
                 {"overlap_slope", scaling.slope}};
  return out;
}

Table histogram_table(const CorrelationHistogram& h, const std::string& name) {
  Table t{name, {"q_lo", "q_hi", "same", "mixed", "C", "C_err"}, {}};
  for (const auto& b : h.bins)
    t.rows.push_back({b.q_lo, b.q_hi, b.same, b.mixed, b.valid ? json(b.c) : json(nullptr),
                      b.valid ? json(b.c_err) : json(nullptr)});
  return t;
}

ScenarioResult be_correlation(const json& c, unsigned workers) {
  const auto src = SourceModel::gaussian(real(c, "radius_fm"), real(c, "momentum_scale"));
  const auto h = correlation(src, count(c, "events"), seed_of(c), correlation_config(c, workers));
  const auto fit = fit_gaussian(h, real(c, "fit_q_max"));
  double tail = 0, tail_w = 0;
  for (const auto& b : h.bins)
    if (b.valid && b.q_lo >= real(c, "tail_q_min") && b.c_err > 0) {
      tail += b.c / (b.c_err * b.c_err);
      tail_w += 1 / (b.c_err * b.c_err);
    }
  ScenarioResult out;
  out.tables.push_back(histogram_table(h, "be_correlation"));
  out.summary = {{"c0", fit.intercept},
                 {"lambda", fit.lambda},
                 {"radius_fm", fit.radius},
                 {"chi2", fit.chi2},
                 {"ndf", fit.ndf},
                 {"c_tail", tail_w > 0 ? json(tail / tail_w) : json(nullptr)},
                 {"same_pairs", h.same_pairs},
                 {"mixed_pairs", h.mixed_pairs}};
  return out;
}

ScenarioResult absorber(const json& c, unsigned workers) {
  const auto src = SourceModel::two_halves(real(c, "separation_fm"), real(c, "spot_fm"), real(c, "momentum_scale"));
  const auto r = absorber_gedanken(src, count(c, "events"), seed_of(c), correlation_config(c, workers),
                                   real(c, "intercept_q_max"));
  ScenarioResult out;
  Table t{"absorber_gedanken", {"q_lo", "q_hi", "C_off", "C_on", "C_from_birth"}, {}};
  auto cell = [](const CorrelationBin& b) { return b.valid ? json(b.c) : json(nullptr); };
  for (std::size_t k = 0; k < r.off.bins.size(); ++k)
    t.rows.push_back({r.off.bins[k].q_lo, r.off.bins[k].q_hi, cell(r.off.bins[k]), cell(r.on.bins[k]),
                      cell(r.from_birth.bins[k])});
  out.tables.push_back(std::move(t));
  out.summary = {{"c0_off", r.c0_off},
                 {"c0_on", r.c0_on},
                 {"c0_from_birth", r.c0_from_birth},
                 {"max_on_birth_difference", r.max_on_birth_difference}};
  return out;
}

ScenarioResult pilotwave_hbt(const json& c, unsigned workers) {
  const std::string which = text(c, "arrangement");
  std::vector<Arrangement> arrangements;
  if (which != "moved_back_twice") arrangements.push_back(Arrangement::baseline);
  if (which != "baseline") arrangements.push_back(Arrangement::moved_back_twice);
  const double delta = real(c, "delta");

  ScenarioResult out;
  Table t{"pilotwave_hbt", {"model", "arrangement", "delta", "rate", "error"}, {}};
  out.summary = json::object();
  for (auto a : arrangements) {
    const auto r = hbt_compare(hot_spots(c, delta), detector(c, a), count(c, "trials"), seed_of(c), hbt_options(c, workers));
    for (const auto* rec : {&r.qm, &r.dbb, &r.normal}) t.rows.push_back(rate_row(*rec));
    out.summary[to_string(a)] = {{"ratio_dbb_qm", r.ratio},       {"ratio_error", r.ratio_error},
                                 {"qm_over_normal", r.qm.rate / r.normal.rate},
                                 {"window", {r.window_lo, r.window_hi}}, {"hits", r.hits},
                                 {"trapped", r.trapped}};
  }
  out.tables.push_back(std::move(t));
  return out;
}

ScenarioResult correspondence(const json& c, unsigned workers) {
  const auto r = correspondence_average(hot_spots(c, 0), detector(c, arrangement(text(c, "arrangement"))),
                                        real(c, "delta_lo"), real(c, "delta_hi"), count(c, "steps"),
                                        count(c, "trials"), seed_of(c), hbt_options(c, workers));
  ScenarioResult out;
  Table t{"correspondence_average", {"delta", "qm", "dbb", "dbb_error", "normal"}, {}};
  for (std::size_t k = 0; k < r.points.size(); ++k) {
    const auto& p = r.points[k];
    t.rows.push_back({r.deltas[k], p.qm.rate, p.dbb.rate, p.dbb.error, p.normal.rate});
  }
  out.tables.push_back(std::move(t));
  out.summary = {{"full_period", r.full_period},
                 {"mean_qm", r.mean_qm},
                 {"mean_dbb", r.mean_dbb},
                 {"mean_dbb_error", r.mean_dbb_error},
                 {"normal", r.normal},
                 {"deviation_qm", r.deviation_qm},
                 {"deviation_dbb", r.deviation_dbb},
                 {"deviation_dbb_error", r.deviation_dbb_error}};
  return out;
}

ScenarioResult coexisting_paths(const json& c, unsigned) {
  ScenarioResult out;
  Table t{"coexisting_paths", {"witness_overlap", "phase", "detection_probability"}, {}};
  json runs = json::array();
  for (const auto& v : c.at("witness_overlaps")) {
    const std::optional<double> s = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    const auto r = coexisting_paths_check(s, count(c, "phase_points"));
    for (std::size_t k = 0; k < r.phases.size(); ++k) t.rows.push_back({v, r.phases[k], r.detection_probability[k]});
    runs.push_back({{"witness_overlap", v}, {"visibility", r.visibility}, {"max_interference_term", r.max_interference_term}});
  }
  out.tables.push_back(std::move(t));
  out.summary = {{"paths", runs}};
  return out;
}

// --- registry -----------------------------------------------------------------------

json hbt_geometry() {
  return {{"separation", 2.0}, {"wavelength", 1.0}, {"distance", 20.0},
          {"aperture", 0.02},  {"start_line", 5.0}, {"dt", 0.1}};
}

json correlation_defaults() {
  return {{"momentum_scale", 0.1}, {"bins", 40u}, {"q_max", 0.4}, {"multiplicity", 10u}, {"mix_partners", 10u}};
}

const std::vector<ScenarioEntry>& registry() {
  static const std::vector<ScenarioEntry> entries = [] {
    std::vector<ScenarioEntry> v;
    v.push_back({{"abl_demo", "two-state measurement rule",
                  "ABL outcome probabilities for a Haar-random pre-selection against the Born rule"},
                 {{"dimension", 4u}, {"trials", 1000u}},
                 {},
                 abl_demo});
    v.push_back({{"stern_gerlach", "Stern-Gerlach selection",
                  "Spin split and amplified into witnesses; the random final state selects the outcome"},
                 {{"runs", 10000u}, {"witness_count", 8u}, {"preparation", "x_plus"}, {"model", "joint"},
                  {"agent_angle", nullptr}},
                 {{"preparation", kPreparations}, {"model", {"joint", "product"}}},
                 stern_gerlach});
    v.push_back({{"decision_tree", "branching pathways",
                  "Binary decisions recorded in witnesses; pathway weights under a Haar post-selection"},
                 {{"decisions", 6u}},
                 {},
                 decision_tree});
    v.push_back({{"bidirectional", "bang and crunch boundaries",
                  "Forward and backward evolution matched at a border, with Haar overlap scaling"},
                 {{"witness_count", 4u},
                  {"preparation", "x_plus"},
                  {"agent_angle", nullptr},
                  {"overlap_log2_dims", {2u, 4u, 6u, 8u, 10u}},
                  {"overlap_seeds", 200u}},
                 {{"preparation", kPreparations}},
                 bidirectional});
    {
      json d = correlation_defaults();
      d.update(json{{"events", 10000u}, {"radius_fm", 5.0}, {"fit_q_max", 0.4}, {"tail_q_min", 0.3}});
      v.push_back({{"be_correlation", "Bose-Einstein correlations",
                    "Two-pion Q_inv correlation function of a Gaussian source with a Gaussian fit"},
                   d,
                   {},
                   be_correlation});
    }
    {
      json d = correlation_defaults();
      d.update(json{{"events", 20000u}, {"separation_fm", 1.0}, {"spot_fm", 0.5}, {"intercept_q_max", 0.1}});
      v.push_back({{"absorber_gedanken", "Bose-Einstein absorber",
                    "Two-halves source with and without an absorber recording the lower-half particle"},
                   d,
                   {},
                   absorber});
    }
    {
      json d = hbt_geometry();
      d.update(json{{"trials", 20000u}, {"delta", 0.0}, {"arrangement", "both"}});
      v.push_back({{"pilotwave_hbt", "guided photons in intensity interferometry",
                    "Guided-trajectory versus flux rates for two hot spots, baseline and moved telescope"},
                   d,
                   {{"arrangement", {"baseline", "moved_back_twice", "both"}}},
                   pilotwave_hbt});
    }
    {
      json d = hbt_geometry();
      d.update(json{{"trials", 32000u}, {"delta_lo", -0.5}, {"delta_hi", 0.5}, {"steps", 16u},
                    {"arrangement", "baseline"}});
      v.push_back({{"correspondence_average", "fringe averaging",
                    "Rates averaged over the path difference compared with the unsymmetrized rate"},
                   d,
                   {{"arrangement", {"baseline", "moved_back_twice"}}},
                   correspondence});
    }
    v.push_back({{"coexisting_paths", "two-path interferometer",
                  "Fringe visibility against the overlap of the which-path witness states"},
                 {{"witness_overlaps", {0.0, 0.5, 1.0}}, {"phase_points", 64u}},
                 {},
                 coexisting_paths});
    return v;
  }();
  return entries;
}

const ScenarioEntry& find_entry(const std::string& name) {
  for (const auto& s : registry())
    if (s.info.name == name) return s;
  throw ConfigError("scenario: unknown scenario '" + name + "'");
}

bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (def.is_number()) return v.is_number();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!def.empty() && !(same_kind(def.front(), e) || (def.front().is_number_float() && e.is_null())))
        return false;
    return true;
  }
  return def.type() == v.type();
}

// The value in the default's representation, so resolved configs re-resolve to themselves.
json normalized(const json& def, const json& v) {
  if (v.is_null()) return v;
  if (def.is_number_unsigned()) return v.get<std::uint64_t>();
  if (def.is_number_float() || (def.is_null() && v.is_number())) return v.get<double>();
  if (def.is_array() && !def.empty()) {
    json out = json::array();
    for (const auto& e : v) out.push_back(normalized(def.front(), e));
    return out;
  }
  return v;
}

std::string describe(const json& def) {
  if (def.is_null()) return "a number or null";
  if (def.is_number_unsigned()) return "a non-negative integer";
  if (def.is_number()) return "a number";
  if (def.is_array()) return "an array";
  if (def.is_boolean()) return "a boolean";
  return "a string";
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const std::vector<ScenarioInfo>& scenario_catalog() {
  static const std::vector<ScenarioInfo> catalog = [] {
    std::vector<ScenarioInfo> v;
    for (const auto& s : registry()) v.push_back(s.info);
    return v;
  }();
  return catalog;
}

json scenario_defaults(const std::string& scenario) { return find_entry(scenario).defaults; }

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

json resolve_config(const json& file, const ConfigOverrides& overrides, const std::string& default_out_dir) {
  if (!file.is_object()) throw ConfigError("config: top level must be an object");
  if (!file.contains("scenario") || !file.at("scenario").is_string())
    throw ConfigError("config: key 'scenario' is required and must be a string");
  const ScenarioEntry& entry = find_entry(file.at("scenario").get<std::string>());

  json out = entry.defaults;
  out["scenario"] = entry.info.name;
  out["seed"] = 1u;
  out["output"] = {{"dir", default_out_dir}, {"format", "csv"}};

  for (const auto& [key, value] : file.items()) {
    if (key == "scenario") continue;
    if (key == "output") {
      if (!value.is_object()) throw ConfigError("config: key 'output' must be an object");
      for (const auto& [k, v] : value.items()) {
        if (k != "dir" && k != "format") throw ConfigError("config: unknown key 'output." + k + "'");
        if (!v.is_string()) throw ConfigError("config: key 'output." + k + "' must be a string");
        out["output"][k] = v;
      }
      continue;
    }
    if (!out.contains(key)) throw ConfigError("config: unknown key '" + key + "' for scenario " + entry.info.name);
    if (!same_kind(out.at(key), value))
      throw ConfigError("config: key '" + key + "' must be " + describe(out.at(key)));
    out[key] = normalized(out.at(key), value);
  }
  if (overrides.seed) out["seed"] = *overrides.seed;
  if (overrides.out_dir) out["output"]["dir"] = *overrides.out_dir;
  if (overrides.format) out["output"]["format"] = *overrides.format;

  const std::string format = out["output"]["format"].get<std::string>();
  if (format != "csv" && format != "json") throw ConfigError("config: key 'output.format' must be csv or json");
  for (const auto& [key, allowed] : entry.choices) {
    const std::string v = out.at(key).get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
      throw ConfigError("config: key '" + key + "' has unsupported value '" + v + "'");
  }
  return out;
}

void Table::write_csv(std::ostream& os) const {
  for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << columns[k];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) os << ',';
      const json& v = row[k];
      if (v.is_string()) os << v.get<std::string>();
      else if (!v.is_null()) os << v.dump();
    }
    os << '\n';
  }
}

json Table::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) rows_json.push_back(row);
  return {{"columns", columns}, {"rows", rows_json}};
}

ScenarioResult run_scenario(const json& config, unsigned workers) {
  const ScenarioEntry& entry = find_entry(config.at("scenario").get<std::string>());
  try {
    return entry.run(config, std::max(1u, workers));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json run(const json& config, unsigned workers) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioResult result = run_scenario(config, workers);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string name = config.at("scenario").get<std::string>();
  const std::filesystem::path dir = config.at("output").at("dir").get<std::string>();
  const bool csv = config.at("output").at("format") == "csv";
  std::filesystem::create_directories(dir);

  json record = {{"schema_version", kRunSchemaVersion},
                 {"artifact_version", TSVSIM_VERSION},
                 {"config", config},
                 {"outputs", result.summary},
                 {"provenance",
                  {{"seed", config.at("seed")}, {"version", TSVSIM_VERSION}, {"timestamp", utc_timestamp()},
                   {"workers", std::max(1u, workers)}}},
                 {"wall_time_s", wall}};
  json files = json::array();
  json tables = json::object();
  for (std::size_t k = 0; k < result.tables.size(); ++k) {
    const Table& t = result.tables[k];
    if (!csv) {
      tables[t.name] = t.to_json();
      continue;
    }
    const std::string file = (k == 0 ? name : name + "_" + t.name) + ".csv";
    std::ofstream os(dir / file);
    t.write_csv(os);
    if (!os) throw std::runtime_error("cannot write " + (dir / file).string());
    files.push_back(file);
  }
  if (csv) record["files"] = files;
  else record["tables"] = tables;

  std::ofstream os(dir / (name + ".json"));
  os << record.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + (dir / (name + ".json")).string());
  return record;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const RangeError*>(&e) ||
      dynamic_cast<const CapacityError*>(&e))
    return 2;
  if (dynamic_cast<const IncompatibleBoundaryError*>(&e)) return 3;
  if (dynamic_cast<const ContractViolation*>(&e) || dynamic_cast<const NodeError*>(&e)) return 4;
  return 1;
}

}  // namespace tsvsim
