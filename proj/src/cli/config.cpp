#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "alignmeter/error.hpp"

namespace alignmeter::cli {
namespace {

const std::set<std::string> kKnownKeys{
    "seed",      "ratings",     "outcomes",      "metadata",        "ratings_schema", "outcome_schema",
    "aggregation", "outcome",   "raters",        "tasks",           "human_reference", "experience_column",
    "reliability", "ensembles", "permutations",  "bootstrap",       "chains",         "iters",
    "warmup",    "level",       "alpha",         "decompose",       "preset",         "out",
    "threads"};

[[noreturn]] void bad(const std::string& what) { throw InputError("config: " + what); }

template <typename T>
T get(const Json& j, const char* key, const char* type_name) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string("'") + key + "' must be " + type_name);
  }
}

std::size_t get_count(const Json& j, const char* key, std::size_t min) {
  if (!j.at(key).is_number_integer()) bad(std::string("'") + key + "' must be an integer");
  const auto v = j.at(key).get<long long>();
  if (v < static_cast<long long>(min)) bad(std::string("'") + key + "' must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

std::vector<std::string> get_strings(const Json& j, const char* key) {
  if (!j.at(key).is_array()) bad(std::string("'") + key + "' must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_string()) bad(std::string("'") + key + "' must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

char get_delimiter(const Json& j) {
  const auto s = get<std::string>(j, "delimiter", "a one-character string");
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) bad("'delimiter' must be a single character");
  return s[0];
}

}  // namespace

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string AnalysisConfig::hash() const {
  Json canonical = effective;
  canonical.erase("out");
  canonical.erase("threads");
  return fnv1a_hex(canonical.dump());
}

std::filesystem::path AnalysisConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

AnalysisConfig load_config(const std::optional<std::filesystem::path>& file, const Json& overrides) {
  AnalysisConfig cfg;
  Json j = Json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw InputError("cannot open config '" + file->string() + "'");
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("config '" + file->string() + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw InputError("config '" + file->string() + "' must be a JSON object");
    cfg.base_dir = file->parent_path();
  }
  for (const auto& [key, value] : overrides.items()) j[key] = value;
  for (const auto& [key, value] : j.items()) {
    if (!kKnownKeys.contains(key)) bad("unknown key '" + key + "'");
  }
  cfg.effective = j;

  if (!j.contains("seed")) bad("a seed is required (config 'seed' or --seed)");
  if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
    bad("'seed' must be a nonnegative integer");
  }
  cfg.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("ratings")) cfg.ratings = cfg.resolve(get<std::string>(j, "ratings", "a path"));
  if (j.contains("outcomes")) cfg.outcomes = cfg.resolve(get<std::string>(j, "outcomes", "a path"));
  if (j.contains("metadata")) cfg.metadata = cfg.resolve(get<std::string>(j, "metadata", "a path"));

  if (j.contains("ratings_schema")) {
    const auto& s = j["ratings_schema"];
    if (!s.is_object()) bad("'ratings_schema' must be an object");
    for (const auto& [key, value] : s.items()) {
      if (key == "delimiter") {
        cfg.ratings_schema.delimiter = get_delimiter(s);
      } else if (key == "bounds") {
        if (!value.is_object()) bad("'ratings_schema.bounds' must map task ids to [min, max]");
        for (const auto& [task, b] : value.items()) {
          if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
            bad("bounds for task '" + task + "' must be [min, max]");
          }
          cfg.ratings_schema.bounds[task] = {b[0].get<double>(), b[1].get<double>()};
        }
      } else {
        const auto col = get<std::string>(s, key.c_str(), "a column name");
        if (key == "rater_id") cfg.ratings_schema.rater_id = col;
        else if (key == "rater_family") cfg.ratings_schema.rater_family = col;
        else if (key == "task_id") cfg.ratings_schema.task_id = col;
        else if (key == "unit_id") cfg.ratings_schema.unit_id = col;
        else if (key == "prompt_id") cfg.ratings_schema.prompt_id = col;
        else if (key == "score") cfg.ratings_schema.score = col;
        else bad("unknown ratings_schema key '" + key + "'");
      }
    }
  }
  if (j.contains("outcome_schema")) {
    const auto& s = j["outcome_schema"];
    if (!s.is_object()) bad("'outcome_schema' must be an object");
    for (const auto& [key, value] : s.items()) {
      if (key == "delimiter") {
        cfg.outcome_schema.delimiter = get_delimiter(s);
        continue;
      }
      const auto col = get<std::string>(s, key.c_str(), "a column name");
      if (key == "unit_id") cfg.outcome_schema.unit_id = col;
      else if (key == "outcome_id") cfg.outcome_schema.outcome_id = col;
      else if (key == "value") cfg.outcome_schema.value = col;
      else if (key == "year") cfg.outcome_schema.year = col;
      else bad("unknown outcome_schema key '" + key + "'");
    }
  }
  if (j.contains("aggregation")) {
    const auto& a = j["aggregation"];
    if (!a.is_object() || !a.contains("file")) bad("'aggregation' needs a 'file'");
    AggregationConfig ag;
    ag.file = cfg.resolve(get<std::string>(a, "file", "a path"));
    if (a.contains("unit_column")) ag.unit_column = get<std::string>(a, "unit_column", "a column name");
    if (a.contains("group_column")) ag.group_column = get<std::string>(a, "group_column", "a column name");
    cfg.aggregation = ag;
  }

  if (j.contains("outcome")) cfg.outcome = get<std::string>(j, "outcome", "an outcome id");
  if (j.contains("raters")) cfg.raters = get_strings(j, "raters");
  if (j.contains("tasks")) cfg.tasks = get_strings(j, "tasks");
  if (j.contains("human_reference")) cfg.human_reference = get_strings(j, "human_reference");
  if (j.contains("experience_column")) {
    cfg.experience_column = get<std::string>(j, "experience_column", "a column name");
  }
  if (j.contains("reliability")) {
    const auto& r = j["reliability"];
    if (!r.is_object() || !r.contains("variant_a") || !r.contains("variant_b")) {
      bad("'reliability' needs 'variant_a' and 'variant_b'");
    }
    ReliabilityConfig rc;
    rc.variant_a = get<std::string>(r, "variant_a", "an outcome id");
    rc.variant_b = get<std::string>(r, "variant_b", "an outcome id");
    if (r.contains("scope")) {
      const auto scope = parse_reliability_scope(get<std::string>(r, "scope", "a string"));
      if (!scope) bad("reliability scope must be 'pooled' or 'within_year'");
      rc.scope = *scope;
    }
    if (r.contains("greiner")) rc.greiner = get<bool>(r, "greiner", "a boolean");
    cfg.reliability = rc;
  }
  if (j.contains("ensembles")) {
    if (!j["ensembles"].is_array()) bad("'ensembles' must be a list");
    std::set<std::string> names;
    for (const auto& e : j["ensembles"]) {
      if (!e.is_object() || !e.contains("name") || !e.contains("members")) {
        bad("each ensemble needs 'name' and 'members'");
      }
      EnsembleSpec spec;
      spec.name = get<std::string>(e, "name", "a string");
      if (!names.insert(spec.name).second) bad("duplicate ensemble name '" + spec.name + "'");
      for (const auto& m : get_strings(e, "members")) spec.members.push_back(parse_source_key(m));
      if (spec.members.size() < 2) bad("ensemble '" + spec.name + "' needs at least 2 members");
      if (e.contains("rule")) {
        const auto rule = parse_ensemble_rule(get<std::string>(e, "rule", "a string"));
        if (!rule) bad("ensemble rule must be 'weighted' or 'unanimous'");
        spec.rule = *rule;
      }
      if (e.contains("weights")) {
        if (!e["weights"].is_array()) bad("ensemble weights must be a list of numbers");
        for (const auto& w : e["weights"]) {
          if (!w.is_number()) bad("ensemble weights must be a list of numbers");
          spec.weights.push_back(w.get<double>());
        }
        if (spec.weights.size() != spec.members.size()) bad("ensemble '" + spec.name + "' needs one weight per member");
        double total = 0.0;
        for (double w : spec.weights) {
          if (w < 0.0) bad("ensemble '" + spec.name + "' has a negative weight");
          total += w;
        }
        if (!(total > 0.0)) bad("ensemble '" + spec.name + "' weights sum to zero");
      }
      cfg.ensembles.push_back(std::move(spec));
    }
  }

  if (j.contains("permutations")) cfg.permutations = get_count(j, "permutations", 1);
  if (j.contains("bootstrap")) cfg.bootstrap = get_count(j, "bootstrap", 1);
  if (j.contains("chains")) cfg.chains = get_count(j, "chains", 1);
  if (j.contains("iters")) cfg.iters = get_count(j, "iters", 8);
  cfg.warmup = j.contains("warmup") ? get_count(j, "warmup", 0) : cfg.iters / 2;
  if (cfg.warmup + 4 > cfg.iters) bad("'warmup' must leave at least 4 iterations");
  if (j.contains("level")) {
    cfg.level = get<double>(j, "level", "a number");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) bad("'level' must lie in (0, 1)");
  }
  if (j.contains("alpha")) {
    const double a = get<double>(j, "alpha", "a number");
    if (!(a > 0.0 && a < 1.0)) bad("'alpha' must lie in (0, 1)");
    cfg.alpha = a;
  }
  if (j.contains("decompose")) {
    const auto& d = j["decompose"];
    if (!d.is_object()) bad("'decompose' must be an object");
    for (const auto& [key, value] : d.items()) {
      if (key == "fit_scope") {
        const auto scope = parse_fit_scope(get<std::string>(d, "fit_scope", "a string"));
        if (!scope) bad("fit_scope must be 'per_item' or 'per_item_model_prompt'");
        cfg.fit_scope = *scope;
      } else if (key == "erho_denominator") {
        for (const auto& t : get_strings(d, "erho_denominator")) {
          const auto mask = parse_term(t);
          if (!mask) bad("unknown term '" + t + "' in erho_denominator");
          cfg.erho_denominator.push_back(*mask);
        }
      } else if (key == "dump_draws") {
        cfg.dump_draws = get<bool>(d, "dump_draws", "a boolean");
      } else if (key == "allow_unconverged") {
        cfg.allow_unconverged = get<bool>(d, "allow_unconverged", "a boolean");
      } else if (key == "rhat_threshold") {
        cfg.rhat_threshold = get<double>(d, "rhat_threshold", "a number");
        if (!(cfg.rhat_threshold > 1.0)) bad("'rhat_threshold' must exceed 1");
      } else {
        bad("unknown decompose key '" + key + "'");
      }
    }
  }
  if (j.contains("preset")) cfg.preset = get<std::string>(j, "preset", "a preset name");
  if (j.contains("out")) cfg.out = get<std::string>(j, "out", "a path");
  return cfg;
}

}  // namespace alignmeter::cli
