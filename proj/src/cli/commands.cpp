#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "alignmeter/attenuation.hpp"
#include "alignmeter/concordance.hpp"
#include "alignmeter/csv.hpp"
#include "alignmeter/dependence.hpp"
#include "alignmeter/ensembles.hpp"
#include "alignmeter/random.hpp"
#include "alignmeter/robust_slopes.hpp"
#include "alignmeter/synthetic.hpp"
#include "alignmeter/variance_decomposition.hpp"
#include "report.hpp"

namespace alignmeter::cli {
namespace {

// ---- input plumbing ------------------------------------------------------------

std::map<std::string, std::string> load_group_map(const AggregationConfig& ag) {
  std::ifstream in(ag.file);
  if (!in) throw InputError("cannot open aggregation map '" + ag.file.string() + "'");
  const auto rows = csv::read(in);
  if (rows.empty()) throw InputError("aggregation map '" + ag.file.string() + "' is empty");
  const auto& header = rows.front().fields;
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError("aggregation map lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t uc = col(ag.unit_column), gc = col(ag.group_column);
  std::map<std::string, std::string> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& f = rows[k].fields;
    if (f.size() != header.size()) {
      throw InputError("aggregation map row " + std::to_string(rows[k].line) + " has the wrong number of fields");
    }
    out[f[uc]] = f[gc];
  }
  return out;
}

bool is_reference_human(const AnalysisConfig& cfg, const std::string& rater) {
  return cfg.human_reference.empty() ||
         std::find(cfg.human_reference.begin(), cfg.human_reference.end(), rater) != cfg.human_reference.end();
}

RatingsTable load_ratings_for(const AnalysisConfig& cfg) {
  if (!cfg.ratings) throw InputError("config: 'ratings' is required for this command");
  RatingsTable table = load_ratings(*cfg.ratings, cfg.ratings_schema);
  if (cfg.aggregation) table = aggregate_ratings(table, load_group_map(*cfg.aggregation));

  std::vector<SourceKey> keep;
  for (const auto& r : cfg.raters) {
    auto key = parse_source_key(r);
    if (!table.has_rater(key.rater_id)) throw InputError("unknown rater '" + r + "'");
    keep.push_back(std::move(key));
  }
  const auto tasks = table.tasks();
  for (const auto& t : cfg.tasks) {
    if (std::find(tasks.begin(), tasks.end(), t) == tasks.end()) throw InputError("unknown task '" + t + "'");
  }
  for (const auto& h : cfg.human_reference) {
    if (table.family_of(h) != RaterFamily::human) throw InputError("'" + h + "' is not a human rater");
  }
  if (keep.empty() && cfg.tasks.empty() && cfg.human_reference.empty()) return table;

  std::vector<RatingRecord> records;
  for (const auto& r : table.records()) {
    if (!cfg.tasks.empty() && std::find(cfg.tasks.begin(), cfg.tasks.end(), r.task_id) == cfg.tasks.end()) continue;
    if (r.rater_family == RaterFamily::human) {
      if (!is_reference_human(cfg, r.rater_id)) continue;
    } else if (!keep.empty()) {
      const bool match = std::any_of(keep.begin(), keep.end(), [&](const SourceKey& k) {
        return k.rater_id == r.rater_id && (!k.prompt_id || k.prompt_id == r.prompt_id);
      });
      if (!match) continue;
    }
    records.push_back(r);
  }
  return RatingsTable(std::move(records), table.scale_bounds());
}

OutcomeTable load_outcomes_for(const AnalysisConfig& cfg) {
  if (!cfg.outcomes) throw InputError("config: 'outcomes' is required for this command");
  return load_outcomes(*cfg.outcomes, cfg.outcome_schema);
}

std::string resolve_outcome(const AnalysisConfig& cfg, const OutcomeTable& outcomes) {
  if (cfg.outcome) {
    if (!outcomes.has_outcome(*cfg.outcome)) throw InputError("unknown outcome '" + *cfg.outcome + "'");
    return *cfg.outcome;
  }
  const auto ids = outcomes.outcome_ids();
  if (ids.size() != 1) throw InputError("config: 'outcome' must name one of several outcome ids");
  return ids.front();
}

std::optional<UnitValues> load_experience(const AnalysisConfig& cfg) {
  if (!cfg.experience_column) return std::nullopt;
  if (!cfg.metadata) throw InputError("config: 'experience_column' needs a 'metadata' file");
  return load_unit_metadata(*cfg.metadata, *cfg.experience_column);
}

std::string source_label(const SourceKey& key) { return key.label(); }

Json to_json(const SourceKey& key) {
  Json j;
  j["rater_id"] = key.rater_id;
  j["prompt_id"] = key.prompt_id ? Json(*key.prompt_id) : Json(nullptr);
  return j;
}

/// Runs `fn`, re-raising module failures with the analysis id attached.
template <typename Fn>
auto with_context(const std::string& id, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError&) {
    throw;
  } catch (const AnalysisError& e) {
    throw AnalysisError(id + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw AnalysisError(id + ": " + e.what());
  }
}

struct TauCell {
  std::size_t n = 0;
  std::optional<TauResult> result;
};

TauCell tau_cell(const UnitScores& a, const UnitScores& b, double level) {
  TauCell c;
  JoinedPanel panel;
  try {
    panel = join_values(a, b);
  } catch (const std::invalid_argument&) {
    return c;
  }
  c.n = panel.n();
  try {
    c.result = kendall_tau(panel.x, panel.y, level);
  } catch (const std::invalid_argument&) {
  }
  return c;
}

std::vector<std::string> tau_columns(const TauCell& c) {
  if (!c.result) return {std::to_string(c.n), "NA", "NA", "NA"};
  const auto& r = *c.result;
  return {std::to_string(c.n), num(r.tau), r.ci ? num(r.ci->low) : "NA", r.ci ? num(r.ci->high) : "NA"};
}

Json tau_json(const TauCell& c) {
  Json j;
  j["n"] = c.n;
  if (!c.result) {
    j["tau"] = nullptr;
    j["ci"] = nullptr;
    return j;
  }
  j["tau"] = jnum(c.result->tau);
  j["ci"] = c.result->ci ? Json::array({jnum(c.result->ci->low), jnum(c.result->ci->high)}) : Json(nullptr);
  j["ci_clamped"] = c.result->ci_clamped;
  return j;
}

// Mean score of the reference human raters per unit on a task.
UnitScores human_reference_scores(const RatingsTable& ratings, const std::string& task, const AnalysisConfig& cfg) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& key : ratings.sources_for_task(task)) {
    if (ratings.family_of(key.rater_id) != RaterFamily::human || !is_reference_human(cfg, key.rater_id)) continue;
    for (const auto& [u, s] : ratings.scores(key, task)) {
      acc[u].first += s;
      acc[u].second += 1;
    }
  }
  UnitScores out;
  for (const auto& [u, v] : acc) out[u] = v.first / v.second;
  return out;
}

struct SourceTable {
  const RatingsTable* table;
  SourceKey key;
  RaterFamily family;
  std::string task;
};

std::vector<SourceTable> enumerate_sources(const std::vector<const RatingsTable*>& tables) {
  std::vector<SourceTable> out;
  for (const auto* t : tables) {
    for (const auto& task : t->tasks()) {
      for (const auto& key : t->sources_for_task(task)) {
        out.push_back({t, key, *t->family_of(key.rater_id), task});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const SourceTable& a, const SourceTable& b) {
    return std::tie(a.task, a.key) < std::tie(b.task, b.key);
  });
  return out;
}

std::vector<RatingsTable> build_ensembles(const AnalysisConfig& cfg, const RatingsTable& ratings) {
  std::vector<RatingsTable> out;
  for (const auto& spec : cfg.ensembles) {
    out.push_back(with_context("ensemble " + spec.name, [&] { return build_ensemble(ratings, spec).table; }));
  }
  return out;
}

}  // namespace

// ---- align ---------------------------------------------------------------------

Written cmd_align(const AnalysisConfig& cfg) {
  const auto ratings = load_ratings_for(cfg);
  const auto outcomes = load_outcomes_for(cfg);
  const auto outcome = resolve_outcome(cfg, outcomes);
  const auto y = outcomes.values(outcome);

  const auto ensembles = build_ensembles(cfg, ratings);
  std::optional<RatingsTable> baseline;
  if (const auto exp = load_experience(cfg)) {
    baseline = with_context("baseline", [&] { return baseline_ratings(BaselineKind::experience, *exp, ratings.tasks()); });
  }
  std::vector<const RatingsTable*> tables{&ratings};
  for (const auto& e : ensembles) tables.push_back(&e);
  if (baseline) tables.push_back(&*baseline);

  std::optional<ReliabilityEstimate> reliability;
  if (cfg.reliability) {
    reliability = with_context("reliability", [&] {
      return stacked_reliability(outcomes, cfg.reliability->variant_a, cfg.reliability->variant_b,
                                 cfg.reliability->scope);
    });
  }

  std::map<std::string, UnitScores> human_x;
  for (const auto& task : ratings.tasks()) human_x[task] = human_reference_scores(ratings, task, cfg);

  std::vector<std::vector<std::string>> rows;
  Json jrows = Json::array();
  for (const auto& s : enumerate_sources(tables)) {
    const auto scores = s.table->scores(s.key, s.task);
    TauCell cx;
    if (s.family != RaterFamily::human) cx = tau_cell(scores, human_x[s.task], cfg.level);
    const TauCell cy = tau_cell(scores, y, cfg.level);
    std::optional<double> corrected;
    if (reliability && cy.result) {
      corrected = correct_alignment(cy.result->tau, reliability->value, cfg.reliability->greiner).tau_corrected;
    }
    std::vector<std::string> row{source_label(s.key), std::string(to_string(s.family)), s.task, num(cfg.level)};
    for (auto& v : tau_columns(cx)) row.push_back(std::move(v));
    for (auto& v : tau_columns(cy)) row.push_back(std::move(v));
    row.push_back(num(corrected));
    rows.push_back(std::move(row));

    Json jr;
    jr["source"] = to_json(s.key);
    jr["family"] = to_string(s.family);
    jr["task"] = s.task;
    jr["human"] = tau_json(cx);
    jr["outcome"] = tau_json(cy);
    jr["outcome_disattenuated"] = jnum(corrected);
    jrows.push_back(std::move(jr));
  }

  ReportWriter w(cfg, "align");
  w.write_csv("align_scatter.csv",
              {"source", "family", "task", "level", "n_human", "tau_human", "ci_human_low", "ci_human_high",
               "n_outcome", "tau_outcome", "ci_outcome_low", "ci_outcome_high", "tau_outcome_disattenuated"},
              rows);
  Json body;
  body["parameters"]["level"] = cfg.level;
  body["parameters"]["ci_method"] = "fieller";
  body["parameters"]["outcome"] = outcome;
  body["parameters"]["human_reference"] = cfg.human_reference;
  if (reliability) {
    Json r;
    r["variant_a"] = cfg.reliability->variant_a;
    r["variant_b"] = cfg.reliability->variant_b;
    r["scope"] = to_string(reliability->scope);
    r["greiner"] = cfg.reliability->greiner;
    r["value"] = jnum(reliability->value);
    r["n"] = reliability->n;
    r["usable"] = reliability->usable;
    for (const auto& [year, v] : reliability->per_year) r["per_year"][std::to_string(year)] = jnum(v);
    body["parameters"]["reliability"] = r;
  } else {
    body["parameters"]["reliability"] = nullptr;
  }
  body["rows"] = jrows;
  w.write_json("align.json", body);
  return w.written();
}

// ---- dcor ----------------------------------------------------------------------

Written cmd_dcor(const AnalysisConfig& cfg) {
  const auto ratings = load_ratings_for(cfg);
  const auto sources = source_tasks(ratings);
  if (sources.size() < 2) throw InputError("dcor needs at least two (rater, task) columns");
  const auto matrix = with_context("dcor", [&] {
    return pairwise_dependence(ratings, sources, cfg.permutations, derive_seed(cfg.seed, "dcor"));
  });
  const std::size_t k = matrix.size();

  std::vector<std::string> labels;
  for (const auto& s : sources) labels.push_back(s.label());
  std::vector<double> dissim(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double d = matrix.dcor(i, j);
      dissim[i * k + j] = std::isnan(d) ? 1.0 : 1.0 - d;
    }
  }
  const auto tree = complete_linkage_cluster(dissim, labels);
  const auto& order = tree.leaf_order;

  std::optional<std::vector<bool>> significant;
  std::vector<std::pair<std::size_t, std::size_t>> tested;
  if (cfg.alpha) {
    std::vector<double> ps;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        if (!std::isnan(matrix.p_value(i, j))) {
          ps.push_back(matrix.p_value(i, j));
          tested.emplace_back(i, j);
        }
      }
    }
    if (!ps.empty()) significant = bonferroni(ps, *cfg.alpha);
  }
  std::vector<int> sig_matrix(k * k, -1);
  if (significant) {
    for (std::size_t t = 0; t < tested.size(); ++t) {
      const auto [i, j] = tested[t];
      sig_matrix[i * k + j] = sig_matrix[j * k + i] = (*significant)[t] ? 1 : 0;
    }
  }

  auto matrix_rows = [&](auto cell) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t a : order) {
      std::vector<std::string> row{labels[a]};
      for (std::size_t b : order) row.push_back(cell(a, b));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  std::vector<std::string> header{"source"};
  for (std::size_t b : order) header.push_back(labels[b]);

  ReportWriter w(cfg, "dcor");
  w.write_csv("dcor_matrix.csv", header, matrix_rows([&](std::size_t a, std::size_t b) { return num(matrix.dcor(a, b)); }));
  w.write_csv("dcor_pvalues.csv", header,
              matrix_rows([&](std::size_t a, std::size_t b) { return num(matrix.p_value(a, b)); }));
  if (significant) {
    w.write_csv("dcor_significant.csv", header, matrix_rows([&](std::size_t a, std::size_t b) {
                  const int s = sig_matrix[a * k + b];
                  return s < 0 ? std::string("NA") : std::to_string(s);
                }));
  }

  Json dendro;
  dendro["labels"] = labels;
  dendro["leaf_order"] = order;
  dendro["linkage"] = "complete";
  dendro["dissimilarity"] = "1 - dcor2 (uncomputable pairs set to 1)";
  Json merges = Json::array();
  for (const auto& m : tree.merges) {
    merges.push_back({{"left", m.left}, {"right", m.right}, {"height", jnum(m.height)}, {"size", m.size}});
  }
  dendro["merges"] = merges;
  w.write_json("dcor_dendrogram.json", dendro);

  const auto summary = with_context("dcor summary", [&] { return dependence_summary(matrix); });
  Json cells = Json::array();
  for (const auto& c : summary.cells) {
    Json jc;
    jc["scope"] = to_string(c.scope);
    jc["relation"] = to_string(c.relation);
    jc["pairs"] = c.pairs;
    switch (c.status) {
      case SummaryCell::Status::present:
        jc["status"] = "present";
        jc["mean"] = jnum(c.stats.mean);
        jc["se_z"] = jnum(c.stats.se_z);
        jc["lower"] = jnum(c.stats.lower);
        jc["upper"] = jnum(c.stats.upper);
        break;
      case SummaryCell::Status::absent:
        jc["status"] = "absent";
        break;
      case SummaryCell::Status::redundant:
        jc["status"] = "redundant";
        break;
    }
    cells.push_back(std::move(jc));
  }
  Json body;
  body["parameters"]["permutations"] = cfg.permutations;
  body["parameters"]["alpha"] = cfg.alpha ? Json(*cfg.alpha) : Json(nullptr);
  body["parameters"]["correction"] = cfg.alpha ? Json("bonferroni") : Json(nullptr);
  body["parameters"]["tests"] = tested.size();
  body["cells"] = cells;
  body["skipped_pairs"] = summary.skipped_pairs;
  body["clamped_values"] = summary.clamped;
  w.write_json("dcor_summary.json", body);
  return w.written();
}

// ---- robust --------------------------------------------------------------------

Written cmd_robust(const AnalysisConfig& cfg) {
  const auto ratings = load_ratings_for(cfg);
  const auto outcomes = load_outcomes_for(cfg);
  const auto outcome = resolve_outcome(cfg, outcomes);
  const auto y = outcomes.values(outcome);
  const auto experience = load_experience(cfg);
  const auto ensembles = build_ensembles(cfg, ratings);
  std::vector<const RatingsTable*> tables{&ratings};
  for (const auto& e : ensembles) tables.push_back(&e);

  BatteryConfig base;
  base.ci_level = 0.80;
  base.permutations = cfg.permutations;
  base.bootstrap = cfg.bootstrap;

  std::vector<std::string> header{"source", "family", "task", "n"};
  std::vector<std::vector<std::string>> rows;
  Json jrows = Json::array();
  bool header_done = false;
  for (const auto& s : enumerate_sources(tables)) {
    if (s.family == RaterFamily::baseline) continue;
    const std::string id = "robust " + source_label(s.key) + " on " + s.task;
    const auto panel = with_context(id, [&] { return join_values(s.table->scores(s.key, s.task), y); });
    std::vector<double> base_values;
    std::string baseline_note;
    if (experience) {
      for (const auto& u : panel.units) {
        const auto it = experience->find(u);
        if (it == experience->end()) {
          base_values.clear();
          baseline_note = "experience missing for unit " + u;
          break;
        }
        base_values.push_back(it->second);
      }
    }
    BatteryConfig bc = base;
    bc.seed = derive_seed(cfg.seed, id);
    const auto report = with_context(id, [&] { return robustness_battery(panel.x, panel.y, base_values, bc); });

    if (!header_done) {
      for (const auto& t : report.tests) header.push_back(t.column);
      header.push_back("pass_rate");
      header_done = true;
    }
    std::vector<std::string> row{source_label(s.key), std::string(to_string(s.family)), s.task,
                                 std::to_string(report.n)};
    for (std::size_t t = 0; t < report.tests.size(); ++t) row.push_back(report.cell(t));
    row.push_back(report.pass_cell());
    rows.push_back(std::move(row));

    Json jr;
    jr["source"] = to_json(s.key);
    jr["family"] = to_string(s.family);
    jr["task"] = s.task;
    jr["n"] = report.n;
    jr["passed"] = report.passed;
    jr["run"] = report.run;
    jr["pass_rate"] = jnum(report.pass_rate);
    Json tests = Json::array();
    for (const auto& t : report.tests) {
      Json jt;
      jt["name"] = t.name;
      jt["statistic"] = jnum(t.statistic);
      jt["p"] = jnum(t.p);
      jt["status"] = t.status == TestStatus::passed ? "passed" : t.status == TestStatus::failed ? "failed" : "not_run";
      jt["detail"] = t.name == "tau_vs_experience" && !baseline_note.empty() ? baseline_note : t.detail;
      tests.push_back(std::move(jt));
    }
    jr["tests"] = tests;
    jrows.push_back(std::move(jr));
  }
  if (rows.empty()) throw InputError("robust: no rating source overlaps the outcome");

  ReportWriter w(cfg, "robust");
  w.write_csv("robustness.csv", header, rows);
  Json body;
  body["parameters"]["outcome"] = outcome;
  body["parameters"]["lower_ci_level"] = base.ci_level;
  body["parameters"]["null_level"] = base.null_level;
  body["parameters"]["permutations"] = cfg.permutations;
  body["parameters"]["bootstrap"] = cfg.bootstrap;
  body["parameters"]["experience_column"] = cfg.experience_column ? Json(*cfg.experience_column) : Json(nullptr);
  body["footnotes"] = Json::array(
      {"tau>rand passes when the observed tau exceeds the 95% quantile of its permutation null; published tables "
       "are ambiguous about this rule and show negative statistics marked as passing.",
       "q4>q1 stars: * p<.10, ** p<.05, *** p<.01 (one-sided bootstrap).",
       "Tests that could not run are excluded from the pass-rate denominator."});
  body["rows"] = jrows;
  w.write_json("robustness.json", body);
  return w.written();
}

// ---- ensemble ------------------------------------------------------------------

Written cmd_ensemble(const AnalysisConfig& cfg) {
  if (cfg.ensembles.empty()) throw InputError("config: 'ensembles' is empty");
  const auto ratings = load_ratings_for(cfg);
  const auto outcomes = load_outcomes_for(cfg);
  const auto outcome = resolve_outcome(cfg, outcomes);
  const auto y = outcomes.values(outcome);

  ReportWriter w(cfg, "ensemble");
  Json jens = Json::array();
  for (const auto& spec : cfg.ensembles) {
    const std::string id = "ensemble " + spec.name;
    const auto result = with_context(id, [&] { return build_ensemble(ratings, spec); });
    std::ostringstream table;
    write_ratings(table, result.table);
    w.write_text("ensemble_" + spec.name + ".csv", table.str());

    Json je;
    je["name"] = spec.name;
    je["rule"] = to_string(spec.rule);
    Json members = Json::array();
    for (const auto& m : spec.members) members.push_back(m.label());
    je["members"] = members;
    je["weights"] = spec.weights;
    je["coverage"] = jnum(result.coverage);
    je["empty"] = result.empty;
    Json tasks = Json::array();
    for (const auto& [task, combined] : result.per_task) {
      std::vector<UnitScores> member_scores;
      for (const auto& m : spec.members) member_scores.push_back(ratings.scores(m, task));
      const auto cmp = with_context(id + " on " + task, [&] {
        return ensemble_alignment_compare(combined.scores, member_scores, y, cfg.bootstrap,
                                          derive_seed(cfg.seed, id + "/" + task), cfg.level);
      });
      Json jt;
      jt["task"] = task;
      jt["units_total"] = combined.units_total;
      jt["units_retained"] = combined.scores.size();
      jt["units_dropped"] = combined.dropped;
      jt["coverage"] = jnum(combined.coverage);
      jt["n"] = cmp.n;
      jt["powered"] = cmp.powered;
      jt["tau_ensemble"] = jnum(cmp.tau_ensemble);
      Json mt;
      for (std::size_t k = 0; k < spec.members.size(); ++k) mt[spec.members[k].label()] = jnum(cmp.member_taus[k]);
      jt["member_taus"] = mt;
      jt["tau_member_median"] = jnum(cmp.tau_member_median);
      jt["tau_member_mean"] = jnum(cmp.tau_member_mean);
      jt["delta_vs_median"] = jnum(cmp.delta);
      jt["delta_vs_mean"] = jnum(cmp.delta_mean);
      jt["p_two_sided"] = jnum(cmp.p);
      jt["ci"] = Json::array({jnum(cmp.ci_low), jnum(cmp.ci_high)});
      jt["bootstrap_used"] = cmp.bootstrap_used;
      if (!cmp.powered) jt["note"] = "fewer than 8 ensemble units with an outcome: comparison unpowered";
      tasks.push_back(std::move(jt));
    }
    je["tasks"] = tasks;
    jens.push_back(std::move(je));
  }
  Json body;
  body["parameters"]["outcome"] = outcome;
  body["parameters"]["bootstrap"] = cfg.bootstrap;
  body["parameters"]["level"] = cfg.level;
  body["ensembles"] = jens;
  w.write_json("ensemble.json", body);
  return w.written();
}

// ---- decompose -----------------------------------------------------------------

Written cmd_decompose(const AnalysisConfig& cfg) {
  const auto ratings = load_ratings_for(cfg);
  const auto outcomes = load_outcomes_for(cfg);
  const auto outcome = resolve_outcome(cfg, outcomes);
  const auto residuals =
      with_context("residualize", [&] { return misalignment_residuals(ratings, outcomes, outcome, cfg.fit_scope); });
  const auto& panel = residuals.panel;

  std::optional<VarianceComponents> ems;
  std::string ems_note;
  if (is_balanced(panel)) {
    ems = with_context("ems", [&] { return ems_components(panel); });
  } else {
    ems_note = "design is not balanced with one observation per cell; EMS skipped";
  }

  BayesConfig bc;
  bc.chains = cfg.chains;
  bc.iters = cfg.iters;
  bc.warmup = cfg.warmup;
  bc.seed = derive_seed(cfg.seed, "decompose/sampler");
  bc.rhat_threshold = cfg.rhat_threshold;
  bc.allow_unconverged = cfg.allow_unconverged;
  const auto posterior = with_context("sampler", [&] { return bayes_components(panel, bc); });

  ShareOptions opts;
  opts.residual = posterior.terms.back().term;
  opts.erho_denominator = cfg.erho_denominator;
  const auto bayes_shares = with_context("shares", [&] { return derived_shares(posterior, opts); });

  ReportWriter w(cfg, "decompose");
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : panel.rows) rows.push_back({r.c, r.i, r.m, r.p, num(r.residual)});
    w.write_csv("misalignment_residuals.csv", {"unit_id", "task_id", "rater_id", "prompt_id", "residual"}, rows);
  }

  Json body;
  body["parameters"]["outcome"] = outcome;
  body["parameters"]["fit_scope"] = to_string(cfg.fit_scope);
  body["parameters"]["chains"] = cfg.chains;
  body["parameters"]["iters"] = cfg.iters;
  body["parameters"]["warmup"] = cfg.warmup;
  body["parameters"]["prior"] = "half-student-t(3, 0, 2.5) on component standard deviations";
  body["parameters"]["rhat_threshold"] = cfg.rhat_threshold;
  body["warnings"] = residuals.warnings;

  if (ems) {
    std::vector<TermValue> comps;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < ems->terms.size(); ++t) {
      const auto& c = ems->terms[t];
      comps.push_back({c.term, c.sigma2});
      rows.push_back({c.name, num(c.df), num(c.ss), num(c.ms), num(c.raw), num(c.sigma2), c.truncated ? "1" : "0",
                      num(100.0 * ems->proportion(t))});
    }
    w.write_csv("components_ems.csv",
                {"term", "df", "ss", "ms", "sigma2_raw", "sigma2", "truncated", "percent"}, rows);
    Json je;
    je["total_ss"] = jnum(ems->total_ss);
    je["total_sigma2"] = jnum(ems->total);
    je["any_truncated"] = ems->any_truncated;
    if (ems->total > 0.0) {
      const auto shares = derived_shares(comps, opts);
      je["controllable_percent"] = jnum(shares.controllable);
      je["erho2"] = jnum(shares.erho2);
    } else {
      je["controllable_percent"] = nullptr;
      je["erho2"] = nullptr;
    }
    body["ems"] = je;
  } else {
    body["ems"] = nullptr;
    body["ems_note"] = ems_note;
  }

  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < posterior.terms.size(); ++t) {
      const auto& p = posterior.terms[t];
      const auto& pc = bayes_shares.percent[t].second;
      rows.push_back({p.name, num(p.mean), num(p.median), num(p.lower), num(p.upper), num(p.rhat), num(pc.mean),
                      num(pc.lower), num(pc.upper)});
    }
    w.write_csv("components_bayes.csv",
                {"term", "sigma2_mean", "sigma2_median", "sigma2_lower", "sigma2_upper", "rhat", "percent_mean",
                 "percent_lower", "percent_upper"},
                rows);
  }
  Json jb;
  jb["max_rhat"] = jnum(posterior.max_rhat);
  jb["converged"] = posterior.converged;
  jb["controllable_percent"] = {{"mean", jnum(bayes_shares.controllable.mean)},
                                {"lower", jnum(bayes_shares.controllable.lower)},
                                {"upper", jnum(bayes_shares.controllable.upper)}};
  jb["erho2"] = {{"mean", jnum(bayes_shares.erho2.mean)},
                 {"lower", jnum(bayes_shares.erho2.lower)},
                 {"upper", jnum(bayes_shares.erho2.upper)}};
  if (std::isfinite(bayes_shares.erho2.mean)) {
    jb["erho2_text"] = format_with_ci(bayes_shares.erho2.mean, bayes_shares.erho2.lower, bayes_shares.erho2.upper);
  }
  Json denom = Json::array();
  for (TermMask t : bayes_shares.erho_denominator) denom.push_back(term_name(t));
  jb["erho2_denominator"] = denom;
  body["bayes"] = jb;
  w.write_json("shares.json", body);

  if (cfg.dump_draws) {
    std::ostringstream out;
    for (std::size_t t = 0; t < posterior.terms.size(); ++t) out << (t ? "\t" : "") << posterior.terms[t].name;
    out << "\n";
    const std::size_t n = posterior.draws.front().size();
    for (std::size_t d = 0; d < n; ++d) {
      for (std::size_t t = 0; t < posterior.terms.size(); ++t) out << (t ? "\t" : "") << num(posterior.draws[t][d]);
      out << "\n";
    }
    w.write_text("posterior_draws.tsv", out.str());
  }
  return w.written();
}

// ---- simulate ------------------------------------------------------------------

Written cmd_simulate(const AnalysisConfig& cfg) {
  const auto spec = with_context("simulate", [&] {
    try {
      return synthetic::preset(cfg.preset);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  });
  const auto bundle = with_context("simulate", [&] { return synthetic::gen_study_bundle(spec, cfg.seed); });

  ReportWriter w(cfg, "simulate");
  {
    std::ostringstream out;
    write_ratings(out, bundle.ratings);
    w.write_text("ratings.csv", out.str());
  }
  {
    std::ostringstream out;
    write_outcomes(out, bundle.outcomes);
    w.write_text("outcomes.csv", out.str());
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [u, v] : bundle.experience) rows.push_back({u, num(v)});
    w.write_csv("metadata.csv", {"unit_id", "experience"}, rows);
  }

  Json analysis;
  analysis["seed"] = cfg.seed;
  analysis["ratings"] = "ratings.csv";
  analysis["outcomes"] = "outcomes.csv";
  analysis["metadata"] = "metadata.csv";
  analysis["experience_column"] = "experience";
  analysis["outcome"] = "vam_sta";
  analysis["reliability"] = {{"variant_a", "vam_sta"}, {"variant_b", "vam_alt"}, {"scope", "pooled"}};
  Json bounds;
  for (const auto& [task, b] : bundle.ratings.scale_bounds()) bounds[task] = Json::array({b.min, b.max});
  analysis["ratings_schema"] = {{"bounds", bounds}};
  Json members = Json::array();
  for (const auto& key : bundle.ratings.sources()) {
    if (bundle.ratings.family_of(key.rater_id) == RaterFamily::model && key.prompt_id &&
        *key.prompt_id == "prompt_1") {
      members.push_back(key.label());
    }
  }
  if (members.size() >= 2) {
    analysis["ensembles"] = Json::array({{{"name", "ensemble_weighted"}, {"rule", "weighted"}, {"members", members}},
                                         {{"name", "ensemble_unanimous"}, {"rule", "unanimous"}, {"members", members}}});
  }
  w.write_text("config.json", analysis.dump(2) + "\n");

  Json body;
  body["parameters"]["preset"] = cfg.preset;
  body["files"] = {"ratings.csv", "outcomes.csv", "metadata.csv", "config.json"};
  body["layout"] = {{"units", spec.units},   {"tasks", spec.tasks},   {"models", spec.models},
                    {"prompts", spec.prompts}, {"humans", spec.humans}, {"scale_points", spec.scale_points}};
  w.write_json("simulate.json", body);
  return w.written();
}

}  // namespace alignmeter::cli
