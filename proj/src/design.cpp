#include "accjoint/design.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "accjoint/errors.hpp"
#include "accjoint/stats.hpp"

namespace accjoint {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

ParamSlot slot_from_json(const nlohmann::json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return j.get<double>();
  throw ConfigError("E_SPEC_INVALID", "accumulator field must be a name or a number at " + where);
}

nlohmann::json slot_to_json(const ParamSlot& s) {
  if (std::holds_alternative<std::string>(s)) return std::get<std::string>(s);
  return std::get<double>(s);
}

}  // namespace

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec spec;
  if (!j.contains("tasks") || !j.contains("vector_order")) {
    throw ConfigError("E_SPEC_INVALID", "model spec needs 'tasks' and 'vector_order'");
  }
  for (const auto& jt : j.at("tasks")) {
    TaskDef task;
    task.name = jt.at("name").get<std::string>();
    for (const auto& p : jt.at("params")) task.params.push_back(p.get<std::string>());
    for (const auto& [cell_name, jc] : jt.at("cells").items()) {
      CellDef cell;
      for (const auto& ja : jc.at("accumulators")) {
        AccumDef acc;
        const std::string where = task.name + "/" + cell_name;
        acc.threshold_gap = slot_from_json(ja.at("b"), where);
        acc.start_width = slot_from_json(ja.at("A"), where);
        acc.drift_mean = slot_from_json(ja.at("v"), where);
        acc.nondecision = slot_from_json(ja.at("tau"), where);
        acc.correct = ja.value("correct", false);
        cell.accumulators.push_back(std::move(acc));
      }
      task.cells.emplace(cell_name, std::move(cell));
    }
    spec.tasks.push_back(std::move(task));
  }
  for (const auto& p : j.at("vector_order")) spec.vector_order.push_back(p.get<std::string>());
  spec.check();
  return spec;
}

ModelSpec ModelSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("E_MODEL_NOT_FOUND", "cannot open model spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("E_BAD_JSON", "model spec " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json j;
  j["tasks"] = nlohmann::json::array();
  for (const auto& task : tasks) {
    nlohmann::json jt;
    jt["name"] = task.name;
    jt["params"] = task.params;
    nlohmann::json jcells = nlohmann::json::object();
    for (const auto& [cell_name, cell] : task.cells) {
      nlohmann::json jaccs = nlohmann::json::array();
      for (const auto& acc : cell.accumulators) {
        nlohmann::json ja;
        ja["b"] = slot_to_json(acc.threshold_gap);
        ja["A"] = slot_to_json(acc.start_width);
        ja["v"] = slot_to_json(acc.drift_mean);
        ja["tau"] = slot_to_json(acc.nondecision);
        if (acc.correct) ja["correct"] = true;
        jaccs.push_back(std::move(ja));
      }
      jcells[cell_name] = {{"accumulators", std::move(jaccs)}};
    }
    jt["cells"] = std::move(jcells);
    j["tasks"].push_back(std::move(jt));
  }
  j["vector_order"] = vector_order;
  return j;
}

void ModelSpec::check() const {
  std::set<std::string> order(vector_order.begin(), vector_order.end());
  if (order.size() != vector_order.size()) {
    throw ConfigError("E_SPEC_INVALID", "vector_order contains duplicate names");
  }
  std::map<std::string, int> owners;
  for (const auto& task : tasks) {
    for (const auto& p : task.params) owners[p]++;
  }
  for (const auto& name : vector_order) {
    auto it = owners.find(name);
    if (it == owners.end()) {
      throw ConfigError("E_SPEC_INVALID", "parameter '" + name + "' is in vector_order but owned by no task");
    }
    if (it->second != 1) {
      throw ConfigError("E_SPEC_INVALID", "parameter '" + name + "' owned by multiple tasks");
    }
  }
  for (const auto& task : tasks) {
    for (const auto& [cell_name, cell] : task.cells) {
      if (cell.accumulators.empty()) {
        throw ConfigError("E_SPEC_INVALID", "cell " + task.name + "/" + cell_name + " has no accumulators");
      }
      for (const auto& acc : cell.accumulators) {
        for (const ParamSlot* slot :
             {&acc.threshold_gap, &acc.start_width, &acc.drift_mean, &acc.nondecision}) {
          if (std::holds_alternative<std::string>(*slot)) {
            const std::string& name = std::get<std::string>(*slot);
            if (order.find(name) == order.end()) {
              throw ConfigError("E_SPEC_INVALID", "cell " + task.name + "/" + cell_name +
                                                      " references unknown parameter '" + name + "'");
            }
          }
        }
      }
    }
  }
}

int ModelSpec::index_of(const std::string& name) const {
  if (index_cache_.empty()) {
    for (std::size_t i = 0; i < vector_order.size(); ++i) {
      index_cache_[vector_order[i]] = static_cast<int>(i);
    }
  }
  auto it = index_cache_.find(name);
  return it == index_cache_.end() ? -1 : it->second;
}

const TaskDef* ModelSpec::find_task(const std::string& name) const {
  for (const auto& t : tasks) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const CellDef* ModelSpec::find_cell(const std::string& task, const std::string& cell) const {
  const TaskDef* t = find_task(task);
  if (!t) return nullptr;
  auto it = t->cells.find(cell);
  return it == t->cells.end() ? nullptr : &it->second;
}

std::vector<std::string> ModelSpec::block_labels() const {
  std::map<std::string, std::string> owner;
  for (const auto& task : tasks) {
    for (const auto& p : task.params) owner[p] = task.name;
  }
  std::vector<std::string> labels;
  labels.reserve(vector_order.size());
  for (const auto& name : vector_order) labels.push_back(owner.at(name));
  return labels;
}

namespace {

double resolve_slot(const ParamSlot& slot, const ModelSpec& spec, const Eigen::VectorXd& alpha,
                    const std::string& where) {
  if (std::holds_alternative<double>(slot)) return std::get<double>(slot);
  const std::string& name = std::get<std::string>(slot);
  const int idx = spec.index_of(name);
  if (idx < 0 || idx >= alpha.size()) {
    throw ConfigError("E_UNMAPPED_CELL", "parameter '" + name + "' unresolvable at " + where);
  }
  return std::exp(alpha[idx]);
}

}  // namespace

std::vector<AccumulatorParams> resolve(const ModelSpec& spec, const std::string& task,
                                       const std::string& cell, const SubjectEffects& effects) {
  const CellDef* def = spec.find_cell(task, cell);
  if (!def) throw ConfigError("E_UNMAPPED_CELL", "no mapping for cell " + task + "/" + cell);
  const std::string where = task + "/" + cell;
  std::vector<AccumulatorParams> out;
  out.reserve(def->accumulators.size());
  for (const auto& acc : def->accumulators) {
    AccumulatorParams p;
    p.threshold_gap = resolve_slot(acc.threshold_gap, spec, effects.alpha, where);
    p.start_width = resolve_slot(acc.start_width, spec, effects.alpha, where);
    p.drift_mean = resolve_slot(acc.drift_mean, spec, effects.alpha, where);
    p.nondecision = resolve_slot(acc.nondecision, spec, effects.alpha, where);
    out.push_back(p);
  }
  return out;
}

ValidationReport validate_spec(const ModelSpec& spec, const std::vector<TrialRecord>& data) {
  ValidationReport report;
  std::map<std::pair<std::string, std::string>, long> counts;
  for (const auto& t : data) counts[{t.task, t.cell}]++;

  std::set<std::string> used;
  for (const auto& task : spec.tasks) {
    for (const auto& [cell_name, cell] : task.cells) {
      for (const auto& acc : cell.accumulators) {
        for (const ParamSlot* slot :
             {&acc.threshold_gap, &acc.start_width, &acc.drift_mean, &acc.nondecision}) {
          if (std::holds_alternative<std::string>(*slot)) used.insert(std::get<std::string>(*slot));
        }
      }
    }
  }
  for (const auto& name : spec.vector_order) {
    if (used.find(name) == used.end()) report.unused_params.push_back(name);
  }

  for (const auto& [key, n] : counts) {
    CellCoverage cov;
    cov.task = key.first;
    cov.cell = key.second;
    cov.trial_count = n;
    const CellDef* def = spec.find_cell(key.first, key.second);
    cov.mapped = def != nullptr;
    if (!cov.mapped) {
      report.unmapped_cells.push_back(key.first + "/" + key.second);
      report.ok = false;
    }
    report.cells.push_back(cov);
  }

  for (const auto& t : data) {
    const CellDef* def = spec.find_cell(t.task, t.cell);
    if (!def) continue;
    if (t.response < 0 || static_cast<std::size_t>(t.response) >= def->accumulators.size()) {
      std::ostringstream msg;
      msg << "subject " << t.subject << ": response " << t.response << " out of range for "
          << t.task << "/" << t.cell;
      report.problems.push_back(msg.str());
      report.ok = false;
    }
    if (!(t.rt > 0.0)) {
      report.problems.push_back("subject " + t.subject + ": non-positive rt in " + t.task + "/" +
                                t.cell);
      report.ok = false;
    }
  }
  return report;
}

CompiledDesign::CompiledDesign(const ModelSpec& spec) {
  spec.check();
  for (const auto& task : spec.tasks) {
    for (const auto& [cell_name, cell] : task.cells) {
      CompiledCell cc;
      cc.task = task.name;
      cc.cell = cell_name;
      for (std::size_t a = 0; a < cell.accumulators.size(); ++a) {
        const auto& acc = cell.accumulators[a];
        CompiledAccum ca;
        auto compile = [&spec](const ParamSlot& slot) {
          ParamRef ref;
          if (std::holds_alternative<double>(slot)) {
            ref.fixed = std::get<double>(slot);
          } else {
            ref.index = spec.index_of(std::get<std::string>(slot));
          }
          return ref;
        };
        ca.threshold_gap = compile(acc.threshold_gap);
        ca.start_width = compile(acc.start_width);
        ca.drift_mean = compile(acc.drift_mean);
        ca.nondecision = compile(acc.nondecision);
        if (a > 0) {
          const ParamRef& first = cc.accumulators.front().nondecision;
          if (ca.nondecision.index != first.index ||
              (first.index < 0 && ca.nondecision.fixed != first.fixed)) {
            throw ConfigError("E_SPEC_INVALID", "cell " + task.name + "/" + cell_name +
                                                    " maps different non-decision times");
          }
        }
        cc.accumulators.push_back(ca);
        if (acc.correct) cc.correct_index = static_cast<int>(a);
      }
      by_name_[{task.name, cell_name}] = static_cast<int>(cells_.size());
      cells_.push_back(std::move(cc));
    }
  }
}

int CompiledDesign::cell_index(const std::string& task, const std::string& cell) const {
  auto it = by_name_.find({task, cell});
  return it == by_name_.end() ? -1 : it->second;
}

SubjectData SubjectData::build(const std::string& subject_id,
                               const std::vector<TrialRecord>& trials,
                               const CompiledDesign& design) {
  SubjectData sd;
  sd.subject_id = subject_id;
  sd.per_cell.resize(design.cells().size());
  for (const auto& t : trials) {
    if (t.subject != subject_id) continue;
    const int idx = design.cell_index(t.task, t.cell);
    if (idx < 0) throw ConfigError("E_UNMAPPED_CELL", "no mapping for cell " + t.task + "/" + t.cell);
    sd.per_cell[static_cast<std::size_t>(idx)].emplace_back(t.response, t.rt);
    ++sd.trial_count;
  }
  return sd;
}

double compiled_log_likelihood(const Eigen::VectorXd& alpha, const CompiledDesign& design,
                               const SubjectData& data) {
  double total = 0.0;
  const auto& cells = design.cells();
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const auto& trials = data.per_cell[ci];
    if (trials.empty()) continue;
    const auto& cell = cells[ci];

    // resolve once per cell, reuse across its trials
    double tau = 0.0;
    std::vector<AccumKernel> kernels(cell.accumulators.size());
    for (std::size_t a = 0; a < cell.accumulators.size(); ++a) {
      const auto& ca = cell.accumulators[a];
      auto value = [&alpha](const ParamRef& r) {
        return r.index >= 0 ? std::exp(alpha[r.index]) : r.fixed;
      };
      AccumulatorParams p;
      p.threshold_gap = value(ca.threshold_gap);
      p.start_width = value(ca.start_width);
      p.drift_mean = value(ca.drift_mean);
      p.nondecision = value(ca.nondecision);
      if (!(p.threshold_gap > 0.0) || !std::isfinite(p.threshold_gap) ||
          !(p.start_width >= 0.0) || !std::isfinite(p.drift_mean) || p.drift_mean <= -8.0) {
        return kNegInf;
      }
      kernels[a] = AccumKernel::from(p);
      if (a == 0) tau = p.nondecision;
    }

    for (const auto& [response, rt] : trials) {
      const double d = rt - tau;
      if (d <= 0.0) return kNegInf;
      for (std::size_t a = 0; a < kernels.size(); ++a) {
        if (static_cast<int>(a) == response) {
          const double f = kernels[a].pdf(d);
          if (f <= 0.0) return kNegInf;
          total += std::log(f);
        } else {
          const double surv = -kernels[a].cdf(d);
          if (surv <= -1.0) return kNegInf;
          total += std::log1p(surv);
        }
      }
    }
  }
  return total;
}

double subject_log_likelihood(const std::vector<TrialRecord>& trials,
                              const SubjectEffects& effects, const ModelSpec& spec) {
  for (const auto& t : trials) {
    if (t.subject != effects.subject_id) {
      throw InvalidInput("subject_log_likelihood: trial for '" + t.subject +
                         "' does not belong to subject '" + effects.subject_id + "'");
    }
  }
  const CompiledDesign design(spec);
  const SubjectData data = SubjectData::build(effects.subject_id, trials, design);
  return compiled_log_likelihood(effects.alpha, design, data);
}

}  // namespace accjoint
