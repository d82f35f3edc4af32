#include "mfteam/io.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace mfteam {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(std::string("model file: missing key \"") + key + "\"");
  return obj.at(key);
}

int require_count(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw ParseError(std::string("model file: \"") + key + "\" must be a positive integer");
  }
  return v.get<int>();
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError("model file: expected a number at " + where);
  return v.get<double>();
}

// Checks that `v` is an array of exactly `size` entries.
const json& array_of(const json& v, std::size_t size, const std::string& where) {
  if (!v.is_array()) throw ParseError("model file: expected an array at " + where);
  if (v.size() != size) {
    throw ShapeError("model file: " + where + " has length " + std::to_string(v.size()) + ", expected " +
                     std::to_string(size));
  }
  return v;
}

bool stages_identical(const ModelSpec& m) {
  for (Stage t = 1; t < m.horizon(); ++t)
    for (State x = 0; x < m.num_states(); ++x)
      for (Action u = 0; u < m.num_actions(); ++u) {
        if (m.cost_base(t, x, u) != m.cost_base(0, x, u)) return false;
        for (State y = 0; y < m.num_states(); ++y) {
          if (m.kernel_base(t, x, u, y) != m.kernel_base(0, x, u, y)) return false;
          if (m.cost_coeff(t, x, u, y) != m.cost_coeff(0, x, u, y)) return false;
          for (State xp = 0; xp < m.num_states(); ++xp) {
            if (m.kernel_coeff(t, x, u, xp, y) != m.kernel_coeff(0, x, u, xp, y)) return false;
          }
        }
      }
  return true;
}

}  // namespace

ModelSpec parse_model(const json& doc) {
  if (!doc.is_object()) throw ParseError("model file: top level must be an object");
  const int nx = require_count(doc, "num_states");
  const int nu = require_count(doc, "num_actions");
  const int horizon = require_count(doc, "horizon");
  const auto nxs = static_cast<std::size_t>(nx);
  const auto nus = static_cast<std::size_t>(nu);

  const json& init = array_of(require(doc, "initial_dist"), nxs, "initial_dist");
  std::vector<double> initial;
  for (std::size_t i = 0; i < init.size(); ++i) initial.push_back(number(init[i], "initial_dist"));

  const json& ti = require(doc, "time_invariant");
  if (!ti.is_boolean()) throw ParseError("model file: \"time_invariant\" must be a boolean");
  const bool time_invariant = ti.get<bool>();
  const json& stages = array_of(require(doc, "stages"), time_invariant ? 1 : static_cast<std::size_t>(horizon), "stages");

  ModelSpec model(nx, nu, horizon, std::move(initial));
  for (Stage t = 0; t < horizon; ++t) {
    const json& block = stages[time_invariant ? 0 : static_cast<std::size_t>(t)];
    const std::string at = "stages[" + std::to_string(time_invariant ? 0 : t) + "].";
    const json& a0 = array_of(require(block, "kernel_base"), nxs, at + "kernel_base");
    const json& b = array_of(require(block, "kernel_coeff"), nxs, at + "kernel_coeff");
    const json& c0 = array_of(require(block, "cost_base"), nxs, at + "cost_base");
    const json& c1 = array_of(require(block, "cost_coeff"), nxs, at + "cost_coeff");
    for (State x = 0; x < nx; ++x) {
      const auto xs = static_cast<std::size_t>(x);
      const std::string ax = "[" + std::to_string(x) + "]";
      const json& a0x = array_of(a0[xs], nus, at + "kernel_base" + ax);
      const json& bx = array_of(b[xs], nus, at + "kernel_coeff" + ax);
      const json& c0x = array_of(c0[xs], nus, at + "cost_base" + ax);
      const json& c1x = array_of(c1[xs], nus, at + "cost_coeff" + ax);
      for (Action u = 0; u < nu; ++u) {
        const auto us = static_cast<std::size_t>(u);
        const std::string au = ax + "[" + std::to_string(u) + "]";
        model.cost_base(t, x, u) = number(c0x[us], at + "cost_base" + au);
        const json& row = array_of(a0x[us], nxs, at + "kernel_base" + au);
        const json& coeff = array_of(bx[us], nxs, at + "kernel_coeff" + au);
        const json& cc = array_of(c1x[us], nxs, at + "cost_coeff" + au);
        for (State y = 0; y < nx; ++y) {
          const auto ys = static_cast<std::size_t>(y);
          model.kernel_base(t, x, u, y) = number(row[ys], at + "kernel_base" + au);
          model.cost_coeff(t, x, u, y) = number(cc[ys], at + "cost_coeff" + au);
          const json& coeff_row = array_of(coeff[ys], nxs, at + "kernel_coeff" + au + "[" + std::to_string(y) + "]");
          for (State yy = 0; yy < nx; ++yy) {
            model.kernel_coeff(t, x, u, y, yy) = number(coeff_row[static_cast<std::size_t>(yy)], at + "kernel_coeff" + au);
          }
        }
      }
    }
  }
  return model;
}

ModelSpec parse_model_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  return parse_model(doc);
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model_text(buffer.str());
}

json model_to_json(const ModelSpec& m) {
  const bool invariant = stages_identical(m);
  json stages = json::array();
  const Stage count = invariant ? 1 : m.horizon();
  for (Stage t = 0; t < count; ++t) {
    json a0 = json::array(), b = json::array(), c0 = json::array(), c1 = json::array();
    for (State x = 0; x < m.num_states(); ++x) {
      json a0x = json::array(), bx = json::array(), c0x = json::array(), c1x = json::array();
      for (Action u = 0; u < m.num_actions(); ++u) {
        json row = json::array(), coeff = json::array(), cc = json::array();
        for (State y = 0; y < m.num_states(); ++y) {
          row.push_back(m.kernel_base(t, x, u, y));
          cc.push_back(m.cost_coeff(t, x, u, y));
          json coeff_row = json::array();
          for (State yy = 0; yy < m.num_states(); ++yy) coeff_row.push_back(m.kernel_coeff(t, x, u, y, yy));
          coeff.push_back(std::move(coeff_row));
        }
        a0x.push_back(std::move(row));
        bx.push_back(std::move(coeff));
        c0x.push_back(m.cost_base(t, x, u));
        c1x.push_back(std::move(cc));
      }
      a0.push_back(std::move(a0x));
      b.push_back(std::move(bx));
      c0.push_back(std::move(c0x));
      c1.push_back(std::move(c1x));
    }
    stages.push_back({{"kernel_base", a0}, {"kernel_coeff", b}, {"cost_base", c0}, {"cost_coeff", c1}});
  }
  return {{"num_states", m.num_states()},
          {"num_actions", m.num_actions()},
          {"horizon", m.horizon()},
          {"initial_dist", std::vector<double>(m.initial_dist().begin(), m.initial_dist().end())},
          {"time_invariant", invariant},
          {"stages", stages}};
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void save_model(const std::filesystem::path& path, const ModelSpec& model) { write_json(path, model_to_json(model)); }

json solution_to_json(const DecentralizedSolution& s) {
  json policies = json::array();
  for (const auto& p : s.policies) policies.push_back(p.index());
  return {{"mode", s.mode == SolveMode::grid ? "grid" : "tree"},
          {"nu", s.nu},
          {"value", s.value},
          {"trajectory", s.trajectory},
          {"policies", policies}};
}

json solution_to_json(const SharingSolution& s, std::size_t table_threshold) {
  json doc = {{"n", s.n}, {"J_star", s.j_star}};
  const bool elide = s.points.size() * s.value.size() > table_threshold;
  doc["tables_elided"] = elide;
  if (!elide) {
    json points = json::array();
    for (const auto& p : s.points) points.push_back(p.values);
    doc["points"] = points;
    doc["value"] = s.value;
    doc["policy"] = s.policy;
  }
  return doc;
}

}  // namespace mfteam
