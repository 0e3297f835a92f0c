#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "levels/dynamics.hpp"
#include "levels/generators.hpp"
#include "levels/partition.hpp"
#include "levels/regularity.hpp"

namespace levels {

/// Shortest round-trip decimal form; the basis of byte-stable outputs.
template <class Real>
std::string format_real(Real v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_index(Index v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// Minimal ordered JSON emitter.  Field order is exactly the call order, and
// numbers go through format_real, so documents are byte-identical across
// runs at any working precision.

class JsonWriter {
 public:
  JsonWriter& begin_object() { return open('{', '}'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('[', ']'); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(std::string_view name) {
    comma();
    out_ += '"';
    out_ += name;
    out_ += "\":";
    pending_value_ = true;
    return *this;
  }

  JsonWriter& value(std::string_view s) {
    comma();
    out_ += '"';
    for (char c : s) {
      if (c == '"' || c == '\\') out_ += '\\';
      out_ += c;
    }
    out_ += '"';
    return *this;
  }

  JsonWriter& value(const char* s) { return value(std::string_view(s)); }
  JsonWriter& value(bool b) {
    comma();
    out_ += b ? "true" : "false";
    return *this;
  }
  JsonWriter& value(int v) { return raw(std::to_string(v)); }
  JsonWriter& value(Index v) { return raw(std::to_string(v)); }
  JsonWriter& value(std::size_t v) { return raw(std::to_string(v)); }
  template <class Real>
  JsonWriter& value(Real v) {
    return raw(format_real(v));
  }

  const std::string& str() const { return out_; }

 private:
  JsonWriter& raw(std::string s) {
    comma();
    out_ += s;
    return *this;
  }
  JsonWriter& open(char c, char) {
    comma();
    out_ += c;
    fresh_ = true;
    return *this;
  }
  JsonWriter& close(char c) {
    out_ += c;
    fresh_ = false;
    return *this;
  }
  void comma() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!fresh_ && !out_.empty() && out_.back() != '{' && out_.back() != '[') out_ += ',';
    fresh_ = false;
  }

  std::string out_;
  bool fresh_ = true;
  bool pending_value_ = false;
};

inline void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("atomic rename failed: " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Document builders.

template <class Real>
void params_json_fields(JsonWriter& w, const Params<Real>& p) {
  w.key("alpha").value(p.alpha);
  w.key("epsilon").value(p.epsilon);
  w.key("theta").value(p.theta);
  w.key("k_max").value(p.k_max);
  w.key("n_neg").value(p.n_neg);
  w.key("schedule").value(schedule_name(p.schedule));
  w.key("precision_bits").value(p.precision_bits);
  w.key("tol").value(p.tol);
}

/// Full partition document: params, the endpoint/length ladder and the
/// per-level marker table.
template <class Real>
std::string partition_json(const PartitionModel<Real>& m) {
  JsonWriter w;
  w.begin_object();
  w.key("params").begin_object();
  params_json_fields(w, m.params());
  w.end_object();
  w.key("c_eps").value(m.c_eps());
  w.key("a_error_bound").value(m.a_error_bound());
  w.key("intervals").begin_array();
  for (Index n = m.n_low(); n <= m.n_top(); ++n) {
    w.begin_object();
    w.key("n").value(n);
    w.key("a").value(m.a_position(n));
    w.key("len").value(m.cell_length(n));
    w.end_object();
  }
  w.end_array();
  w.key("levels").begin_array();
  for (int k = 1; k <= m.k_max(); ++k) {
    w.begin_object();
    w.key("k").value(k);
    w.key("b").value(m.b_global(k));
    w.key("c").value(m.c_global(k));
    w.key("u").value(m.u_global(k));
    w.key("v").value(m.v_global(k));
    if (k <= m.k_max() - 1) w.key("lambda").value(m.lambda(k));
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

template <class Real>
std::string levels_csv(const PartitionModel<Real>& m) {
  std::string out = "k,b,c,u,v,lambda\n";
  for (int k = 1; k <= m.k_max(); ++k) {
    out += std::to_string(k);
    out += ',';
    out += format_real(m.b_global(k));
    out += ',';
    out += format_real(m.c_global(k));
    out += ',';
    out += format_real(m.u_global(k));
    out += ',';
    out += format_real(m.v_global(k));
    out += ',';
    if (k <= m.k_max() - 1) out += format_real(m.lambda(k));
    out += '\n';
  }
  return out;
}

template <class Real>
std::string estimates_csv(const EstimateReport<Real>& rep) {
  std::string out = "k,i,quantity2,bound2,quantity3,bound3\n";
  for (const auto& r : rep.rows) {
    out += std::to_string(r.k);
    out += ',';
    out += std::to_string(r.i);
    out += ',';
    out += format_real(r.quantity2);
    out += ',';
    out += format_real(r.bound2);
    out += ',';
    out += format_real(r.quantity3);
    out += ',';
    out += format_real(r.bound3);
    out += '\n';
  }
  return out;
}

template <class Real>
std::string estimates_summary_json(const PartitionModel<Real>& m, const EstimateReport<Real>& rep,
                                   const LambdaBoundsReport<Real>& lam,
                                   const ParameterCheck<Real>& check,
                                   std::size_t hypothesis_failures) {
  JsonWriter w;
  w.begin_object();
  w.key("params").begin_object();
  params_json_fields(w, m.params());
  w.end_object();
  w.key("conditions").begin_object();
  w.key("product").value(check.product);
  w.key("product_ok").value(check.product_ok);
  w.key("tail_cap").value(check.tail_cap);
  w.key("tail_ok").value(check.tail_ok);
  w.key("theta_ok").value(check.theta_ok);
  w.key("pass").value(check.pass());
  w.end_object();
  w.key("fitted").begin_object();
  w.key("m2").value(rep.fitted_m2);
  w.key("m3").value(rep.fitted_m3);
  w.key("m4").value(rep.fitted_m4);
  w.key("lambda_pow_m").value(lam.fitted_pow_m);
  w.key("lambda_dev_m").value(lam.fitted_dev_m);
  w.end_object();
  w.key("flags").begin_object();
  w.key("decay2").value(rep.decay2);
  w.key("decay3").value(rep.decay3);
  w.key("decay4").value(rep.decay4);
  w.key("lambda_dev_bounded").value(lam.dev_bounded);
  w.key("lambda_diverging").value(lam.diverging);
  w.end_object();
  w.key("g_quantities").begin_array();
  for (const auto& r : rep.g_rows) {
    w.begin_object();
    w.key("k").value(r.k);
    w.key("quantity4").value(r.quantity4);
    w.key("bound4").value(r.bound4);
    w.end_object();
  }
  w.end_array();
  w.key("hypothesis_ratio_failures").value(hypothesis_failures);
  w.end_object();
  return w.str();
}

template <class Real>
std::string sweep_csv(const std::vector<SweepRow<Real>>& rows,
                      const std::vector<SweepRow<Real>>* reference = nullptr) {
  std::string out = "depth,k_max,seminorm_f,seminorm_g";
  if (reference) out += ",reference_seminorm_f";
  out += '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += std::to_string(rows[i].depth);
    out += ',';
    out += std::to_string(rows[i].k_max_used);
    out += ',';
    out += format_real(rows[i].seminorm_f);
    out += ',';
    out += format_real(rows[i].seminorm_g);
    if (reference && i < reference->size()) {
      out += ',';
      out += format_real((*reference)[i].seminorm_f);
    }
    out += '\n';
  }
  return out;
}

inline const char* letter_name(Letter l) {
  switch (l) {
    case Letter::F: return "F";
    case Letter::Fi: return "F^-1";
    case Letter::G: return "G";
    default: return "G^-1";
  }
}

template <class Real>
void local_point_json(JsonWriter& w, const LocalPoint<Real>& p) {
  w.begin_object();
  w.key("cell");
  if (p.cell == kLeftTailCell) {
    w.value("left_tail");
  } else if (p.cell == kRightTailCell) {
    w.value("right_tail");
  } else {
    w.value(p.cell);
  }
  w.key("s").value(p.s);
  w.end_object();
}

inline void word_json(JsonWriter& w, const Word& word) {
  w.begin_array();
  for (const auto& [letter, count] : word.run_length()) {
    w.begin_array();
    w.value(letter_name(letter));
    w.value(count);
    w.end_array();
  }
  w.end_array();
}

template <class Real>
std::string certificates_json(const PartitionModel<Real>& m,
                              const std::vector<DescentSearch<Real>>& searches, Index m_max) {
  JsonWriter w;
  w.begin_object();
  w.key("m_max").value(m_max);
  bool all = true;
  for (const auto& s : searches) all = all && s.certificate.has_value();
  w.key("all_found").value(all);
  w.key("certificates").begin_array();
  for (const auto& s : searches) {
    w.begin_object();
    w.key("k").value(s.k);
    if (s.certificate) {
      const auto& c = *s.certificate;
      w.key("m").value(c.m);
      w.key("word");
      word_json(w, c.word);
      w.key("start");
      local_point_json(w, c.start);
      w.key("end");
      local_point_json(w, c.end);
      w.key("end_global").value(m.to_global(c.end));
      w.key("margin").value(c.margin_global);
      w.key("contained").value(c.contained);
    } else {
      w.key("found").value(false);
      w.key("m_tried").value(s.m_tried);
      w.key("closest_approach").value(s.closest_approach_global);
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

template <class Real>
std::string cascade_json(const PartitionModel<Real>& m, const Cascade<Real>& cascade) {
  JsonWriter w;
  w.begin_object();
  w.key("complete").value(cascade.complete);
  if (!cascade.complete) {
    w.key("failed_stage").value(cascade.failed_stage);
    w.key("closest_approach").value(cascade.failed_closest_approach);
  }
  w.key("start");
  local_point_json(w, cascade.start);
  w.key("end");
  local_point_json(w, cascade.end);
  w.key("end_global").value(m.to_global(cascade.end));
  w.key("word");
  word_json(w, cascade.word);
  w.key("word_length").value(cascade.word.size());
  w.key("stages").begin_array();
  for (const auto& c : cascade.stages) {
    w.begin_object();
    w.key("k").value(c.k);
    w.key("m").value(c.m);
    w.key("margin").value(c.margin_global);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

template <class Real>
std::string orbit_json(const OrbitReport<Real>& rep) {
  JsonWriter w;
  w.begin_object();
  w.key("visited").value(rep.visited);
  w.key("expanded").value(rep.expanded);
  w.key("out_of_domain_moves").value(rep.out_of_domain_moves);
  w.key("truncated").value(rep.truncated);
  w.key("deepest_level").value(rep.deepest_level);
  w.key("levels_entered").begin_array();
  for (int k : rep.levels_entered) w.value(k);
  w.end_array();
  w.key("min_global").value(rep.min_global);
  w.key("max_global").value(rep.max_global);
  w.end_object();
  return w.str();
}

template <class Real>
struct EvalRow {
  Real x = 0;
  Real y = 0;
  Real dydx = 0;
  std::string status = "ok";
};

template <class Real>
std::string eval_csv(const std::vector<EvalRow<Real>>& rows) {
  std::string out = "x,y,dydx,status\n";
  for (const auto& r : rows) {
    out += format_real(r.x);
    out += ',';
    if (r.status == "ok") {
      out += format_real(r.y);
      out += ',';
      out += format_real(r.dydx);
    } else {
      out += ',';
    }
    out += ',';
    out += r.status;
    out += '\n';
  }
  return out;
}

}  // namespace levels
