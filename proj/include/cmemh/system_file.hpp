#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmemh/errors.hpp"
#include "cmemh/generator.hpp"
#include "cmemh/reaction_system.hpp"

namespace cmemh {

/// Optional run defaults carried by a system file.
struct RunDefaults {
  std::optional<double> tau;
  std::optional<double> t_final;
  std::optional<std::int64_t> samples;

  bool operator==(const RunDefaults&) const = default;
};

struct SystemDocument {
  ReactionSystem system;
  RunDefaults run;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    const auto b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != ',') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

inline bool valid_name(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline double parse_real(std::string_view s, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(line, "expected a real number, got '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, int line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(line, "expected an integer, got '" + std::string(s) + "'");
  return v;
}

// "k*Name + Name + ..." ; empty or "0" is the empty complex.
inline std::map<std::string, int> parse_complex(std::string_view s, int line) {
  std::map<std::string, int> out;
  s = trim(s);
  if (s.empty() || s == "0") return out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto plus = s.find('+', pos);
    auto term = trim(s.substr(pos, plus == std::string_view::npos ? std::string_view::npos : plus - pos));
    if (term.empty()) throw ParseError(line, "empty term in '" + std::string(s) + "'");
    int k = 1;
    std::string_view name = term;
    if (const auto star = term.find('*'); star != std::string_view::npos) {
      k = static_cast<int>(parse_int(trim(term.substr(0, star)), line));
      name = trim(term.substr(star + 1));
      if (k < 1) throw ParseError(line, "stoichiometric coefficient must be >= 1");
    }
    if (!valid_name(name)) throw ParseError(line, "bad species name '" + std::string(name) + "'");
    out[std::string(name)] += k;
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
  }
  return out;
}

inline std::pair<std::string_view, std::string_view> key_value(std::string_view s, int line) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos) throw ParseError(line, "expected 'key = value'");
  const auto key = trim(s.substr(0, eq));
  if (key.empty()) throw ParseError(line, "missing key before '='");
  return {key, trim(s.substr(eq + 1))};
}

}  // namespace detail

/// Parses the declarative system format:
///
///   system <name>
///   params ... end            lines "name = value"
///   species ... end           lines "Name initial=<n> cap=<n>"
///   reaction <name> ... end   keys reactants, products ("k*Name + ..."), rate, factors (parameter names)
///   run ... end               optional keys tau, tfinal, samples
///
/// '#' starts a comment. Unknown keys are rejected.
inline SystemDocument parse_system_document(std::string_view text) {
  SystemDocument doc;
  auto& sys = doc.system;
  enum class Section { top, params, species, reaction, run } section = Section::top;
  int line_no = 0;
  int section_line = 0;
  bool have_name = false;
  struct PendingReaction {
    std::string name;
    std::string reactants, products;
    std::optional<double> rate;
    std::vector<std::string> factors;
    int line = 0;
    int reactants_line = 0, products_line = 0;
    bool has_reactants = false, has_products = false;
  };
  std::vector<PendingReaction> pending;
  std::map<std::string, std::size_t> species_index;
  bool seen_run = false;

  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    const auto words = detail::split_ws(line);

    if (section == Section::top) {
      const auto head = words.front();
      if (head == "system") {
        if (words.size() != 2) throw ParseError(line_no, "expected 'system <name>'");
        if (have_name) throw ParseError(line_no, "duplicate system line");
        sys.name = std::string(words[1]);
        have_name = true;
      } else if (head == "params" && words.size() == 1) {
        section = Section::params;
      } else if (head == "species" && words.size() == 1) {
        section = Section::species;
      } else if (head == "run" && words.size() == 1) {
        if (seen_run) throw ParseError(line_no, "duplicate run section");
        seen_run = true;
        section = Section::run;
      } else if (head == "reaction") {
        if (words.size() != 2 || !detail::valid_name(words[1])) throw ParseError(line_no, "expected 'reaction <name>'");
        for (const auto& p : pending)
          if (p.name == words[1]) throw ParseError(line_no, "duplicate reaction '" + std::string(words[1]) + "'");
        pending.push_back(PendingReaction{});
        pending.back().name = std::string(words[1]);
        pending.back().line = line_no;
        section = Section::reaction;
      } else {
        throw ParseError(line_no, "unknown section '" + std::string(head) + "'");
      }
      section_line = line_no;
      continue;
    }

    if (line == "end") {
      if (section == Section::reaction) {
        auto& r = pending.back();
        if (!r.rate) throw ParseError(line_no, "reaction '" + r.name + "' has no rate");
      }
      section = Section::top;
      continue;
    }

    switch (section) {
      case Section::params: {
        const auto [key, value] = detail::key_value(line, line_no);
        if (!detail::valid_name(key)) throw ParseError(line_no, "bad parameter name '" + std::string(key) + "'");
        if (sys.params.contains(std::string(key)))
          throw ParseError(line_no, "duplicate parameter '" + std::string(key) + "'");
        sys.params[std::string(key)] = detail::parse_real(value, line_no);
        break;
      }
      case Section::species: {
        const auto name = words.front();
        if (!detail::valid_name(name)) throw ParseError(line_no, "bad species name '" + std::string(name) + "'");
        if (species_index.contains(std::string(name)))
          throw ParseError(line_no, "duplicate species '" + std::string(name) + "'");
        std::optional<std::int64_t> initial, cap;
        for (std::size_t k = 1; k < words.size(); ++k) {
          const auto [key, value] = detail::key_value(words[k], line_no);
          if (key == "initial")
            initial = detail::parse_int(value, line_no);
          else if (key == "cap")
            cap = detail::parse_int(value, line_no);
          else
            throw ParseError(line_no, "unknown species key '" + std::string(key) + "'");
        }
        if (!cap) throw ParseError(line_no, "species '" + std::string(name) + "' needs cap=<n>");
        species_index[std::string(name)] = sys.species.size();
        sys.species.emplace_back(name);
        sys.caps.push_back(*cap);
        sys.initial.push_back(initial.value_or(0));
        break;
      }
      case Section::reaction: {
        auto& r = pending.back();
        const auto [key, value] = detail::key_value(line, line_no);
        if (key == "reactants") {
          r.reactants = std::string(value);
          r.reactants_line = line_no;
          r.has_reactants = true;
        } else if (key == "products") {
          r.products = std::string(value);
          r.products_line = line_no;
          r.has_products = true;
        } else if (key == "rate") {
          r.rate = detail::parse_real(value, line_no);
        } else if (key == "factors") {
          for (auto f : detail::split_ws(value)) r.factors.emplace_back(f);
        } else {
          throw ParseError(line_no, "unknown reaction key '" + std::string(key) + "'");
        }
        break;
      }
      case Section::run: {
        const auto [key, value] = detail::key_value(line, line_no);
        if (key == "tau")
          doc.run.tau = detail::parse_real(value, line_no);
        else if (key == "tfinal")
          doc.run.t_final = detail::parse_real(value, line_no);
        else if (key == "samples")
          doc.run.samples = detail::parse_int(value, line_no);
        else
          throw ParseError(line_no, "unknown run key '" + std::string(key) + "'");
        break;
      }
      case Section::top:
        break;
    }
  }
  if (section != Section::top) throw ParseError(section_line, "section not closed with 'end'");
  if (!have_name) throw ParseError(std::max(line_no, 1), "missing 'system <name>' line");
  if (sys.species.empty()) throw ParseError(line_no, "no species declared");
  if (pending.empty()) throw ParseError(line_no, "no reactions declared");

  const auto n = sys.species.size();
  for (const auto& p : pending) {
    const auto lhs = detail::parse_complex(p.reactants, p.reactants_line ? p.reactants_line : p.line);
    const auto rhs = detail::parse_complex(p.products, p.products_line ? p.products_line : p.line);
    PropensitySpec spec;
    spec.rate = *p.rate;
    spec.reactant_orders.assign(n, 0);
    spec.param_factors = p.factors;
    std::vector<Count> v(n, 0);
    for (const auto& [name, k] : lhs) {
      const auto it = species_index.find(name);
      if (it == species_index.end()) throw ParseError(p.reactants_line, "unknown species '" + name + "'");
      spec.reactant_orders[it->second] = k;
      v[it->second] -= k;
    }
    for (const auto& [name, k] : rhs) {
      const auto it = species_index.find(name);
      if (it == species_index.end()) throw ParseError(p.products_line, "unknown species '" + name + "'");
      v[it->second] += k;
    }
    for (const auto& f : p.factors)
      if (!sys.params.contains(f)) throw ParseError(p.line, "unknown parameter '" + f + "' in reaction " + p.name);
    sys.reaction_names.push_back(p.name);
    sys.reactions.push_back(std::move(spec));
    sys.stoich.push_back(std::move(v));
  }

  if (auto diags = validate_system(sys); !diags.empty()) throw ValidationError(std::move(diags));
  return doc;
}

inline ReactionSystem parse_system_file(std::string_view text) { return parse_system_document(text).system; }

inline SystemDocument load_system_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open system file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_system_document(ss.str());
}

/// Text that parse_system_document maps back to an identical system.
inline std::string serialize_system(const ReactionSystem& sys, const RunDefaults& run = {}) {
  std::ostringstream os;
  os << "system " << sys.name << "\n";
  if (!sys.params.empty()) {
    os << "params\n";
    for (const auto& [k, v] : sys.params) os << "  " << k << " = " << format_real(v) << "\n";
    os << "end\n";
  }
  os << "species\n";
  for (std::size_t i = 0; i < sys.species.size(); ++i)
    os << "  " << sys.species[i] << " initial=" << (i < sys.initial.size() ? sys.initial[i] : 0)
       << " cap=" << sys.caps[i] << "\n";
  os << "end\n";
  auto complex_text = [&](auto coeff) {
    std::string s;
    for (std::size_t i = 0; i < sys.species.size(); ++i) {
      const auto k = coeff(i);
      if (k <= 0) continue;
      if (!s.empty()) s += " + ";
      s += (k == 1 ? "" : std::to_string(k) + "*") + sys.species[i];
    }
    return s.empty() ? std::string("0") : s;
  };
  for (std::size_t r = 0; r < sys.reactions.size(); ++r) {
    const auto& spec = sys.reactions[r];
    const auto& v = sys.stoich[r];
    const auto name = r < sys.reaction_names.size() ? sys.reaction_names[r] : "r" + std::to_string(r + 1);
    os << "reaction " << name << "\n";
    os << "  reactants = " << complex_text([&](std::size_t i) { return static_cast<Count>(spec.reactant_orders[i]); })
       << "\n";
    os << "  products = "
       << complex_text([&](std::size_t i) { return static_cast<Count>(spec.reactant_orders[i]) + v[i]; }) << "\n";
    os << "  rate = " << format_real(spec.rate) << "\n";
    if (!spec.param_factors.empty()) {
      os << "  factors =";
      for (const auto& f : spec.param_factors) os << " " << f;
      os << "\n";
    }
    os << "end\n";
  }
  if (run.tau || run.t_final || run.samples) {
    os << "run\n";
    if (run.tau) os << "  tau = " << format_real(*run.tau) << "\n";
    if (run.t_final) os << "  tfinal = " << format_real(*run.t_final) << "\n";
    if (run.samples) os << "  samples = " << *run.samples << "\n";
    os << "end\n";
  }
  return os.str();
}

}  // namespace cmemh
