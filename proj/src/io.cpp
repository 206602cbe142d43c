#include "rgfree/io.hpp"

#include "rgfree/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rgfree {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

double number_field(const nlohmann::json& j, const char* key, double fallback, bool required) {
  if (!j.contains(key)) {
    if (required) throw ParseError(std::string("model config is missing required key '") + key + "'");
    return fallback;
  }
  const auto& v = j.at(key);
  if (!v.is_number()) throw ParseError(std::string("model config key '") + key + "' must be a number");
  return v.get<double>();
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

double parse_number(const std::string& t, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + t + "' in " + what);
  }
}

int parse_int(const std::string& t, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ParseError("invalid integer '" + t + "' in " + what);
  }
}

}  // namespace

ModelSpec parse_model_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("model config must be a JSON object");

  static const std::set<std::string> known = {"n_spins", "epsilons", "g", "gamma", "lambda",
                                              "alpha_x", "beta_x", "alpha_y", "beta_y"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ParseError("unknown model config key '" + key + "'");
  }

  if (!j.contains("n_spins")) throw ParseError("model config is missing required key 'n_spins'");
  if (!j.at("n_spins").is_number_integer()) throw ParseError("'n_spins' must be an integer");
  const long n = j.at("n_spins").get<long>();
  if (!j.contains("epsilons")) throw ParseError("model config is missing required key 'epsilons'");
  const auto& eps = j.at("epsilons");
  if (!eps.is_array()) throw ParseError("'epsilons' must be an array of numbers");

  ModelSpec spec;
  for (const auto& e : eps) {
    if (!e.is_number()) throw ParseError("'epsilons' must be an array of numbers");
    spec.epsilons.push_back(e.get<double>());
  }
  if (static_cast<long>(spec.epsilons.size()) != n) {
    throw ParseError("'n_spins' is " + std::to_string(n) + " but 'epsilons' has " +
                     std::to_string(spec.epsilons.size()) + " entries");
  }
  spec.g = number_field(j, "g", 0.0, true);
  spec.gamma = number_field(j, "gamma", 0.0, false);
  spec.lambda = number_field(j, "lambda", 0.0, false);
  spec.alpha_x = number_field(j, "alpha_x", 0.0, false);
  spec.beta_x = number_field(j, "beta_x", 1.0, false);
  spec.alpha_y = number_field(j, "alpha_y", 0.0, false);
  spec.beta_y = number_field(j, "beta_y", 1.0, false);
  validate(spec);
  return spec;
}

ModelSpec load_model_config(const std::filesystem::path& path) {
  return parse_model_config(read_text_file(path));
}

std::string model_config_text(const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["n_spins"] = spec.n_spins();
  j["epsilons"] = spec.epsilons;
  j["g"] = spec.g;
  j["gamma"] = spec.gamma;
  j["lambda"] = spec.lambda;
  j["alpha_x"] = spec.alpha_x;
  j["beta_x"] = spec.beta_x;
  j["alpha_y"] = spec.alpha_y;
  j["beta_y"] = spec.beta_y;
  return j.dump(2) + "\n";
}

SpectrumFile spectrum_from_solutions(const SolutionSet& set, const ModelSpec& spec) {
  SpectrumFile f;
  f.source = "solver";
  f.n_spins = set.n_spins;
  f.g = spec.g;
  f.spec_hash = spec_hash_hex(spec);
  for (const auto& s : set.solutions) f.rows.push_back({s.sign_pattern.to_string(), s.r, s.residual});
  return f;
}

std::string spectrum_text(const SpectrumFile& file) {
  std::ostringstream out;
  out << "# rgfree spectrum\n";
  out << "source " << file.source << "\n";
  out << "n_spins " << file.n_spins << "\n";
  out << "g " << format_double(file.g) << "\n";
  out << "spec_hash " << file.spec_hash << "\n";
  for (const auto& row : file.rows) {
    out << row.label;
    for (double v : row.r) out << ' ' << format_double(v);
    out << ' ' << format_double(row.residual) << "\n";
  }
  return out.str();
}

SpectrumFile parse_spectrum(const std::string& text) {
  SpectrumFile f;
  f.n_spins = -1;
  bool have_g = false;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto t = tokens(line);
    if (t.empty()) continue;
    const std::string where = "spectrum line " + std::to_string(line_no);
    if (t[0] == "source" && t.size() == 2) {
      f.source = t[1];
    } else if (t[0] == "n_spins" && t.size() == 2) {
      f.n_spins = parse_int(t[1], where);
    } else if (t[0] == "g" && t.size() == 2) {
      f.g = parse_number(t[1], where);
      have_g = true;
    } else if (t[0] == "spec_hash" && t.size() == 2) {
      f.spec_hash = t[1];
    } else {
      if (f.n_spins < 1) throw ParseError(where + ": data row before 'n_spins' header");
      if (static_cast<int>(t.size()) != f.n_spins + 2) {
        throw ParseError(where + ": expected " + std::to_string(f.n_spins + 2) + " columns");
      }
      SpectrumRow row;
      row.label = t[0];
      for (int i = 0; i < f.n_spins; ++i) row.r.push_back(parse_number(t[1 + i], where));
      row.residual = parse_number(t.back(), where);
      f.rows.push_back(std::move(row));
    }
  }
  if (f.n_spins < 1 || !have_g || f.spec_hash.empty()) {
    throw ParseError("spectrum file is missing one of the n_spins, g, spec_hash headers");
  }
  return f;
}

std::string state_text(const StateFile& file) {
  std::ostringstream out;
  out << "# rgfree state\n";
  if (!file.spec_hash.empty()) out << "spec_hash " << file.spec_hash << "\n";
  if (!file.label.empty()) out << "label " << file.label << "\n";
  out << "n_spins " << file.state.n_spins() << "\n";
  for (std::size_t b = 0; b < file.state.dim(); ++b) {
    out << b << ' ' << format_double(file.state[b].real()) << ' '
        << format_double(file.state[b].imag()) << "\n";
  }
  return out.str();
}

StateFile parse_state(const std::string& text) {
  StateFile f;
  int n = -1;
  std::size_t next = 0;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto t = tokens(line);
    if (t.empty()) continue;
    const std::string where = "state line " + std::to_string(line_no);
    if (t[0] == "spec_hash" && t.size() == 2) {
      f.spec_hash = t[1];
    } else if (t[0] == "label" && t.size() == 2) {
      f.label = t[1];
    } else if (t[0] == "n_spins" && t.size() == 2) {
      n = parse_int(t[1], where);
      if (n < 1 || n > 30) throw ParseError(where + ": n_spins out of range");
      f.state = StateVector(n);
    } else {
      if (n < 1) throw ParseError(where + ": amplitude before 'n_spins' header");
      if (t.size() != 3) throw ParseError(where + ": expected 'index re im'");
      const int idx = parse_int(t[0], where);
      if (idx < 0 || static_cast<std::size_t>(idx) != next) {
        throw ParseError(where + ": basis index " + t[0] + " out of order (expected " +
                         std::to_string(next) + ")");
      }
      if (next >= f.state.dim()) throw ParseError(where + ": too many amplitudes");
      f.state[next] = Complex(parse_number(t[1], where), parse_number(t[2], where));
      ++next;
    }
  }
  if (n < 1) throw ParseError("state file has no 'n_spins' header");
  if (next != f.state.dim()) {
    throw ParseError("state file has " + std::to_string(next) + " amplitudes, expected " +
                     std::to_string(f.state.dim()));
  }
  return f;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw InputError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rgfree
