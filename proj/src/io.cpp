#include "ikkt/io.hpp"

#include "ikkt/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ikkt {

namespace fs = std::filesystem;

namespace {

Json num_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) throw ConfigError("cannot serialize NaN");
  return v > 0 ? "inf" : "-inf";
}

double num_from_json(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
  }
  throw ConfigError(what + ": expected a number");
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num_to_json(v(i)));
  return a;
}

Vec vec_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(i) = num_from_json(j[i], what);
  return v;
}

Json mat_to_json(const Mat& m) {
  Json a = Json::array();
  for (int r = 0; r < m.rows(); ++r) a.push_back(vec_to_json(m.row(r).transpose()));
  return a;
}

Mat mat_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < j.size(); ++r) {
    const Vec row = vec_from_json(j[r], what);
    if (static_cast<size_t>(row.size()) != cols) throw ConfigError(what + ": ragged rows");
    m.row(r) = row.transpose();
  }
  return m;
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
  return *it;
}

void check_version(const Json& j, const std::string& where) {
  const auto& v = field(j, "format_version", where);
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion)
    throw ConfigError(where + ": unsupported format_version");
}

template <class T>
T get_as(const Json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(what + ": wrong type");
  }
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  const auto t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError("line " + std::to_string(line) + ": bad number '" + t + "'");
  return v;
}

}  // namespace

Json box_to_json(const BoxConstraint& b) {
  return {{"kind", b.kind == ConstraintKind::Exclusive ? "exclusive" : "inclusive"},
          {"target", b.target == ConstraintTarget::State ? "state" : "control"},
          {"dims", b.dims},
          {"lb", vec_to_json(b.lb)},
          {"ub", vec_to_json(b.ub)}};
}

BoxConstraint box_from_json(const Json& j) {
  const std::string w = "box";
  BoxConstraint b;
  const auto kind = get_as<std::string>(field(j, "kind", w), "box kind");
  if (kind == "exclusive") b.kind = ConstraintKind::Exclusive;
  else if (kind == "inclusive") b.kind = ConstraintKind::Inclusive;
  else throw ConfigError("box kind must be 'exclusive' or 'inclusive'");
  const auto target = get_as<std::string>(field(j, "target", w), "box target");
  if (target == "state") b.target = ConstraintTarget::State;
  else if (target == "control") b.target = ConstraintTarget::Control;
  else throw ConfigError("box target must be 'state' or 'control'");
  b.dims = get_as<std::vector<int>>(field(j, "dims", w), "box dims");
  b.lb = vec_from_json(field(j, "lb", w), "box lb");
  b.ub = vec_from_json(field(j, "ub", w), "box ub");
  if (b.lb.size() != b.nw() || b.ub.size() != b.nw())
    throw ConfigError("box bounds must match dims");
  return b;
}

Json boxes_to_json(const std::vector<BoxConstraint>& boxes) {
  Json a = Json::array();
  for (const auto& b : boxes) a.push_back(box_to_json(b));
  return {{"format_version", kFormatVersion}, {"boxes", a}};
}

std::vector<BoxConstraint> boxes_from_json(const Json& j) {
  check_version(j, "boxes");
  const auto& a = field(j, "boxes", "boxes");
  if (!a.is_array()) throw ConfigError("boxes: expected an array");
  std::vector<BoxConstraint> out;
  for (const auto& b : a) out.push_back(box_from_json(b));
  return out;
}

Json weights_to_json(const CostWeights& w) {
  return {{"format_version", kFormatVersion}, {"q", vec_to_json(w.q)}, {"r", vec_to_json(w.r)}};
}

CostWeights weights_from_json(const Json& j) {
  check_version(j, "weights");
  CostWeights w{vec_from_json(field(j, "q", "weights"), "q"),
                vec_from_json(field(j, "r", "weights"), "r")};
  if (const auto e = check_weights(w, 0.0); !e.empty()) throw ConfigError("weights: " + e);
  return w;
}

Json dynamics_to_json(const LinearDynamics& d) {
  return {{"A", mat_to_json(d.A)}, {"B", mat_to_json(d.B)}, {"dt", d.dt}, {"axis_map", d.axis_map}};
}

LinearDynamics dynamics_from_json(const Json& j) {
  const std::string w = "dynamics";
  LinearDynamics d;
  if (j.is_object() && j.contains("type")) {
    if (get_as<std::string>(j["type"], "dynamics type") != "free_floating")
      throw ConfigError("dynamics type must be 'free_floating'");
    const double dt = j.contains("dt") ? num_from_json(j["dt"], "dt") : 1.0;
    const int axes = j.contains("axes") ? get_as<int>(j["axes"], "axes") : 2;
    if (!(dt > 0.0) || axes < 1) throw ConfigError("dynamics: dt and axes must be positive");
    return LinearDynamics::free_floating(dt, axes);
  }
  d.A = mat_from_json(field(j, "A", w), "A");
  d.B = mat_from_json(field(j, "B", w), "B");
  if (j.contains("dt")) d.dt = num_from_json(j["dt"], "dt");
  if (j.contains("axis_map")) d.axis_map = get_as<std::vector<int>>(j["axis_map"], "axis_map");
  if (d.A.rows() != d.A.cols() || d.B.rows() != d.A.rows())
    throw ConfigError("dynamics: A must be square and B must have as many rows as A");
  derive_axis_map(d);
  return d;
}

Json scenario_to_json(const Scenario& s) {
  Json known = Json::array(), truth = Json::array(), eps = Json::array();
  for (const auto& b : s.known_constraints) known.push_back(box_to_json(b));
  for (const auto& b : s.unknown_constraints_truth) truth.push_back(box_to_json(b));
  for (const auto& e : s.endpoints)
    eps.push_back({{"start", vec_to_json(e.start)}, {"goal", vec_to_json(e.goal)}});
  Json j = {{"format_version", kFormatVersion},
            {"name", s.name},
            {"dynamics", dynamics_to_json(s.dynamics)},
            {"known_constraints", known},
            {"unknown_constraints_truth", truth},
            {"endpoints", eps},
            {"horizon", s.horizon}};
  if (s.weights_truth) {
    j["weights_truth"] = {{"q", vec_to_json(s.weights_truth->q)},
                          {"r", vec_to_json(s.weights_truth->r)}};
  }
  return j;
}

Scenario scenario_from_json(const Json& j) {
  const std::string w = "scenario";
  check_version(j, w);
  Scenario s;
  s.name = get_as<std::string>(field(j, "name", w), "name");
  s.dynamics = dynamics_from_json(field(j, "dynamics", w));
  auto boxes = [&](const char* key) {
    std::vector<BoxConstraint> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) throw ConfigError(std::string(key) + ": expected an array");
    for (const auto& b : j[key]) out.push_back(box_from_json(b));
    return out;
  };
  s.known_constraints = boxes("known_constraints");
  s.unknown_constraints_truth = boxes("unknown_constraints_truth");
  const auto& eps = field(j, "endpoints", w);
  if (!eps.is_array()) throw ConfigError("endpoints: expected an array");
  for (const auto& e : eps)
    s.endpoints.push_back({vec_from_json(field(e, "start", "endpoint"), "start"),
                           vec_from_json(field(e, "goal", "endpoint"), "goal")});
  if (j.contains("horizon")) s.horizon = get_as<int>(j["horizon"], "horizon");
  if (j.contains("weights_truth")) {
    const auto& wt = j["weights_truth"];
    s.weights_truth = CostWeights{vec_from_json(field(wt, "q", "weights_truth"), "q"),
                                  vec_from_json(field(wt, "r", "weights_truth"), "r")};
  }
  const auto rep = validate_scenario(s);
  if (!rep.ok()) throw ConfigError("scenario " + s.name + ": " + rep.issues.front());
  return s;
}

std::string trajectory_to_csv(const Trajectory& t) {
  std::ostringstream os;
  os << "# format_version: " << kFormatVersion << "\n";
  os << "k";
  for (int i = 0; i < t.states.cols(); ++i) os << ",x" << i + 1;
  for (int i = 0; i < t.controls.cols(); ++i) os << ",u" << i + 1;
  os << "\n";
  for (int k = 0; k < t.length(); ++k) {
    os << k;
    for (int i = 0; i < t.states.cols(); ++i) os << ',' << fmt(t.states(k, i));
    for (int i = 0; i < t.controls.cols(); ++i) {
      os << ',';
      if (k < t.controls.rows()) os << fmt(t.controls(k, i));
    }
    os << "\n";
  }
  return os.str();
}

Trajectory trajectory_from_csv(const std::string& text, int nx, int nu) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("format_version:");
      if (pos != std::string::npos &&
          parse_double(line.substr(pos + 15), lineno) != kFormatVersion)
        throw ConfigError("trajectory: unsupported format_version");
      continue;
    }
    header = split(line, ',');
    break;
  }
  if (header.empty() || trim(header[0]) != "k") throw ConfigError("trajectory: header must start with k");
  int hx = 0, hu = 0;
  for (size_t c = 1; c < header.size(); ++c) {
    const auto h = trim(header[c]);
    if (h == "x" + std::to_string(hx + 1) && hu == 0) ++hx;
    else if (h == "u" + std::to_string(hu + 1)) ++hu;
    else throw ConfigError("trajectory: unexpected column '" + h + "'");
  }
  if (hx == 0) throw ConfigError("trajectory: no state columns");
  if (hu == 0) throw ConfigError("missing controls: trajectory CSV has no u columns");
  if (nx >= 0 && hx != nx) throw ConfigError("trajectory: expected " + std::to_string(nx) + " state columns");
  if (nu >= 0 && hu != nu) throw ConfigError("missing controls: expected " + std::to_string(nu) + " control columns");

  std::vector<std::vector<double>> xs, us;
  bool ended = false;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw ConfigError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " columns");
    if (ended) throw ConfigError("missing controls: only the last row may leave controls blank");
    if (parse_double(cells[0], lineno) != static_cast<double>(xs.size()))
      throw ConfigError("line " + std::to_string(lineno) + ": k out of sequence");
    std::vector<double> x(hx), u;
    for (int i = 0; i < hx; ++i) x[i] = parse_double(cells[1 + i], lineno);
    const bool blank = std::all_of(cells.begin() + 1 + hx, cells.end(),
                                   [](const std::string& c) { return trim(c).empty(); });
    if (blank) {
      ended = true;
    } else {
      u.resize(hu);
      for (int i = 0; i < hu; ++i) {
        if (trim(cells[1 + hx + i]).empty())
          throw ConfigError("missing controls: line " + std::to_string(lineno));
        u[i] = parse_double(cells[1 + hx + i], lineno);
      }
      us.push_back(u);
    }
    xs.push_back(x);
  }
  if (!ended) throw ConfigError("trajectory: last row must leave controls blank");
  Trajectory t;
  t.states.resize(static_cast<Eigen::Index>(xs.size()), hx);
  t.controls.resize(static_cast<Eigen::Index>(us.size()), hu);
  for (size_t k = 0; k < xs.size(); ++k)
    for (int i = 0; i < hx; ++i) t.states(k, i) = xs[k][i];
  for (size_t k = 0; k < us.size(); ++k)
    for (int i = 0; i < hu; ++i) t.controls(k, i) = us[k][i];
  return t;
}

std::string segmentation_csv(const Segmentation& seg) {
  std::ostringstream os;
  os << "demo,j,first,last,trace_omega,residual,outlier\n";
  for (size_t d = 0; d < seg.demos.size(); ++d) {
    const auto& ds = seg.demos[d];
    for (size_t e = 0; e < ds.estimates.size(); ++e) {
      const auto& est = ds.estimates[e];
      const bool out = std::find(ds.outlier_windows.begin(), ds.outlier_windows.end(),
                                 static_cast<int>(e)) != ds.outlier_windows.end();
      os << d << ',' << est.j << ',' << est.first << ',' << est.last << ','
         << fmt(est.trace_omega) << ',' << fmt(est.residual) << ',' << (out ? 1 : 0) << "\n";
    }
  }
  return os.str();
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + p.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!(f << text)) throw ConfigError("cannot write " + p.string());
}

Json read_json(const fs::path& p) {
  try {
    return Json::parse(read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

fs::path demo_path(const fs::path& dir, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "demo_%03d.csv", index);
  return dir / buf;
}

void write_demos(const fs::path& dir, const std::vector<Trajectory>& trajs) {
  for (size_t i = 0; i < trajs.size(); ++i)
    write_text(demo_path(dir, static_cast<int>(i)), trajectory_to_csv(trajs[i]));
}

std::vector<Trajectory> read_demos(const fs::path& dir, int nx, int nu) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no trajectory CSV files in " + dir.string());
  std::vector<Trajectory> out;
  for (const auto& f : files) {
    try {
      out.push_back(trajectory_from_csv(read_text(f), nx, nu));
    } catch (const ConfigError& e) {
      throw ConfigError(f.filename().string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ikkt
