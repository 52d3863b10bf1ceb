#include "esvo/io.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "esvo/error.hpp"

namespace esvo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  return in;
}

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParse, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw Error(ErrorCode::kParse, "not a number: '" + text + "'");
  return v;
}

long long parse_integer(const std::string& text) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw Error(ErrorCode::kParse, "not an integer: '" + text + "'");
  return v;
}

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) parse_error(source, n, "expected key=value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) parse_error(source, n, "empty key");
    if (!out.emplace(key, value).second) parse_error(source, n, "duplicate key '" + key + "'");
  }
  return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_key_values(in, path.string());
}

StereoRig read_calibration(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  static const std::set<std::string> kKeys = {"fx_l", "fy_l", "cx_l", "cy_l", "fx_r", "fy_r",
                                              "cx_r", "cy_r", "width", "height", "baseline_m"};
  for (const auto& k : kKeys)
    if (!kv.count(k)) throw Error(ErrorCode::kParse, path.string() + ": missing calibration key '" + k + "'");
  for (const auto& [k, v] : kv)
    if (!kKeys.count(k)) throw Error(ErrorCode::kParse, path.string() + ": unknown calibration key '" + k + "'");
  const auto num = [&](const char* k) { return parse_double(kv.at(k)); };
  const int w = static_cast<int>(parse_integer(kv.at("width")));
  const int h = static_cast<int>(parse_integer(kv.at("height")));
  const CameraModel left(num("fx_l"), num("fy_l"), num("cx_l"), num("cy_l"), w, h);
  const CameraModel right(num("fx_r"), num("fy_r"), num("cx_r"), num("cy_r"), w, h);
  return StereoRig::rectified(left, right, num("baseline_m"));
}

void write_calibration(const std::filesystem::path& path, const StereoRig& rig) {
  auto out = open_out(path);
  out << "fx_l=" << format_double(rig.left.fx) << "\n"
      << "fy_l=" << format_double(rig.left.fy) << "\n"
      << "cx_l=" << format_double(rig.left.cx) << "\n"
      << "cy_l=" << format_double(rig.left.cy) << "\n"
      << "fx_r=" << format_double(rig.right.fx) << "\n"
      << "fy_r=" << format_double(rig.right.fy) << "\n"
      << "cx_r=" << format_double(rig.right.cx) << "\n"
      << "cy_r=" << format_double(rig.right.cy) << "\n"
      << "width=" << rig.left.width << "\n"
      << "height=" << rig.left.height << "\n"
      << "baseline_m=" << format_double(rig.baseline()) << "\n";
}

std::string format_event(const Event& e) {
  return format_double(e.t) + " " + std::to_string(e.x) + " " + std::to_string(e.y) + " " +
         (e.polarity > 0 ? "1" : "0");
}

Event parse_event(const std::string& line) {
  const auto tok = split_ws(line);
  if (tok.size() != 4) throw Error(ErrorCode::kParse, "event line needs 4 fields: '" + line + "'");
  Event e;
  e.t = parse_double(tok[0]);
  const long long x = parse_integer(tok[1]);
  const long long y = parse_integer(tok[2]);
  if (x < 0 || y < 0 || x > 65535 || y > 65535) throw Error(ErrorCode::kParse, "event pixel out of range");
  e.x = static_cast<std::uint16_t>(x);
  e.y = static_cast<std::uint16_t>(y);
  if (tok[3] == "1") {
    e.polarity = 1;
  } else if (tok[3] == "0") {
    e.polarity = -1;
  } else {
    throw Error(ErrorCode::kParse, "event polarity must be 0 or 1");
  }
  return e;
}

EventFileReader::EventFileReader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
  if (!in_) throw Error(ErrorCode::kIo, "cannot open: " + path_);
}

std::optional<Event> EventFileReader::next() {
  if (pending_) {
    auto e = pending_;
    pending_.reset();
    return e;
  }
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    try {
      return parse_event(s);
    } catch (const Error& err) {
      parse_error(path_, line_no_, err.what());
    }
  }
  return std::nullopt;
}

void EventFileReader::read_until(double t_end, std::vector<Event>& out) {
  while (auto e = next()) {
    if (e->t > t_end) {
      pending_ = e;
      return;
    }
    out.push_back(*e);
  }
}

bool EventFileReader::done() {
  if (pending_) return false;
  pending_ = next();
  return !pending_.has_value();
}

std::vector<Event> read_events(const std::filesystem::path& path) {
  EventFileReader reader(path);
  std::vector<Event> out;
  while (auto e = reader.next()) out.push_back(*e);
  return out;
}

void write_events(const std::filesystem::path& path, const std::vector<Event>& events) {
  auto out = open_out(path);
  for (const Event& e : events) out << format_event(e) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<PoseRecord> to_pose_records(const TrajectoryDB& traj) {
  std::vector<PoseRecord> out;
  out.reserve(traj.size());
  for (const auto& k : traj.knots()) {
    Eigen::Quaterniond q = k.pose.quaternion();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    out.push_back({k.t, k.pose.translation, q});
  }
  return out;
}

std::vector<PoseRecord> read_pose_records(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<PoseRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto tok = split_ws(s);
    if (tok.size() != 8) parse_error(path.string(), n, "pose line needs 8 fields");
    try {
      PoseRecord r;
      r.t = parse_double(tok[0]);
      r.translation = {parse_double(tok[1]), parse_double(tok[2]), parse_double(tok[3])};
      r.rotation = Eigen::Quaterniond(parse_double(tok[7]), parse_double(tok[4]), parse_double(tok[5]),
                                      parse_double(tok[6]));
      out.push_back(r);
    } catch (const Error& err) {
      parse_error(path.string(), n, err.what());
    }
  }
  return out;
}

void write_pose_records(const std::filesystem::path& path, const std::vector<PoseRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records) {
    out << format_double(r.t) << ' ' << format_double(r.translation.x()) << ' '
        << format_double(r.translation.y()) << ' ' << format_double(r.translation.z()) << ' '
        << format_double(r.rotation.x()) << ' ' << format_double(r.rotation.y()) << ' '
        << format_double(r.rotation.z()) << ' ' << format_double(r.rotation.w()) << '\n';
  }
}

TrajectoryDB read_trajectory(const std::filesystem::path& path) {
  TrajectoryDB traj;
  for (const auto& r : read_pose_records(path)) {
    if (std::abs(r.rotation.norm() - 1.0) > 1e-6)
      throw Error(ErrorCode::kParse, path.string() + ": quaternion is not unit length");
    try {
      traj.append(r.t, SE3(r.rotation, r.translation));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
    }
  }
  return traj;
}

void write_trajectory(const std::filesystem::path& path, const TrajectoryDB& traj) {
  write_pose_records(path, to_pose_records(traj));
}

bool FloatMap::operator==(const FloatMap& o) const {
  if (width != o.width || height != o.height || t != o.t || values.size() != o.values.size()) return false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool na = std::isnan(values[i]);
    const bool nb = std::isnan(o.values[i]);
    if (na != nb || (!na && values[i] != o.values[i])) return false;
  }
  return true;
}

FloatMap read_float_map(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, path.string() + ": empty float map");
  const auto head = split_ws(line);
  if (head.size() != 3) throw Error(ErrorCode::kParse, path.string() + ": header must be 'width height t'");
  FloatMap map;
  map.width = static_cast<int>(parse_integer(head[0]));
  map.height = static_cast<int>(parse_integer(head[1]));
  map.t = parse_double(head[2]);
  if (map.width <= 0 || map.height <= 0) throw Error(ErrorCode::kParse, path.string() + ": bad size");
  map.values.reserve(static_cast<std::size_t>(map.width) * map.height);
  std::string tok;
  while (in >> tok) map.values.push_back(parse_double(tok));
  if (map.values.size() != static_cast<std::size_t>(map.width) * map.height)
    throw Error(ErrorCode::kParse, path.string() + ": value count does not match header");
  return map;
}

void write_float_map(const std::filesystem::path& path, const FloatMap& map) {
  auto out = open_out(path);
  out << map.width << ' ' << map.height << ' ' << format_double(map.t) << '\n';
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (x) out << ' ';
      const double v = map.at(x, y);
      out << (std::isnan(v) ? std::string("nan") : format_double(v));
    }
    out << '\n';
  }
}

FloatMap inverse_depth_map(const SemiDenseDepthMap& map) {
  FloatMap out{map.width(), map.height(), map.t(),
               std::vector<double>(static_cast<std::size_t>(map.width()) * map.height(), std::nan(""))};
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (const auto& c = map.at(x, y)) out.values[static_cast<std::size_t>(y) * map.width() + x] = c->mu;
  return out;
}

FloatMap sigma_map(const SemiDenseDepthMap& map) {
  FloatMap out{map.width(), map.height(), map.t(),
               std::vector<double>(static_cast<std::size_t>(map.width()) * map.height(), std::nan(""))};
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (const auto& c = map.at(x, y))
        out.values[static_cast<std::size_t>(y) * map.width() + x] = std::sqrt(variance_of(*c));
  return out;
}

void write_ply(const std::filesystem::path& path, const std::vector<Eigen::Vector3d>& points) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const auto& p : points)
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
}

std::vector<Eigen::Vector3d> read_ply(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t count = 0;
  bool ascii = false;
  if (!std::getline(in, line) || trim(line) != "ply") throw Error(ErrorCode::kParse, path.string() + ": not a PLY");
  while (std::getline(in, line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "format") ascii = tok.size() > 1 && tok[1] == "ascii";
    if (tok[0] == "element" && tok.size() == 3 && tok[1] == "vertex")
      count = static_cast<std::size_t>(parse_integer(tok[2]));
    if (tok[0] == "end_header") break;
  }
  if (!ascii) throw Error(ErrorCode::kParse, path.string() + ": only ASCII PLY is supported");
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::kParse, path.string() + ": truncated vertex list");
    const auto tok = split_ws(line);
    if (tok.size() < 3) throw Error(ErrorCode::kParse, path.string() + ": vertex needs x y z");
    out.emplace_back(parse_double(tok[0]), parse_double(tok[1]), parse_double(tok[2]));
  }
  return out;
}

}  // namespace esvo
