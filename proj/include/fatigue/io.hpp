#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fatigue/errors.hpp"
#include "fatigue/features.hpp"
#include "fatigue/lstm.hpp"
#include "fatigue/sequence.hpp"

namespace fatigue {

// Raised for malformed files; distinct from InputError so callers can map
// it to a data-error exit code.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw FormatError("cannot format number");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL frame stream: one object per line
//   {"t":0.0,"points":[[x,y],...68],"pitch":p,"yaw":y,"roll":r,
//    "features":[l,r,m,p],"label":0}
// points may be omitted when features are present; features and label are
// optional.
// ---------------------------------------------------------------------------

struct StreamRecord {
  LandmarkFrame frame;
  bool has_points = true;
  std::optional<FatigueFeatureVector> features;
};

inline nlohmann::json to_json(const StreamRecord& r) {
  nlohmann::json j;
  j["t"] = r.frame.timestamp;
  if (r.has_points) {
    auto pts = nlohmann::json::array();
    for (const auto& p : r.frame.points) pts.push_back({p.x, p.y});
    j["points"] = std::move(pts);
  }
  j["pitch"] = r.frame.pose.pitch;
  j["yaw"] = r.frame.pose.yaw;
  j["roll"] = r.frame.pose.roll;
  if (r.features) {
    const auto a = r.features->as_array();
    j["features"] = {a[0], a[1], a[2], a[3]};
  }
  if (r.frame.label) j["label"] = *r.frame.label;
  return j;
}

inline void write_stream(std::ostream& os, std::span<const StreamRecord> records) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline StreamRecord parse_stream_line(std::string_view line, std::size_t line_no) {
  auto fail = [&](const std::string& why) -> FormatError {
    return FormatError("stream line " + std::to_string(line_no) + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  if (!j.is_object() || !j.contains("t") || !j["t"].is_number()) throw fail("missing numeric 't'");
  StreamRecord r;
  r.frame.timestamp = j["t"].get<double>();
  for (const char* key : {"pitch", "yaw", "roll"}) {
    if (j.contains(key) && !j[key].is_number()) throw fail(std::string("'") + key + "' is not a number");
  }
  r.frame.pose.pitch = j.value("pitch", 0.0);
  r.frame.pose.yaw = j.value("yaw", 0.0);
  r.frame.pose.roll = j.value("roll", 0.0);
  if (j.contains("points")) {
    const auto& pts = j["points"];
    if (!pts.is_array() || pts.size() != kLandmarkCount) throw fail("'points' must hold 68 [x,y] pairs");
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
      const auto& p = pts[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw fail("point " + std::to_string(i) + " is not an [x,y] pair");
      }
      r.frame.points[i] = {p[0].get<double>(), p[1].get<double>()};
    }
  } else {
    r.has_points = false;
  }
  if (j.contains("features")) {
    const auto& f = j["features"];
    if (!f.is_array() || f.size() != 4) throw fail("'features' must hold 4 numbers");
    std::array<double, 4> a{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!f[i].is_number()) throw fail("'features' must hold 4 numbers");
      a[i] = f[i].get<double>();
    }
    r.features = FatigueFeatureVector::from_array(a);
  }
  if (!r.has_points && !r.features) throw fail("record needs 'points' or 'features'");
  if (j.contains("label")) {
    if (!j["label"].is_number_integer()) throw fail("'label' must be 0 or 1");
    const int l = j["label"].get<int>();
    if (l != 0 && l != 1) throw fail("'label' must be 0 or 1");
    r.frame.label = l;
  }
  return r;
}

inline std::vector<StreamRecord> read_stream(std::istream& is) {
  std::vector<StreamRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto r = parse_stream_line(line, line_no);
    if (!out.empty() && !(r.frame.timestamp > out.back().frame.timestamp)) {
      throw FormatError("stream line " + std::to_string(line_no) + ": timestamps must strictly increase");
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Features for a record: precomputed ones win, otherwise extracted from points.
inline FatigueFeatureVector record_features(const StreamRecord& r, const FeatureConfig& cfg = {}) {
  return r.features ? *r.features : build_feature_vector(r.frame, cfg);
}

// ---------------------------------------------------------------------------
// Dataset CSV
//   window,skip,stride,fps
//   60,1,30,30
//   label,stream,start,r0c0,r0c1,...      (row-major 4 x L)
//   1,0,0,...
// ---------------------------------------------------------------------------

struct DatasetHeader {
  std::size_t window_len = 0;
  std::size_t skip = 0;
  std::size_t stride = 0;
  double fps = 30.0;

  std::size_t cols() const { return retained_length(window_len, skip); }
};

struct Dataset {
  DatasetHeader header;
  std::vector<SequenceSample> samples;
  std::vector<std::size_t> stream;  // source stream index per sample
};

inline void write_dataset(std::ostream& os, const Dataset& d) {
  const auto& h = d.header;
  os << "window,skip,stride,fps\n"
     << h.window_len << ',' << h.skip << ',' << h.stride << ',' << format_double(h.fps) << '\n';
  const std::size_t cols = h.cols();
  os << "label,stream,start";
  for (std::size_t r = 0; r < SequenceSample::kRows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) os << ",r" << r << 'c' << c;
  }
  os << '\n';
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    if (s.cols != cols) throw FormatError("sample column count disagrees with header");
    os << s.label << ',' << (i < d.stream.size() ? d.stream[i] : 0) << ',' << s.start;
    for (double v : s.matrix) os << ',' << format_double(v);
    os << '\n';
  }
}

inline Dataset read_dataset(std::istream& is) {
  auto to_size = [](std::string_view s, const char* what) {
    const double v = parse_double(s);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw FormatError(std::string("dataset: bad ") + what + " '" + std::string(s) + "'");
    }
    return static_cast<std::size_t>(v);
  };
  std::string line;
  if (!std::getline(is, line) || line.rfind("window,skip,stride,fps", 0) != 0) {
    throw FormatError("dataset: missing 'window,skip,stride,fps' header");
  }
  Dataset d;
  if (!std::getline(is, line)) throw FormatError("dataset: missing header values");
  auto hv = split_csv(line);
  if (hv.size() != 4) throw FormatError("dataset: header needs 4 values");
  d.header = {to_size(hv[0], "window"), to_size(hv[1], "skip"), to_size(hv[2], "stride"), parse_double(hv[3])};
  if (d.header.window_len == 0) throw FormatError("dataset: window must be positive");
  const std::size_t cols = d.header.cols();
  if (!std::getline(is, line) || line.rfind("label,stream,start", 0) != 0) {
    throw FormatError("dataset: missing column header");
  }
  std::size_t line_no = 3;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv(line);
    if (f.size() != 3 + SequenceSample::kRows * cols) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": expected " +
                        std::to_string(3 + SequenceSample::kRows * cols) + " fields, got " +
                        std::to_string(f.size()));
    }
    SequenceSample s;
    const auto label = to_size(f[0], "label");
    if (label > 1) throw FormatError("dataset line " + std::to_string(line_no) + ": label must be 0 or 1");
    s.label = static_cast<int>(label);
    d.stream.push_back(to_size(f[1], "stream"));
    s.start = to_size(f[2], "start");
    s.cols = cols;
    s.window_len = d.header.window_len;
    s.skip = d.header.skip;
    s.matrix.reserve(SequenceSample::kRows * cols);
    for (std::size_t i = 3; i < f.size(); ++i) s.matrix.push_back(parse_double(f[i]));
    d.samples.push_back(std::move(s));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Report CSV: key,value rows
// ---------------------------------------------------------------------------

class Report {
 public:
  void add(std::string key, std::string value) { rows_.emplace_back(std::move(key), std::move(value)); }
  void add(std::string key, double value) { add(std::move(key), format_double(value)); }
  void add(std::string key, std::size_t value) { add(std::move(key), std::to_string(value)); }

  void write(std::ostream& os) const {
    os << "key,value\n";
    for (const auto& [k, v] : rows_) os << k << ',' << v << '\n';
  }
  const std::vector<std::pair<std::string, std::string>>& rows() const { return rows_; }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

// ---------------------------------------------------------------------------
// Checkpoint: self-describing text
//   fatigue-lstm-checkpoint 1
//   input_size 4
//   hidden_size 32
//   tensor W_i 32 36
//   <values>
//   ...
//   end
// Gate tensors W_{i,f,o,g} are H x (4 + H), biases b_{i,f,o,g} are H,
// head_w is 1 x H and head_b is 1. Values use shortest round-trip decimals.
// ---------------------------------------------------------------------------

inline void write_checkpoint(std::ostream& os, const LstmModel& m) {
  m.check();
  os << "fatigue-lstm-checkpoint 1\n"
     << "input_size " << m.input_size << '\n'
     << "hidden_size " << m.hidden_size << '\n';
  auto tensor = [&](const std::string& name, std::size_t rows, std::size_t cols,
                    std::span<const double> v) {
    os << "tensor " << name << ' ' << rows;
    if (cols) os << ' ' << cols;
    os << '\n';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_double(v[i]);
    os << '\n';
  };
  for (std::size_t g = 0; g < 4; ++g) {
    tensor(std::string("W_") + kGateNames[g], m.hidden_size, m.concat_size(), m.gate_weights(Gate(g)));
  }
  for (std::size_t g = 0; g < 4; ++g) {
    tensor(std::string("b_") + kGateNames[g], m.hidden_size, 0, m.gate_bias(Gate(g)));
  }
  tensor("head_w", 1, m.hidden_size, m.head_w);
  tensor("head_b", 1, 0, std::span<const double>(&m.head_b, 1));
  os << "end\n";
}

inline LstmModel read_checkpoint(std::istream& is) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "fatigue-lstm-checkpoint" || version != 1) {
    throw FormatError("checkpoint: bad magic line");
  }
  std::size_t input = 0, hidden = 0;
  std::string key;
  if (!(is >> key >> input) || key != "input_size") throw FormatError("checkpoint: missing input_size");
  if (!(is >> key >> hidden) || key != "hidden_size") throw FormatError("checkpoint: missing hidden_size");
  if (input == 0 || hidden == 0) throw FormatError("checkpoint: sizes must be positive");
  LstmModel m = LstmModel::zeros(hidden, input);
  auto read_tensor = [&](const std::string& name, std::span<double> dst, std::size_t rows,
                         std::size_t cols) {
    std::string word, got;
    if (!(is >> word >> got) || word != "tensor" || got != name) {
      throw FormatError("checkpoint: expected tensor " + name);
    }
    std::string line;
    std::getline(is, line);
    std::istringstream dims(line);
    std::size_t r = 0, c = 0;
    dims >> r;
    if (!(dims >> c)) c = 0;
    if (r != rows || c != cols) throw FormatError("checkpoint: tensor " + name + " has wrong shape");
    std::string tok;
    for (auto& v : dst) {
      if (!(is >> tok)) throw FormatError("checkpoint: tensor " + name + " is truncated");
      v = parse_double(tok);
    }
  };
  for (std::size_t g = 0; g < 4; ++g) {
    read_tensor(std::string("W_") + kGateNames[g], m.gate_weights(Gate(g)), hidden, m.concat_size());
  }
  for (std::size_t g = 0; g < 4; ++g) read_tensor(std::string("b_") + kGateNames[g], m.gate_bias(Gate(g)), hidden, 0);
  read_tensor("head_w", m.head_w, 1, hidden);
  read_tensor("head_b", std::span<double>(&m.head_b, 1), 1, 0);
  if (!(is >> key) || key != "end") throw FormatError("checkpoint: missing end marker");
  return m;
}

// File helpers ---------------------------------------------------------------

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return is;
}

}  // namespace fatigue
