#include "stagecost/trajectory_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "stagecost/errors.hpp"
#include "stagecost/fsio.hpp"

namespace stagecost {
namespace {

constexpr const char* kHeader =
    "depth,k,split,loss,accuracy,param_norm_sq,output_residual_norm";
constexpr const char* kHeaderEpoch =
    "epoch,depth,k,split,loss,accuracy,param_norm_sq,output_residual_norm";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_record(const TrajectoryRecord& rec) {
  size_t n = static_cast<size_t>(rec.depth);
  if (rec.depth < 0 || rec.losses.size() != n + 1 || rec.accuracies.size() != n + 1 ||
      rec.param_norms_sq.size() != n || rec.residual_norms.size() != n) {
    throw ValidationError("trajectory record is missing per-depth entries");
  }
  if (rec.split.empty() || rec.split.find_first_of(",\n\r") != std::string::npos) {
    throw ValidationError("split tag must be non-empty and comma-free");
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

int64_t parse_int(const std::string& s, const std::string& ctx) {
  if (s.empty()) throw IoError(ctx + ": expected an integer, got an empty field");
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) throw IoError(ctx + ": bad integer \"" + s + "\"");
  return static_cast<int64_t>(v);
}

double parse_double(const std::string& s, const std::string& ctx) {
  if (s.empty()) throw IoError(ctx + ": expected a number, got an empty field");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw IoError(ctx + ": bad number \"" + s + "\"");
  return v;
}

}  // namespace

std::string trajectory_csv_header(bool with_epoch) {
  return with_epoch ? kHeaderEpoch : kHeader;
}

std::string trajectory_csv_rows(const TrajectoryRecord& rec, bool with_epoch) {
  check_record(rec);
  std::string out;
  for (int64_t k = 0; k <= rec.depth; ++k) {
    std::vector<std::string> f;
    if (with_epoch) f.push_back(std::to_string(rec.epoch));
    f.push_back(std::to_string(rec.depth));
    f.push_back(std::to_string(k));
    f.push_back(rec.split);
    f.push_back(fmt17(rec.losses[static_cast<size_t>(k)]));
    f.push_back(fmt17(rec.accuracies[static_cast<size_t>(k)]));
    bool block_row = k < rec.depth;
    f.push_back(block_row ? fmt17(rec.param_norms_sq[static_cast<size_t>(k)]) : "");
    f.push_back(block_row ? fmt17(rec.residual_norms[static_cast<size_t>(k)]) : "");
    for (size_t i = 0; i < f.size(); ++i) {
      if (i) out += ',';
      out += f[i];
    }
    out += '\n';
  }
  return out;
}

void append_trajectory_csv(const std::string& path, const TrajectoryRecord& rec,
                           bool with_epoch) {
  std::string expected = trajectory_csv_header(with_epoch);
  std::string content;
  {
    std::string existing;
    try {
      existing = read_file(path, "trajectory csv");
    } catch (const IoError&) {
      existing.clear();
    }
    if (existing.empty()) {
      content = expected + "\n";
    } else {
      size_t eol = existing.find('\n');
      if (existing.substr(0, eol) != expected) {
        throw IoError("trajectory csv " + path + " has a different header; refusing to append");
      }
      content = existing;
    }
  }
  content += trajectory_csv_rows(rec, with_epoch);
  write_file_atomic(path, content, "trajectory csv");
}

std::vector<TrajectoryRecord> read_trajectory_csv(const std::string& path) {
  std::string content = read_file(path, "trajectory csv");
  size_t pos = 0;
  auto next_line = [&](std::string& line) {
    if (pos >= content.size()) return false;
    size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  std::string line;
  if (!next_line(line)) throw IoError("empty trajectory csv: " + path);
  bool with_epoch;
  if (line == kHeaderEpoch) {
    with_epoch = true;
  } else if (line == kHeader) {
    with_epoch = false;
  } else {
    throw IoError("unrecognized trajectory csv header in " + path);
  }
  const size_t want_fields = with_epoch ? 8 : 7;

  std::vector<TrajectoryRecord> out;
  TrajectoryRecord cur;
  bool open = false;
  auto close = [&]() {
    if (!open) return;
    size_t n = static_cast<size_t>(cur.depth);
    if (cur.losses.size() != n + 1 || cur.param_norms_sq.size() != n) {
      throw IoError("trajectory csv " + path + " ends mid-record");
    }
    out.push_back(std::move(cur));
    cur = TrajectoryRecord{};
    open = false;
  };

  size_t line_no = 1;
  while (next_line(line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string ctx = path + ":" + std::to_string(line_no);
    std::vector<std::string> f = split_fields(line);
    if (f.size() != want_fields) {
      throw IoError(ctx + ": expected " + std::to_string(want_fields) + " fields, got " +
                    std::to_string(f.size()));
    }
    size_t i = 0;
    int64_t epoch = with_epoch ? parse_int(f[i++], ctx) : -1;
    int64_t depth = parse_int(f[i++], ctx);
    int64_t k = parse_int(f[i++], ctx);
    std::string split = f[i++];
    double loss = parse_double(f[i++], ctx);
    double acc = parse_double(f[i++], ctx);
    const std::string& param = f[i++];
    const std::string& resid = f[i++];

    if (k == 0) {
      close();
      open = true;
      cur.depth = depth;
      cur.split = split;
      cur.epoch = epoch;
    } else if (!open || depth != cur.depth || split != cur.split || epoch != cur.epoch ||
               k != static_cast<int64_t>(cur.losses.size())) {
      throw IoError(ctx + ": row does not continue the current record");
    }
    if (k < 0 || k > depth) throw IoError(ctx + ": depth index out of range");
    cur.losses.push_back(loss);
    cur.accuracies.push_back(acc);
    if (k < depth) {
      cur.param_norms_sq.push_back(parse_double(param, ctx));
      cur.residual_norms.push_back(parse_double(resid, ctx));
    } else if (!param.empty() || !resid.empty()) {
      throw IoError(ctx + ": block columns must be empty on the final depth row");
    }
  }
  close();
  return out;
}

}  // namespace stagecost
