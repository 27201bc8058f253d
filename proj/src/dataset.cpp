#include "spdfuse/dataset.hpp"

#include "spdfuse/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace spdfuse {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw Error(ErrorCode::BadHeader, path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

// Returns the data rows (time column dropped) after checking the header.
std::vector<std::vector<double>> read_table(const fs::path& path, const std::vector<std::string>& header) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || split(line, ',') != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::BadHeader, path.string() + ": expected header '" + want + "'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::BadHeader, path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(parse_number(cells[i], path, lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool roster_allows(const std::vector<std::string>& roster, const std::string& name) {
  if (roster.empty()) return true;
  for (const std::string& r : roster) {
    if (!r.empty() && r.back() == '*' ? name.compare(0, r.size() - 1, r, 0, r.size() - 1) == 0 : name == r)
      return true;
  }
  return false;
}

std::vector<fs::path> sorted_dirs(const fs::path& p) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_directory()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Channel read_channel_csv(const fs::path& path, const std::string& name, double rate) {
  Channel ch{name, rate, {}};
  for (const auto& row : read_table(path, {"t", "value"})) ch.samples.push_back(row[0]);
  if (ch.samples.empty()) throw Error(ErrorCode::EmptyChannel, path.string() + " holds no samples");
  return ch;
}

LandmarkTrack read_landmarks_csv(const fs::path& path, double frame_rate) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string first;
  std::getline(is, first);
  const auto header = split(first, ',');
  const bool three_d = header.size() >= 4 && header[3] == "z0";
  const std::size_t dims = three_d ? 3 : 2;
  if (header.size() < 1 + 2 * dims || (header.size() - 1) % dims != 0 || header[0] != "t") {
    throw Error(ErrorCode::BadHeader, path.string() + ": expected header 't,x0,y0,...'");
  }
  std::vector<std::string> want{"t"};
  const std::size_t points = (header.size() - 1) / dims;
  for (std::size_t i = 0; i < points; ++i) {
    want.push_back("x" + std::to_string(i));
    want.push_back("y" + std::to_string(i));
    if (three_d) want.push_back("z" + std::to_string(i));
  }
  if (header != want) throw Error(ErrorCode::BadHeader, path.string() + ": landmark columns out of order");

  LandmarkTrack track;
  track.frame_rate = frame_rate;
  for (const auto& row : read_table(path, want)) {
    std::vector<std::array<double, 3>> frame(points);
    for (std::size_t i = 0; i < points; ++i)
      frame[i] = {row[dims * i], row[dims * i + 1], three_d ? row[dims * i + 2] : 0.0};
    track.frames.push_back(std::move(frame));
  }
  return track;
}

IngestResult ingest(const fs::path& root, const std::vector<std::string>& roster) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::Io, root.string() + " is not a directory");
  IngestResult result;
  for (const fs::path& subject : sorted_dirs(root)) {
    for (const fs::path& trial : sorted_dirs(subject)) {
      const fs::path meta_path = trial / "meta.json";
      if (!fs::exists(meta_path)) throw Error(ErrorCode::LabelMissing, meta_path.string() + " is missing");
      nlohmann::json meta;
      try {
        std::ifstream is(meta_path);
        meta = nlohmann::json::parse(is);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadHeader, meta_path.string() + ": " + e.what());
      }
      if (!meta.contains("label") || !meta["label"].is_number_integer() ||
          (meta["label"].get<int>() != 0 && meta["label"].get<int>() != 1)) {
        throw Error(ErrorCode::LabelMissing, meta_path.string() + " carries no 0/1 label");
      }
      const nlohmann::json rates = meta.value("rates", nlohmann::json::object());
      auto rate_of = [&](const std::string& name) {
        if (!rates.contains(name) || !rates[name].is_number() || !(rates[name].get<double>() > 0.0)) {
          throw Error(ErrorCode::BadHeader, meta_path.string() + " has no positive rate for '" + name + "'");
        }
        return rates[name].get<double>();
      };

      Recording rec{subject.filename().string(), trial.filename().string(), meta["label"].get<int>(), {}};
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(trial))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const fs::path& f : files) {
        const std::string name = f.stem().string();
        if (name == "landmarks") {
          for (Channel& ch : pairwise_distances(read_landmarks_csv(f, rate_of("landmarks")))) {
            if (!roster_allows(roster, ch.name)) throw Error(ErrorCode::UnknownChannel, f.string() + ": " + ch.name);
            rec.channels.push_back(std::move(ch));
          }
          continue;
        }
        if (!roster_allows(roster, name)) {
          throw Error(ErrorCode::UnknownChannel, f.string() + " is not in the channel roster");
        }
        rec.channels.push_back(read_channel_csv(f, name, rate_of(name)));
      }
      for (const std::string& r : roster) {
        if (!r.empty() && r.back() == '*') continue;
        if (rec.find(r) == nullptr) throw Error(ErrorCode::MissingChannel, (trial / (r + ".csv")).string() + " is missing");
      }
      if (rec.channels.empty()) throw Error(ErrorCode::MissingChannel, trial.string() + " holds no channels");
      rec.validate();

      double longest = 0.0;
      for (const Channel& ch : rec.channels) longest = std::max(longest, ch.duration());
      for (const Channel& ch : rec.channels) {
        if (longest - ch.duration() >= 1.0 / ch.rate) {
          std::ostringstream os;
          os << rec.subject_id << "/" << rec.trial_id << "/" << ch.name << ": " << ch.duration() << " s vs "
             << longest << " s, trimmed";
          result.warnings.push_back(os.str());
        }
      }
      result.recordings.push_back(std::move(rec));
    }
  }
  if (result.recordings.empty()) throw Error(ErrorCode::EmptySet, root.string() + " holds no trials");
  return result;
}

void write_dataset(const fs::path& root, std::span<const Recording> recordings) {
  for (const Recording& rec : recordings) {
    const fs::path dir = root / rec.subject_id / rec.trial_id;
    fs::create_directories(dir);
    nlohmann::ordered_json meta;
    meta["label"] = rec.label;
    meta["rates"] = nlohmann::ordered_json::object();
    for (const Channel& ch : rec.channels) {
      meta["rates"][ch.name] = ch.rate;
      std::ofstream os(dir / (ch.name + ".csv"), std::ios::binary | std::ios::trunc);
      if (!os) throw Error(ErrorCode::Io, "cannot write " + (dir / (ch.name + ".csv")).string());
      os << "t,value\n";
      for (std::size_t i = 0; i < ch.samples.size(); ++i)
        os << fmt(static_cast<double>(i) / ch.rate) << ',' << fmt(ch.samples[i]) << '\n';
    }
    std::ofstream ms(dir / "meta.json", std::ios::binary | std::ios::trunc);
    ms << meta.dump(2) << '\n';
  }
}

}  // namespace spdfuse
