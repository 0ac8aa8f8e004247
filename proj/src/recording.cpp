#include "recording.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "errors.hpp"

namespace fs = std::filesystem;

namespace cpcseq::data {

std::vector<std::string> RecordingSet::subject_ids() const {
  std::vector<std::string> ids;
  ids.reserve(recordings.size());
  for (const auto& r : recordings) ids.push_back(r.subject_id);
  return ids;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_real(const std::string& s, const std::string& file, long row, const char* what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw DataError(file + ": row " + std::to_string(row) + ": unparseable " + what + " '" + s + "'");
  if (!std::isfinite(v))
    throw DataError(file + ": row " + std::to_string(row) + ": non-finite " + what + " '" + s + "'");
  return v;
}

long parse_label(const std::string& s, const std::string& file, long row) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError(file + ": row " + std::to_string(row) + ": unparseable label '" + s + "'");
  if (v < -1) throw DataError(file + ": row " + std::to_string(row) + ": negative label " + s);
  return v;
}

struct PendingRecording {
  std::string subject;
  std::vector<double> timestamps;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

void load_one_file(const std::string& file, std::vector<std::string>& channels,
                   std::vector<PendingRecording>& pending) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open recording file: " + file);

  std::string line;
  if (!std::getline(in, line)) throw DataError(file + ": no recordings (empty file)");
  auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "subject" || header[1] != "timestamp" ||
      header.back() != "label")
    throw DataError(file + ": expected header 'subject,timestamp,<channel...>,label'");
  std::vector<std::string> file_channels(header.begin() + 2, header.end() - 1);
  if (channels.empty()) {
    channels = file_channels;
  } else if (channels != file_channels) {
    throw DataError(file + ": channel list differs from previously loaded files");
  }

  const std::size_t ncols = header.size();
  long row = 1;  // header was row 1
  PendingRecording* cur = nullptr;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != ncols)
      throw DataError(file + ": row " + std::to_string(row) + ": expected " +
                      std::to_string(ncols) + " fields, got " + std::to_string(fields.size()));
    const std::string& subject = fields[0];
    if (cur == nullptr || cur->subject != subject) {
      for (const auto& p : pending)
        if (p.subject == subject)
          throw DataError(file + ": row " + std::to_string(row) + ": subject '" + subject +
                          "' appears in more than one block");
      pending.push_back(PendingRecording{subject, {}, {}, {}});
      cur = &pending.back();
    }
    const double ts = parse_real(fields[1], file, row, "timestamp");
    if (!cur->timestamps.empty() && ts <= cur->timestamps.back())
      throw DataError(file + ": row " + std::to_string(row) + ": non-monotonic timestamp for subject '" +
                      subject + "'");
    cur->timestamps.push_back(ts);
    std::vector<double> vals(channels.size());
    for (std::size_t c = 0; c < channels.size(); ++c)
      vals[c] = parse_real(fields[2 + c], file, row, ("sample '" + channels[c] + "'").c_str());
    cur->rows.push_back(std::move(vals));
    cur->labels.push_back(static_cast<int>(parse_label(fields[ncols - 1], file, row)));
  }
}

}  // namespace

RecordingSet load_recordings(const std::string& path) {
  if (!fs::exists(path)) throw DataError("missing recording file: " + path);
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".csv") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .csv recording files in directory: " + path);
  } else {
    files.push_back(path);
  }

  RecordingSet rs;
  std::vector<PendingRecording> pending;
  for (const auto& f : files) load_one_file(f, rs.channels, pending);
  if (pending.empty()) throw DataError(path + ": no recordings");

  int max_label = -1;
  for (auto& p : pending) {
    if (p.rows.size() < 2)
      throw DataError("subject '" + p.subject + "': too few rows to infer a sample rate");
    Recording rec;
    rec.subject_id = p.subject;
    const double span = p.timestamps.back() - p.timestamps.front();
    rec.sample_rate_hz = static_cast<double>(p.rows.size() - 1) / span;
    rec.samples.resize(static_cast<long>(p.rows.size()), static_cast<long>(rs.channels.size()));
    for (std::size_t r = 0; r < p.rows.size(); ++r)
      for (std::size_t c = 0; c < rs.channels.size(); ++c)
        rec.samples(static_cast<long>(r), static_cast<long>(c)) = p.rows[r][c];
    rec.labels = std::move(p.labels);
    for (int l : rec.labels) max_label = std::max(max_label, l);
    rs.recordings.push_back(std::move(rec));
  }
  rs.num_classes = max_label + 1;
  return rs;
}

void save_recordings_csv(const RecordingSet& rs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write recording file: " + path);
  out << "subject,timestamp";
  for (const auto& c : rs.channels) out << ',' << c;
  out << ",label\n";
  out.precision(17);
  for (const auto& rec : rs.recordings) {
    for (long r = 0; r < rec.num_timesteps(); ++r) {
      out << rec.subject_id << ',' << static_cast<double>(r) / rec.sample_rate_hz;
      for (long c = 0; c < rec.samples.cols(); ++c) out << ',' << rec.samples(r, c);
      out << ',' << rec.labels[static_cast<std::size_t>(r)] << '\n';
    }
  }
}

}  // namespace cpcseq::data
