#include "snn/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "snn/rng.hpp"
#include "snn/textutil.hpp"

namespace snn {

namespace {

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* field) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DataError("line " + std::to_string(line) + ": invalid " + field + " '" +
                    std::string(text) + "'");
  }
  return value;
}

std::size_t header_value(const std::string& header, const std::string& key, std::size_t line) {
  const auto pos = header.find(key + "=");
  if (pos == std::string::npos) {
    throw DataError("line " + std::to_string(line) + ": header lacks '" + key + "='");
  }
  auto start = pos + key.size() + 1;
  auto end = header.find_first_of(" \t\r", start);
  auto text = std::string_view(header).substr(start, end == std::string::npos ? std::string::npos
                                                                              : end - start);
  return parse_number<std::size_t>(text, line, key.c_str());
}

}  // namespace

EventFile parse_events(std::istream& in) {
  EventFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("#snnevt", 0) == 0) {
        if (line.rfind("#snnevt v1", 0) != 0) {
          throw DataError("line " + std::to_string(line_no) + ": unsupported event file version");
        }
        file.raw_channels = header_value(line, "raw_channels", line_no);
        file.classes = header_value(line, "classes", line_no);
        have_header = true;
      }
      continue;
    }
    if (!have_header) {
      throw DataError("line " + std::to_string(line_no) + ": data before '#snnevt v1' header");
    }
    const auto fields = split(line, ',');
    if (fields.size() != 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    EventRecord ev;
    ev.sample_id = parse_number<std::uint32_t>(trim(fields[0]), line_no, "sample_id");
    ev.label = parse_number<std::uint32_t>(trim(fields[1]), line_no, "label");
    ev.channel = parse_number<std::uint32_t>(trim(fields[2]), line_no, "channel");
    ev.time = parse_number<double>(trim(fields[3]), line_no, "time");
    if (ev.channel >= file.raw_channels) {
      throw DataError("line " + std::to_string(line_no) + ": channel " +
                      std::to_string(ev.channel) + " outside [0, " +
                      std::to_string(file.raw_channels) + ")");
    }
    if (ev.label >= file.classes) {
      throw DataError("line " + std::to_string(line_no) + ": label " + std::to_string(ev.label) +
                      " outside [0, " + std::to_string(file.classes) + ")");
    }
    if (!(ev.time >= 0.0) || !std::isfinite(ev.time)) {
      throw DataError("line " + std::to_string(line_no) + ": time must be finite and >= 0");
    }
    file.events.push_back(ev);
  }
  return file;
}

EventFile parse_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event file " + path.string());
  return parse_events(in);
}

void write_events(std::ostream& out, const EventFile& file) {
  out << "#snnevt v1 raw_channels=" << file.raw_channels << " classes=" << file.classes << '\n';
  char buf[64];
  for (const auto& ev : file.events) {
    // Shortest round-trip representation of the time.
    const auto res = std::to_chars(buf, buf + sizeof buf, ev.time);
    out << ev.sample_id << ',' << ev.label << ',' << ev.channel << ','
        << std::string_view(buf, res.ptr - buf) << '\n';
  }
}

void BinningSpec::validate() const {
  if (raw_channels == 0 || channel_factor == 0 || steps == 0 || !(bin_width > 0.0)) {
    throw DataError("binning parameters must be positive");
  }
  if (raw_channels % channel_factor != 0) {
    throw DataError("raw_channels (" + std::to_string(raw_channels) +
                    ") is not a multiple of channel_factor (" + std::to_string(channel_factor) +
                    ")");
  }
}

Matrix bin_sample(std::span<const EventRecord> events, const BinningSpec& spec) {
  spec.validate();
  Matrix grid(spec.steps, spec.channels());
  for (const auto& ev : events) {
    if (ev.channel >= spec.raw_channels) {
      throw DataError("event channel " + std::to_string(ev.channel) + " out of range");
    }
    const double bin = std::floor(ev.time / spec.bin_width);
    if (!(bin >= 0.0) || bin >= static_cast<double>(spec.steps)) continue;
    grid(static_cast<std::size_t>(bin), ev.channel / spec.channel_factor) += 1.0;
  }
  if (spec.binarize) {
    for (auto& x : grid.data) x = x > 0.0 ? 1.0 : 0.0;
  }
  return grid;
}

Dataset bin_events(const EventFile& file, const BinningSpec& spec) {
  if (file.raw_channels != spec.raw_channels) {
    throw DataError("event file has raw_channels=" + std::to_string(file.raw_channels) +
                    " but binning expects " + std::to_string(spec.raw_channels));
  }
  std::map<std::uint32_t, std::vector<EventRecord>> by_sample;
  for (const auto& ev : file.events) by_sample[ev.sample_id].push_back(ev);
  Dataset data;
  data.steps = spec.steps;
  data.channels = spec.channels();
  data.classes = file.classes;
  for (const auto& [id, events] : by_sample) {
    const auto label = events.front().label;
    for (const auto& ev : events) {
      if (ev.label != label) {
        throw DataError("sample " + std::to_string(id) + " has conflicting labels");
      }
    }
    data.samples.push_back({bin_sample(events, spec), static_cast<int>(label)});
  }
  return data;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("binned file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_binned(const std::filesystem::path& path, const Dataset& data) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write("SNNB", 4);
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(data.samples.size()));
    put_u32(out, static_cast<std::uint32_t>(data.steps));
    put_u32(out, static_cast<std::uint32_t>(data.channels));
    for (const auto& s : data.samples) {
      put_u32(out, static_cast<std::uint32_t>(s.label));
      for (double v : s.values.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Dataset read_binned(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open binned file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SNNB", 4) != 0) {
    throw DataError(path.string() + ": bad magic, expected SNNB");
  }
  if (const auto version = get_u32(in); version != 1) {
    throw DataError(path.string() + ": unsupported version " + std::to_string(version));
  }
  Dataset data;
  const auto n = get_u32(in);
  data.steps = get_u32(in);
  data.channels = get_u32(in);
  data.classes = classes;
  data.samples.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    Sample s;
    s.label = static_cast<int>(get_u32(in));
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= classes) {
      throw DataError(path.string() + ": sample " + std::to_string(k) + " has label " +
                      std::to_string(s.label) + " outside [0, " + std::to_string(classes) + ")");
    }
    s.values = Matrix(data.steps, data.channels);
    for (auto& v : s.values.data) v = static_cast<double>(std::bit_cast<float>(get_u32(in)));
    data.samples.push_back(std::move(s));
  }
  return data;
}

SpikeTensor stack_samples(const Dataset& data, std::span<const std::size_t> indices) {
  SpikeTensor t(indices.size(), data.steps, data.channels);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& src = data.samples.at(indices[b]).values.data;
    std::copy(src.begin(), src.end(), t.values.begin() + b * data.steps * data.channels);
  }
  return t;
}

std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be > 0");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.indices.assign(order.begin() + start, order.begin() + end);
    b.inputs = stack_samples(data, b.indices);
    for (auto idx : b.indices) b.labels.push_back(data.samples[idx].label);
    batches.push_back(std::move(b));
  }
  return batches;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);
  const auto n_valid = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> valid_idx(order.begin(), order.begin() + n_valid);
  std::vector<std::size_t> train_idx(order.begin() + n_valid, order.end());
  std::sort(valid_idx.begin(), valid_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  auto subset = [&](const std::vector<std::size_t>& idx) {
    Dataset d{data.steps, data.channels, data.classes, {}};
    for (auto i : idx) d.samples.push_back(data.samples[i]);
    return d;
  };
  return {subset(train_idx), subset(valid_idx)};
}

DatasetManifest parse_manifest(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  DatasetManifest m;
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base / p;
  };
  for (const auto& [key, value] : kv) {
    if (key == "train") m.train = resolve(value);
    else if (key == "valid") m.valid = resolve(value);
    else if (key == "test") m.test = resolve(value);
    else if (key == "classes") m.classes = parse_size(value, key);
    else if (key == "raw_channels") m.binning.raw_channels = parse_size(value, key);
    else if (key == "channel_factor") m.binning.channel_factor = parse_size(value, key);
    else if (key == "bin_width") m.binning.bin_width = parse_real(value, key);
    else if (key == "timesteps") m.binning.steps = parse_size(value, key);
    else if (key == "binarize") m.binning.binarize = parse_bool(value, key);
    else if (key == "valid_fraction") m.valid_fraction = parse_real(value, key);
    else throw ConfigError(path.string() + ": unknown manifest key '" + key + "'");
  }
  m.binning.validate();
  if (m.train.empty()) throw ConfigError(path.string() + ": manifest lacks 'train'");
  return m;
}

Dataset load_split(const std::filesystem::path& path, const DatasetManifest& manifest) {
  if (!std::filesystem::exists(path)) throw DataError("dataset file not found: " + path.string());
  if (path.extension() == ".snnb") return read_binned(path, manifest.classes);
  auto events = parse_events(path);
  if (events.classes != manifest.classes) {
    throw DataError(path.string() + ": classes=" + std::to_string(events.classes) +
                    " disagrees with manifest classes=" + std::to_string(manifest.classes));
  }
  return bin_events(events, manifest.binning);
}

}  // namespace snn
