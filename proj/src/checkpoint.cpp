#include "snn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace snn {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(v, 4); }
  void u64(std::uint64_t v) { raw(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }

 private:
  void raw(std::uint64_t v, int bytes) {
    for (int k = 0; k < bytes; ++k) out_.put(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(raw(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  std::uint64_t u64() { return raw(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64s(std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = f64();
  }

 private:
  std::uint64_t raw(int bytes) {
    unsigned char buf[8];
    if (!in_.read(reinterpret_cast<char*>(buf), bytes)) {
      throw CheckpointError(origin_ + ": truncated checkpoint");
    }
    std::uint64_t v = 0;
    for (int k = 0; k < bytes; ++k) v |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
    return v;
  }
  std::istream& in_;
  std::string origin_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    Writer w(out);
    out.write("SNNC", 4);
    w.u32(kCheckpointVersion);
    const auto& c = model.config;
    w.u64(c.inputs);
    w.u64(c.hidden1);
    w.u64(c.hidden2);
    w.u64(c.classes);
    w.f64(c.dropout[0]);
    w.f64(c.dropout[1]);
    w.i32(c.d_max);
    w.f64(c.threshold.theta);
    w.u8(static_cast<std::uint8_t>(c.readout));
    w.u8(static_cast<std::uint8_t>(c.horizon));
    w.u8(static_cast<std::uint8_t>(c.neuron_model));
    w.u8(c.train_delays ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(c.spike.function));
    w.f64(c.spike.slope);
    for (const auto& syn : model.synapses) {
      w.f64s(syn.weights.data);
      w.f64s(syn.bias);
      w.f64s(syn.delays.d);
    }
    for (const auto& p : model.neurons) {
      w.f64s(p.alpha);
      w.f64s(p.beta);
      w.f64s(p.a);
      w.f64s(p.b);
    }
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw CheckpointError("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SNNC", 4) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  Reader r(in, path.string());
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  NetworkConfig c;
  c.inputs = r.u64();
  c.hidden1 = r.u64();
  c.hidden2 = r.u64();
  c.classes = r.u64();
  c.dropout[0] = r.f64();
  c.dropout[1] = r.f64();
  c.d_max = r.i32();
  c.threshold.theta = r.f64();
  const auto readout = r.u8();
  const auto horizon = r.u8();
  const auto neuron = r.u8();
  const auto delays = r.u8();
  const auto spike = r.u8();
  if (readout > 1 || horizon > 1 || neuron > 1 || delays > 1 || spike > 1) {
    throw CheckpointError(path.string() + ": corrupt enum field");
  }
  c.readout = static_cast<ReadoutMode>(readout);
  c.horizon = static_cast<Horizon>(horizon);
  c.neuron_model = static_cast<NeuronModel>(neuron);
  c.train_delays = delays == 1;
  c.spike.function = static_cast<SpikeFunction>(spike);
  c.spike.slope = r.f64();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }

  Model m;
  m.config = c;
  for (std::size_t l = 0; l < 3; ++l) {
    const auto pre = c.layer_size(l);
    const auto post = c.layer_size(l + 1);
    auto& syn = m.synapses[l];
    syn.weights = Matrix(pre, post);
    r.f64s(syn.weights.data, pre * post);
    r.f64s(syn.bias, post);
    syn.delays = DelayMatrix(pre, post, c.d_max);
    r.f64s(syn.delays.d, pre * post);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    const auto n = c.layer_size(l + 1);
    auto& p = m.neurons[l];
    r.f64s(p.alpha, n);
    r.f64s(p.beta, n);
    r.f64s(p.a, n);
    r.f64s(p.b, n);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError(path.string() + ": trailing bytes after checkpoint payload");
  }
  return m;
}

}  // namespace snn
