#include "apt/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "apt/io.hpp"
#include "apt/serialize.hpp"

namespace apt {

namespace {

// All integers and floats are stored little-endian, explicitly byte by byte,
// so files written on any host read back identically.
void put_u8(std::string& out, uint8_t v) { out.push_back(char(v)); }

void put_u16(std::string& out, uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

struct Reader {
  const std::string& buf;
  size_t at = 0;

  void need(size_t n) const {
    if (at + n > buf.size()) throw IoError("checkpoint: truncated file");
  }
  uint8_t u8() {
    need(1);
    return uint8_t(buf[at++]);
  }
  uint16_t u16() {
    need(2);
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v = uint16_t(v | (uint16_t(uint8_t(buf[at++])) << (8 * i)));
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[at++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[at++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(at, n);
    at += n;
    return s;
  }
};

const char* task_kind_name(TaskKind k) {
  return k == TaskKind::sequence ? "sequence" : "tagging";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "sequence") return TaskKind::sequence;
  if (s == "tagging") return TaskKind::tagging;
  throw IoError("checkpoint: unknown task kind '" + s + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);

  nlohmann::json meta{{"config", config_to_json(ck.config)},
                      {"mode", gate_mode_name(ck.mode)},
                      {"task_kind", task_kind_name(ck.task_kind)},
                      {"label_names", ck.label_names},
                      {"extra", ck.extra}};
  const std::string meta_str = meta.dump();  // keys sorted: byte-stable
  put_u64(out, meta_str.size());
  out += meta_str;

  put_u32(out, uint32_t(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    if (name.size() > 0xffff) throw IoError("checkpoint: tensor name too long");
    put_u16(out, uint16_t(name.size()));
    out += name;
    put_u8(out, uint8_t(t.shape.size()));
    for (int e : t.shape) put_u64(out, uint64_t(e));
    for (float v : t.data) put_f32(out, v);
  }
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r{buf};
  if (r.bytes(4) != std::string(kCheckpointMagic, 4))
    throw IoError("checkpoint: bad magic (not a checkpoint file)");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const uint64_t meta_len = r.u64();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.bytes(meta_len));
    ck.config = config_from_json(meta.at("config"));
    ck.mode = parse_gate_mode(meta.at("mode").get<std::string>());
    ck.task_kind = parse_task_kind(meta.at("task_kind").get<std::string>());
    ck.label_names = meta.at("label_names").get<std::vector<std::string>>();
    ck.extra = meta.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: corrupt metadata: ") + e.what());
  }

  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    const uint16_t name_len = r.u16();
    std::string name = r.bytes(name_len);
    const uint8_t rank = r.u8();
    if (rank > 4) throw IoError("checkpoint: implausible tensor rank");
    Shape shape;
    size_t numel = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint64_t e = r.u64();
      if (e == 0 || e > (1u << 28)) throw IoError("checkpoint: implausible extent");
      shape.push_back(int(e));
      numel *= size_t(e);
    }
    std::vector<float> data(numel);
    for (size_t k = 0; k < numel; ++k) data[k] = r.f32();
    ck.tensors.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  if (r.at != buf.size()) throw IoError("checkpoint: trailing bytes");
  return ck;
}

}  // namespace apt
