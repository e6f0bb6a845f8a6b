#include "cdgan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "cdgan/errors.hpp"

namespace cdgan {

namespace {

constexpr unsigned char kMagic[7] = {'C', 'D', 'G', 'A', 'N', '\0', 0x01};
constexpr size_t kMagicLen = sizeof(kMagic);

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

bool get_bytes(std::istream& is, void* dst, size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<size_t>(is.gcount()) == n;
}

bool get_u16(std::istream& is, std::uint16_t* v) {
  unsigned char b[2];
  if (!get_bytes(is, b, 2)) return false;
  *v = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  return true;
}

bool get_u32(std::istream& is, std::uint32_t* v) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) return false;
  *v = 0;
  for (int i = 0; i < 4; ++i) *v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

}  // namespace

void CheckpointMeta::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : kv)
    if (k == key) {
      v = value;
      return;
    }
  kv.emplace_back(key, value);
}

std::optional<std::string> CheckpointMeta::get(const std::string& key) const {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  return std::nullopt;
}

void CheckpointMeta::set_float(const std::string& key, double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  set(key, os.str());
}

std::int64_t CheckpointMeta::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = get(key);
  return v ? std::stoll(*v) : fallback;
}

double CheckpointMeta::get_float(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? std::stod(*v) : fallback;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void checkpoint_save(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     const CheckpointMeta& meta) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint: " + path.string());
    os.write(reinterpret_cast<const char*>(kMagic), kMagicLen);
    put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      if (name.size() > 0xffff) throw DataError("tensor name too long: " + name);
      put_u16(os, static_cast<std::uint16_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      os.put(static_cast<char>(t.rank()));
      for (int i = 0; i < t.rank(); ++i) put_u32(os, static_cast<std::uint32_t>(t.dim(i)));
      os.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    std::string block;
    for (const auto& [k, v] : meta.kv) block += k + "=" + v + "\n";
    put_u32(os, static_cast<std::uint32_t>(block.size()));
    os.write(block.data(), static_cast<std::streamsize>(block.size()));
    if (!os) throw DataError("short write for checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());

  unsigned char magic[kMagicLen];
  if (!get_bytes(is, magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen - 1) != 0)
    throw DataError("bad magic in checkpoint: " + path.string());
  if (magic[kMagicLen - 1] != kMagic[kMagicLen - 1])
    throw DataError("unsupported checkpoint version " + std::to_string(magic[kMagicLen - 1]) +
                    " in " + path.string());

  std::uint32_t count = 0;
  if (!get_u32(is, &count)) throw DataError("truncated checkpoint header: " + path.string());

  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t name_len = 0;
    if (!get_u16(is, &name_len))
      throw DataError("truncated checkpoint at tensor " + std::to_string(i) + ": " + path.string());
    std::string name(name_len, '\0');
    if (!get_bytes(is, name.data(), name_len))
      throw DataError("truncated checkpoint at tensor " + std::to_string(i) + ": " + path.string());
    unsigned char rank = 0;
    if (!get_bytes(is, &rank, 1) || rank == 0 || rank > 8)
      throw DataError("bad shape table for tensor '" + name + "' in " + path.string());
    Shape shape(rank);
    std::int64_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      std::uint32_t dim = 0;
      if (!get_u32(is, &dim) || dim == 0 || dim > 0x7fffffffu)
        throw DataError("bad shape table for tensor '" + name + "' in " + path.string());
      shape[static_cast<size_t>(d)] = static_cast<int>(dim);
      numel *= dim;
    }
    if (numel > (1LL << 31))
      throw DataError("bad shape table for tensor '" + name + "' in " + path.string());
    std::vector<float> values(static_cast<size_t>(numel));
    if (!get_bytes(is, values.data(), values.size() * sizeof(float)))
      throw DataError("truncated values for tensor '" + name + "' in " + path.string());
    ckpt.tensors.emplace_back(name, Tensor::from_data(std::move(shape), std::move(values)));
  }

  std::uint32_t meta_len = 0;
  if (!get_u32(is, &meta_len)) throw DataError("truncated metadata block: " + path.string());
  std::string block(meta_len, '\0');
  if (!get_bytes(is, block.data(), meta_len))
    throw DataError("truncated metadata block: " + path.string());
  std::istringstream ms(block);
  std::string line;
  while (std::getline(ms, line)) {
    const size_t eq = line.find('=');
    if (eq != std::string::npos) ckpt.meta.kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return ckpt;
}

namespace {

void append_params(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                   const ParamMap& params) {
  for (const auto& [name, t] : params) out.emplace_back(prefix + name, t);
}

void append_adam(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                 const AdamState& state) {
  for (const auto& [name, slot] : state.slots) {
    out.emplace_back(prefix + name + ".m", slot.m);
    out.emplace_back(prefix + name + ".v", slot.v);
  }
}

void restore_params(const Checkpoint& ckpt, const std::string& prefix, ParamMap& params,
                    const std::filesystem::path& path) {
  for (auto& [name, t] : params) {
    const Tensor* src = ckpt.find(prefix + name);
    if (src == nullptr)
      throw DataError("checkpoint " + path.string() + " is missing tensor '" + prefix + name + "'");
    if (src->shape() != t.shape())
      throw DataError("checkpoint " + path.string() + " has wrong shape for tensor '" + prefix +
                      name + "': got " + shape_str(src->shape()) + ", expected " +
                      shape_str(t.shape()));
    std::copy(src->data(), src->data() + src->numel(), t.data());
  }
}

void restore_adam(const Checkpoint& ckpt, const std::string& prefix, AdamState& state,
                  const std::filesystem::path& path) {
  for (auto& [name, slot] : state.slots) {
    for (const char* part : {".m", ".v"}) {
      const std::string full = prefix + name + part;
      const Tensor* src = ckpt.find(full);
      if (src == nullptr)
        throw DataError("checkpoint " + path.string() + " is missing tensor '" + full + "'");
      Tensor& dst = (part[1] == 'm') ? slot.m : slot.v;
      if (src->shape() != dst.shape())
        throw DataError("checkpoint " + path.string() + " has wrong shape for tensor '" + full + "'");
      std::copy(src->data(), src->data() + src->numel(), dst.data());
    }
  }
}

}  // namespace

void save_trainer_checkpoint(const std::filesystem::path& path, const TrainerState& state,
                             const TrainConfig& cfg) {
  std::vector<std::pair<std::string, Tensor>> tensors;
  append_params(tensors, "g.", state.gen.params);
  append_params(tensors, "d.", state.disc.params);
  append_adam(tensors, "adam.g.", state.gen_state);
  append_adam(tensors, "adam.d.", state.disc_state);

  CheckpointMeta meta;
  meta.set_int("epoch", state.epoch);
  meta.set_float("best_val_iou", state.best_val_iou);
  meta.set_int("adam_g_t", state.gen_state.t);
  meta.set_int("adam_d_t", state.disc_state.t);
  meta.set_int("seed", static_cast<std::int64_t>(cfg.seed));
  meta.set_int("config.epochs", cfg.epochs);
  meta.set_int("config.batch_size", cfg.batch_size);
  meta.set_float("config.learning_rate", cfg.learning_rate);
  meta.set_float("config.adam_beta1", cfg.adam_beta1);
  meta.set_float("config.adam_beta2", cfg.adam_beta2);
  meta.set_float("config.adam_eps", cfg.adam_eps);
  meta.set_float("config.lambda_l1", cfg.lambda_l1);
  meta.set_int("config.crop_size", cfg.crop_size);
  meta.set_int("config.augment", cfg.augment ? 1 : 0);
  meta.set_int("config.deterministic", cfg.deterministic ? 1 : 0);
  checkpoint_save(path, tensors, meta);
}

TrainerState load_trainer_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ckpt = checkpoint_load(path);
  TrainerState state = make_trainer_state(0);
  restore_params(ckpt, "g.", state.gen.params, path);
  restore_params(ckpt, "d.", state.disc.params, path);
  restore_adam(ckpt, "adam.g.", state.gen_state, path);
  restore_adam(ckpt, "adam.d.", state.disc_state, path);
  state.epoch = static_cast<int>(ckpt.meta.get_int("epoch", 0));
  state.best_val_iou = static_cast<float>(ckpt.meta.get_float("best_val_iou", -1.0));
  state.gen_state.t = ckpt.meta.get_int("adam_g_t", 0);
  state.disc_state.t = ckpt.meta.get_int("adam_d_t", 0);
  return state;
}

GeneratorParams load_generator_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ckpt = checkpoint_load(path);
  GeneratorParams gen = build_generator(0);
  restore_params(ckpt, "g.", gen.params, path);
  return gen;
}

}  // namespace cdgan
