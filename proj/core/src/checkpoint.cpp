#include <boost/crc.hpp>
#include <charconv>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "discont/config.hpp"
#include "discont/error.hpp"
#include "discont/trainer.hpp"

namespace discont {

namespace {

constexpr std::string_view kMagic = "DSCK";
constexpr std::uint32_t kMaxDims = 8;

void write_record(detail::ByteWriter& w, std::string_view name, const Tensor& t) {
  w.prefixed(name);
  w.u32(static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  w.f32s(t.values());
}

std::string metadata_text(const Checkpoint& ck) {
  std::ostringstream os;
  os << "epoch = " << ck.epoch << '\n'
     << "adam_step = " << ck.optimizer.step << '\n'
     << "rng = " << ck.rng_state << '\n';
  return os.str();
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw CorruptionError("checkpoint metadata: bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

void parse_metadata(std::string_view text, Checkpoint& ck) {
  bool have_epoch = false, have_step = false, have_rng = false;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) continue;
    auto eq = line.find(" = ");
    if (eq == std::string_view::npos) throw CorruptionError("checkpoint metadata: malformed line");
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 3);
    if (key == "epoch") {
      ck.epoch = parse_number<std::uint32_t>(value, key);
      have_epoch = true;
    } else if (key == "adam_step") {
      ck.optimizer.step = parse_number<std::uint64_t>(value, key);
      have_step = true;
    } else if (key == "rng") {
      ck.rng_state = std::string(value);
      Rng::restore(ck.rng_state);
      have_rng = true;
    } else {
      throw CorruptionError("checkpoint metadata: unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_epoch || !have_step || !have_rng) throw CorruptionError("checkpoint metadata: missing field");
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.prefixed(metadata_text(ck));
  w.prefixed(format_config(RunConfig{ck.config, {}}));
  w.u32(crc32(w.bytes()));

  const auto record_count = ck.model.params.size() + ck.model.buffers.size() + ck.optimizer.first_moment.size() +
                            ck.optimizer.second_moment.size();
  w.u32(static_cast<std::uint32_t>(record_count));
  for (const auto& [name, t] : ck.model.params) write_record(w, "param/" + name, t);
  for (const auto& [name, t] : ck.model.buffers) write_record(w, "buffer/" + name, t);
  for (const auto& [name, t] : ck.optimizer.first_moment) write_record(w, "adam_m/" + name, t);
  for (const auto& [name, t] : ck.optimizer.second_moment) write_record(w, "adam_v/" + name, t);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.remaining() < kMagic.size() || r.raw(kMagic.size(), "magic") != kMagic) {
    throw FormatError("checkpoint: missing DSCK magic");
  }
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ck;
  ck.version = version;
  const auto metadata = r.prefixed("metadata");
  const auto config_text = r.prefixed("config");
  const auto header_len = bytes.size() - r.remaining();
  if (r.u32("header checksum") != crc32(bytes.subspan(0, header_len))) {
    throw CorruptionError("checkpoint: header checksum mismatch");
  }
  parse_metadata(metadata, ck);
  try {
    ck.config = parse_config_text(config_text).train;
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint: embedded config is invalid: ") + e.what());
  }
  try {
    ck.config.model.validate();
  } catch (const Error& e) {
    throw CorruptionError(std::string("checkpoint: embedded model dimensions are invalid: ") + e.what());
  }

  const auto reference = ModelParams::layout(ck.config.model);
  ck.model.dims = ck.config.model;

  const auto count = r.u32("record count");
  std::set<std::string, std::less<>> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.prefixed("record name");
    if (!seen.insert(name).second) throw CorruptionError("checkpoint: duplicate record '" + name + "'");
    const auto ndim = r.u32("record ndim");
    if (ndim == 0 || ndim > kMaxDims) {
      throw CorruptionError("checkpoint: record '" + name + "' has " + std::to_string(ndim) + " dims");
    }
    Shape shape(ndim);
    for (auto& d : shape) d = r.u32("record dims");

    const auto slash = name.find('/');
    const std::string kind = slash == std::string::npos ? std::string{} : name.substr(0, slash);
    const std::string key = slash == std::string::npos ? std::string{} : name.substr(slash + 1);
    const Tensor* expected = nullptr;
    if (kind == "buffer") {
      auto it = reference.buffers.find(key);
      if (it != reference.buffers.end()) expected = &it->second;
    } else if (kind == "param" || kind == "adam_m" || kind == "adam_v") {
      if (reference.params.contains(key)) expected = &reference.params.at(key);
    }
    if (!expected) throw CorruptionError("checkpoint: unexpected record '" + name + "'");
    if (shape != expected->shape()) {
      throw CorruptionError("checkpoint: record '" + name + "' has shape " + shape_to_string(shape) + ", expected " +
                            shape_to_string(expected->shape()));
    }
    r.need(4 * shape_numel(shape), "record payload");
    Tensor t(shape);
    r.f32s(t.values(), "record payload");
    if (kind == "param") {
      ck.model.params.add(key, std::move(t));
    } else if (kind == "buffer") {
      ck.model.buffers.emplace(key, std::move(t));
    } else if (kind == "adam_m") {
      ck.optimizer.first_moment.emplace(key, std::move(t));
    } else {
      ck.optimizer.second_moment.emplace(key, std::move(t));
    }
  }
  if (!r.at_end()) throw CorruptionError("checkpoint: trailing bytes after the last record");
  if (ck.model.params.size() != reference.params.size() || ck.model.buffers.size() != reference.buffers.size()) {
    throw CorruptionError("checkpoint: missing parameter or buffer records");
  }
  const bool has_moments = ck.optimizer.step > 0;
  const auto expected_moments = has_moments ? reference.params.size() : 0;
  if (ck.optimizer.first_moment.size() != expected_moments || ck.optimizer.second_moment.size() != expected_moments) {
    throw CorruptionError("checkpoint: Adam moments do not match the step count");
  }
  return ck;
}

void checkpoint_save(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ck);
  auto tmp = path;
  tmp += ".tmp";
  detail::write_file_bytes(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file_bytes(path));
}

}  // namespace discont
