#include "cyscolor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cyscolor/error.hpp"

namespace cys {

static_assert(std::endian::native == std::endian::little, "checkpoint tensors are stored little-endian");

namespace {

constexpr char kMagic[8] = {'C', 'Y', 'S', 'C', 'K', 'P', 'T', '1'};

std::string_view tensor_bytes(const Eigen::MatrixXd& m) {
  return {reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double)};
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw CheckpointError("checkpoint truncated reading " + what);
  return value;
}

}  // namespace

std::string Checkpoint::config_hash() const { return hex64(fnv1a64(config.dump())); }

std::string Checkpoint::model_version() const {
  std::string blob = kind + '\0' + config.dump() + '\0' + hex64(vocab.hash()) + '\0';
  for (const auto& name : categories.names()) blob += name + '\0';
  for (const auto& [name, m] : tensors) {
    blob += name + '\0';
    blob += tensor_bytes(m);
  }
  return kind + "-" + hex64(fnv1a64(blob)).substr(0, 12);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ckpt.tensors) {
    index.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size());
  }
  const nlohmann::json header = {{"kind", ckpt.kind},
                                 {"config", ckpt.config},
                                 {"config_hash", ckpt.config_hash()},
                                 {"vocab", ckpt.vocab.to_json()},
                                 {"vocab_hash", hex64(ckpt.vocab.hash())},
                                 {"categories", ckpt.categories.names()},
                                 {"model_version", ckpt.model_version()},
                                 {"tensors", index}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(out, kCheckpointFormat);
    write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, m] : ckpt.tensors) {
      const auto bytes = tensor_bytes(m);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto format = read_pod<std::uint32_t>(in, "format version");
  if (format != kCheckpointFormat) {
    throw CheckpointError("unsupported checkpoint format " + std::to_string(format));
  }
  const auto length = read_pod<std::uint64_t>(in, "header length");
  if (length > (1ULL << 30)) throw CheckpointError("checkpoint header is implausibly large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw CheckpointError("checkpoint truncated in header");

  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.vocab = Vocabulary::from_json(header.at("vocab"));
    ckpt.categories = CategoryVocabulary(header.at("categories").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ParseError& e) {
    throw CheckpointError(std::string("malformed checkpoint vocabulary: ") + e.what());
  }
  if (header.value("config_hash", "") != ckpt.config_hash()) {
    throw CheckpointError("checkpoint config hash mismatch; refusing to load " + path.string());
  }
  if (!expected_config_hash.empty() && expected_config_hash != ckpt.config_hash()) {
    throw CheckpointError("checkpoint was trained with config " + ckpt.config_hash() + ", expected " +
                          expected_config_hash);
  }
  if (header.value("vocab_hash", "") != hex64(ckpt.vocab.hash())) {
    throw CheckpointError("checkpoint vocabulary hash mismatch");
  }
  for (const auto& entry : header.at("tensors")) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0 || rows * cols > (1LL << 28)) throw CheckpointError("bad tensor shape in checkpoint");
    Eigen::MatrixXd m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw CheckpointError("checkpoint truncated in tensor " + entry.at("name").get<std::string>());
    }
    ckpt.tensors.emplace(entry.at("name").get<std::string>(), std::move(m));
  }
  if (header.value("model_version", "") != ckpt.model_version()) {
    throw CheckpointError("checkpoint payload does not match its recorded model version (corrupt file?)");
  }
  return ckpt;
}

std::map<std::string, Eigen::MatrixXd> export_parameters(const std::vector<ad::NamedParameter>& params) {
  std::map<std::string, Eigen::MatrixXd> out;
  for (const auto& p : params) out.emplace(p.name, p.param->value);
  return out;
}

void import_parameters(const std::map<std::string, Eigen::MatrixXd>& tensors,
                       const std::vector<ad::NamedParameter>& params) {
  for (const auto& p : params) {
    const auto it = tensors.find(p.name);
    if (it == tensors.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
    if (it->second.rows() != p.param->value.rows() || it->second.cols() != p.param->value.cols()) {
      throw CheckpointError("shape mismatch for parameter " + p.name);
    }
    p.param->value = it->second;
  }
  if (tensors.size() != params.size()) throw CheckpointError("checkpoint holds parameters the model does not know");
}

}  // namespace cys
