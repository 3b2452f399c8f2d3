#include "decnn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "decnn/config_json.hpp"
#include "decnn/errors.hpp"
#include "decnn/subword.hpp"

namespace decnn {

namespace {

constexpr char kMagic[8] = {'D', 'E', 'C', 'N', 'N', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& buf, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

template <typename T>
T get_le(const std::string& buf, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  if (pos + sizeof(U) > buf.size()) throw FormatError("model file truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return std::bit_cast<T>(bits);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  std::istringstream is(s);
  is >> std::hex >> v;
  if (!is) throw FormatError("model file: bad hash '" + s + "'");
  return v;
}

template <typename Fn>
void for_each_tensor(const DeCnn<float>& model, Fn&& fn) {
  auto conv = [&](const ConvLayerParams<float>& p, const std::string& name) {
    fn(name + ".weights", p.weights);
    fn(name + ".bias", p.bias);
  };
  for (std::size_t g = 0; g < model.layer1().size(); ++g) {
    conv(model.layer1()[g], "layer1." + std::to_string(g));
  }
  for (std::size_t l = 0; l < model.upper_layers().size(); ++l) {
    conv(model.upper_layers()[l], "upper." + std::to_string(l));
  }
  fn("output.weights", model.output_layer().weights);
  fn("output.bias", model.output_layer().bias);
}

template <typename Fn>
void for_each_tensor_mut(DeCnn<float>& model, Fn&& fn) {
  auto conv = [&](ConvLayerParams<float>& p) {
    fn(p.weights.data(), p.weights.rows(), p.weights.cols());
    fn(p.bias.data(), p.bias.rows(), p.bias.cols());
  };
  for (auto& g : model.layer1()) conv(g);
  for (auto& g : model.upper_layers()) conv(g);
  auto& out = model.output_layer();
  fn(out.weights.data(), out.weights.rows(), out.weights.cols());
  fn(out.bias.data(), out.bias.rows(), out.bias.cols());
}

nlohmann::json ref_json(const std::optional<EmbeddingRef>& ref) {
  if (!ref) return nullptr;
  const std::uint64_t h = ref->hash != 0 ? ref->hash : hash_file(ref->path);
  return {{"path", std::filesystem::absolute(ref->path).string()}, {"fnv1a64", hex64(h)}};
}

std::optional<EmbeddingRef> ref_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return EmbeddingRef{j.at("path").get<std::string>(),
                      parse_hex64(j.at("fnv1a64").get<std::string>())};
}

LoadedModel read_model_file(const std::filesystem::path& path);

}  // namespace

void save_model(const DeCnn<float>& model, const std::filesystem::path& path,
                const ModelSources& sources) {
  nlohmann::json header;
  header["config"] = to_json(model.config());
  header["input_dim"] = model.input_dim();
  header["embeddings"] = {{"general", ref_json(sources.general)},
                          {"domain", ref_json(sources.domain)}};
  nlohmann::json manifest = nlohmann::json::array();
  for_each_tensor(model, [&](const std::string& name, const auto& t) {
    manifest.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  header["tensors"] = manifest;
  const std::string header_text = header.dump();

  std::string buf(kMagic, sizeof kMagic);
  put_le(buf, kVersion);
  put_le(buf, static_cast<std::uint64_t>(header_text.size()));
  buf += header_text;
  for_each_tensor(model, [&](const std::string&, const auto& t) {
    for (Index i = 0; i < t.size(); ++i) put_le(buf, t.data()[i]);
  });
  Fnv1a64 h;
  h.update(buf);
  put_le(buf, h.digest());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing model file '" + path.string() + "'");
}

LoadedModel read_model_parameters(const std::filesystem::path& path) {
  try {
    return read_model_file(path);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model header in '" + path.string() + "': " + e.what());
  }
}

namespace {

LoadedModel read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof kMagic + 4 + 8 + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic)) {
    throw FormatError("'" + path.string() + "' is not a model file");
  }
  std::size_t tail = buf.size() - 8;
  const auto stored = get_le<std::uint64_t>(buf, tail);
  Fnv1a64 h;
  h.update(buf.data(), buf.size() - 8);
  if (h.digest() != stored) {
    throw IntegrityError("model file '" + path.string() + "' failed its checksum");
  }

  std::size_t pos = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(buf, pos);
  if (version != kVersion) {
    throw FormatError("unsupported model file version " + std::to_string(version));
  }
  const auto header_size = get_le<std::uint64_t>(buf, pos);
  if (pos + header_size > buf.size() - 8) throw FormatError("model file truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(pos, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model header: ") + e.what());
  }
  pos += header_size;

  ModelConfig cfg = model_config_from_json(header.at("config"), "model header");
  LoadedModel loaded{DeCnn<float>(cfg, header.at("input_dim").get<Index>()), {}};
  loaded.sources.general = ref_from_json(header.at("embeddings").at("general"));
  loaded.sources.domain = ref_from_json(header.at("embeddings").at("domain"));

  const auto& manifest = header.at("tensors");
  std::size_t k = 0;
  for_each_tensor_mut(loaded.model, [&](float* data, Index rows, Index cols) {
    if (k >= manifest.size() || manifest[k].at("rows").get<Index>() != rows ||
        manifest[k].at("cols").get<Index>() != cols) {
      throw FormatError("model tensor manifest does not match its config");
    }
    for (Index i = 0; i < rows * cols; ++i) data[i] = get_le<float>(buf, pos);
    ++k;
  });
  if (k != manifest.size() || pos != buf.size() - 8) {
    throw FormatError("model file has trailing or missing tensor data");
  }
  return loaded;
}

}  // namespace

LoadedModel load_model(const std::filesystem::path& path, const LoadOptions& embed_options) {
  LoadedModel loaded = read_model_parameters(path);
  auto load_ref = [&](const std::optional<EmbeddingRef>& ref,
                      const char* which) -> std::shared_ptr<const EmbeddingTable> {
    if (!ref) throw FormatError(std::string("model file has no ") + which + " embedding reference");
    if (!std::filesystem::exists(ref->path)) {
      throw IoError(std::string(which) + " embedding file '" + ref->path.string() +
                    "' referenced by the model does not exist");
    }
    if (hash_file(ref->path) != ref->hash) {
      throw IntegrityError(std::string(which) + " embedding file '" + ref->path.string() +
                           "' changed since the model was saved");
    }
    return std::make_shared<const EmbeddingTable>(load_table(ref->path, embed_options));
  };
  const EmbeddingMode mode = loaded.model.config().emb_mode;
  std::shared_ptr<const EmbeddingTable> general;
  std::shared_ptr<const EmbeddingTable> domain;
  if (mode != EmbeddingMode::domain_only) general = load_ref(loaded.sources.general, "general");
  if (mode != EmbeddingMode::general_only) domain = load_ref(loaded.sources.domain, "domain");
  loaded.model.attach_embedder(std::make_shared<const DualEmbedder>(general, domain, mode));
  return loaded;
}

}  // namespace decnn
