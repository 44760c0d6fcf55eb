#include "psstr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

namespace psstr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint archives are little-endian");

namespace {
constexpr char kMagic[8] = {'P', 'S', 'S', 'T', 'R', 'N', 'C', '1'};
}

int64_t NamedParameterSet::parameter_count() const {
  int64_t total = 0;
  for (const auto& [name, t] : entries) total += t.numel();
  return total;
}

int64_t parameter_count(const NamedParameterSet& params) { return params.parameter_count(); }

NamedParameterSet named_parameters_of(const torch::nn::Module& m) {
  NamedParameterSet set;
  for (const auto& p : m.named_parameters(/*recurse=*/true)) set.entries[p.key()] = p.value();
  return set;
}

NamedParameterSet named_state_of(const torch::nn::Module& m) {
  NamedParameterSet set = named_parameters_of(m);
  for (const auto& b : m.named_buffers(/*recurse=*/true)) {
    if (b.value().dtype() == torch::kFloat32) set.entries[b.key()] = b.value();
  }
  return set;
}

void save_archive(const std::filesystem::path& path, const NamedParameterSet& tensors,
                  const nlohmann::json& config) {
  nlohmann::json manifest;
  manifest["format"] = "psstr-named-tensors";
  manifest["version"] = 1;
  manifest["config"] = config;
  auto records = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : tensors.entries) {
    TORCH_CHECK(t.dtype() == torch::kFloat32, "save_archive: tensor '", name,
                "' is not float32");
    records.push_back({{"name", name},
                       {"dtype", "f32"},
                       {"shape", t.sizes().vec()},
                       {"offset", offset}});
    offset += t.numel() * 4;
  }
  manifest["tensors"] = std::move(records);

  const std::string manifest_bytes = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_archive: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const uint64_t manifest_size = manifest_bytes.size();
  out.write(reinterpret_cast<const char*>(&manifest_size), sizeof(manifest_size));
  out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
  for (const auto& [name, t] : tensors.entries) {
    auto contig = t.detach().to(torch::kCPU).contiguous();
    out.write(reinterpret_cast<const char*>(contig.data_ptr<float>()),
              static_cast<std::streamsize>(contig.numel() * 4));
  }
  if (!out) throw std::runtime_error("save_archive: write failed for " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_archive: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_archive: " + path.string() + " is not a checkpoint archive");
  uint64_t manifest_size = 0;
  in.read(reinterpret_cast<char*>(&manifest_size), sizeof(manifest_size));
  std::string manifest_bytes(manifest_size, '\0');
  in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_size));
  if (!in) throw std::runtime_error("load_archive: truncated manifest in " + path.string());
  nlohmann::json manifest = nlohmann::json::parse(manifest_bytes);

  Archive archive;
  archive.config = manifest.value("config", nlohmann::json::object());
  const std::streampos payload_start = in.tellg();
  for (const auto& rec : manifest.at("tensors")) {
    const std::string name = rec.at("name").get<std::string>();
    TORCH_CHECK(rec.at("dtype").get<std::string>() == "f32",
                "load_archive: unsupported dtype for '", name, "'");
    const auto shape = rec.at("shape").get<std::vector<int64_t>>();
    const int64_t offset = rec.at("offset").get<int64_t>();
    auto t = torch::empty(shape, torch::kFloat32);
    in.seekg(payload_start + std::streampos(offset));
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()),
            static_cast<std::streamsize>(t.numel() * 4));
    if (!in) throw std::runtime_error("load_archive: truncated payload in " + path.string());
    if (archive.tensors.entries.count(name))
      throw std::runtime_error("load_archive: duplicate tensor name '" + name + "'");
    archive.tensors.entries[name] = std::move(t);
  }
  return archive;
}

void load_state_into(torch::nn::Module& m, const NamedParameterSet& tensors) {
  torch::NoGradGuard no_grad;
  std::set<std::string> consumed;
  auto copy_into = [&](const std::string& name, torch::Tensor dst) {
    auto it = tensors.entries.find(name);
    if (it == tensors.entries.end())
      throw std::runtime_error("load_state_into: checkpoint is missing tensor '" + name + "'");
    TORCH_CHECK(dst.sizes() == it->second.sizes(), "load_state_into: shape mismatch for '", name,
                "': ", dst.sizes(), " vs ", it->second.sizes());
    dst.copy_(it->second);
    consumed.insert(name);
  };
  for (const auto& p : m.named_parameters(true)) copy_into(p.key(), p.value());
  for (const auto& b : m.named_buffers(true)) {
    if (b.value().dtype() == torch::kFloat32) copy_into(b.key(), b.value());
  }
  for (const auto& [name, t] : tensors.entries) {
    if (!consumed.count(name))
      throw std::runtime_error("load_state_into: checkpoint tensor '" + name +
                               "' has no destination in the module");
  }
}

}  // namespace psstr
