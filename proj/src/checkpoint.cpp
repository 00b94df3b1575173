#include "magsim/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "magsim/errors.hpp"

namespace magsim {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'G', 'S', 'I', 'M', 'C', 'K'};

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

void save_checkpoint(std::span<Parameter* const> params, const std::filesystem::path& file) {
  nlohmann::ordered_json manifest;
  manifest["format"] = 1;
  manifest["params"] = nlohmann::ordered_json::array();
  for (const Parameter* p : params) {
    manifest["params"].push_back({{"name", p->name}, {"rows", p->value.rows}, {"cols", p->value.cols}});
  }
  const std::string text = manifest.dump();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + file.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = to_little(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter* p : params) {
    for (double v : p->value.data) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw IoError("short write on checkpoint " + file.string());
}

void load_checkpoint(std::span<Parameter* const> params, const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + file.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError(file.string() + ": not a checkpoint file");
  len = to_little(len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(file.string() + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": bad manifest: " + e.what());
  }
  const auto& entries = manifest.at("params");
  if (entries.size() != params.size()) throw IoError(file.string() + ": parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const auto& e = entries[k];
    if (e.at("name").get<std::string>() != p.name || e.at("rows").get<std::size_t>() != p.value.rows ||
        e.at("cols").get<std::size_t>() != p.value.cols) {
      throw IoError(file.string() + ": manifest entry " + std::to_string(k) + " does not match " + p.name);
    }
  }
  for (Parameter* p : params) {
    for (double& v : p->value.data) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), sizeof bits);
      if (!in) throw IoError(file.string() + ": truncated parameter blob");
      v = std::bit_cast<double>(to_little(bits));
    }
  }
}

}  // namespace magsim
