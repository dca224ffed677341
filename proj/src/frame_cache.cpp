#include "castscan/frame_cache.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>

#include "castscan/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace castscan {

namespace {

constexpr const char* kIndexName = "index.json";

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using DigestPtr = std::unique_ptr<EVP_MD_CTX, DigestDeleter>;

DigestPtr new_sha256() {
  DigestPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw EnvironmentError("sha256 unavailable");
  }
  return ctx;
}

std::string finish_hex(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

bool entry_intact(const fs::path& dir, std::vector<fs::path>& frames) {
  std::ifstream in(dir / kIndexName);
  if (!in) return false;
  json index = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (index.is_discarded() || !index.contains("frames") || !index["frames"].is_array()) {
    return false;
  }
  frames.clear();
  for (const auto& item : index["frames"]) {
    if (!item.contains("name") || !item.contains("size")) return false;
    fs::path file = dir / item["name"].get<std::string>();
    std::error_code ec;
    auto size = fs::file_size(file, ec);
    if (ec || size != item["size"].get<std::uintmax_t>()) return false;
    frames.push_back(std::move(file));
  }
  return !frames.empty();
}

}  // namespace

TempDir::TempDir(std::string_view prefix) {
  std::string pattern = (fs::temp_directory_path() / (std::string(prefix) + "-XXXXXX")).string();
  if (::mkdtemp(pattern.data()) == nullptr) {
    throw EnvironmentError("cannot create temporary directory " + pattern);
  }
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string sha256_hex(std::string_view data) {
  auto ctx = new_sha256();
  EVP_DigestUpdate(ctx.get(), data.data(), data.size());
  return finish_hex(ctx.get());
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot read " + path.string());
  auto ctx = new_sha256();
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return finish_hex(ctx.get());
}

FrameCache::FrameCache(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_) || ::access(root_.c_str(), W_OK | X_OK) != 0) {
    throw EnvironmentError("frame cache root is not writable: " + root_.string());
  }
}

std::string FrameCache::key_for(const fs::path& video, const SamplingMode& mode) const {
  char interval[32];
  std::snprintf(interval, sizeof interval, "%.17g", mode.interval_s);
  return sha256_hex(sha256_file(video) + "|" + to_string(mode.kind) + "|" + interval)
      .substr(0, 32);
}

FrameCache::Entry FrameCache::materialize(const fs::path& video, const SamplingMode& mode,
                                          const std::string& decoder_command) {
  Entry entry;
  entry.dir = root_ / key_for(video, mode);
  if (entry_intact(entry.dir, entry.frames)) {
    entry.hit = true;
    return entry;
  }

  std::error_code ec;
  fs::remove_all(entry.dir, ec);

  std::string staging = (root_ / ".staging-XXXXXX").string();
  if (::mkdtemp(staging.data()) == nullptr) {
    throw EnvironmentError("cannot create staging directory in " + root_.string());
  }
  try {
    run_decoder(decoder_command, video, mode.interval_s, staging);
    json index;
    index["source"] = video.string();
    index["kind"] = to_string(mode.kind);
    index["interval_s"] = mode.interval_s;
    index["frames"] = json::array();
    for (const auto& f : list_images(staging)) {
      index["frames"].push_back({{"name", f.filename().string()}, {"size", fs::file_size(f)}});
    }
    std::ofstream(fs::path(staging) / kIndexName) << index.dump(2) << '\n';
    fs::rename(staging, entry.dir, ec);
    if (ec) {
      // Lost a race with another process filling the same key.
      fs::remove_all(staging, ec);
    }
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }

  if (!entry_intact(entry.dir, entry.frames)) {
    throw EmptySequenceError("decoder produced no frames for " + video.string());
  }
  return entry;
}

}  // namespace castscan
