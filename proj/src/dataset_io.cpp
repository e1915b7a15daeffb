#include "rmat/dataset_io.hpp"

#include <filesystem>

#include "rmat/bin_io.hpp"
#include "rmat/error.hpp"

namespace rmat {

namespace {
constexpr char kMagic[4] = {'R', 'M', 'A', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr int kManifestVersion = 1;
}  // namespace

void write_dataset(const std::string& dir, const Dataset& dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  BinWriter bin;
  bin.bytes(kMagic, 4);
  bin.u16(kVersion);

  nlohmann::json frames = nlohmann::json::array();
  for (const Frame& frame : dataset.frames) {
    nlohmann::json patches = nlohmann::json::array();
    for (const Patch& p : frame.patches) {
      const std::size_t offset = bin.offset();
      const int s = p.pixels.dim(1);
      bin.u32(static_cast<std::uint32_t>(p.frame_id));
      bin.u32(static_cast<std::uint32_t>(p.identity));
      bin.f32(static_cast<float>(p.center_u));
      bin.f32(static_cast<float>(p.center_v));
      bin.u16(static_cast<std::uint16_t>(s));
      for (std::size_t i = 0; i < p.pixels.numel(); ++i) {
        bin.f32(static_cast<float>(p.pixels[i]));
      }
      patches.push_back({{"offset", offset},
                         {"center", {p.center_u, p.center_v}},
                         {"identity", p.identity}});
    }
    frames.push_back({{"frame_id", frame.frame_id}, {"patches", patches}});
  }

  nlohmann::json pairs = nlohmann::json::array();
  for (const PairRef& pr : dataset.pairs) {
    pairs.push_back(
        {{"a", {pr.frame_a, pr.idx_a}}, {"b", {pr.frame_b, pr.idx_b}}, {"label", pr.label}});
  }

  nlohmann::json manifest;
  manifest["version"] = kManifestVersion;
  manifest["config"] = dataset.config;
  manifest["frames"] = frames;
  manifest["pairs"] = pairs;

  const std::string text = manifest.dump(2) + "\n";
  write_file((fs::path(dir) / "manifest.json").string(),
             std::vector<char>(text.begin(), text.end()));
  write_file((fs::path(dir) / "patches.bin").string(), bin.data());
}

Dataset read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::vector<char> mbuf = read_file((fs::path(dir) / "manifest.json").string());
  nlohmann::json manifest =
      nlohmann::json::parse(std::string(mbuf.begin(), mbuf.end()), nullptr, false);
  if (manifest.is_discarded()) throw ParseError(0, "manifest.json is not valid JSON");
  if (!manifest.contains("version") || manifest["version"].get<int>() != kManifestVersion) {
    throw ValidationError("manifest.json: unsupported or missing version");
  }

  const std::vector<char> bin = read_file((fs::path(dir) / "patches.bin").string());
  BinReader header(bin.data(), bin.size());
  if (header.str(4, "magic") != std::string(kMagic, 4)) {
    throw ParseError(0, "bad patches.bin magic (expected RMAT)");
  }
  const std::uint16_t version = header.u16("version");
  if (version != kVersion) {
    throw ParseError(4, "unsupported patches.bin version " + std::to_string(version));
  }

  Dataset ds;
  ds.config = manifest.value("config", nlohmann::json::object());
  try {
    for (const auto& jframe : manifest.at("frames")) {
      Frame frame;
      frame.frame_id = jframe.at("frame_id").get<int>();
      if (frame.frame_id != static_cast<int>(ds.frames.size())) {
        throw ValidationError("manifest.json: frame_id " + std::to_string(frame.frame_id) +
                              " out of order (must equal its index)");
      }
      for (const auto& jpatch : jframe.at("patches")) {
        const std::size_t offset = jpatch.at("offset").get<std::size_t>();
        if (offset >= bin.size()) {
          throw ParseError(offset, "patch offset beyond end of patches.bin");
        }
        BinReader r(bin.data(), bin.size());
        r.skip_to(offset, "patch record");
        Patch p;
        p.frame_id = static_cast<int>(r.u32("patch frame_id"));
        p.identity = static_cast<int>(r.u32("patch identity"));
        p.center_u = r.f32("patch center u");
        p.center_v = r.f32("patch center v");
        const int s = r.u16("patch side");
        if (s < 1) throw ParseError(offset, "patch side must be positive");
        p.pixels = Tensor({3, s, s});
        for (std::size_t i = 0; i < p.pixels.numel(); ++i) p.pixels[i] = r.f32("patch pixels");
        if (p.frame_id != frame.frame_id) {
          throw ParseError(offset, "patch frame_id " + std::to_string(p.frame_id) +
                                       " disagrees with manifest frame " +
                                       std::to_string(frame.frame_id));
        }
        frame.patches.push_back(std::move(p));
      }
      ds.frames.push_back(std::move(frame));
    }
    for (const auto& jpair : manifest.at("pairs")) {
      PairRef pr;
      pr.frame_a = jpair.at("a")[0].get<int>();
      pr.idx_a = jpair.at("a")[1].get<int>();
      pr.frame_b = jpair.at("b")[0].get<int>();
      pr.idx_b = jpair.at("b")[1].get<int>();
      pr.label = jpair.at("label").get<int>();
      if (pr.label != 0 && pr.label != 1) {
        throw ValidationError("manifest.json: pair labels must be 0 or 1");
      }
      auto check = [&](int frame, int idx) {
        if (frame < 0 || frame >= static_cast<int>(ds.frames.size()) || idx < 0 ||
            idx >= static_cast<int>(ds.frames[static_cast<std::size_t>(frame)].patches.size())) {
          throw ValidationError("manifest.json: pair references missing patch (" +
                                std::to_string(frame) + "," + std::to_string(idx) + ")");
        }
      };
      check(pr.frame_a, pr.idx_a);
      check(pr.frame_b, pr.idx_b);
      ds.pairs.push_back(pr);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest.json: ") + e.what());
  }
  return ds;
}

}  // namespace rmat
