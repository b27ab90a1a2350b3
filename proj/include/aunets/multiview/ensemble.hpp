#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aunets/au.hpp"
#include "aunets/common.hpp"
#include "aunets/netcore/checkpoint.hpp"
#include "aunets/netcore/fusion.hpp"
#include "aunets/view.hpp"

namespace aunets::multiview {

inline std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(netcore::read_file_bytes(path));
}

// {dataset}/{view|frontal}/AU{code}_{fusion_mode}; no view means a frontal-only dataset.
inline std::filesystem::path checkpoint_name(const std::string& dataset, std::optional<Viewpoint> view, AUCode au,
                                             netcore::FusionMode mode) {
  return std::filesystem::path(dataset) / (view ? to_string(*view) : std::string("frontal")) /
         (to_string(au) + "_" + netcore::to_string(mode));
}

struct EnsembleEntry {
  Viewpoint view;
  AUCode au;
  std::filesystem::path checkpoint;
  std::string sha256;
};

// Routing table (view, AU) -> checkpoint, persisted as CSV lines view,au,checkpoint,sha256.
// Relative checkpoint paths resolve against the manifest's directory.
class EnsembleIndex {
 public:
  void set(EnsembleEntry e) { entries_[{e.view.index, e.au.value}] = std::move(e); }

  // Hashes the checkpoint file and records it.
  void add(Viewpoint view, AUCode au, const std::filesystem::path& checkpoint, const std::filesystem::path& base = {}) {
    const auto full = checkpoint.is_absolute() || base.empty() ? checkpoint : base / checkpoint;
    set({view, au, checkpoint, sha256_file(full)});
  }

  const EnsembleEntry* find(Viewpoint view, AUCode au) const {
    const auto it = entries_.find({view.index, au.value});
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::vector<std::pair<Viewpoint, AUCode>> missing(const std::vector<Viewpoint>& views,
                                                    const std::vector<AUCode>& aus) const {
    std::vector<std::pair<Viewpoint, AUCode>> out;
    for (auto v : views)
      for (auto a : aus)
        if (!find(v, a)) out.emplace_back(v, a);
    return out;
  }

  std::vector<EnsembleEntry> entries() const {
    std::vector<EnsembleEntry> out;
    for (const auto& [k, e] : entries_) out.push_back(e);
    return out;
  }

  std::size_t size() const { return entries_.size(); }
  const std::filesystem::path& base_dir() const { return base_; }
  void set_base_dir(std::filesystem::path p) { base_ = std::move(p); }

  std::filesystem::path resolve(const EnsembleEntry& e) const {
    return e.checkpoint.is_absolute() || base_.empty() ? e.checkpoint : base_ / e.checkpoint;
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "view,au,checkpoint,sha256\n";
    for (const auto& [k, e] : entries_)
      out << to_string(e.view) << ',' << to_string(e.au) << ',' << e.checkpoint.generic_string() << ',' << e.sha256
          << '\n';
  }

  static EnsembleIndex load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingCheckpointError("cannot open ensemble manifest " + path.string());
    EnsembleIndex idx;
    idx.base_ = path.parent_path();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1 || line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
      if (f.size() != 4) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
      try {
        idx.set({parse_view(f[0]), AUCode{parse_au_value(f[1])}, f[2], f[3]});
      } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return idx;
  }

 private:
  std::map<std::pair<int, int>, EnsembleEntry> entries_;
  std::filesystem::path base_;
};

inline std::string slot_name(Viewpoint view, AUCode au) { return to_string(view) + "/" + to_string(au); }

// Loads the detectors of `view` for every AU in `aus`. A missing entry or file aborts with the
// (view, AU) slot in the message; a hash mismatch is a data error.
inline std::map<AUCode, netcore::FusionNet<float>> route(const EnsembleIndex& index, Viewpoint view,
                                                         const std::vector<AUCode>& aus) {
  std::map<AUCode, netcore::FusionNet<float>> out;
  for (AUCode au : aus) {
    const auto* e = index.find(view, au);
    if (!e) throw MissingCheckpointError("ensemble has no checkpoint for " + slot_name(view, au));
    const auto path = index.resolve(*e);
    if (!std::filesystem::exists(path))
      throw MissingCheckpointError("checkpoint for " + slot_name(view, au) + " not found: " + path.string());
    const auto bytes = netcore::read_file_bytes(path);
    if (!e->sha256.empty() && sha256_hex(bytes) != e->sha256)
      throw DataError("checkpoint for " + slot_name(view, au) + " does not match its manifest hash");
    out.emplace(au, netcore::decode_checkpoint<float>(bytes));
  }
  return out;
}

}  // namespace aunets::multiview
