// Copyright 2026 The MDER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mder/error.hpp"
#include "mder/model/params.hpp"
#include "mder/train.hpp"

namespace mder {

// Checkpoint archive layout (little endian):
//
//   magic   "MDERCKPT"            8 bytes
//   version uint32                currently 1
//   hlen    uint64                byte length of the JSON header
//   header  JSON                  config, ablation, vocabulary, lexicon
//                                 fingerprint, tensor directory
//   data    float32[]             tensors, column-major, in directory order
//
// LSTM weight matrices are stored per gate (W_i, W_f, W_o, W_c and b_i ...)
// so every gate can be inspected on its own.

inline constexpr std::array<char, 8> kCheckpointMagic = {'M', 'D', 'E', 'R',
                                                         'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

struct NamedTensor {
  std::string name;
  Matrix<float> value;
};

inline std::vector<NamedTensor> flatten(const ModelParams<Real>& p) {
  std::vector<NamedTensor> out;
  p.for_each([&](const std::string& name, const Matrix<Real>& m) {
    const bool lstm = name.rfind("bilstm.", 0) == 0;
    if (!lstm) {
      out.push_back({name, m.template cast<float>()});
      return;
    }
    const Eigen::Index dh = m.rows() / 4;
    for (Eigen::Index g = 0; g < 4; ++g) {
      out.push_back({name + "_" + kGateNames[static_cast<std::size_t>(g)],
                     m.middleRows(g * dh, dh).template cast<float>()});
    }
  });
  return out;
}

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Tagger& t,
                             const nlohmann::json& extra = nlohmann::json::object()) {
  const auto tensors = detail::flatten(t.params);
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& nt : tensors) {
    dir.push_back({{"name", nt.name}, {"rows", nt.value.rows()}, {"cols", nt.value.cols()}});
  }
  std::vector<std::uint32_t> chars(t.vocab.chars().begin(), t.vocab.chars().end());
  nlohmann::json header = {{"config", t.params.config},
                           {"ablation", t.params.ablation},
                           {"vocabulary", chars},
                           {"lexicon_fingerprint", t.lexicon.fingerprint()},
                           {"tensors", dir},
                           {"run", extra}};
  const std::string h = header.dump();
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::write_pod(out, kCheckpointVersion);
  detail::write_pod(out, static_cast<std::uint64_t>(h.size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& nt : tensors) {
    out.write(reinterpret_cast<const char*>(nt.value.data()),
              static_cast<std::streamsize>(sizeof(float) * nt.value.size()));
  }
  if (!out) throw IoError("failed to write checkpoint");
}

// Writes to a temporary sibling, then renames over `path`.
inline void save_checkpoint(const std::string& path, const Tagger& t,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    write_checkpoint(out, t, extra);
  }
  std::filesystem::rename(tmp, path);
}

struct CheckpointHeader {
  std::uint32_t version = 0;
  nlohmann::json json;
};

inline CheckpointHeader read_checkpoint_header(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw CheckpointError("not a checkpoint archive");
  CheckpointHeader h;
  h.version = detail::read_pod<std::uint32_t>(in);
  if (h.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(h.version));
  }
  const auto len = detail::read_pod<std::uint64_t>(in);
  if (len > (std::uint64_t{1} << 30)) throw CheckpointError("implausible header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("truncated checkpoint header");
  try {
    h.json = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  return h;
}

// Restores a tagger. The lexicon must be the one the model was trained with;
// its fingerprint is compared against the archive.
inline Tagger read_checkpoint(std::istream& in, const RuleLexicon& lexicon) {
  const CheckpointHeader h = read_checkpoint_header(in);
  Tagger t;
  try {
    const auto config = h.json.at("config").get<ModelConfig>();
    const auto ablation = h.json.at("ablation").get<AblationFlags>();
    const auto chars = h.json.at("vocabulary").get<std::vector<std::uint32_t>>();
    t.vocab = CharVocabulary(std::vector<char32_t>(chars.begin(), chars.end()));
    t.params = zero_params<Real>(config, ablation, t.vocab.size());
    const auto fp = h.json.at("lexicon_fingerprint").get<std::string>();
    if (fp != lexicon.fingerprint()) {
      throw CheckpointError("lexicon fingerprint " + lexicon.fingerprint() +
                            " does not match the checkpoint's " + fp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid checkpoint configuration: ") + e.what());
  }
  t.lexicon = lexicon;

  std::map<std::string, Matrix<float>> stored;
  for (const auto& entry : h.json.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0 || rows * cols > (Eigen::Index{1} << 32)) {
      throw CheckpointError("implausible shape for tensor " + name);
    }
    Matrix<float> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * m.size()));
    if (!in) throw CheckpointError("truncated data for tensor " + name);
    if (!stored.emplace(name, std::move(m)).second) {
      throw CheckpointError("duplicate tensor " + name);
    }
  }
  const auto take = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    const auto it = stored.find(name);
    if (it == stored.end()) throw CheckpointError("missing tensor " + name);
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw CheckpointError("tensor " + name + " has shape " +
                            std::to_string(it->second.rows()) + "x" +
                            std::to_string(it->second.cols()) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    }
    Matrix<Real> out = it->second.template cast<Real>();
    stored.erase(it);
    return out;
  };
  t.params.for_each([&](const std::string& name, Matrix<Real>& m) {
    if (name.rfind("bilstm.", 0) != 0) {
      m = take(name, m.rows(), m.cols());
      return;
    }
    const Eigen::Index dh = m.rows() / 4;
    for (Eigen::Index g = 0; g < 4; ++g) {
      m.middleRows(g * dh, dh) =
          take(name + "_" + kGateNames[static_cast<std::size_t>(g)], dh, m.cols());
    }
  });
  if (!stored.empty()) throw CheckpointError("unexpected tensor " + stored.begin()->first);
  try {
    check_params(t.params);
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid checkpoint parameters: ") + e.what());
  }
  return t;
}

inline Tagger load_checkpoint(const std::string& path, const RuleLexicon& lexicon) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint(in, lexicon);
}

}  // namespace mder
