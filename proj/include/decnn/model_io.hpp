#pragma once

// Model container (all integers and floats little-endian):
//
//   "DECNNMDL"                  8-byte magic
//   u32 version                 currently 1
//   u64 header_size, header     UTF-8 JSON: config, input_dim, embedding
//                               references {path, fnv1a64 hex}, tensor manifest
//   tensors                     per manifest entry: f32[rows*cols], row-major
//   u64 checksum                FNV-1a 64 of every preceding byte
//
// Tensor order: for each conv filter group (layer 1 groups, then upper
// layers) its weights (out x kernel*in) and bias (1 x out); then the output
// layer weights (in x 3) and bias (1 x 3). Embedding tables are referenced,
// never copied.

#include <cstdint>
#include <filesystem>
#include <optional>

#include "decnn/embeddings.hpp"
#include "decnn/model.hpp"

namespace decnn {

struct EmbeddingRef {
  std::filesystem::path path;
  /// FNV-1a 64 of the file; 0 on save means "compute it now".
  std::uint64_t hash = 0;
};

struct ModelSources {
  std::optional<EmbeddingRef> general;
  std::optional<EmbeddingRef> domain;
};

void save_model(const DeCnn<float>& model, const std::filesystem::path& path,
                const ModelSources& sources);

struct LoadedModel {
  DeCnn<float> model;
  ModelSources sources;
};

/// Parameters and config only; no embedding files are touched. Throws
/// IntegrityError when the checksum fails, FormatError on a malformed file.
LoadedModel read_model_parameters(const std::filesystem::path& path);

/// Full load: verifies each referenced embedding file's hash (IntegrityError
/// on mismatch, IoError naming the path when missing) and attaches the tables.
LoadedModel load_model(const std::filesystem::path& path, const LoadOptions& embed_options = {});

}  // namespace decnn
