// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <filesystem>
#include <vector>

#include "sdpm/sample_batch.hpp"

namespace sdpm::io {

/// Writes one experiment as `<stem>.csv` (header dim_1,...,dim_p, one draw
/// per row) plus a `<stem>.meta` sidecar carrying `id=` and, when present,
/// `label=` lines. Returns the CSV path.
std::filesystem::path write_batch(const std::filesystem::path& dir, const SampleBatch& batch);

/// Reads a batch CSV and its sidecar. A missing sidecar falls back to the
/// file stem as id with no label.
SampleBatch read_batch(const std::filesystem::path& csv_path);

/// Writes `manifest.csv` (file,id,label,n_samples) describing a set of batch
/// files in order.
void write_manifest(const std::filesystem::path& dir,
                    const std::vector<std::filesystem::path>& files,
                    const std::vector<SampleBatch>& batches);

/// Batch files under `dir`, in manifest order when `manifest.csv` exists,
/// otherwise all `*.csv` files (except the manifest) sorted by name.
std::vector<std::filesystem::path> list_batch_files(const std::filesystem::path& dir);

}  // namespace sdpm::io
