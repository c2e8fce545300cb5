// Apache License, Version 2.0, refer to LICENSE.txt
#include "sdpm/batch_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sdpm/errors.hpp"

namespace sdpm {

void SampleBatch::validate() const {
  if (id.empty()) throw std::invalid_argument("SampleBatch: empty id");
  if (samples.rows() < 1) throw std::invalid_argument("SampleBatch '" + id + "': no samples");
  if (!samples.allFinite())
    throw std::invalid_argument("SampleBatch '" + id + "': non-finite entries");
}

}  // namespace sdpm

namespace sdpm::io {

namespace fs = std::filesystem;

std::filesystem::path write_batch(const fs::path& dir, const SampleBatch& batch) {
  batch.validate();
  fs::create_directories(dir);
  fs::path csv = dir / (batch.id + ".csv");
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + csv.string() + "' for writing");

  for (int j = 0; j < batch.dim(); ++j) out << (j ? "," : "") << "dim_" << (j + 1);
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < batch.samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < batch.samples.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", batch.samples(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + csv.string() + "'");

  fs::path meta = dir / (batch.id + ".meta");
  std::ofstream mout(meta, std::ios::trunc);
  if (!mout) throw IoError("cannot open '" + meta.string() + "' for writing");
  mout << "id=" << batch.id << '\n';
  if (batch.label) mout << "label=" << *batch.label << '\n';
  return csv;
}

SampleBatch read_batch(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open batch file '" + csv_path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw IoError("batch file '" + csv_path.string() + "' is empty");
  std::size_t p = std::count(line.begin(), line.end(), ',') + 1;

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t start = 0, fields = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string tok = line.substr(start, comma == std::string::npos ? comma : comma - start);
      char* end = nullptr;
      double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str())
        throw IoError("batch file '" + csv_path.string() + "': bad number '" + tok + "'");
      values.push_back(v);
      ++fields;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields != p)
      throw IoError("batch file '" + csv_path.string() + "': inconsistent column count");
    ++rows;
  }
  if (rows == 0) throw IoError("batch file '" + csv_path.string() + "' has no rows");

  SampleBatch batch;
  batch.samples.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < p; ++j)
      batch.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          values[i * p + j];

  batch.id = csv_path.stem().string();
  fs::path meta = csv_path;
  meta.replace_extension(".meta");
  if (fs::exists(meta)) {
    std::ifstream min(meta);
    while (std::getline(min, line)) {
      if (line.starts_with("id=")) batch.id = line.substr(3);
      else if (line.starts_with("label=")) batch.label = line.substr(6);
    }
  }
  batch.validate();
  return batch;
}

void write_manifest(const fs::path& dir, const std::vector<fs::path>& files,
                    const std::vector<SampleBatch>& batches) {
  if (files.size() != batches.size())
    throw std::invalid_argument("write_manifest: file/batch count mismatch");
  std::ofstream out(dir / "manifest.csv", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  out << "file,id,label,n_samples\n";
  for (std::size_t i = 0; i < files.size(); ++i) {
    out << files[i].filename().string() << ',' << batches[i].id << ','
        << batches[i].label.value_or("") << ',' << batches[i].samples.rows() << '\n';
  }
}

std::vector<fs::path> list_batch_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  fs::path manifest = dir / "manifest.csv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::size_t comma = line.find(',');
      files.push_back(dir / line.substr(0, comma));
    }
    return files;
  }
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".csv" && entry.path().filename() != "manifest.csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace sdpm::io
