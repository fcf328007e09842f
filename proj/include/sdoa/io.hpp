#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdoa/array_model.hpp"
#include "sdoa/sdoanet.hpp"

namespace sdoa::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kModelVersion = 1;

/// Dataset container. Layout, all little-endian:
///   "SDOA" | u32 version | u32 N | u32 K | u64 count
///   count records of f64: stage, snr_db, realization_id, doas[K],
///   amplitudes[K] (re, im interleaved), r[N] (re, im interleaved)
/// Each record's stage is the CurriculumStage index it was drawn from.
struct DatasetRecord {
  CurriculumStage stage = CurriculumStage::Perfect;
  Snapshot snapshot;
};

void write_dataset(std::ostream& os, int n_antennas, int k,
                   const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(std::istream& is);

void write_dataset_file(const std::filesystem::path& path, int n_antennas, int k,
                        const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset_file(const std::filesystem::path& path);

/// JSON sidecar describing how a dataset was generated.
std::string dataset_metadata_json(const DatasetSpec& spec);
/// Inverse of dataset_metadata_json (array, caps, schedule, SNR range,
/// DOA policy, count and seed).
DatasetSpec parse_dataset_metadata(const std::string& json);

/// Model file. Layout, all little-endian:
///   "SDON" | u32 version | u32 N, M_F, M_I, M_C, M_K, M_B
///   | f64 bn_epsilon, bn_momentum, learning_rate
///   | f64 arrays: fc_in.w, fc_in.b, per block (kernel, bias, gamma, beta,
///     running_mean, running_var), fc_out.w, fc_out.b
void write_model(std::ostream& os, const net::NetworkParams& params);
net::NetworkParams read_model(std::istream& is);

void write_model_file(const std::filesystem::path& path, const net::NetworkParams& params);
net::NetworkParams read_model_file(const std::filesystem::path& path);

}  // namespace sdoa::io
