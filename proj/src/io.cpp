#include "sdoa/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace sdoa::io {

namespace {

using json = nlohmann::json;

void put_bytes(std::ostream& os, std::uint64_t v, int n) {
  std::array<char, 8> buf{};
  for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(buf.data(), n);
}

std::uint64_t get_bytes(std::istream& is, int n) {
  std::array<unsigned char, 8> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), n);
  if (is.gcount() != n) throw FormatError("unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[static_cast<size_t>(i)]) << (8 * i);
  return v;
}

void put_u32(std::ostream& os, std::uint32_t v) { put_bytes(os, v, 4); }
void put_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, v, 8); }
void put_f64(std::ostream& os, double v) { put_bytes(os, std::bit_cast<std::uint64_t>(v), 8); }
std::uint32_t get_u32(std::istream& is) { return static_cast<std::uint32_t>(get_bytes(is, 4)); }
std::uint64_t get_u64(std::istream& is) { return get_bytes(is, 8); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_bytes(is, 8)); }

void put_magic(std::ostream& os, const char* magic) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char* magic) {
  char buf[4] = {};
  is.read(buf, 4);
  if (is.gcount() != 4 || std::memcmp(buf, magic, 4) != 0)
    throw FormatError(std::string("bad magic, expected ") + std::string(magic, 4));
}

void expect_version(std::uint32_t got, std::uint32_t want) {
  if (got != want)
    throw FormatError("unsupported version " + std::to_string(got) + " (expected " +
                      std::to_string(want) + ")");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return is;
}

void finish(std::ostream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace

void write_dataset(std::ostream& os, int n_antennas, int k,
                   const std::vector<DatasetRecord>& records) {
  if (n_antennas < 1 || k < 1) throw std::invalid_argument("write_dataset: bad dimensions");
  put_magic(os, "SDOA");
  put_u32(os, kDatasetVersion);
  put_u32(os, static_cast<std::uint32_t>(n_antennas));
  put_u32(os, static_cast<std::uint32_t>(k));
  put_u64(os, records.size());
  for (const DatasetRecord& rec : records) {
    const Snapshot& s = rec.snapshot;
    if (s.received.size() != n_antennas || s.truth.k() != k || s.truth.amplitudes.size() != k)
      throw std::invalid_argument("write_dataset: record shape does not match header");
    put_f64(os, static_cast<double>(static_cast<int>(rec.stage)));
    put_f64(os, s.snr_db);
    put_f64(os, static_cast<double>(s.realization_id));
    for (int i = 0; i < k; ++i) put_f64(os, s.truth.doas_deg(i));
    for (int i = 0; i < k; ++i) {
      put_f64(os, s.truth.amplitudes(i).real());
      put_f64(os, s.truth.amplitudes(i).imag());
    }
    for (int n = 0; n < n_antennas; ++n) {
      put_f64(os, s.received(n).real());
      put_f64(os, s.received(n).imag());
    }
  }
}

std::vector<DatasetRecord> read_dataset(std::istream& is) {
  expect_magic(is, "SDOA");
  expect_version(get_u32(is), kDatasetVersion);
  const auto n = static_cast<int>(get_u32(is));
  const auto k = static_cast<int>(get_u32(is));
  const std::uint64_t count = get_u64(is);
  if (n < 1 || k < 1) throw FormatError("dataset header has zero dimensions");

  std::vector<DatasetRecord> out;
  out.reserve(static_cast<size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t c = 0; c < count; ++c) {
    DatasetRecord rec;
    const double stage = get_f64(is);
    if (stage != std::floor(stage) || stage < 0 || stage >= kNumStages)
      throw FormatError("dataset record has an invalid stage");
    rec.stage = stage_from_index(static_cast<int>(stage));
    Snapshot& s = rec.snapshot;
    s.snr_db = get_f64(is);
    s.realization_id = static_cast<std::uint64_t>(get_f64(is));
    s.truth.doas_deg.resize(k);
    s.truth.amplitudes.resize(k);
    s.received.resize(n);
    for (int i = 0; i < k; ++i) s.truth.doas_deg(i) = get_f64(is);
    for (int i = 0; i < k; ++i) {
      const double re = get_f64(is);
      s.truth.amplitudes(i) = cplx(re, get_f64(is));
    }
    for (int i = 0; i < n; ++i) {
      const double re = get_f64(is);
      s.received(i) = cplx(re, get_f64(is));
    }
    out.push_back(std::move(rec));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after dataset");
  return out;
}

void write_dataset_file(const std::filesystem::path& path, int n_antennas, int k,
                        const std::vector<DatasetRecord>& records) {
  std::ofstream os = open_out(path);
  write_dataset(os, n_antennas, k, records);
  finish(os, path);
}

std::vector<DatasetRecord> read_dataset_file(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  return read_dataset(is);
}

std::string dataset_metadata_json(const DatasetSpec& spec) {
  json j;
  j["format"] = "SDOA";
  j["version"] = kDatasetVersion;
  j["n_samples"] = spec.n_samples;
  j["seed"] = spec.seed;
  j["seed_splitter"] = "splitmix64: derive_seed(seed, stream, sample_index)";
  j["array"] = {{"n_antennas", spec.array.n_antennas},
                {"wavelength", spec.array.wavelength},
                {"nominal_spacing", spec.array.nominal_spacing}};
  j["caps"] = {{"max_pos_std", spec.caps.max_pos_std},
               {"max_gain_std", spec.caps.max_gain_std},
               {"max_phase_std", spec.caps.max_phase_std},
               {"coupling_base", spec.caps.coupling_base},
               {"nonlinear_strength", spec.caps.nonlinear_strength},
               {"imperfect_factor", spec.caps.imperfect_factor}};
  json stages = json::array();
  for (CurriculumStage s : spec.stage_schedule) stages.push_back(std::string(stage_name(s)));
  j["stage_schedule"] = stages;
  j["snr_db"] = {{"min", spec.snr_min_db}, {"max", spec.snr_max_db}};
  j["doa_policy"] = {{"k", spec.doa.k},
                     {"min_separation_deg", spec.doa.min_separation_deg},
                     {"lo_deg", spec.doa.lo_deg},
                     {"hi_deg", spec.doa.hi_deg}};
  j["record_layout"] =
      "f64 LE: stage, snr_db, realization_id, doas[K], amplitudes[K] re/im, r[N] re/im";
  return j.dump(2) + "\n";
}

DatasetSpec parse_dataset_metadata(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "SDOA") throw FormatError("metadata is not an SDOA dataset");
    DatasetSpec spec;
    const json& a = j.at("array");
    spec.array = ArrayConfig::ula(a.at("n_antennas").get<int>(), a.at("nominal_spacing").get<double>(),
                                  a.at("wavelength").get<double>());
    const json& c = j.at("caps");
    spec.caps.max_pos_std = c.at("max_pos_std").get<double>();
    spec.caps.max_gain_std = c.at("max_gain_std").get<double>();
    spec.caps.max_phase_std = c.at("max_phase_std").get<double>();
    spec.caps.coupling_base = c.at("coupling_base").get<double>();
    spec.caps.nonlinear_strength = c.at("nonlinear_strength").get<double>();
    spec.caps.imperfect_factor = c.at("imperfect_factor").get<double>();
    spec.stage_schedule.clear();
    for (const auto& s : j.at("stage_schedule"))
      spec.stage_schedule.push_back(stage_from_name(s.get<std::string>()));
    spec.snr_min_db = j.at("snr_db").at("min").get<double>();
    spec.snr_max_db = j.at("snr_db").at("max").get<double>();
    const json& d = j.at("doa_policy");
    spec.doa.k = d.at("k").get<int>();
    spec.doa.min_separation_deg = d.at("min_separation_deg").get<double>();
    spec.doa.lo_deg = d.at("lo_deg").get<double>();
    spec.doa.hi_deg = d.at("hi_deg").get<double>();
    spec.n_samples = j.at("n_samples").get<std::int64_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad dataset metadata: ") + e.what());
  }
}

void write_model(std::ostream& os, const net::NetworkParams& params) {
  params.validate();
  const net::NetConfig& c = params.cfg;
  put_magic(os, "SDON");
  put_u32(os, kModelVersion);
  for (int v : {c.n_antennas, c.n_filters, c.inner_dim, c.n_conv_layers, c.kernel_size, c.batch_size})
    put_u32(os, static_cast<std::uint32_t>(v));
  put_f64(os, c.bn_epsilon);
  put_f64(os, c.bn_momentum);
  put_f64(os, c.learning_rate);
  auto put_vec = [&](const std::vector<double>& v) {
    for (double x : v) put_f64(os, x);
  };
  put_vec(params.fc_in_w);
  put_vec(params.fc_in_b);
  for (const net::ConvBlock& b : params.blocks) {
    put_vec(b.kernel);
    put_vec(b.bias);
    put_vec(b.gamma);
    put_vec(b.beta);
    put_vec(b.running_mean);
    put_vec(b.running_var);
  }
  put_vec(params.fc_out_w);
  put_vec(params.fc_out_b);
}

net::NetworkParams read_model(std::istream& is) {
  expect_magic(is, "SDON");
  expect_version(get_u32(is), kModelVersion);
  net::NetConfig c;
  std::array<std::uint32_t, 6> dims{};
  for (auto& d : dims) d = get_u32(is);
  for (auto d : dims)
    if (d == 0 || d > (1u << 20)) throw FormatError("model header has an implausible dimension");
  c.n_antennas = static_cast<int>(dims[0]);
  c.n_filters = static_cast<int>(dims[1]);
  c.inner_dim = static_cast<int>(dims[2]);
  c.n_conv_layers = static_cast<int>(dims[3]);
  c.kernel_size = static_cast<int>(dims[4]);
  c.batch_size = static_cast<int>(dims[5]);
  c.bn_epsilon = get_f64(is);
  c.bn_momentum = get_f64(is);
  c.learning_rate = get_f64(is);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model header: ") + e.what());
  }

  net::NetworkParams p = net::NetworkParams::zeros(c);
  auto get_vec = [&](std::vector<double>& v) {
    for (double& x : v) x = get_f64(is);
  };
  get_vec(p.fc_in_w);
  get_vec(p.fc_in_b);
  for (net::ConvBlock& b : p.blocks) {
    get_vec(b.kernel);
    get_vec(b.bias);
    get_vec(b.gamma);
    get_vec(b.beta);
    get_vec(b.running_mean);
    get_vec(b.running_var);
  }
  get_vec(p.fc_out_w);
  get_vec(p.fc_out_b);
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model parameters: ") + e.what());
  }
  return p;
}

void write_model_file(const std::filesystem::path& path, const net::NetworkParams& params) {
  std::ofstream os = open_out(path);
  write_model(os, params);
  finish(os, path);
}

net::NetworkParams read_model_file(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  return read_model(is);
}

}  // namespace sdoa::io
