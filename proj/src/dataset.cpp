#include "ckmap/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ckmap {

namespace {

static_assert(std::endian::native == std::endian::little,
              "CKMD serialization assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'K', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FileFormatError("truncated file");
  return v;
}

void put_csi(std::ostream& os, const CsiTensor& h) {
  for (const cplx& v : h.data) {
    put<float>(os, static_cast<float>(v.real()));
    put<float>(os, static_cast<float>(v.imag()));
  }
}

CsiTensor get_csi(std::istream& is, std::size_t nc, std::size_t nr, std::size_t nt) {
  CsiTensor h(nc, nr, nt);
  std::vector<float> buf(2 * h.size());
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw FileFormatError("truncated file");
  for (std::size_t i = 0; i < h.size(); ++i) h.data[i] = cplx(buf[2 * i], buf[2 * i + 1]);
  return h;
}

}  // namespace

void ChannelDataset::validate() const {
  config.validate();
  for (const CsiRecord& r : records) {
    if (r.h_up.n_c != config.n_c_used || r.h_up.n_r != config.n_r || r.h_up.n_t != config.n_t ||
        !r.h_up.same_shape(r.h_down))
      throw std::invalid_argument("ChannelDataset: record tensors do not match config dimensions");
    if (r.block_index >= config.n_blocks)
      throw std::invalid_argument("ChannelDataset: block_index out of range");
  }
}

bool ChannelDataset::operator==(const ChannelDataset& o) const {
  if (records.size() != o.records.size()) return false;
  const SystemConfig& a = config;
  const SystemConfig& b = o.config;
  if (a.n_t != b.n_t || a.n_r != b.n_r || a.n_c_total != b.n_c_total ||
      a.n_c_used != b.n_c_used || a.subcarrier_spacing != b.subcarrier_spacing ||
      a.f_up_center != b.f_up_center || a.f_down_center != b.f_down_center ||
      a.n_blocks != b.n_blocks || a.samples_per_block != b.samples_per_block ||
      a.tx_power != b.tx_power || a.noise_power != b.noise_power)
    return false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const CsiRecord& a = records[i];
    const CsiRecord& b = o.records[i];
    if (a.block_index != b.block_index) return false;
    if (a.ue_position.x != b.ue_position.x || a.ue_position.y != b.ue_position.y ||
        a.ue_position.z != b.ue_position.z)
      return false;
    if (!(a.h_up == b.h_up) || !(a.h_down == b.h_down)) return false;
  }
  return true;
}

void write_dataset(const ChannelDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileFormatError("cannot open for writing: " + path);

  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.config.n_t));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.config.n_r));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.config.n_c_total));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.config.n_c_used));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.config.n_blocks));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.config.samples_per_block));
  put<double>(os, ds.config.subcarrier_spacing);
  put<double>(os, ds.config.f_up_center);
  put<double>(os, ds.config.f_down_center);
  put<double>(os, ds.config.tx_power);
  put<double>(os, ds.config.noise_power);
  put<std::uint64_t>(os, ds.records.size());

  for (const CsiRecord& r : ds.records) {
    put<std::uint32_t>(os, r.block_index);
    put<double>(os, r.ue_position.x);
    put<double>(os, r.ue_position.y);
    put<double>(os, r.ue_position.z);
    put_csi(os, r.h_up);
    put_csi(os, r.h_down);
  }
  if (!os) throw FileFormatError("write failed: " + path);
}

ChannelDataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileFormatError("cannot open: " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw FileFormatError("bad magic");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion)
    throw FileFormatError("unsupported version " + std::to_string(version));

  ChannelDataset ds;
  ds.config.n_t = get<std::uint32_t>(is);
  ds.config.n_r = get<std::uint32_t>(is);
  ds.config.n_c_total = get<std::uint32_t>(is);
  ds.config.n_c_used = get<std::uint32_t>(is);
  ds.config.n_blocks = get<std::uint32_t>(is);
  ds.config.samples_per_block = get<std::uint32_t>(is);
  ds.config.subcarrier_spacing = get<double>(is);
  ds.config.f_up_center = get<double>(is);
  ds.config.f_down_center = get<double>(is);
  ds.config.tx_power = get<double>(is);
  ds.config.noise_power = get<double>(is);

  if (ds.config.n_t == 0 || ds.config.n_r == 0 || ds.config.n_c_used == 0 ||
      ds.config.n_c_used > ds.config.n_c_total)
    throw FileFormatError("dimension mismatch");

  const auto count = get<std::uint64_t>(is);
  ds.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    CsiRecord r;
    r.block_index = get<std::uint32_t>(is);
    if (r.block_index >= ds.config.n_blocks) throw FileFormatError("dimension mismatch");
    r.ue_position.x = get<double>(is);
    r.ue_position.y = get<double>(is);
    r.ue_position.z = get<double>(is);
    r.h_up = get_csi(is, ds.config.n_c_used, ds.config.n_r, ds.config.n_t);
    r.h_down = get_csi(is, ds.config.n_c_used, ds.config.n_r, ds.config.n_t);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace ckmap
