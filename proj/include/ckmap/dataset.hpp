#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ckmap/csi.hpp"
#include "ckmap/geom.hpp"

namespace ckmap {

/// I/O failures on dataset/checkpoint files. The message distinguishes the
/// failure: "bad magic", "unsupported version", "truncated file",
/// "dimension mismatch".
class FileFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsiRecord {
  std::uint32_t block_index = 0;
  Vec3 ue_position;
  CsiTensor h_up;
  CsiTensor h_down;
};

/// On-disk container of per-coherence-block uplink/downlink CSI samples.
struct ChannelDataset {
  SystemConfig config;
  std::vector<CsiRecord> records;

  void validate() const;
  bool operator==(const ChannelDataset& o) const;
};

/// Writes the CKMD v1 binary format (little-endian, CSI as interleaved f32
/// re/im pairs in row-major (c, r, t) order).
void write_dataset(const ChannelDataset& ds, const std::string& path);
ChannelDataset read_dataset(const std::string& path);

}  // namespace ckmap
