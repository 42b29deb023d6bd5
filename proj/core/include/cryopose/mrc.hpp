#pragma once

#include <string>

#include "cryopose/tensor.hpp"

namespace cryopose {

/// Contents of an MRC2014 file: a volume (ISPG 1, cubic) or an image stack
/// (ISPG 0, NZ images of NX x NY). Data returned as float64 but stored on
/// disk as little-endian float32 (mode 2).
struct MrcData {
  Tensor data;  // (NZ, NY, NX)
  double pixel_size = 1.0;
  bool is_volume = false;
};

/// Write a rank-3 real tensor as MRC2014 mode 2. Values are truncated to
/// float32; the write is atomic (temp file + rename) and fully deterministic
/// (no timestamps).
void write_mrc(const std::string& path, const Tensor& data, double pixel_size,
               bool as_volume);

MrcData read_mrc(const std::string& path);

}  // namespace cryopose
