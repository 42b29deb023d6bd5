#include "cryopose/mrc.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "cryopose/io.hpp"

namespace cryopose {

namespace {

constexpr std::size_t kHeaderBytes = 1024;

void put_i32(std::vector<char>& h, std::size_t word, std::int32_t v) {
  std::memcpy(h.data() + 4 * (word - 1), &v, 4);
}

void put_f32(std::vector<char>& h, std::size_t word, float v) {
  std::memcpy(h.data() + 4 * (word - 1), &v, 4);
}

std::int32_t get_i32(const std::vector<char>& h, std::size_t word) {
  std::int32_t v;
  std::memcpy(&v, h.data() + 4 * (word - 1), 4);
  return v;
}

float get_f32(const std::vector<char>& h, std::size_t word) {
  float v;
  std::memcpy(&v, h.data() + 4 * (word - 1), 4);
  return v;
}

}  // namespace

void write_mrc(const std::string& path, const Tensor& data, double pixel_size,
               bool as_volume) {
  CP_CHECK_SHAPE(data.rank() == 3 && !data.is_complex(),
                 "write_mrc expects a rank-3 real tensor");
  const auto nz = data.dim(0), ny = data.dim(1), nx = data.dim(2);
  if (as_volume) {
    CP_CHECK_SHAPE(nx == ny && ny == nz, "MRC volume must be cubic");
  } else {
    CP_CHECK_SHAPE(nx == ny, "MRC stack images must be square");
  }

  std::vector<float> payload(static_cast<std::size_t>(data.numel()));
  const double* src = data.real_data();
  for (std::int64_t i = 0; i < data.numel(); ++i)
    payload[static_cast<std::size_t>(i)] = static_cast<float>(src[i]);

  float dmin = payload.empty() ? 0.f : payload[0];
  float dmax = dmin;
  double dsum = 0.0;
  for (float v : payload) {
    dmin = std::min(dmin, v);
    dmax = std::max(dmax, v);
    dsum += v;
  }
  const double dmean = payload.empty() ? 0.0 : dsum / static_cast<double>(payload.size());
  double rms = 0.0;
  for (float v : payload) rms += (v - dmean) * (v - dmean);
  rms = payload.empty() ? 0.0 : std::sqrt(rms / static_cast<double>(payload.size()));

  std::vector<char> h(kHeaderBytes, 0);
  put_i32(h, 1, static_cast<std::int32_t>(nx));
  put_i32(h, 2, static_cast<std::int32_t>(ny));
  put_i32(h, 3, static_cast<std::int32_t>(nz));
  put_i32(h, 4, 2);  // mode 2: float32
  put_i32(h, 8, static_cast<std::int32_t>(nx));   // MX
  put_i32(h, 9, static_cast<std::int32_t>(ny));   // MY
  put_i32(h, 10, static_cast<std::int32_t>(nz));  // MZ
  put_f32(h, 11, static_cast<float>(nx * pixel_size));
  put_f32(h, 12, static_cast<float>(ny * pixel_size));
  put_f32(h, 13, static_cast<float>(nz * pixel_size));
  put_f32(h, 14, 90.f);
  put_f32(h, 15, 90.f);
  put_f32(h, 16, 90.f);
  put_i32(h, 17, 1);  // MAPC
  put_i32(h, 18, 2);  // MAPR
  put_i32(h, 19, 3);  // MAPS
  put_f32(h, 20, dmin);
  put_f32(h, 21, dmax);
  put_f32(h, 22, static_cast<float>(dmean));
  put_i32(h, 23, as_volume ? 1 : 0);  // ISPG
  put_i32(h, 28, 20141);              // NVERSION
  std::memcpy(h.data() + 4 * 52, "MAP ", 4);  // word 53
  const unsigned char machst[4] = {0x44, 0x44, 0x00, 0x00};
  std::memcpy(h.data() + 4 * 53, machst, 4);  // word 54, little-endian
  put_f32(h, 55, static_cast<float>(rms));
  put_i32(h, 56, 1);  // NLABL
  const char label[] = "cryopose";
  std::memcpy(h.data() + 4 * 56, label, sizeof(label) - 1);

  std::string bytes(h.begin(), h.end());
  bytes.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(float));
  atomic_write_file(path, bytes);
}

MrcData read_mrc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  CP_CHECK(in.good(), DataError, "cannot open MRC file: " + path);
  std::vector<char> h(kHeaderBytes);
  in.read(h.data(), static_cast<std::streamsize>(kHeaderBytes));
  CP_CHECK(in.gcount() == static_cast<std::streamsize>(kHeaderBytes), DataError,
           "truncated MRC header: " + path);
  CP_CHECK(std::memcmp(h.data() + 4 * 52, "MAP ", 4) == 0, DataError,
           "missing MAP stamp (not an MRC2014 file): " + path);
  const auto* machst = reinterpret_cast<const unsigned char*>(h.data() + 4 * 53);
  CP_CHECK(machst[0] == 0x44, DataError, "big-endian MRC files are not supported: " + path);
  const std::int32_t mode = get_i32(h, 4);
  CP_CHECK(mode == 2, DataError,
           "unsupported MRC mode " + std::to_string(mode) + " (expected 2): " + path);

  const std::int64_t nx = get_i32(h, 1), ny = get_i32(h, 2), nz = get_i32(h, 3);
  CP_CHECK(nx > 0 && ny > 0 && nz > 0, DataError, "invalid MRC dimensions: " + path);
  const float cella_x = get_f32(h, 11);
  MrcData out;
  out.pixel_size = cella_x > 0.f ? static_cast<double>(cella_x) / static_cast<double>(nx) : 1.0;
  out.is_volume = get_i32(h, 23) != 0;

  const std::int64_t count = nx * ny * nz;
  std::vector<float> payload(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  CP_CHECK(in.gcount() == static_cast<std::streamsize>(payload.size() * sizeof(float)),
           DataError, "truncated MRC payload: " + path);

  std::vector<double> values(payload.begin(), payload.end());
  out.data = Tensor::from_real({nz, ny, nx}, std::move(values));
  return out;
}

}  // namespace cryopose
