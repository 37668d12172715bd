#include "usfgan/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "usfgan/common.hpp"

namespace usfgan {

namespace {

struct RiffChunk {
  char id[4];
  uint32_t size;
};

uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }
uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
         (uint32_t(p[3]) << 24);
}

void wr_u16(std::ofstream& os, uint16_t v) {
  char b[2] = {char(v & 0xff), char(v >> 8)};
  os.write(b, 2);
}
void wr_u32(std::ofstream& os, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  os.write(b, 4);
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open WAV file: " + path);

  char riff[12];
  if (!is.read(riff, 12) || std::memcmp(riff, "RIFF", 4) != 0 ||
      std::memcmp(riff + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path);

  uint16_t format_tag = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  std::vector<uint8_t> data;
  bool have_fmt = false, have_data = false;

  while (is) {
    char hdr[8];
    if (!is.read(hdr, 8)) break;
    uint32_t size = rd_u32(reinterpret_cast<uint8_t*>(hdr + 4));
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      std::vector<uint8_t> fmt(size);
      if (!is.read(reinterpret_cast<char*>(fmt.data()), size))
        throw DataError("truncated fmt chunk: " + path);
      if (size < 16) throw DataError("malformed fmt chunk: " + path);
      format_tag = rd_u16(&fmt[0]);
      channels = rd_u16(&fmt[2]);
      sample_rate = rd_u32(&fmt[4]);
      bits = rd_u16(&fmt[14]);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data.resize(size);
      if (!is.read(reinterpret_cast<char*>(data.data()), size))
        throw DataError("truncated data chunk: " + path);
      have_data = true;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
      continue;
    }
    if (size & 1) is.seekg(1, std::ios::cur);
  }
  if (!have_fmt || !have_data)
    throw DataError("missing fmt/data chunk: " + path);
  if (channels != 1) throw DataError("mono required: " + path);

  AudioBuffer out;
  out.sample_rate = static_cast<int>(sample_rate);
  if (format_tag == 1 && bits == 16) {
    size_t n = data.size() / 2;
    out.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v = static_cast<int16_t>(rd_u16(&data[2 * i]));
      out.samples[i] = v / 32768.0;
    }
  } else if (format_tag == 3 && bits == 32) {
    size_t n = data.size() / 4;
    out.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t u = rd_u32(&data[4 * i]);
      float f;
      std::memcpy(&f, &u, 4);
      out.samples[i] = f;
    }
  } else {
    throw DataError("unsupported WAV encoding (want PCM16 or float32): " +
                    path);
  }
  check_finite(out, path);
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& audio,
               WavFormat format) {
  check_finite(audio, path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot create WAV file: " + path);

  const uint32_t n = static_cast<uint32_t>(audio.samples.size());
  const bool f32 = format == WavFormat::float32;
  const uint32_t bytes_per = f32 ? 4 : 2;
  const uint32_t data_size = n * bytes_per;

  os.write("RIFF", 4);
  wr_u32(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  wr_u32(os, 16);
  wr_u16(os, f32 ? 3 : 1);
  wr_u16(os, 1);
  wr_u32(os, static_cast<uint32_t>(audio.sample_rate));
  wr_u32(os, static_cast<uint32_t>(audio.sample_rate) * bytes_per);
  wr_u16(os, static_cast<uint16_t>(bytes_per));
  wr_u16(os, static_cast<uint16_t>(8 * bytes_per));
  os.write("data", 4);
  wr_u32(os, data_size);

  if (f32) {
    for (double s : audio.samples) {
      float f = static_cast<float>(s);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      wr_u32(os, u);
    }
  } else {
    for (double s : audio.samples) {
      double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
      long v = std::lrint(c * 32768.0);
      if (v > 32767) v = 32767;
      wr_u16(os, static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
  }
  if (!os) throw DataError("write failed: " + path);
}

void check_finite(const AudioBuffer& audio, const std::string& context) {
  for (double s : audio.samples)
    if (!std::isfinite(s))
      throw DataError("non-finite sample in audio: " + context);
}

}  // namespace usfgan
