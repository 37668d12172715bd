#ifndef USFGAN_AUDIO_HPP
#define USFGAN_AUDIO_HPP

#include <string>
#include <vector>

namespace usfgan {

// Mono waveform with its sample rate. Samples are dimensionless amplitudes,
// nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 24000;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class WavFormat { pcm16, float32 };

// RIFF/WAVE, mono only. Readable formats: PCM 16-bit and IEEE float 32-bit,
// little-endian. Multichannel input raises DataError("mono required").
AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& audio,
               WavFormat format = WavFormat::pcm16);

// Throws DataError when any sample is NaN/Inf.
void check_finite(const AudioBuffer& audio, const std::string& context);

}  // namespace usfgan

#endif  // USFGAN_AUDIO_HPP
