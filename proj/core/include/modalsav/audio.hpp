#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "modalsav/linalg.hpp"

namespace modalsav {

enum class WavMode { Float32, Pcm16 };

WavMode wav_mode_from_string(const std::string& s);
std::string to_string(WavMode mode);

/// Mono RIFF/WAVE writer. Float32 writes the samples unchanged (as float);
/// Pcm16 peak-normalises to -1 dBFS and rounds to 16-bit integers. A LIST/INFO
/// comment records the render mode. Throws std::invalid_argument on
/// non-finite samples and std::runtime_error on I/O failure.
void write_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate,
               WavMode mode);

struct WavData {
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  std::uint16_t format = 0;  // 1 = PCM, 3 = IEEE float
  Vec samples;               // PCM scaled to [-1, 1)
};

WavData read_wav(const std::filesystem::path& path);

struct Spectrogram {
  Vec frequencies;  // bin centres (Hz), window/2 + 1 of them
  Vec times;        // frame start times (s)
  Vec magnitudes;   // frames x bins
};

/// Magnitude STFT with a periodic Hann window. Throws std::invalid_argument if
/// window < 2, hop < 1 or the series is shorter than one window.
Spectrogram spectrogram(std::span<const double> series, double sample_rate, std::size_t window, std::size_t hop);

/// CSV: header "time,<f0>,<f1>,...", then one row per frame.
void spectrogram_csv(std::span<const double> series, double sample_rate, std::size_t window, std::size_t hop,
                     const std::filesystem::path& path);

}  // namespace modalsav
