#include "modalsav/audio.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "binary_io.hpp"

namespace modalsav {

namespace {

void write_tag(std::ostream& os, const char (&tag)[5]) { os.write(tag, 4); }

std::string info_comment(WavMode mode) {
  std::string s = "modalsav render mode=" + to_string(mode);
  s.push_back('\0');
  if (s.size() % 2 != 0) s.push_back('\0');
  return s;
}

}  // namespace

WavMode wav_mode_from_string(const std::string& s) {
  if (s == "float32") return WavMode::Float32;
  if (s == "pcm16") return WavMode::Pcm16;
  throw std::invalid_argument("unknown WAV mode '" + s + "' (expected float32 or pcm16)");
}

std::string to_string(WavMode mode) { return mode == WavMode::Float32 ? "float32" : "pcm16"; }

void write_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate,
               WavMode mode) {
  for (double v : samples) {
    if (!std::isfinite(v)) throw std::invalid_argument("write_wav: non-finite sample");
  }
  if (!(sample_rate > 0.0)) throw std::invalid_argument("write_wav: sample rate must be positive");
  const bool is_float = mode == WavMode::Float32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint16_t block_align = bits / 8;
  const auto rate = static_cast<std::uint32_t>(std::lround(sample_rate));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size()) * block_align;
  const std::uint32_t fmt_bytes = is_float ? 18 : 16;
  const std::string comment = info_comment(mode);
  const auto icmt_bytes = static_cast<std::uint32_t>(comment.size());
  const std::uint32_t list_bytes = 4 + 8 + icmt_bytes;  // "INFO" + ICMT chunk
  const std::uint32_t fact_total = is_float ? 12 : 0;
  const std::uint32_t riff_bytes = 4 + (8 + fmt_bytes) + fact_total + (8 + list_bytes) + (8 + data_bytes);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open WAV for writing: " + path.string());
  write_tag(os, "RIFF");
  detail::write_le<std::uint32_t>(os, riff_bytes);
  write_tag(os, "WAVE");

  write_tag(os, "fmt ");
  detail::write_le<std::uint32_t>(os, fmt_bytes);
  detail::write_le<std::uint16_t>(os, is_float ? 3 : 1);
  detail::write_le<std::uint16_t>(os, 1);  // mono
  detail::write_le<std::uint32_t>(os, rate);
  detail::write_le<std::uint32_t>(os, rate * block_align);
  detail::write_le<std::uint16_t>(os, block_align);
  detail::write_le<std::uint16_t>(os, bits);
  if (is_float) {
    detail::write_le<std::uint16_t>(os, 0);
    write_tag(os, "fact");
    detail::write_le<std::uint32_t>(os, 4);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(samples.size()));
  }

  write_tag(os, "LIST");
  detail::write_le<std::uint32_t>(os, list_bytes);
  write_tag(os, "INFO");
  write_tag(os, "ICMT");
  detail::write_le<std::uint32_t>(os, icmt_bytes);
  os.write(comment.data(), static_cast<std::streamsize>(comment.size()));

  write_tag(os, "data");
  detail::write_le<std::uint32_t>(os, data_bytes);
  if (is_float) {
    for (double v : samples) detail::write_le<float>(os, static_cast<float>(v));
  } else {
    double peak = 0.0;
    for (double v : samples) peak = std::max(peak, std::abs(v));
    const double gain = peak > 0.0 ? std::pow(10.0, -1.0 / 20.0) / peak : 0.0;
    for (double v : samples) {
      detail::write_le<std::int16_t>(os, static_cast<std::int16_t>(std::lround(v * gain * 32767.0)));
    }
  }
  if (!os) throw std::runtime_error("failed writing WAV: " + path.string());
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open WAV: " + path.string());
  detail::expect_magic(is, "RIFF");
  (void)detail::read_le<std::uint32_t>(is);
  detail::expect_magic(is, "WAVE");
  WavData out;
  bool have_fmt = false;
  while (true) {
    char tag[4];
    if (!is.read(tag, 4)) throw FormatError("WAV has no data chunk");
    const auto size = detail::read_le<std::uint32_t>(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      out.format = detail::read_le<std::uint16_t>(is);
      const auto channels = detail::read_le<std::uint16_t>(is);
      out.sample_rate = detail::read_le<std::uint32_t>(is);
      (void)detail::read_le<std::uint32_t>(is);
      (void)detail::read_le<std::uint16_t>(is);
      out.bits_per_sample = detail::read_le<std::uint16_t>(is);
      if (channels != 1) throw FormatError("only mono WAV files are supported");
      is.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("WAV data before fmt chunk");
      if (out.format == 3 && out.bits_per_sample == 32) {
        out.samples.resize(size / 4);
        for (double& v : out.samples) v = detail::read_le<float>(is);
      } else if (out.format == 1 && out.bits_per_sample == 16) {
        out.samples.resize(size / 2);
        for (double& v : out.samples) v = detail::read_le<std::int16_t>(is) / 32768.0;
      } else {
        throw FormatError("unsupported WAV sample format");
      }
      return out;
    } else {
      is.seekg(size + (size & 1u), std::ios::cur);
    }
  }
}

Spectrogram spectrogram(std::span<const double> series, double sample_rate, std::size_t window, std::size_t hop) {
  if (window < 2 || hop < 1) throw std::invalid_argument("spectrogram: degenerate window or hop");
  if (series.size() < window) throw std::invalid_argument("spectrogram: series shorter than one window");
  const std::size_t bins = window / 2 + 1;
  const std::size_t frames = (series.size() - window) / hop + 1;

  Vec hann(window);
  for (std::size_t n = 0; n < window; ++n) {
    hann[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(window));
  }

  Spectrogram s;
  s.frequencies.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) s.frequencies[b] = static_cast<double>(b) * sample_rate / window;
  s.times.resize(frames);
  s.magnitudes.resize(frames * bins);

  double* in = fftw_alloc_real(window);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(window), in, out, FFTW_ESTIMATE);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t n = 0; n < window; ++n) in[n] = hann[n] * series[start + n];
    fftw_execute(plan);
    s.times[f] = static_cast<double>(start) / sample_rate;
    for (std::size_t b = 0; b < bins; ++b) s.magnitudes[f * bins + b] = std::hypot(out[b][0], out[b][1]);
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
  fftw_free(in);
  return s;
}

void spectrogram_csv(std::span<const double> series, double sample_rate, std::size_t window, std::size_t hop,
                     const std::filesystem::path& path) {
  const Spectrogram s = spectrogram(series, sample_rate, window, hop);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write spectrogram CSV: " + path.string());
  char buf[40];
  os << "time";
  for (double f : s.frequencies) {
    std::snprintf(buf, sizeof buf, ",%.10g", f);
    os << buf;
  }
  os << '\n';
  const std::size_t bins = s.frequencies.size();
  for (std::size_t f = 0; f < s.times.size(); ++f) {
    std::snprintf(buf, sizeof buf, "%.10g", s.times[f]);
    os << buf;
    for (std::size_t b = 0; b < bins; ++b) {
      std::snprintf(buf, sizeof buf, ",%.10g", s.magnitudes[f * bins + b]);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace modalsav
